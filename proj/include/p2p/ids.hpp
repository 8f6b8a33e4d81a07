#ifndef P2P_IDS_HPP
#define P2P_IDS_HPP

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "p2p/errors.hpp"
#include "p2p/rng.hpp"
#include "p2p/sha1.hpp"

namespace p2p {

// Circular m-bit identifier space shared by nodes and resource keys.
// Capped at 64 bits so identifiers fit a machine word.
struct KeySpace {
    int m_bits = 64;

    bool valid() const { return m_bits >= 1 && m_bits <= 64; }

    std::uint64_t mask() const {
        return m_bits >= 64 ? ~std::uint64_t(0) : ((std::uint64_t(1) << m_bits) - 1);
    }
    std::uint64_t size_is_pow2_half() const { return std::uint64_t(1) << (m_bits - 1); }
    std::uint64_t reduce(std::uint64_t v) const { return v & mask(); }
    std::uint64_t add(std::uint64_t a, std::uint64_t b) const { return (a + b) & mask(); }

    // Clockwise distance from a to b on the ring.
    std::uint64_t distance(std::uint64_t a, std::uint64_t b) const { return (b - a) & mask(); }

    // x in (a, b] walking clockwise; the whole ring when a == b.
    bool in_half_open(std::uint64_t a, std::uint64_t b, std::uint64_t x) const {
        if (a == b)
            return true;
        return distance(a, x) != 0 && distance(a, x) <= distance(a, b);
    }
    // x in (a, b) walking clockwise; empty when a == b.
    bool in_open(std::uint64_t a, std::uint64_t b, std::uint64_t x) const {
        if (a == b)
            return false;
        return distance(a, x) != 0 && distance(a, x) < distance(a, b);
    }
};

struct NodeId {
    std::uint64_t value = 0;
    auto operator<=>(const NodeId&) const = default;
};

struct ResourceKey {
    std::uint64_t value = 0;
    auto operator<=>(const ResourceKey&) const = default;
};

// Advertisement of a resource: what gets published, cached and looked up.
struct Descriptor {
    ResourceKey key;
    NodeId owner;
    Digest content_digest{};
    double published_at = 0.0;
    std::optional<double> lifetime; // seconds; nullopt = never expires

    bool expired(double now) const {
        return lifetime.has_value() && now >= published_at + *lifetime;
    }
    bool operator==(const Descriptor&) const = default;
};

inline Digest content_digest(std::span<const std::uint8_t> data) { return Sha1::of(data); }

// digest(body) mod 2^m_bits; pure and deterministic.
inline ResourceKey derive_key(std::span<const std::uint8_t> body, const KeySpace& ks) {
    if (!ks.valid())
        throw InvalidParams("derive_key: key space m_bits must be in [1,64]");
    return ResourceKey{ks.reduce(digest_tail_u64(Sha1::of(body)))};
}
inline ResourceKey derive_key(std::string_view body, const KeySpace& ks) {
    return derive_key(std::span<const std::uint8_t>(
                          reinterpret_cast<const std::uint8_t*>(body.data()), body.size()),
                      ks);
}

// Random ids, rejection-sampling collisions. Throws if the space is too small.
std::vector<NodeId> assign_node_ids(std::size_t count, const KeySpace& ks, Rng& rng);

} // namespace p2p

#endif
