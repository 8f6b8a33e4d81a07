#ifndef P2P_SHA1_HPP
#define P2P_SHA1_HPP

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace p2p {

using Digest = std::array<std::uint8_t, 20>;

// Streaming SHA-1 (FIPS 180-1). Used for content digests and key derivation;
// outputs must match the standard test vectors exactly.
class Sha1 {
public:
    Sha1() { reset(); }

    void reset();
    void update(std::span<const std::uint8_t> data);
    Digest finish();

    static Digest of(std::span<const std::uint8_t> data) {
        Sha1 h;
        h.update(data);
        return h.finish();
    }
    static Digest of(std::string_view text) {
        return of(std::span<const std::uint8_t>(
            reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }

private:
    void process_block(const std::uint8_t* block);

    std::uint32_t h_[5];
    std::uint64_t total_bytes_;
    std::uint8_t buffer_[64];
    std::size_t buffered_;
};

std::string to_hex(const Digest& d);
Digest digest_from_hex(std::string_view hex);

// Big-endian value of the digest's low 8 bytes; basis for key derivation.
std::uint64_t digest_tail_u64(const Digest& d);

} // namespace p2p

#endif
