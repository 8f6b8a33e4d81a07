#ifndef P2P_MEMBERSHIP_HPP
#define P2P_MEMBERSHIP_HPP

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "p2p/ids.hpp"
#include "p2p/message.hpp"
#include "p2p/rng.hpp"

namespace p2p {

// List of previously known peers, most recently seen first.
class PeerCache {
public:
    struct Entry {
        NodeId id;
        double last_seen = 0;
    };

    explicit PeerCache(std::size_t capacity) : capacity_(capacity) {}

    void touch(NodeId id, double now);
    void remove(NodeId id);
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::size_t capacity_;
    std::vector<Entry> entries_;
};

// Probes cached peers in recency order; dead entries are pruned. Returns the
// first live entry, or nullopt when nobody collaborates.
std::optional<NodeId> bootstrap_peer_based(PeerCache& cache,
                                           const std::function<bool(NodeId)>& probe,
                                           std::size_t* probes_out = nullptr);

// Well-known entry point holding the (idealized, always current) online list.
class Mediator {
public:
    explicit Mediator(std::size_t handout_size) : handout_size_(handout_size) {}

    // Samples up to handout_size online peers without replacement, then
    // admits the joiner. An empty list means the joiner founds the overlay.
    std::vector<NodeId> bootstrap(NodeId joiner, Rng& rng);

    void on_join(NodeId n) { online_.insert(n); }
    void on_leave(NodeId n) { online_.erase(n); }
    const std::set<NodeId>& online() const { return online_; }
    std::size_t handout_size() const { return handout_size_; }

private:
    std::size_t handout_size_;
    std::set<NodeId> online_;
};

enum class GroupPolicy { Open, Monarchy, Voting };

struct Ballot {
    NodeId voter;
    bool yes = false;
};

struct Group {
    std::uint64_t group_id = 0;
    std::set<NodeId> members;
    GroupPolicy policy = GroupPolicy::Open;
    std::set<NodeId> owners; // Monarchy
    double quorum = 0.5;     // Voting, fraction in (0,1]
};

// Applies the group's admission policy; on accept the candidate is added.
// Throws AlreadyMember.
bool join_group(Group& g, NodeId candidate, const std::vector<Ballot>& votes);

// Deliver iff the message is untagged, or tagged with this group and the
// receiver is a member.
bool scope_deliver(const Message& msg, const Group& g, NodeId receiver);

enum class ConsistencyMode { None, HmNotify, DumCacheExpiry, DsmRepublish };

struct ConsistencyPolicy {
    ConsistencyMode mode = ConsistencyMode::None;
    double descriptor_lifetime_s = 60;
    double republish_period_s = 30;

    bool valid() const {
        if (mode == ConsistencyMode::DsmRepublish)
            return republish_period_s > 0 && republish_period_s < descriptor_lifetime_s;
        return descriptor_lifetime_s > 0;
    }
};

// Key -> descriptors, one slot per (key, owner); a republish replaces the
// entry and restarts its lifetime. Expired entries are dropped on access.
class DescriptorStore {
public:
    void put(const Descriptor& d);
    std::vector<Descriptor> get(ResourceKey key, double now) const;
    std::vector<Descriptor> all(double now) const;
    void erase_owner(NodeId owner);
    void evict_expired(double now);
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

private:
    std::map<ResourceKey, std::map<NodeId, Descriptor>> entries_;
};

} // namespace p2p

#endif
