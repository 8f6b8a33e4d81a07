#ifndef P2P_FLOODING_HPP
#define P2P_FLOODING_HPP

#include <map>
#include <optional>
#include <set>

#include "p2p/engine.hpp"
#include "p2p/membership.hpp"
#include "p2p/topology.hpp"

namespace p2p {

// A peer's bounded set of neighbor references.
struct PeerView {
    std::set<NodeId> neighbors;
    std::size_t max_size = 16;

    bool add(NodeId self, NodeId other) {
        if (other == self || neighbors.size() >= max_size)
            return false;
        return neighbors.insert(other).second;
    }
    void remove(NodeId other) { neighbors.erase(other); }
    bool full() const { return neighbors.size() >= max_size; }
};

// Duplicate suppression: msg_id -> first hop it arrived from.
class SeenTable {
public:
    explicit SeenTable(double retention_s = 600) : retention_(retention_s) {}

    bool seen(std::uint64_t msg_id) const { return entries_.count(msg_id) != 0; }
    void record(std::uint64_t msg_id, NodeId first_from, double now) {
        entries_.emplace(msg_id, Entry{first_from, now});
    }
    std::optional<NodeId> first_from(std::uint64_t msg_id) const {
        const auto it = entries_.find(msg_id);
        if (it == entries_.end())
            return std::nullopt;
        return it->second.first_from;
    }
    void evict(double now) {
        for (auto it = entries_.begin(); it != entries_.end();) {
            it = (now - it->second.seen_at > retention_) ? entries_.erase(it) : std::next(it);
        }
    }
    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        NodeId first_from;
        double seen_at;
    };
    double retention_;
    std::map<std::uint64_t, Entry> entries_;
};

struct FloodingConfig {
    std::size_t peerview_max = 16;
    int ttl = 7;
    double forward_prob = 1.0;
    double seen_retention_s = 600;
    double ping_period_s = 0; // 0 disables peer discovery pings
    int ping_ttl = 2;
    bool response_cache = false; // DumCacheExpiry consistency variation
    double cache_lifetime_s = 60;
};

struct LookupHit {
    Descriptor descriptor;
    bool stale = false; // served from the response cache
};

struct FloodingNode {
    PeerView view;
    SeenTable seen;
    DescriptorStore store;
    DescriptorStore response_cache;

    std::vector<LookupHit> local_lookup(ResourceKey key, double now, bool use_cache) const;
};

struct QueryHitRecord {
    NodeId provider;
    int hops = 0;
    bool stale = false;
};

// Everything observable about one flooded query.
struct QueryTrace {
    NodeId origin;
    std::set<NodeId> processed;      // nodes that handled the query (origin excluded)
    std::uint64_t query_copies = 0;  // transmissions of the query message
    std::uint64_t duplicate_drops = 0;
    std::vector<QueryHitRecord> hits; // replies that made it back to the origin
    std::set<NodeId> hit_relays;      // nodes that forwarded a reply
};

// Decentralized unstructured overlay: random peerviews, TTL-limited flooding
// with duplicate suppression, reverse-path replies.
class FloodingNetwork {
public:
    FloodingNetwork(SimEngine& engine, FloodingConfig cfg);

    void add_node(NodeId n);
    void add_link(NodeId a, NodeId b);
    void build_from_snapshot(const TopologySnapshot& t);

    void publish_local(NodeId owner, const Descriptor& d);

    // Returns the query's msg_id; results accumulate in trace(msg_id) as the
    // engine runs. Relay probability < 1 turns this into probabilistic
    // flooding; the origin's own sends are unconditional.
    std::uint64_t flood_query(NodeId origin, ResourceKey key,
                              std::optional<int> ttl_override = std::nullopt,
                              std::optional<double> forward_prob_override = std::nullopt,
                              std::optional<std::uint64_t> group_tag = std::nullopt);

    const QueryTrace& trace(std::uint64_t msg_id) const;
    FloodingNode& node(NodeId n);
    const FloodingNode& node(NodeId n) const;
    bool has_node(NodeId n) const { return nodes_.count(n) != 0; }

    void set_group(const Group& g) { group_ = g; }

    std::uint64_t path_lost() const { return path_lost_; }
    std::uint64_t scope_drops() const { return scope_drops_; }

    // Current peerview graph (undirected union of views over live nodes).
    TopologySnapshot snapshot() const;

    static constexpr int kPingTimer = 1;

private:
    void on_message(NodeId to, const Message& msg);
    void on_timer(NodeId owner, int kind);
    void on_leave(NodeId n);
    void handle_query(NodeId at, const Message& msg);
    void handle_query_hit(NodeId at, const Message& msg);
    void relay(NodeId from, const Message& msg, double forward_prob);
    void send_ping(NodeId origin);

    SimEngine& engine_;
    FloodingConfig cfg_;
    std::map<NodeId, FloodingNode> nodes_;
    std::map<std::uint64_t, QueryTrace> traces_;
    std::map<std::uint64_t, double> query_forward_prob_;
    std::optional<Group> group_;
    std::uint64_t path_lost_ = 0;
    std::uint64_t scope_drops_ = 0;
};

} // namespace p2p

#endif
