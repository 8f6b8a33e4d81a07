#ifndef P2P_CHORD_HPP
#define P2P_CHORD_HPP

#include <map>
#include <optional>
#include <vector>

#include "p2p/engine.hpp"
#include "p2p/membership.hpp"

namespace p2p {

struct ChordConfig {
    KeySpace ks{16};
    double stabilize_period_s = 5;
    std::size_t succ_list_len = 4;
    double audit_period_s = 0;     // 0 disables the consistency self-check
    double republish_period_s = 0; // 0 disables republish
    std::optional<double> descriptor_lifetime_s;
};

struct ChordNode {
    NodeId id;
    NodeId successor;
    std::optional<NodeId> predecessor;
    std::vector<NodeId> finger;         // finger[i-1] = successor(id + 2^(i-1))
    std::vector<NodeId> successor_list; // failover chain, successor first
    DescriptorStore store;              // descriptors stored here as key owner
    std::map<ResourceKey, Descriptor> published; // what this node republishes
};

struct LookupResult {
    NodeId owner;
    int hops = 0;
    std::vector<NodeId> path; // nodes the query visited, origin first
};

// Ground truth: smallest live id >= k in modular order, wrapping to the
// minimum when k exceeds all ids. Throws EmptyRing.
NodeId successor_oracle(const std::vector<std::uint64_t>& sorted_ids, std::uint64_t key);

// Chord ring on the shared key space: consistent key placement on
// successors, join/stabilize/notify maintenance, basic (linear) and
// scalable (finger table) lookup.
class ChordRing {
public:
    static constexpr int kMaintenanceTimer = 10;
    static constexpr int kAuditTimer = 11;
    static constexpr int kRepublishTimer = 12;

    ChordRing(SimEngine& engine, ChordConfig cfg);

    // First node: a ring of one pointing at itself.
    void create(NodeId first);

    // Joins through a live member; successor found by lookup, predecessor
    // stays unset until the ring notifies it. Throws JoinFailed.
    void join(NodeId n, NodeId via);

    void stabilize(NodeId n);
    void notify(NodeId target, NodeId candidate);
    void fix_finger(NodeId n, int i); // i in [1, m_bits]

    LookupResult lookup_basic(NodeId from, std::uint64_t key) const;
    LookupResult lookup_scalable(NodeId from, std::uint64_t key) const;

    // PUT routes to successor(key) and stores there; GET reads from it.
    int put(NodeId via, Descriptor d);
    std::vector<Descriptor> get(NodeId via, ResourceKey key) const;

    ChordNode& node(NodeId n) { return nodes_.at(n); }
    const ChordNode& node(NodeId n) const { return nodes_.at(n); }
    bool has_node(NodeId n) const { return nodes_.count(n) != 0; }

    std::vector<std::uint64_t> live_ids_sorted() const;
    bool successors_match_oracle() const;
    bool fingers_match_oracle() const;
    const ChordConfig& config() const { return cfg_; }

    std::uint64_t audits_run() const { return audits_run_; }

private:
    bool live(NodeId n) const;
    NodeId first_live_successor(const ChordNode& n) const;
    bool owns(NodeId n, std::uint64_t key) const;
    NodeId closest_preceding(NodeId n, std::uint64_t key) const;
    void refresh_successor_list(ChordNode& n);
    void on_timer(NodeId owner, int kind);
    void arm_timers(NodeId n);

    SimEngine& engine_;
    ChordConfig cfg_;
    std::map<NodeId, ChordNode> nodes_;
    std::uint64_t audits_run_ = 0;
};

} // namespace p2p

#endif
