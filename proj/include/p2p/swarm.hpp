#ifndef P2P_SWARM_HPP
#define P2P_SWARM_HPP

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "p2p/engine.hpp"
#include "p2p/hybrid.hpp"
#include "p2p/reputation.hpp"
#include "p2p/topology.hpp"

namespace p2p {

// Content layout: fixed-size pieces split into blocks, one digest per piece.
struct ContentSpec {
    std::uint64_t total_size = 0;
    std::uint32_t piece_size = 262144;
    std::uint32_t block_size = 16384;
    std::vector<Digest> piece_digests;

    bool valid() const {
        return total_size > 0 && piece_size > 0 && block_size > 0 &&
               piece_size % block_size == 0 &&
               (piece_digests.empty() || piece_digests.size() == piece_count());
    }
    std::size_t piece_count() const {
        return std::size_t((total_size + piece_size - 1) / piece_size);
    }
    std::uint32_t piece_bytes(std::size_t idx) const {
        const std::uint64_t start = std::uint64_t(idx) * piece_size;
        return std::uint32_t(std::min<std::uint64_t>(piece_size, total_size - start));
    }
    std::uint32_t blocks_in_piece(std::size_t idx) const {
        return (piece_bytes(idx) + block_size - 1) / block_size;
    }
    std::uint32_t block_bytes(std::size_t idx, std::uint32_t block) const {
        const std::uint32_t pb = piece_bytes(idx);
        const std::uint64_t start = std::uint64_t(block) * block_size;
        return std::uint32_t(std::min<std::uint64_t>(block_size, pb - start));
    }

    // Digest of the concatenated piece digests; identifies the content.
    Digest info_digest() const;

    // Deterministic pseudo-content for tests and end-to-end verification.
    static std::vector<std::uint8_t> synthetic_piece_bytes(std::uint64_t content_seed,
                                                           std::size_t idx,
                                                           std::uint32_t piece_bytes);
    static ContentSpec synthetic(std::uint64_t total_size, std::uint32_t piece_size,
                                 std::uint32_t block_size, std::uint64_t content_seed);
};

enum class PieceCheck { Verified, Corrupt };

PieceCheck verify_piece(std::span<const std::uint8_t> data, const ContentSpec& spec,
                        std::size_t idx);

// Piece availability over the peer group: per-peer bitfields plus the
// derived replica count per piece.
class PieceMap {
public:
    explicit PieceMap(std::size_t piece_count = 0) : counts_(piece_count, 0) {}

    void add_peer(NodeId peer);
    void set_bitfield(NodeId peer, const std::vector<bool>& have);
    void set_have(NodeId peer, std::size_t piece);
    void remove_peer(NodeId peer);

    bool tracks(NodeId peer) const { return bitfields_.count(peer) != 0; }
    bool has(NodeId peer, std::size_t piece) const;
    std::uint32_t availability(std::size_t piece) const { return counts_.at(piece); }
    const std::vector<std::uint32_t>& replica_counts() const { return counts_; }
    std::size_t piece_count() const { return counts_.size(); }
    double replica_variance() const;

private:
    std::vector<std::uint32_t> counts_;
    std::map<NodeId, std::vector<bool>> bitfields_;
};

// Uniform choice among the wanted pieces with the minimal positive replica
// count. Throws NothingWanted when no wanted piece is available.
std::uint32_t rarest_first_pick(const PieceMap& availability, const std::set<std::uint32_t>& wanted,
                                Rng& rng);

// Uniform choice among wanted available pieces; baseline policy.
std::uint32_t uniform_pick(const PieceMap& availability, const std::set<std::uint32_t>& wanted,
                           Rng& rng);

// Digest with the maximum replica count; a tie is an error.
Digest majority_version(const std::vector<std::pair<Digest, std::size_t>>& observed);

// k_target new holders drawn uniformly among live non-holders.
std::vector<NodeId> replicate_active(const std::set<NodeId>& holders, const std::set<NodeId>& live,
                                     std::size_t k_target, Rng& rng);

struct ChokeParams {
    std::size_t m_slots = 5;      // M: unchoked at most
    std::size_t k_optimistic = 1; // K: random slots
    double t1_s = 10;             // regular round period
    double t2_s = 30;             // optimistic round period
    double rate_window_s = 20;    // sliding mean for measured rates
};

struct RatedPeer {
    NodeId id;
    double rate = 0;
};

// Top M-K interested peers by measured download rate. Equal rates tie-break
// by ascending id, or by a seeded shuffle when an RNG is supplied; the
// deterministic id order synchronizes every peer's spare slots onto the same
// lowest-id targets and starves the rest, so the simulation uses the
// seeded form.
std::vector<NodeId> choke_round_regular(std::vector<RatedPeer> interested, std::size_t m_slots,
                                        std::size_t k_optimistic, Rng* tie_rng = nullptr);

// K uniform picks among interested peers outside the regular set.
std::vector<NodeId> choke_round_optimistic(const std::set<NodeId>& interested,
                                           const std::vector<NodeId>& regular, std::size_t k,
                                           Rng& rng);

// Bytes-over-sliding-window rate estimate.
class RateWindow {
public:
    explicit RateWindow(double window_s = 20) : window_(window_s) {}
    void add(double now, double bytes);
    double rate(double now) const; // bytes per second
private:
    double window_;
    mutable std::deque<std::pair<double, double>> samples_;
};

// Drives periodic choke rounds against an injected rate source; used both
// by unit traces and to document the exact round cadence.
class ChokeScheduler {
public:
    struct Round {
        double at = 0;
        bool optimistic = false;
        std::vector<NodeId> set;
    };

    ChokeScheduler(SimEngine& engine, ChokeParams params,
                   std::function<std::vector<RatedPeer>()> interested_source);
    void start();
    const std::vector<Round>& history() const { return history_; }
    const std::vector<NodeId>& regular_set() const { return regular_; }
    const std::vector<NodeId>& optimistic_set() const { return optimistic_; }

private:
    void regular_round();
    void optimistic_round();

    SimEngine& engine_;
    ChokeParams params_;
    std::function<std::vector<RatedPeer>()> source_;
    std::vector<NodeId> regular_;
    std::vector<NodeId> optimistic_;
    std::vector<Round> history_;
};

enum class PeerClass { Seed, Leecher, FreeRider };

struct SwarmPeerSpec {
    NodeId id;
    PeerClass cls = PeerClass::Leecher;
    double up_bps = 65536;                    // upload capacity, bytes/s
    double down_bps = 0;                      // 0 = unlimited
    bool poisoner = false;                    // sends corrupt blocks
};

struct SwarmParams {
    ChokeParams choke;
    std::size_t pipeline = 5;
    double request_timeout_s = 60;
    double seed_linger_s = -1; // completed leechers stay; >= 0 departs after that long
    bool rarest_first = true;
    bool reputation_enabled = false;
    double reannounce_s = 60;
    double half_mark = 0.5;
    // hit-and-run seeding: initial seeds depart once every piece has been
    // served at least once, leaving replication to the leechers
    bool seed_exit_on_coverage = false;
};

// Multisource piece transfer over the tracker's peer group: rarest-first
// selection, tit-for-tat choke scheduling, fluid-flow block transfers with
// upload capacity split equally across a sender's active transfers.
class SwarmSim {
public:
    SwarmSim(SimEngine& engine, Tracker& tracker, ContentSpec content, SwarmParams params,
             std::vector<SwarmPeerSpec> peers);

    void start();

    const std::map<NodeId, double>& completion_times() const { return completion_times_; }
    std::optional<double> variance_at_half() const { return variance_at_half_; }
    const PieceMap& piece_map() const { return piece_map_; }
    const CreditLedger& ledger(NodeId peer) const { return peers_.at(peer).ledger; }
    bool complete(NodeId peer) const { return peers_.at(peer).complete(); }
    bool all_leechers_complete() const;

    std::uint64_t corrupt_pieces() const { return corrupt_pieces_; }
    std::uint64_t request_timeouts() const { return request_timeouts_; }
    std::uint64_t pipeline_violations() const { return pipeline_violations_; }
    std::uint64_t unchoke_cap_violations() const { return unchoke_cap_violations_; }

    // One `credit,<observer>:<subject>,<value>` record per ledger entry.
    void emit_credit_metrics();

    // Raw received-byte totals per (receiver, sender) pair, in MB.
    void emit_transfer_totals();

    // Current connection graph over live, non-departed swarm members.
    TopologySnapshot snapshot() const;

    // TODO: remove after tuning — per-peer slot composition probe.
    struct SlotReport {
        std::size_t interested = 0;
        std::size_t positive_rate = 0;
        bool fr_regular = false;
        bool fr_optimistic = false;
        std::size_t my_benefactors = 0;
    };
    std::map<NodeId, SlotReport> debug_slots(NodeId fr) const;
    std::vector<std::string> debug_idle_slots() const;
    std::size_t seed_coverage() const { return served_by_seed_.size(); }
    bool seeds_exited() const { return seeds_exited_; }

private:
    struct Neighbor {
        bool interested_in_us = false;
        bool we_interested = false;
        bool we_choke_them = true;
        bool they_choke_us = true;
        double snubbed_until = 0; // request timed out; skip them for a while
        std::vector<bool> bitfield;
        RateWindow download_rate;
    };

    struct Request {
        std::uint32_t piece = 0;
        std::uint32_t block = 0;
        std::uint64_t assign_id = 0;
    };

    struct Peer {
        SwarmPeerSpec spec;
        bool departed = false;
        std::vector<bool> have;
        std::size_t have_count = 0;
        std::map<std::uint32_t, std::vector<bool>> partial; // piece -> blocks held
        std::map<std::uint32_t, std::set<NodeId>> block_sources; // piece -> contributors
        std::map<std::uint32_t, bool> partial_corrupt;
        std::map<std::uint32_t, std::set<NodeId>> bad_sources; // failed verification
        std::set<NodeId> neighbors;
        std::map<NodeId, Neighbor> nstate;
        std::vector<NodeId> regular_unchoked;
        std::vector<NodeId> optimistic_unchoked;
        std::map<NodeId, std::vector<Request>> outstanding; // our requests per sender
        std::set<std::pair<std::uint32_t, std::uint32_t>> assigned;
        std::map<NodeId, std::deque<std::pair<std::uint32_t, std::uint32_t>>> upload_queue;
        CreditLedger ledger;

        bool complete() const { return have_count == have.size(); }
    };

    struct Transfer {
        std::uint64_t id = 0;
        NodeId sender;
        NodeId receiver;
        std::uint32_t piece = 0;
        std::uint32_t block = 0;
        double remaining = 0;
        double rate = 0;
        double last_update = 0;
        std::uint64_t version = 0;
    };

    void on_message(NodeId to, const Message& msg);
    void on_leave(NodeId gone);
    void connect(NodeId a, NodeId b);
    void announce(NodeId peer);
    void send_bitfield(NodeId from, NodeId to);
    void update_interest(NodeId me, NodeId them);
    void run_choke_rounds(bool regular, bool optimistic);
    void apply_unchoke_sets(NodeId me, std::vector<NodeId> regular, std::vector<NodeId> optimistic);
    void fill_pipeline(NodeId me, NodeId them);
    void refill_toward_unchokers(NodeId me, NodeId except);
    std::optional<std::pair<std::uint32_t, std::uint32_t>> pick_block(Peer& me, NodeId them);
    void handle_request(NodeId me, NodeId from, std::uint32_t piece, std::uint32_t block);
    void handle_cancel(NodeId me, NodeId from, std::uint32_t piece, std::uint32_t block);
    void start_next_upload(NodeId sender, NodeId receiver);
    void recompute_sender(NodeId sender);
    void schedule_completion(Transfer& t);
    void complete_transfer(std::uint64_t id);
    void abort_transfer(std::uint64_t id);
    void on_block_received(NodeId me, NodeId from, std::uint32_t piece, std::uint32_t block,
                           std::uint32_t bytes, bool corrupt);
    void on_piece_verified(NodeId me, std::uint32_t piece);
    void finish_peer(NodeId me);
    void check_half_mark();
    void request_timeout(NodeId me, NodeId them, std::uint64_t assign_id);

    bool is_initial_seed(NodeId n) const;
    Peer& peer(NodeId n) { return peers_.at(n); }

    SimEngine& engine_;
    Tracker& tracker_;
    ContentSpec content_;
    SwarmParams params_;
    Digest torrent_;
    std::map<NodeId, Peer> peers_;
    std::set<NodeId> initial_seeds_;
    PieceMap piece_map_;

    std::map<std::uint64_t, Transfer> transfers_;
    std::map<NodeId, std::set<std::uint64_t>> sender_active_;
    std::map<std::pair<NodeId, NodeId>, std::uint64_t> conn_active_;
    std::uint64_t transfer_counter_ = 0;
    std::uint64_t assign_counter_ = 0;

    std::map<std::uint32_t, std::set<std::uint32_t>> seed_served_blocks_;
    std::set<std::uint32_t> served_by_seed_;
    bool seeds_exited_ = false;

    std::map<NodeId, double> completion_times_;
    std::optional<double> variance_at_half_;
    std::uint64_t corrupt_pieces_ = 0;
    std::uint64_t request_timeouts_ = 0;
    std::uint64_t pipeline_violations_ = 0;
    std::uint64_t unchoke_cap_violations_ = 0;
    bool started_ = false;
};

} // namespace p2p

#endif
