#ifndef P2P_SCENARIO_HPP
#define P2P_SCENARIO_HPP

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace p2p {

enum class OverlayKind { Dum, Dsm, Hm, Lm };
enum class TopoKind { Er, Ws, Ba, Ring };
enum class HmMode { Tracker, Index };
enum class BootstrapMode { PeerCache, Mediator };
enum class GroupPolicyKind { Open, Monarchy, Voting };
enum class ConsistencyKind { None, HmNotify, DumCacheExpiry, DsmRepublish };
enum class PiecePickKind { RarestFirst, Random };

// Flat INI scenario: one section per module, every key validated, unknown
// keys rejected. Field defaults are the documented module defaults.
struct Scenario {
    // [sim]
    std::uint64_t seed = 1;
    double duration_s = 300;
    OverlayKind overlay = OverlayKind::Dsm;
    std::size_t nodes = 64;
    double snapshot_period_s = 60;
    // [link]
    double latency_s = 0.05;
    double latency_max_s = 0; // 0 keeps latency constant
    double loss_rate = 0;
    // [churn]
    bool churn_enabled = false;
    double churn_mean_session_s = std::numeric_limits<double>::infinity();
    double churn_mean_offline_s = 30;
    // [topo]
    TopoKind topo = TopoKind::Er;
    double topo_alpha = 6;
    std::size_t topo_k_ring = 4;
    double topo_p_rewire = 0.1;
    std::size_t topo_m_attach = 2;
    std::size_t topo_n0 = 3;
    // [bootstrap]
    BootstrapMode bootstrap_mode = BootstrapMode::Mediator;
    std::size_t bootstrap_cache_capacity = 16;
    // [group]
    GroupPolicyKind group_policy = GroupPolicyKind::Open;
    double group_quorum = 0.5;
    bool group_scoped = false;
    // [consistency]
    ConsistencyKind consistency_mode = ConsistencyKind::None;
    double consistency_lifetime_s = 60;
    double consistency_republish_s = 30;
    // [dum]
    std::size_t dum_peerview_max = 16;
    int dum_ttl = 7;
    double dum_forward_prob = 1.0;
    double dum_ping_period_s = 0;
    // [dsm]
    int dsm_m_bits = 16;
    double dsm_stabilize_period_s = 5;
    std::size_t dsm_succ_list_len = 4;
    double dsm_audit_period_s = 0;
    // [hm]
    std::size_t hm_offer_limit = 200;
    std::size_t hm_tracker_handout = 20;
    double hm_reannounce_s = 60;
    HmMode hm_mode = HmMode::Tracker;
    // [lm]
    std::size_t lm_supernodes = 8;
    // [swarm]
    std::uint64_t swarm_piece_size = 262144;
    std::uint64_t swarm_block_size = 16384;
    std::size_t swarm_m = 5;
    std::size_t swarm_k = 1;
    double swarm_t1_s = 10;
    double swarm_t2_s = 30;
    double swarm_rate_window_s = 20;
    std::size_t swarm_seed_count = 1;
    std::size_t swarm_leecher_count = 19;
    std::size_t swarm_freerider_count = 1;
    std::uint64_t swarm_total_size = 8388608; // 8 MiB
    double swarm_seed_up_bps = 65536;
    double swarm_seed_down_bps = 0; // 0 = unlimited
    double swarm_leech_up_bps = 65536;
    double swarm_leech_down_bps = 0;
    double swarm_fr_up_bps = 0;
    double swarm_fr_down_bps = 0;
    std::size_t swarm_pipeline = 5;
    double swarm_request_timeout_s = 30;
    double swarm_seed_linger_s = -1; // negative: completed leechers stay
    bool swarm_seed_exit_on_coverage = true;
    PiecePickKind swarm_piece_pick = PiecePickKind::RarestFirst;
    // [reputation]
    bool reputation_enabled = false;
    // [workload]
    bool workload_topology_only = false;
    std::size_t workload_queries = 20;
    double workload_query_start_s = 30;
    double workload_query_period_s = 2;
    std::size_t workload_lookups = 1000;
    std::size_t workload_publishes_per_node = 1;
    double workload_join_window_s = 100;

    bool operator==(const Scenario&) const = default;
};

// Parse / serialize are exact inverses on canonical form.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
std::string serialize_scenario(const Scenario& s);
void validate_scenario(const Scenario& s);

// Defaults in canonical INI form (what `print-defaults` emits).
std::string scenario_defaults_text();

std::vector<std::string> preset_names();
bool is_preset(const std::string& name);
Scenario preset(const std::string& name);

} // namespace p2p

#endif
