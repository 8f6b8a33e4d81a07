#include "p2p/scenario.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "p2p/errors.hpp"
#include "p2p/metrics.hpp"

namespace p2p {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    if (v == "inf" || v == "+inf")
        return std::numeric_limits<double>::infinity();
    double out;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw InvalidValue(key + ": not a number: " + v);
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
        throw InvalidValue(key + ": not a non-negative integer: " + v);
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1")
        return true;
    if (v == "false" || v == "0")
        return false;
    throw InvalidValue(key + ": not a boolean: " + v);
}

std::string format_value_double(double v) {
    if (std::isinf(v))
        return "inf";
    return format_double(v);
}

struct KeySpec {
    std::string name; // "section.key"
    std::function<std::string(const Scenario&)> get;
    std::function<void(Scenario&, const std::string&)> set;
};

template <typename T, typename Parse, typename Format>
KeySpec make_key(std::string name, T Scenario::*field, Parse parse, Format format) {
    KeySpec k;
    k.name = name;
    k.get = [field, format](const Scenario& s) { return format(s.*field); };
    k.set = [field, parse, name](Scenario& s, const std::string& v) { s.*field = parse(name, v); };
    return k;
}

KeySpec key_u64(std::string name, std::uint64_t Scenario::*f) {
    return make_key(name, f, parse_u64, [](std::uint64_t v) { return std::to_string(v); });
}
KeySpec key_size(std::string name, std::size_t Scenario::*f) {
    return make_key(
        name, f,
        [](const std::string& k, const std::string& v) { return std::size_t(parse_u64(k, v)); },
        [](std::size_t v) { return std::to_string(v); });
}
KeySpec key_int(std::string name, int Scenario::*f) {
    return make_key(
        name, f,
        [](const std::string& k, const std::string& v) {
            int out;
            const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
            if (res.ec != std::errc{} || res.ptr != v.data() + v.size())
                throw InvalidValue(k + ": not an integer: " + v);
            return out;
        },
        [](int v) { return std::to_string(v); });
}
KeySpec key_double(std::string name, double Scenario::*f) {
    return make_key(name, f, parse_double, format_value_double);
}
KeySpec key_bool(std::string name, bool Scenario::*f) {
    return make_key(name, f, parse_bool, [](bool v) { return std::string(v ? "true" : "false"); });
}

template <typename E>
KeySpec key_enum(std::string name, E Scenario::*f, std::vector<std::pair<std::string, E>> values) {
    return make_key(
        name, f,
        [values](const std::string& k, const std::string& v) {
            for (const auto& [text, e] : values)
                if (text == v)
                    return e;
            std::string allowed;
            for (const auto& [text, e] : values)
                allowed += (allowed.empty() ? "" : "|") + text;
            throw InvalidValue(k + ": expected one of " + allowed + ", got " + v);
        },
        [values](E e) {
            for (const auto& [text, val] : values)
                if (val == e)
                    return text;
            return std::string("?");
        });
}

const std::vector<KeySpec>& registry() {
    static const std::vector<KeySpec> keys = [] {
        std::vector<KeySpec> r;
        r.push_back(key_u64("sim.seed", &Scenario::seed));
        r.push_back(key_double("sim.duration_s", &Scenario::duration_s));
        r.push_back(key_enum<OverlayKind>("sim.overlay", &Scenario::overlay,
                                          {{"dum", OverlayKind::Dum},
                                           {"dsm", OverlayKind::Dsm},
                                           {"hm", OverlayKind::Hm},
                                           {"lm", OverlayKind::Lm}}));
        r.push_back(key_size("sim.nodes", &Scenario::nodes));
        r.push_back(key_double("sim.snapshot_period_s", &Scenario::snapshot_period_s));
        r.push_back(key_double("link.latency_s", &Scenario::latency_s));
        r.push_back(key_double("link.latency_max_s", &Scenario::latency_max_s));
        r.push_back(key_double("link.loss_rate", &Scenario::loss_rate));
        r.push_back(key_bool("churn.enabled", &Scenario::churn_enabled));
        r.push_back(key_double("churn.mean_session_s", &Scenario::churn_mean_session_s));
        r.push_back(key_double("churn.mean_offline_s", &Scenario::churn_mean_offline_s));
        r.push_back(key_enum<TopoKind>("topo.kind", &Scenario::topo,
                                       {{"er", TopoKind::Er},
                                        {"ws", TopoKind::Ws},
                                        {"ba", TopoKind::Ba},
                                        {"ring", TopoKind::Ring}}));
        r.push_back(key_double("topo.alpha", &Scenario::topo_alpha));
        r.push_back(key_size("topo.k_ring", &Scenario::topo_k_ring));
        r.push_back(key_double("topo.p_rewire", &Scenario::topo_p_rewire));
        r.push_back(key_size("topo.m_attach", &Scenario::topo_m_attach));
        r.push_back(key_size("topo.n0", &Scenario::topo_n0));
        r.push_back(key_enum<BootstrapMode>("bootstrap.mode", &Scenario::bootstrap_mode,
                                            {{"peer_cache", BootstrapMode::PeerCache},
                                             {"mediator", BootstrapMode::Mediator}}));
        r.push_back(key_size("bootstrap.cache_capacity", &Scenario::bootstrap_cache_capacity));
        r.push_back(key_enum<GroupPolicyKind>("group.policy", &Scenario::group_policy,
                                              {{"open", GroupPolicyKind::Open},
                                               {"monarchy", GroupPolicyKind::Monarchy},
                                               {"voting", GroupPolicyKind::Voting}}));
        r.push_back(key_double("group.quorum", &Scenario::group_quorum));
        r.push_back(key_bool("group.scoped", &Scenario::group_scoped));
        r.push_back(key_enum<ConsistencyKind>("consistency.mode", &Scenario::consistency_mode,
                                              {{"none", ConsistencyKind::None},
                                               {"hm_notify", ConsistencyKind::HmNotify},
                                               {"dum_cache_expiry", ConsistencyKind::DumCacheExpiry},
                                               {"dsm_republish", ConsistencyKind::DsmRepublish}}));
        r.push_back(key_double("consistency.lifetime_s", &Scenario::consistency_lifetime_s));
        r.push_back(key_double("consistency.republish_s", &Scenario::consistency_republish_s));
        r.push_back(key_size("dum.peerview_max", &Scenario::dum_peerview_max));
        r.push_back(key_int("dum.ttl", &Scenario::dum_ttl));
        r.push_back(key_double("dum.forward_prob", &Scenario::dum_forward_prob));
        r.push_back(key_double("dum.ping_period_s", &Scenario::dum_ping_period_s));
        r.push_back(key_int("dsm.m_bits", &Scenario::dsm_m_bits));
        r.push_back(key_double("dsm.stabilize_period_s", &Scenario::dsm_stabilize_period_s));
        r.push_back(key_size("dsm.succ_list_len", &Scenario::dsm_succ_list_len));
        r.push_back(key_double("dsm.audit_period_s", &Scenario::dsm_audit_period_s));
        r.push_back(key_size("hm.offer_limit", &Scenario::hm_offer_limit));
        r.push_back(key_size("hm.tracker_handout", &Scenario::hm_tracker_handout));
        r.push_back(key_double("hm.reannounce_s", &Scenario::hm_reannounce_s));
        r.push_back(key_enum<HmMode>("hm.mode", &Scenario::hm_mode,
                                     {{"tracker", HmMode::Tracker}, {"index", HmMode::Index}}));
        r.push_back(key_size("lm.supernodes", &Scenario::lm_supernodes));
        r.push_back(key_u64("swarm.piece_size", &Scenario::swarm_piece_size));
        r.push_back(key_u64("swarm.block_size", &Scenario::swarm_block_size));
        r.push_back(key_size("swarm.M", &Scenario::swarm_m));
        r.push_back(key_size("swarm.K", &Scenario::swarm_k));
        r.push_back(key_double("swarm.T1_s", &Scenario::swarm_t1_s));
        r.push_back(key_double("swarm.T2_s", &Scenario::swarm_t2_s));
        r.push_back(key_double("swarm.rate_window_s", &Scenario::swarm_rate_window_s));
        r.push_back(key_size("swarm.seed_count", &Scenario::swarm_seed_count));
        r.push_back(key_size("swarm.leecher_count", &Scenario::swarm_leecher_count));
        r.push_back(key_size("swarm.freerider_count", &Scenario::swarm_freerider_count));
        r.push_back(key_u64("swarm.total_size", &Scenario::swarm_total_size));
        r.push_back(key_double("swarm.seed_up_bps", &Scenario::swarm_seed_up_bps));
        r.push_back(key_double("swarm.seed_down_bps", &Scenario::swarm_seed_down_bps));
        r.push_back(key_double("swarm.leech_up_bps", &Scenario::swarm_leech_up_bps));
        r.push_back(key_double("swarm.leech_down_bps", &Scenario::swarm_leech_down_bps));
        r.push_back(key_double("swarm.fr_up_bps", &Scenario::swarm_fr_up_bps));
        r.push_back(key_double("swarm.fr_down_bps", &Scenario::swarm_fr_down_bps));
        r.push_back(key_size("swarm.pipeline", &Scenario::swarm_pipeline));
        r.push_back(key_double("swarm.request_timeout_s", &Scenario::swarm_request_timeout_s));
        r.push_back(key_double("swarm.seed_linger_s", &Scenario::swarm_seed_linger_s));
        r.push_back(key_bool("swarm.seed_exit_on_coverage", &Scenario::swarm_seed_exit_on_coverage));
        r.push_back(key_enum<PiecePickKind>("swarm.piece_pick", &Scenario::swarm_piece_pick,
                                            {{"rarest_first", PiecePickKind::RarestFirst},
                                             {"random", PiecePickKind::Random}}));
        r.push_back(key_bool("reputation.enabled", &Scenario::reputation_enabled));
        r.push_back(key_bool("workload.topology_only", &Scenario::workload_topology_only));
        r.push_back(key_size("workload.queries", &Scenario::workload_queries));
        r.push_back(key_double("workload.query_start_s", &Scenario::workload_query_start_s));
        r.push_back(key_double("workload.query_period_s", &Scenario::workload_query_period_s));
        r.push_back(key_size("workload.lookups", &Scenario::workload_lookups));
        r.push_back(key_size("workload.publishes_per_node", &Scenario::workload_publishes_per_node));
        r.push_back(key_double("workload.join_window_s", &Scenario::workload_join_window_s));
        return r;
    }();
    return keys;
}

const KeySpec* find_key(const std::string& name) {
    for (const KeySpec& k : registry())
        if (k.name == name)
            return &k;
    return nullptr;
}

} // namespace

Scenario parse_scenario(const std::string& text) {
    Scenario s;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';')
            continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ParseError("line " + std::to_string(lineno) + ": unterminated section");
            section = trim(t.substr(1, t.size() - 2));
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ParseError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.find('.') == std::string::npos && !section.empty())
            key = section + "." + key;
        const KeySpec* spec = find_key(key);
        if (!spec)
            throw UnknownKey("unknown scenario key: " + key);
        spec->set(s, value);
    }
    validate_scenario(s);
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw ParseError("cannot open scenario file: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_scenario(buf.str());
}

std::string serialize_scenario(const Scenario& s) {
    std::string out;
    std::string section;
    for (const KeySpec& k : registry()) {
        const std::string sec = k.name.substr(0, k.name.find('.'));
        const std::string key = k.name.substr(k.name.find('.') + 1);
        if (sec != section) {
            if (!out.empty())
                out += '\n';
            out += '[' + sec + "]\n";
            section = sec;
        }
        out += key + " = " + k.get(s) + '\n';
    }
    return out;
}

std::string scenario_defaults_text() { return serialize_scenario(Scenario{}); }

void validate_scenario(const Scenario& s) {
    auto bad = [](const std::string& key, const std::string& why) {
        throw InvalidValue(key + ": " + why);
    };
    if (s.duration_s <= 0)
        bad("sim.duration_s", "must be positive");
    if (s.nodes < 1)
        bad("sim.nodes", "need at least one node");
    if (s.latency_s < 0 || (s.latency_max_s != 0 && s.latency_max_s < s.latency_s))
        bad("link.latency_s", "invalid latency range");
    if (s.loss_rate < 0 || s.loss_rate > 1)
        bad("link.loss_rate", "probability in [0,1]");
    if (s.churn_enabled && (!(s.churn_mean_session_s > 0) || !(s.churn_mean_offline_s > 0)))
        bad("churn.mean_session_s", "means must be strictly positive");
    if (s.topo_alpha < 0)
        bad("topo.alpha", "mean degree cannot be negative");
    if (s.topo == TopoKind::Ws || s.topo == TopoKind::Ring) {
        if (s.topo_k_ring % 2 != 0)
            bad("topo.k_ring", "K must be even");
        if (s.topo_k_ring >= s.nodes)
            bad("topo.k_ring", "K must be below the node count");
    }
    if (s.topo_p_rewire < 0 || s.topo_p_rewire > 1)
        bad("topo.p_rewire", "probability in [0,1]");
    if (s.topo == TopoKind::Ba &&
        !(s.topo_m_attach >= 1 && s.topo_m_attach <= s.topo_n0 && s.topo_n0 < s.nodes))
        bad("topo.m_attach", "need 1 <= m <= n0 < nodes");
    if (s.group_policy == GroupPolicyKind::Voting &&
        !(s.group_quorum > 0 && s.group_quorum <= 1))
        bad("group.quorum", "fraction in (0,1]");
    if (s.consistency_mode == ConsistencyKind::DsmRepublish &&
        !(s.consistency_republish_s > 0 &&
          s.consistency_republish_s < s.consistency_lifetime_s))
        bad("consistency.republish_s", "must be positive and below the lifetime");
    if (s.dum_ttl < 0)
        bad("dum.ttl", "must be non-negative");
    if (s.dum_forward_prob < 0 || s.dum_forward_prob > 1)
        bad("dum.forward_prob", "probability in [0,1]");
    if (s.dum_peerview_max < 1)
        bad("dum.peerview_max", "need room for at least one neighbor");
    if (s.dsm_m_bits < 1 || s.dsm_m_bits > 64)
        bad("dsm.m_bits", "identifier length in [1,64]");
    if (s.dsm_stabilize_period_s <= 0)
        bad("dsm.stabilize_period_s", "must be positive");
    if (s.dsm_succ_list_len < 1)
        bad("dsm.succ_list_len", "need at least one fallback successor");
    if (s.hm_offer_limit < 1)
        bad("hm.offer_limit", "must be positive");
    if (s.hm_tracker_handout < 1)
        bad("hm.tracker_handout", "must be positive");
    if (s.overlay == OverlayKind::Lm &&
        (s.lm_supernodes < 1 || s.lm_supernodes > s.nodes))
        bad("lm.supernodes", "must be in [1, nodes]");
    if (s.swarm_piece_size == 0 || s.swarm_block_size == 0 ||
        s.swarm_piece_size % s.swarm_block_size != 0)
        bad("swarm.block_size", "block size must divide piece size");
    if (s.swarm_total_size == 0)
        bad("swarm.total_size", "must be positive");
    if (s.swarm_k > s.swarm_m)
        bad("swarm.K", "K cannot exceed M");
    if (s.swarm_m < 1)
        bad("swarm.M", "must be positive");
    if (s.swarm_t1_s <= 0 || s.swarm_t2_s <= 0)
        bad("swarm.T1_s", "periods must be positive");
    if (s.swarm_rate_window_s <= 0)
        bad("swarm.rate_window_s", "must be positive");
    if (s.swarm_pipeline < 1)
        bad("swarm.pipeline", "must be positive");
    if (s.swarm_request_timeout_s <= 0)
        bad("swarm.request_timeout_s", "must be positive");
    if (s.overlay == OverlayKind::Hm && s.hm_mode == HmMode::Tracker &&
        s.swarm_seed_count < 1)
        bad("swarm.seed_count", "a swarm needs an initial seed");
    if (s.workload_query_period_s <= 0)
        bad("workload.query_period_s", "must be positive");
    if (s.workload_join_window_s < 0)
        bad("workload.join_window_s", "cannot be negative");
}

namespace {

Scenario preset_bittorrent_baseline() {
    Scenario s;
    s.overlay = OverlayKind::Hm;
    s.hm_mode = HmMode::Tracker;
    s.duration_s = 4000;
    s.snapshot_period_s = 200;
    s.reputation_enabled = false;
    return s;
}

Scenario preset_gnutella_flood() {
    Scenario s;
    s.overlay = OverlayKind::Dum;
    s.nodes = 200;
    s.topo = TopoKind::Er;
    s.topo_alpha = 6;
    s.dum_ttl = 7;
    s.duration_s = 300;
    s.workload_queries = 50;
    s.workload_query_start_s = 10;
    s.workload_query_period_s = 1;
    return s;
}

Scenario preset_chord_lookup_bench() {
    Scenario s;
    s.overlay = OverlayKind::Dsm;
    s.nodes = 256;
    s.dsm_m_bits = 16;
    s.duration_s = 1500;
    s.workload_lookups = 1000;
    s.workload_join_window_s = 120;
    s.snapshot_period_s = 300;
    return s;
}

Scenario preset_emule_hybrid() {
    Scenario s;
    s.overlay = OverlayKind::Hm;
    s.hm_mode = HmMode::Index;
    s.nodes = 32;
    s.duration_s = 300;
    s.reputation_enabled = true;
    s.consistency_mode = ConsistencyKind::HmNotify;
    s.workload_queries = 40;
    s.workload_query_start_s = 20;
    s.workload_query_period_s = 2;
    return s;
}

Scenario preset_layered_supernodes() {
    Scenario s;
    s.overlay = OverlayKind::Lm;
    s.nodes = 64;
    s.lm_supernodes = 8;
    s.duration_s = 300;
    s.workload_queries = 40;
    s.workload_query_start_s = 20;
    s.workload_query_period_s = 2;
    s.dum_ttl = 7;
    return s;
}

Scenario preset_topology_suite() {
    Scenario s;
    s.overlay = OverlayKind::Dum;
    s.workload_topology_only = true;
    s.nodes = 2000;
    s.topo_alpha = 8;
    s.topo_k_ring = 8;
    s.duration_s = 1;
    return s;
}

} // namespace

std::vector<std::string> preset_names() {
    return {"bittorrent_baseline", "gnutella_flood", "chord_lookup_bench",
            "emule_hybrid",        "layered_supernodes", "topology_suite"};
}

bool is_preset(const std::string& name) {
    for (const std::string& p : preset_names())
        if (p == name)
            return true;
    return false;
}

Scenario preset(const std::string& name) {
    Scenario s;
    if (name == "bittorrent_baseline")
        s = preset_bittorrent_baseline();
    else if (name == "gnutella_flood")
        s = preset_gnutella_flood();
    else if (name == "chord_lookup_bench")
        s = preset_chord_lookup_bench();
    else if (name == "emule_hybrid")
        s = preset_emule_hybrid();
    else if (name == "layered_supernodes")
        s = preset_layered_supernodes();
    else if (name == "topology_suite")
        s = preset_topology_suite();
    else
        throw UnknownKey("unknown preset: " + name);
    validate_scenario(s);
    return s;
}

} // namespace p2p
