#include "p2p/runner.hpp"

#include <algorithm>
#include <cmath>

#include "p2p/chord.hpp"
#include "p2p/engine.hpp"
#include "p2p/errors.hpp"
#include "p2p/flooding.hpp"
#include "p2p/hybrid.hpp"
#include "p2p/membership.hpp"
#include "p2p/swarm.hpp"

namespace p2p {

namespace {

LinkModel link_from(const Scenario& s) {
    LinkModel l;
    l.latency_min_s = s.latency_s;
    l.latency_max_s = s.latency_max_s > 0 ? s.latency_max_s : s.latency_s;
    l.loss_rate = s.loss_rate;
    return l;
}

ChurnConfig churn_from(const Scenario& s) {
    return ChurnConfig{s.churn_mean_session_s, s.churn_mean_offline_s};
}

TopologySnapshot generate_topology(const Scenario& s, std::size_t n, Rng& rng) {
    switch (s.topo) {
    case TopoKind::Er:
        return generate_er(ErParams{n, s.topo_alpha}, rng);
    case TopoKind::Ws:
        return generate_ws(WsParams{n, s.topo_k_ring, s.topo_p_rewire}, rng);
    case TopoKind::Ba:
        return generate_ba(BaParams{n, s.topo_m_attach, s.topo_n0}, rng);
    case TopoKind::Ring:
        return generate_ring_lattice(n, s.topo_k_ring);
    }
    throw InvalidParams("unknown topology kind");
}

TopologySnapshot remap_nodes(const TopologySnapshot& t, const std::vector<NodeId>& ids) {
    std::vector<NodeId> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId n : t.nodes)
        nodes.push_back(ids.at(std::size_t(n.value)));
    for (const auto& [u, v] : t.edges)
        edges.emplace_back(ids.at(std::size_t(u.value)), ids.at(std::size_t(v.value)));
    return make_snapshot(std::move(nodes), std::move(edges));
}

void finalize_counters(SimEngine& eng) {
    const EngineCounters& c = eng.counters();
    MetricsLog& log = eng.metrics();
    const double t = eng.now();
    log.add(t, "engine.events_executed", "", double(c.events_executed));
    log.add(t, "engine.messages_sent", "", double(c.messages_sent));
    log.add(t, "engine.messages_delivered", "", double(c.messages_delivered));
    log.add(t, "engine.dropped_loss", "", double(c.dropped_loss));
    log.add(t, "engine.dropped_dead_dest", "", double(c.dropped_dead_dest));
    log.add(t, "engine.joins", "", double(c.joins));
    log.add(t, "engine.leaves", "", double(c.leaves));
}

double mean(const std::vector<double>& v) {
    if (v.empty())
        return 0;
    double s = 0;
    for (double x : v)
        s += x;
    return s / double(v.size());
}

double quantile(std::vector<double> v, double q) {
    if (v.empty())
        return 0;
    std::sort(v.begin(), v.end());
    const std::size_t idx = std::size_t(q * double(v.size() - 1) + 0.5);
    return v[std::min(idx, v.size() - 1)];
}

void log_topology_metrics(MetricsLog& log, double t, const std::string& family,
                          const TopologySnapshot& snap, bool with_paths) {
    log.add(t, "topo.nodes", family, double(snap.node_count()));
    log.add(t, "topo.edges", family, double(snap.edge_count()));
    log.add(t, "topo.mean_degree", family, mean_degree(snap));
    log.add(t, "topo.cc", family, clustering_coefficient(snap));
    if (with_paths) {
        const TopologyMetrics m = metrics(snap);
        log.add(t, "topo.avg_distance", family, m.avg_connected_distance);
        log.add(t, "topo.diameter", family, double(m.diameter));
        log.add(t, "topo.components", family, double(m.component_count));
    }
}

RunResult run_topology_suite(const Scenario& s) {
    RunResult r;
    SimEngine eng(s.seed);
    Rng& rng = eng.rng();

    const TopologySnapshot er = generate_er(ErParams{s.nodes, s.topo_alpha}, rng);
    const TopologySnapshot ws =
        generate_ws(WsParams{s.nodes, s.topo_k_ring, s.topo_p_rewire}, rng);
    const TopologySnapshot ba = generate_ba(BaParams{s.nodes, s.topo_m_attach, s.topo_n0}, rng);
    const TopologySnapshot ring = generate_ring_lattice(s.nodes, s.topo_k_ring);

    log_topology_metrics(eng.metrics(), 0, "er", er, true);
    log_topology_metrics(eng.metrics(), 0, "ws", ws, true);
    log_topology_metrics(eng.metrics(), 0, "ba", ba, false);
    log_topology_metrics(eng.metrics(), 0, "ring", ring, true);

    // degree-tail exponent for the preferential-attachment family
    const auto hist = degree_histogram(ba);
    std::size_t k_max = s.topo_m_attach;
    for (const auto& [k, c] : hist)
        if (c >= 10 && k > k_max)
            k_max = k;
    try {
        const PowerLawFit fit = fit_power_law(hist, s.topo_m_attach, k_max);
        eng.metrics().add(0, "topo.tau", "ba", fit.tau);
        r.summary.emplace_back("ba_tau", fit.tau);
    } catch (const DegenerateFit&) {
        eng.metrics().add(0, "topo.tau_degenerate", "ba", 1);
    }

    r.snapshots.emplace(0.0, er);
    r.snapshots.emplace(1.0, ws);
    r.snapshots.emplace(2.0, ba);
    r.snapshots.emplace(3.0, ring);

    r.summary.emplace_back("er_mean_degree", mean_degree(er));
    r.summary.emplace_back("er_cc", clustering_coefficient(er));
    r.summary.emplace_back("ws_cc", clustering_coefficient(ws));
    r.summary.emplace_back("ring_cc", clustering_coefficient(ring));

    eng.run_until(s.duration_s);
    finalize_counters(eng);
    r.log = eng.metrics();
    return r;
}

RunResult run_dum(const Scenario& s) {
    RunResult r;
    SimEngine eng(s.seed, link_from(s));
    const KeySpace ks{64};
    const std::vector<NodeId> ids = assign_node_ids(s.nodes, ks, eng.rng());

    FloodingConfig fc;
    fc.peerview_max = s.dum_peerview_max;
    fc.ttl = s.dum_ttl;
    fc.forward_prob = s.dum_forward_prob;
    fc.ping_period_s = s.dum_ping_period_s;
    fc.response_cache = s.consistency_mode == ConsistencyKind::DumCacheExpiry;
    fc.cache_lifetime_s = s.consistency_lifetime_s;
    FloodingNetwork net(eng, fc);

    Mediator mediator(s.dum_peerview_max);
    std::map<NodeId, PeerCache> caches;
    eng.add_join_handler([&](NodeId n) { mediator.on_join(n); });
    eng.add_leave_handler([&](NodeId n) { mediator.on_leave(n); });

    const TopologySnapshot base = generate_topology(s, s.nodes, eng.rng());
    net.build_from_snapshot(remap_nodes(base, ids));

    // every node advertises its resources locally; floods go looking for them
    std::vector<ResourceKey> keys;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t k = 0; k < s.workload_publishes_per_node; ++k) {
            const std::string body = "res-" + std::to_string(i) + "-" + std::to_string(k);
            const ResourceKey key = derive_key(body, ks);
            Descriptor d{key, ids[i], Sha1::of(body), 0.0, std::nullopt};
            net.publish_local(ids[i], d);
            keys.push_back(key);
        }
    }

    for (NodeId n : ids) {
        PeerCache cache(s.bootstrap_cache_capacity);
        for (NodeId nb : net.node(n).view.neighbors)
            cache.touch(nb, 0);
        caches.emplace(n, std::move(cache));
    }

    std::uint64_t bootstrap_failures = 0;
    eng.add_join_handler([&](NodeId n) {
        if (!net.has_node(n))
            return;
        if (s.bootstrap_mode == BootstrapMode::Mediator) {
            for (NodeId other : mediator.bootstrap(n, eng.rng()))
                if (net.has_node(other) && eng.is_live(other))
                    net.add_link(n, other);
        } else {
            auto probe = [&](NodeId p) { return eng.is_live(p); };
            const auto entry = bootstrap_peer_based(caches.at(n), probe);
            if (entry)
                net.add_link(n, *entry);
            else
                bootstrap_failures++;
        }
    });

    if (s.churn_enabled)
        eng.set_churn(churn_from(s), ids, s.duration_s);

    // optional scoped floods: first half of the population forms a group and
    // tags its queries; outsiders drop them on delivery
    Group group;
    if (s.group_scoped) {
        group.group_id = 0x9d0f;
        group.policy = GroupPolicy::Open;
        for (std::size_t i = 0; i < ids.size() / 2; ++i)
            group.members.insert(ids[i]);
        net.set_group(group);
    }

    std::vector<std::uint64_t> query_ids;
    for (std::size_t q = 0; q < s.workload_queries; ++q) {
        const double at = s.workload_query_start_s + double(q) * s.workload_query_period_s;
        if (at > s.duration_s)
            break;
        eng.schedule_call_at(at, [&]() {
            std::vector<NodeId> live;
            for (NodeId n : ids)
                if (eng.is_live(n))
                    live.push_back(n);
            if (live.empty() || keys.empty())
                return;
            const NodeId origin = live[eng.rng().index(live.size())];
            const ResourceKey key = keys[eng.rng().index(keys.size())];
            std::optional<std::uint64_t> tag;
            if (s.group_scoped && group.members.count(origin))
                tag = group.group_id;
            query_ids.push_back(net.flood_query(origin, key, std::nullopt, std::nullopt, tag));
        });
    }

    r.snapshots.emplace(0.0, net.snapshot());
    if (s.snapshot_period_s > 0) {
        for (double t = s.snapshot_period_s; t < s.duration_s; t += s.snapshot_period_s)
            eng.schedule_call_at(t, [&, t]() { r.snapshots[t] = net.snapshot(); });
    }

    eng.run_until(s.duration_s);
    r.snapshots[s.duration_s] = net.snapshot();

    std::vector<double> coverage, copies, first_hit_hops;
    std::size_t with_hits = 0;
    const double live_now = double(eng.live_nodes().size());
    for (std::uint64_t qid : query_ids) {
        const QueryTrace& tr = net.trace(qid);
        const double denom = std::max(1.0, live_now - 1.0);
        coverage.push_back(double(tr.processed.size()) / denom);
        copies.push_back(double(tr.query_copies));
        if (!tr.hits.empty()) {
            with_hits++;
            first_hit_hops.push_back(double(tr.hits.front().hops));
        }
        eng.metrics().add(s.duration_s, "flood.coverage", std::to_string(qid),
                          coverage.back());
        eng.metrics().add(s.duration_s, "flood.copies", std::to_string(qid), copies.back());
        eng.metrics().add(s.duration_s, "flood.hits", std::to_string(qid),
                          double(tr.hits.size()));
    }
    r.summary.emplace_back("queries", double(query_ids.size()));
    r.summary.emplace_back("mean_coverage", mean(coverage));
    r.summary.emplace_back("mean_copies", mean(copies));
    r.summary.emplace_back("hit_rate",
                           query_ids.empty() ? 0 : double(with_hits) / double(query_ids.size()));
    r.summary.emplace_back("mean_first_hit_hops", mean(first_hit_hops));
    r.summary.emplace_back("path_lost", double(net.path_lost()));
    r.summary.emplace_back("bootstrap_failures", double(bootstrap_failures));

    finalize_counters(eng);
    r.log = eng.metrics();
    return r;
}

TopologySnapshot ring_snapshot(const ChordRing& ring, const SimEngine& eng,
                               const std::vector<NodeId>& ids) {
    std::vector<NodeId> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (NodeId n : ids) {
        if (!eng.is_live(n) || !ring.has_node(n))
            continue;
        nodes.push_back(n);
        const ChordNode& cn = ring.node(n);
        if (cn.successor != n)
            edges.emplace_back(n, cn.successor);
        for (NodeId f : cn.finger)
            if (f != n)
                edges.emplace_back(n, f);
    }
    return make_snapshot(std::move(nodes), std::move(edges));
}

RunResult run_dsm(const Scenario& s) {
    RunResult r;
    SimEngine eng(s.seed, link_from(s));
    const KeySpace ks{s.dsm_m_bits};
    const std::vector<NodeId> ids = assign_node_ids(s.nodes, ks, eng.rng());

    ChordConfig cc;
    cc.ks = ks;
    cc.stabilize_period_s = s.dsm_stabilize_period_s;
    cc.succ_list_len = s.dsm_succ_list_len;
    cc.audit_period_s = s.dsm_audit_period_s;
    if (s.consistency_mode == ConsistencyKind::DsmRepublish) {
        cc.republish_period_s = s.consistency_republish_s;
        cc.descriptor_lifetime_s = s.consistency_lifetime_s;
    }
    ChordRing ring(eng, cc);
    ring.create(ids[0]);

    // staggered joins through random live members, retried on failure
    struct Joiner {
        SimEngine* eng;
        ChordRing* ring;
        const std::vector<NodeId>* ids;
        NodeId node;
        void attempt() {
            std::vector<NodeId> live;
            for (NodeId n : *ids)
                if (n != node && eng->is_live(n) && ring->has_node(n))
                    live.push_back(n);
            if (live.empty())
                return;
            const NodeId via = live[eng->rng().index(live.size())];
            try {
                ring->join(node, via);
            } catch (const JoinFailed&) {
                auto carry = *this;
                eng->schedule_call(5.0, [carry]() mutable { carry.attempt(); });
            }
        }
    };
    for (std::size_t i = 1; i < ids.size(); ++i) {
        const double at = s.workload_join_window_s * double(i) / double(ids.size());
        eng.schedule_call_at(at, [&, i]() { Joiner{&eng, &ring, &ids, ids[i]}.attempt(); });
    }

    // publishes once the ring has formed and maintenance has settled;
    // without republish a placement made against a stale ring never heals
    std::vector<ResourceKey> keys;
    const double publish_at = std::max(s.workload_join_window_s + 10, s.duration_s * 0.5);
    eng.schedule_call_at(std::min(publish_at, s.duration_s), [&]() {
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!eng.is_live(ids[i]))
                continue;
            for (std::size_t k = 0; k < s.workload_publishes_per_node; ++k) {
                const std::string body = "res-" + std::to_string(i) + "-" + std::to_string(k);
                const ResourceKey key = derive_key(body, ks);
                Descriptor d{key, ids[i], Sha1::of(body), eng.now(),
                             cc.descriptor_lifetime_s};
                try {
                    const int hops = ring.put(ids[i], d);
                    eng.metrics().add(eng.now(), "dsm.put_hops", std::to_string(key.value),
                                      double(hops));
                    keys.push_back(key);
                } catch (const LookupTimeout&) {
                }
            }
        }
    });

    if (s.churn_enabled)
        eng.set_churn(churn_from(s), ids, s.duration_s);

    r.snapshots.emplace(0.0, ring_snapshot(ring, eng, ids));
    if (s.snapshot_period_s > 0)
        for (double t = s.snapshot_period_s; t < s.duration_s; t += s.snapshot_period_s)
            eng.schedule_call_at(t, [&, t]() { r.snapshots[t] = ring_snapshot(ring, eng, ids); });

    eng.run_until(s.duration_s);
    r.snapshots[s.duration_s] = ring_snapshot(ring, eng, ids);

    // measurement phase over the settled ring
    const auto sorted_ids = ring.live_ids_sorted();
    std::vector<double> hops;
    std::size_t agree = 0, resolved = 0;
    std::vector<NodeId> live;
    for (NodeId n : ids)
        if (eng.is_live(n) && ring.has_node(n))
            live.push_back(n);
    if (!live.empty() && !sorted_ids.empty()) {
        for (std::size_t q = 0; q < s.workload_lookups; ++q) {
            const NodeId origin = live[eng.rng().index(live.size())];
            const std::uint64_t key = ks.reduce(eng.rng().next());
            try {
                const LookupResult res = ring.lookup_scalable(origin, key);
                resolved++;
                hops.push_back(double(res.hops));
                if (res.owner == successor_oracle(sorted_ids, key))
                    agree++;
                eng.metrics().add(s.duration_s, "dsm.lookup_hops", std::to_string(key),
                                  double(res.hops));
            } catch (const LookupTimeout&) {
            }
        }
    }
    std::size_t get_ok = 0;
    for (const ResourceKey& key : keys) {
        if (live.empty())
            break;
        const NodeId origin = live[eng.rng().index(live.size())];
        try {
            if (!ring.get(origin, key).empty())
                get_ok++;
        } catch (const LookupTimeout&) {
        }
    }
    r.summary.emplace_back("live_nodes", double(live.size()));
    r.summary.emplace_back("lookups_resolved", double(resolved));
    r.summary.emplace_back("lookup_hops_mean", mean(hops));
    r.summary.emplace_back("lookup_hops_max", hops.empty() ? 0 : *std::max_element(hops.begin(), hops.end()));
    r.summary.emplace_back("oracle_agreement",
                           resolved == 0 ? 0 : double(agree) / double(resolved));
    r.summary.emplace_back("successors_quiesced", ring.successors_match_oracle() ? 1 : 0);
    r.summary.emplace_back("gets_ok", double(get_ok));
    r.summary.emplace_back("gets_total", double(keys.size()));

    finalize_counters(eng);
    r.log = eng.metrics();
    return r;
}

RunResult run_hm_tracker(const Scenario& s) {
    RunResult r;
    SimEngine eng(s.seed, link_from(s));
    const KeySpace ks{64};
    const std::size_t total = s.swarm_seed_count + s.swarm_leecher_count + s.swarm_freerider_count;
    const std::vector<NodeId> ids = assign_node_ids(total, ks, eng.rng());

    Tracker tracker(s.hm_tracker_handout);
    const ContentSpec content =
        ContentSpec::synthetic(s.swarm_total_size, std::uint32_t(s.swarm_piece_size),
                               std::uint32_t(s.swarm_block_size), s.seed ^ 0xc0ffee);

    SwarmParams sp;
    sp.choke = ChokeParams{s.swarm_m, s.swarm_k, s.swarm_t1_s, s.swarm_t2_s, s.swarm_rate_window_s};
    sp.pipeline = s.swarm_pipeline;
    sp.request_timeout_s = s.swarm_request_timeout_s;
    sp.seed_linger_s = s.swarm_seed_linger_s;
    sp.seed_exit_on_coverage = s.swarm_seed_exit_on_coverage;
    sp.rarest_first = s.swarm_piece_pick == PiecePickKind::RarestFirst;
    sp.reputation_enabled = s.reputation_enabled;
    sp.reannounce_s = s.hm_reannounce_s;

    std::vector<SwarmPeerSpec> specs;
    std::size_t at = 0;
    for (std::size_t i = 0; i < s.swarm_seed_count; ++i, ++at)
        specs.push_back({ids[at], PeerClass::Seed, s.swarm_seed_up_bps, s.swarm_seed_down_bps});
    for (std::size_t i = 0; i < s.swarm_leecher_count; ++i, ++at)
        specs.push_back({ids[at], PeerClass::Leecher, s.swarm_leech_up_bps, s.swarm_leech_down_bps});
    for (std::size_t i = 0; i < s.swarm_freerider_count; ++i, ++at)
        specs.push_back({ids[at], PeerClass::FreeRider, s.swarm_fr_up_bps, s.swarm_fr_down_bps});

    SwarmSim swarm(eng, tracker, content, sp, specs);
    swarm.start();

    r.snapshots.emplace(0.0, swarm.snapshot());
    if (s.snapshot_period_s > 0)
        for (double t = s.snapshot_period_s; t < s.duration_s; t += s.snapshot_period_s)
            eng.schedule_call_at(t, [&, t]() { r.snapshots[t] = swarm.snapshot(); });

    eng.run_until(s.duration_s);
    r.snapshots[s.duration_s] = swarm.snapshot();

    if (s.reputation_enabled)
        swarm.emit_credit_metrics();

    std::vector<double> leecher_times, fr_times;
    for (const auto& spec : specs) {
        const auto it = swarm.completion_times().find(spec.id);
        if (it == swarm.completion_times().end())
            continue;
        if (spec.cls == PeerClass::Leecher)
            leecher_times.push_back(it->second);
        else if (spec.cls == PeerClass::FreeRider)
            fr_times.push_back(it->second);
    }
    r.summary.emplace_back("completed",
                           double(leecher_times.size() + fr_times.size()));
    r.summary.emplace_back("contributor_mean_s", mean(leecher_times));
    r.summary.emplace_back("contributor_p50_s", quantile(leecher_times, 0.5));
    r.summary.emplace_back("contributor_p90_s", quantile(leecher_times, 0.9));
    r.summary.emplace_back("freerider_mean_s", mean(fr_times));
    if (!fr_times.empty() && !leecher_times.empty() && mean(leecher_times) > 0)
        r.summary.emplace_back("freerider_slowdown", mean(fr_times) / mean(leecher_times));
    if (swarm.variance_at_half())
        r.summary.emplace_back("replica_variance_at_half", *swarm.variance_at_half());
    r.summary.emplace_back("corrupt_pieces", double(swarm.corrupt_pieces()));
    r.summary.emplace_back("request_timeouts", double(swarm.request_timeouts()));
    r.summary.emplace_back("pipeline_violations", double(swarm.pipeline_violations()));
    r.summary.emplace_back("unchoke_cap_violations", double(swarm.unchoke_cap_violations()));

    finalize_counters(eng);
    r.log = eng.metrics();
    return r;
}

RunResult run_hm_index(const Scenario& s) {
    RunResult r;
    SimEngine eng(s.seed, link_from(s));
    const KeySpace ks{64};
    const std::vector<NodeId> ids = assign_node_ids(s.nodes, ks, eng.rng());

    IndexServer server(s.hm_offer_limit);
    std::map<NodeId, CreditLedger> ledgers;
    std::map<NodeId, UploadQueue> queues;
    std::map<NodeId, std::vector<Descriptor>> shared;
    std::vector<ResourceKey> keys;

    eng.add_leave_handler([&](NodeId n) { server.on_peer_leave(n); });
    eng.add_join_handler([&](NodeId n) {
        if (!shared.count(n))
            return;
        server.register_peer(n);
        server.offer_files(n, shared.at(n));
    });

    for (std::size_t i = 0; i < ids.size(); ++i) {
        eng.add_node(ids[i]);
        server.register_peer(ids[i]);
        std::vector<Descriptor> mine;
        for (std::size_t k = 0; k < s.workload_publishes_per_node; ++k) {
            const std::string body = "res-" + std::to_string(i) + "-" + std::to_string(k);
            const ResourceKey key = derive_key(body, ks);
            mine.push_back(Descriptor{key, ids[i], Sha1::of(body), 0.0, std::nullopt});
            keys.push_back(key);
        }
        server.offer_files(ids[i], mine);
        shared.emplace(ids[i], std::move(mine));
    }

    if (s.churn_enabled)
        eng.set_churn(churn_from(s), ids, s.duration_s);

    // owners revise a descriptor mid-run and notify the index
    if (s.consistency_mode == ConsistencyKind::HmNotify) {
        eng.schedule_call_at(s.duration_s / 2, [&]() {
            for (NodeId n : ids) {
                if (!eng.is_live(n) || shared.at(n).empty())
                    continue;
                Descriptor& d = shared.at(n).front();
                d.content_digest = Sha1::of("v2-" + std::to_string(n.value));
                d.published_at = eng.now();
                server.notify_update(n, d);
            }
            eng.metrics().add(eng.now(), "hm.notify_round", "", double(ids.size()));
        });
    }

    // search, then queue a download at one provider; providers serve one
    // request per second in credit order
    std::uint64_t searches = 0, found = 0;
    std::vector<double> waits;
    std::map<NodeId, std::map<NodeId, double>> enqueue_time;
    struct Server {
        SimEngine* eng;
        std::map<NodeId, UploadQueue>* queues;
        std::map<NodeId, CreditLedger>* ledgers;
        std::map<NodeId, std::map<NodeId, double>>* enq;
        std::vector<double>* waits;
        void arm() {
            auto carry = *this;
            eng->schedule_call(1.0, [carry]() mutable {
                for (auto& [provider, q] : *carry.queues) {
                    if (!carry.eng->is_live(provider) || q.empty())
                        continue;
                    const auto req = q.pop();
                    if (!req)
                        continue;
                    (*carry.ledgers)[provider].record_sent(*req, 1.0);
                    (*carry.ledgers)[*req].record_received(provider, 1.0);
                    const double waited =
                        carry.eng->now() - (*carry.enq)[provider][*req];
                    carry.waits->push_back(waited);
                    carry.eng->metrics().add(carry.eng->now(), "hm.queue_wait_s",
                                             std::to_string(req->value), waited);
                }
                carry.arm();
            });
        }
    };
    Server{&eng, &queues, &ledgers, &enqueue_time, &waits}.arm();

    for (std::size_t q = 0; q < s.workload_queries; ++q) {
        const double at = s.workload_query_start_s + double(q) * s.workload_query_period_s;
        if (at > s.duration_s)
            break;
        eng.schedule_call_at(at, [&]() {
            std::vector<NodeId> live;
            for (NodeId n : ids)
                if (eng.is_live(n))
                    live.push_back(n);
            if (live.empty() || keys.empty())
                return;
            const NodeId requester = live[eng.rng().index(live.size())];
            const ResourceKey key = keys[eng.rng().index(keys.size())];
            searches++;
            const auto providers = server.search_key(key);
            eng.metrics().add(eng.now(), "hm.search_hits", std::to_string(key.value),
                              double(providers.size()));
            if (providers.empty())
                return;
            found++;
            const NodeId provider = providers[eng.rng().index(providers.size())];
            const double weight = s.reputation_enabled
                                      ? priority_weight(ledgers[provider].credit_of(requester))
                                      : 1.0;
            queues[provider].push(requester, weight);
            enqueue_time[provider][requester] = eng.now();
        });
    }

    eng.run_until(s.duration_s);

    for (const auto& [observer, ledger] : ledgers)
        for (NodeId n : ids)
            if (ledger.knows(n))
                eng.metrics().add(s.duration_s, "credit",
                                  std::to_string(observer.value) + ":" + std::to_string(n.value),
                                  ledger.credit_of(n));

    r.summary.emplace_back("searches", double(searches));
    r.summary.emplace_back("search_success",
                           searches == 0 ? 0 : double(found) / double(searches));
    r.summary.emplace_back("mean_queue_wait_s", mean(waits));
    r.summary.emplace_back("catalog_size", double(server.catalog_size()));
    r.summary.emplace_back("rejected_offers", double(server.rejected_offers()));

    finalize_counters(eng);
    r.log = eng.metrics();
    return r;
}

RunResult run_lm(const Scenario& s) {
    RunResult r;
    SimEngine eng(s.seed, link_from(s));
    const KeySpace ks{64};
    const std::vector<NodeId> ids = assign_node_ids(s.nodes, ks, eng.rng());
    const std::size_t sn_count = s.lm_supernodes;

    FloodingConfig fc;
    fc.peerview_max = s.dum_peerview_max;
    fc.ttl = s.dum_ttl;
    fc.forward_prob = s.dum_forward_prob;
    FloodingNetwork supernet(eng, fc);

    std::vector<NodeId> supernodes(ids.begin(), ids.begin() + std::ptrdiff_t(sn_count));
    std::vector<NodeId> leaves(ids.begin() + std::ptrdiff_t(sn_count), ids.end());

    // supernode backbone: ring lattice for connectivity plus random chords
    const TopologySnapshot lattice =
        generate_ring_lattice(sn_count, sn_count >= 3 ? 2 : 0);
    supernet.build_from_snapshot(remap_nodes(lattice, supernodes));
    for (std::size_t i = 0; i + 1 < sn_count; ++i)
        if (eng.rng().bernoulli(0.3))
            supernet.add_link(supernodes[i], supernodes[i + 1 + eng.rng().index(sn_count - i - 1)]);

    // leaves register with their supernode; accepted offers are advertised
    // into the supernode's local store for flood lookups
    std::map<NodeId, IndexServer> indexes;
    for (NodeId sn : supernodes)
        indexes.emplace(sn, IndexServer(s.hm_offer_limit));
    std::map<NodeId, NodeId> attach;
    std::vector<ResourceKey> keys;
    for (std::size_t i = 0; i < leaves.size(); ++i) {
        const NodeId leaf = leaves[i];
        eng.add_node(leaf);
        const NodeId sn = supernodes[i % sn_count];
        attach[leaf] = sn;
        IndexServer& idx = indexes.at(sn);
        idx.register_peer(leaf);
        std::vector<Descriptor> mine;
        for (std::size_t k = 0; k < s.workload_publishes_per_node; ++k) {
            const std::string body = "res-" + std::to_string(sn_count + i) + "-" + std::to_string(k);
            const ResourceKey key = derive_key(body, ks);
            mine.push_back(Descriptor{key, leaf, Sha1::of(body), 0.0, std::nullopt});
            keys.push_back(key);
        }
        idx.offer_files(leaf, mine);
        for (const Descriptor& d : mine)
            supernet.publish_local(sn, d);
    }

    std::vector<std::uint64_t> query_ids;
    std::uint64_t local_hits = 0, issued = 0;
    for (std::size_t q = 0; q < s.workload_queries; ++q) {
        const double at = s.workload_query_start_s + double(q) * s.workload_query_period_s;
        if (at > s.duration_s)
            break;
        eng.schedule_call_at(at, [&]() {
            if (leaves.empty() || keys.empty())
                return;
            const NodeId leaf = leaves[eng.rng().index(leaves.size())];
            const ResourceKey key = keys[eng.rng().index(keys.size())];
            const NodeId sn = attach.at(leaf);
            issued++;
            if (!indexes.at(sn).search_key(key).empty()) {
                local_hits++;
                return; // resolved at the leaf's own supernode
            }
            query_ids.push_back(supernet.flood_query(sn, key));
        });
    }

    eng.run_until(s.duration_s);

    std::size_t flood_hits = 0;
    for (std::uint64_t qid : query_ids)
        if (!supernet.trace(qid).hits.empty())
            flood_hits++;
    r.summary.emplace_back("queries", double(issued));
    r.summary.emplace_back("local_hit_rate", issued == 0 ? 0 : double(local_hits) / double(issued));
    r.summary.emplace_back("flood_queries", double(query_ids.size()));
    r.summary.emplace_back("flood_hit_rate",
                           query_ids.empty() ? 0 : double(flood_hits) / double(query_ids.size()));
    r.summary.emplace_back("supernodes", double(sn_count));

    r.snapshots[s.duration_s] = supernet.snapshot();
    finalize_counters(eng);
    r.log = eng.metrics();
    return r;
}

} // namespace

RunResult run_scenario(const Scenario& s) {
    validate_scenario(s);
    if (s.workload_topology_only)
        return run_topology_suite(s);
    switch (s.overlay) {
    case OverlayKind::Dum:
        return run_dum(s);
    case OverlayKind::Dsm:
        return run_dsm(s);
    case OverlayKind::Hm:
        return s.hm_mode == HmMode::Tracker ? run_hm_tracker(s) : run_hm_index(s);
    case OverlayKind::Lm:
        return run_lm(s);
    }
    throw InvalidParams("unknown overlay kind");
}

const TopologySnapshot& snapshot_at(const RunResult& r, double t) {
    if (r.snapshots.empty())
        throw NoSnapshot("run recorded no topology snapshots");
    const TopologySnapshot* best = nullptr;
    double best_dist = 0;
    for (const auto& [at, snap] : r.snapshots) {
        const double dist = std::abs(at - t);
        if (!best || dist < best_dist) {
            best = &snap;
            best_dist = dist;
        }
    }
    return *best;
}

std::string summary_text(const RunResult& r) {
    std::string out;
    for (const auto& [name, value] : r.summary)
        out += name + " = " + format_double(value) + "\n";
    return out;
}

} // namespace p2p
