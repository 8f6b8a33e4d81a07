#include "p2p/flooding.hpp"

#include "p2p/errors.hpp"

namespace p2p {

std::vector<LookupHit> FloodingNode::local_lookup(ResourceKey key, double now,
                                                  bool use_cache) const {
    std::vector<LookupHit> out;
    for (const Descriptor& d : store.get(key, now))
        out.push_back(LookupHit{d, false});
    if (use_cache)
        for (const Descriptor& d : response_cache.get(key, now))
            out.push_back(LookupHit{d, true});
    return out;
}

FloodingNetwork::FloodingNetwork(SimEngine& engine, FloodingConfig cfg)
    : engine_(engine), cfg_(cfg) {
    engine_.add_message_handler([this](NodeId to, const Message& m) { on_message(to, m); });
    engine_.add_timer_handler([this](NodeId owner, int kind) { on_timer(owner, kind); });
    engine_.add_leave_handler([this](NodeId n) { on_leave(n); });
}

void FloodingNetwork::add_node(NodeId n) {
    if (!engine_.is_live(n))
        engine_.add_node(n);
    FloodingNode fn;
    fn.view.max_size = cfg_.peerview_max;
    fn.seen = SeenTable(cfg_.seen_retention_s);
    nodes_.emplace(n, std::move(fn));
    if (cfg_.ping_period_s > 0)
        engine_.schedule_timer(cfg_.ping_period_s, n, kPingTimer);
}

void FloodingNetwork::add_link(NodeId a, NodeId b) {
    nodes_.at(a).view.add(a, b);
    nodes_.at(b).view.add(b, a);
}

void FloodingNetwork::build_from_snapshot(const TopologySnapshot& t) {
    for (NodeId n : t.nodes)
        add_node(n);
    for (const auto& [u, v] : t.edges)
        add_link(u, v);
}

void FloodingNetwork::publish_local(NodeId owner, const Descriptor& d) {
    nodes_.at(owner).store.put(d);
}

std::uint64_t FloodingNetwork::flood_query(NodeId origin, ResourceKey key,
                                           std::optional<int> ttl_override,
                                           std::optional<double> forward_prob_override,
                                           std::optional<std::uint64_t> group_tag) {
    const int ttl = ttl_override.value_or(cfg_.ttl);
    if (ttl < 0)
        throw InvalidParams("flood_query: ttl must be >= 0");
    const double fp = forward_prob_override.value_or(cfg_.forward_prob);
    if (fp < 0 || fp > 1)
        throw InvalidParams("flood_query: forward_prob in [0,1]");

    FloodingNode& on = nodes_.at(origin);
    on.seen.evict(engine_.now());

    Message msg = engine_.make_message(MsgKind::Query, origin, QueryPayload{key}, ttl, group_tag);
    msg.hop_from = origin;
    on.seen.record(msg.msg_id, origin, engine_.now());

    QueryTrace trace;
    trace.origin = origin;
    traces_.emplace(msg.msg_id, std::move(trace));
    query_forward_prob_.emplace(msg.msg_id, fp);

    for (NodeId nb : on.view.neighbors) {
        engine_.send(origin, nb, msg);
        traces_.at(msg.msg_id).query_copies++;
    }
    return msg.msg_id;
}

const QueryTrace& FloodingNetwork::trace(std::uint64_t msg_id) const {
    return traces_.at(msg_id);
}

FloodingNode& FloodingNetwork::node(NodeId n) { return nodes_.at(n); }
const FloodingNode& FloodingNetwork::node(NodeId n) const { return nodes_.at(n); }

void FloodingNetwork::on_message(NodeId to, const Message& msg) {
    if (!nodes_.count(to))
        return;
    switch (msg.kind) {
    case MsgKind::Query:
        handle_query(to, msg);
        break;
    case MsgKind::QueryHit:
        handle_query_hit(to, msg);
        break;
    case MsgKind::Ping: {
        FloodingNode& n = nodes_.at(to);
        if (n.seen.seen(msg.msg_id))
            return;
        n.seen.record(msg.msg_id, msg.hop_from, engine_.now());
        Message pong = engine_.make_message(MsgKind::Pong, to, PongPayload{to, msg.msg_id});
        pong.hop_from = to;
        engine_.send(to, msg.hop_from, pong);
        relay(to, msg, 1.0);
        break;
    }
    case MsgKind::Pong: {
        FloodingNode& n = nodes_.at(to);
        const auto pay = std::get_if<PongPayload>(&msg.payload);
        if (!pay)
            return;
        const auto back = n.seen.first_from(pay->ping_msg_id);
        if (back.has_value() && *back != to) {
            Message fwd = msg;
            fwd.hop_from = to;
            engine_.send(to, *back, fwd);
        } else {
            n.view.add(to, pay->responder);
        }
        break;
    }
    default:
        break;
    }
}

void FloodingNetwork::handle_query(NodeId at, const Message& msg) {
    auto trace_it = traces_.find(msg.msg_id);
    if (group_ && !scope_deliver(msg, *group_, at)) {
        scope_drops_++;
        return;
    }
    FloodingNode& n = nodes_.at(at);
    if (n.seen.seen(msg.msg_id)) {
        if (trace_it != traces_.end())
            trace_it->second.duplicate_drops++;
        return;
    }
    n.seen.record(msg.msg_id, msg.hop_from, engine_.now());
    if (trace_it != traces_.end())
        trace_it->second.processed.insert(at);

    const auto* q = std::get_if<QueryPayload>(&msg.payload);
    if (q) {
        if (cfg_.response_cache)
            n.response_cache.evict_expired(engine_.now());
        const auto hits = n.local_lookup(q->key, engine_.now(), cfg_.response_cache);
        if (!hits.empty()) {
            QueryHitPayload payload;
            payload.query_msg_id = msg.msg_id;
            payload.key = q->key;
            payload.provider = at;
            payload.hops = 1;
            for (const LookupHit& h : hits) {
                payload.hits.push_back(h.descriptor);
                payload.stale = payload.stale || h.stale;
            }
            Message reply = engine_.make_message(MsgKind::QueryHit, at, payload);
            reply.hop_from = at;
            engine_.send(at, msg.hop_from, reply);
        }
    }

    const double fp = query_forward_prob_.count(msg.msg_id)
                          ? query_forward_prob_.at(msg.msg_id)
                          : cfg_.forward_prob;
    relay(at, msg, fp);
}

void FloodingNetwork::relay(NodeId from, const Message& msg, double forward_prob) {
    const int ttl_out = msg.ttl.value_or(0) - 1; // decrement before forward
    if (ttl_out <= 0)
        return; // arrived with ttl 0 or 1: processed, not relayed further
    Message fwd = msg;
    fwd.ttl = ttl_out;
    const NodeId arrived_from = msg.hop_from;
    fwd.hop_from = from;
    auto trace_it = traces_.find(msg.msg_id);
    for (NodeId nb : nodes_.at(from).view.neighbors) {
        if (nb == arrived_from)
            continue; // never back to the sender it arrived from
        if (forward_prob < 1.0 && !engine_.rng().bernoulli(forward_prob))
            continue;
        engine_.send(from, nb, fwd);
        if (trace_it != traces_.end() && msg.kind == MsgKind::Query)
            trace_it->second.query_copies++;
    }
}

void FloodingNetwork::handle_query_hit(NodeId at, const Message& msg) {
    const auto* pay = std::get_if<QueryHitPayload>(&msg.payload);
    if (!pay)
        return;
    FloodingNode& n = nodes_.at(at);
    auto trace_it = traces_.find(pay->query_msg_id);
    const bool is_origin =
        trace_it != traces_.end() && trace_it->second.origin == at;

    if (cfg_.response_cache && !pay->stale) {
        for (const Descriptor& d : pay->hits) {
            Descriptor cached = d;
            cached.published_at = engine_.now();
            cached.lifetime = cfg_.cache_lifetime_s;
            n.response_cache.put(cached);
        }
    }

    if (is_origin) {
        trace_it->second.hits.push_back(QueryHitRecord{pay->provider, pay->hops, pay->stale});
        return;
    }
    const auto back = n.seen.first_from(pay->query_msg_id);
    if (!back.has_value() || !engine_.is_live(*back)) {
        path_lost_++;
        return;
    }
    Message fwd = msg;
    auto& fpay = std::get<QueryHitPayload>(fwd.payload);
    fpay.hops += 1;
    fwd.hop_from = at;
    if (trace_it != traces_.end())
        trace_it->second.hit_relays.insert(at);
    engine_.send(at, *back, fwd);
}

void FloodingNetwork::on_timer(NodeId owner, int kind) {
    if (kind != kPingTimer || !nodes_.count(owner))
        return;
    send_ping(owner);
    engine_.schedule_timer(cfg_.ping_period_s, owner, kPingTimer);
}

void FloodingNetwork::send_ping(NodeId origin) {
    FloodingNode& on = nodes_.at(origin);
    Message msg = engine_.make_message(MsgKind::Ping, origin, std::monostate{}, cfg_.ping_ttl);
    msg.hop_from = origin;
    on.seen.record(msg.msg_id, origin, engine_.now());
    for (NodeId nb : on.view.neighbors)
        engine_.send(origin, nb, msg);
}

void FloodingNetwork::on_leave(NodeId gone) {
    if (!nodes_.count(gone))
        return;
    // Repair: survivors drop the reference and refill from a short random
    // walk started at one of their remaining neighbors.
    for (auto& [id, node] : nodes_) {
        if (id == gone || !engine_.is_live(id))
            continue;
        if (!node.view.neighbors.count(gone))
            continue;
        node.view.remove(gone);
        std::vector<NodeId> alive;
        for (NodeId nb : node.view.neighbors)
            if (engine_.is_live(nb))
                alive.push_back(nb);
        if (alive.empty())
            continue;
        NodeId cur = alive[engine_.rng().index(alive.size())];
        for (int step = 0; step < 3; ++step) {
            std::vector<NodeId> next;
            for (NodeId nb : nodes_.at(cur).view.neighbors)
                if (engine_.is_live(nb))
                    next.push_back(nb);
            if (next.empty())
                break;
            cur = next[engine_.rng().index(next.size())];
        }
        if (cur != id)
            node.view.add(id, cur);
    }
}

TopologySnapshot FloodingNetwork::snapshot() const {
    std::vector<NodeId> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (const auto& [id, node] : nodes_) {
        if (!engine_.is_live(id))
            continue;
        nodes.push_back(id);
        for (NodeId nb : node.view.neighbors)
            if (engine_.is_live(nb))
                edges.emplace_back(id, nb);
    }
    return make_snapshot(std::move(nodes), std::move(edges));
}

} // namespace p2p
