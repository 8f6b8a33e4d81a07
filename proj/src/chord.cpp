#include "p2p/chord.hpp"

#include <algorithm>

#include "p2p/errors.hpp"

namespace p2p {

NodeId successor_oracle(const std::vector<std::uint64_t>& sorted_ids, std::uint64_t key) {
    if (sorted_ids.empty())
        throw EmptyRing("successor_oracle on empty ring");
    const auto it = std::lower_bound(sorted_ids.begin(), sorted_ids.end(), key);
    return NodeId{it != sorted_ids.end() ? *it : sorted_ids.front()};
}

ChordRing::ChordRing(SimEngine& engine, ChordConfig cfg) : engine_(engine), cfg_(cfg) {
    if (!cfg_.ks.valid())
        throw InvalidParams("ChordRing: key space m_bits must be in [1,64]");
    if (cfg_.republish_period_s > 0 && cfg_.descriptor_lifetime_s &&
        cfg_.republish_period_s >= *cfg_.descriptor_lifetime_s)
        throw InvalidParams("ChordRing: republish period must be below descriptor lifetime");
    engine_.add_timer_handler([this](NodeId owner, int kind) { on_timer(owner, kind); });
}

bool ChordRing::live(NodeId n) const { return nodes_.count(n) != 0 && engine_.is_live(n); }

void ChordRing::arm_timers(NodeId n) {
    engine_.schedule_timer(cfg_.stabilize_period_s, n, kMaintenanceTimer);
    if (cfg_.audit_period_s > 0)
        engine_.schedule_timer(cfg_.audit_period_s, n, kAuditTimer);
    if (cfg_.republish_period_s > 0)
        engine_.schedule_timer(cfg_.republish_period_s, n, kRepublishTimer);
}

void ChordRing::create(NodeId first) {
    if (!engine_.is_live(first))
        engine_.add_node(first);
    ChordNode node;
    node.id = first;
    node.successor = first;
    node.finger.assign(std::size_t(cfg_.ks.m_bits), first);
    node.successor_list.assign(cfg_.succ_list_len, first);
    nodes_.emplace(first, std::move(node));
    arm_timers(first);
}

void ChordRing::join(NodeId n, NodeId via) {
    if (!live(via))
        throw JoinFailed("join contact is unreachable");
    if (!engine_.is_live(n))
        engine_.add_node(n);
    ChordNode node;
    node.id = n;
    LookupResult succ;
    try {
        succ = lookup_scalable(via, n.value);
    } catch (const LookupTimeout&) {
        engine_.metrics().add(engine_.now(), "dsm.join_failed", std::to_string(n.value), 1);
        throw JoinFailed("lookup through contact failed");
    }
    node.successor = succ.owner;
    node.finger.assign(std::size_t(cfg_.ks.m_bits), succ.owner);
    node.successor_list.assign(cfg_.succ_list_len, succ.owner);
    nodes_.insert_or_assign(n, std::move(node));
    arm_timers(n);
}

NodeId ChordRing::first_live_successor(const ChordNode& n) const {
    if (live(n.successor))
        return n.successor;
    for (NodeId s : n.successor_list)
        if (live(s))
            return s;
    throw LookupTimeout("no live successor for node " + std::to_string(n.id.value));
}

bool ChordRing::owns(NodeId n, std::uint64_t key) const {
    const ChordNode& c = nodes_.at(n);
    if (c.successor == n)
        return true; // alone on the ring
    if (c.predecessor && live(*c.predecessor) && *c.predecessor != n)
        return cfg_.ks.in_half_open(c.predecessor->value, n.value, key);
    return false;
}

NodeId ChordRing::closest_preceding(NodeId n, std::uint64_t key) const {
    const ChordNode& c = nodes_.at(n);
    for (auto it = c.finger.rbegin(); it != c.finger.rend(); ++it) {
        if (live(*it) && cfg_.ks.in_open(n.value, key, it->value))
            return *it;
    }
    return n;
}

LookupResult ChordRing::lookup_basic(NodeId from, std::uint64_t key) const {
    if (nodes_.empty())
        throw EmptyRing("lookup on empty ring");
    LookupResult r;
    r.path.push_back(from);
    NodeId cur = from;
    const std::size_t guard = nodes_.size() + 2;
    for (std::size_t step = 0; step < guard; ++step) {
        if (owns(cur, key)) {
            r.owner = cur;
            return r;
        }
        const NodeId succ = first_live_successor(nodes_.at(cur));
        if (cfg_.ks.in_half_open(cur.value, succ.value, key)) {
            r.owner = succ;
            r.hops += 1;
            r.path.push_back(succ);
            return r;
        }
        cur = succ;
        r.hops += 1;
        r.path.push_back(cur);
    }
    throw LookupTimeout("basic lookup exceeded ring size");
}

LookupResult ChordRing::lookup_scalable(NodeId from, std::uint64_t key) const {
    if (nodes_.empty())
        throw EmptyRing("lookup on empty ring");
    LookupResult r;
    r.path.push_back(from);
    NodeId cur = from;
    while (true) {
        if (owns(cur, key)) {
            r.owner = cur;
            return r;
        }
        if (r.hops >= cfg_.ks.m_bits)
            throw LookupTimeout("scalable lookup exceeded m_bits hops");
        const NodeId succ = first_live_successor(nodes_.at(cur));
        if (cfg_.ks.in_half_open(cur.value, succ.value, key)) {
            r.owner = succ;
            r.hops += 1;
            r.path.push_back(succ);
            return r;
        }
        NodeId next = closest_preceding(cur, key);
        if (next == cur)
            next = succ; // fingers give nothing better; fall back to the ring
        cur = next;
        r.hops += 1;
        r.path.push_back(cur);
    }
}

void ChordRing::refresh_successor_list(ChordNode& n) {
    const NodeId succ = n.successor;
    if (!live(succ))
        return;
    std::vector<NodeId> list;
    list.push_back(succ);
    for (NodeId s : nodes_.at(succ).successor_list) {
        if (list.size() >= cfg_.succ_list_len)
            break;
        if (s != n.id)
            list.push_back(s);
    }
    n.successor_list = std::move(list);
}

void ChordRing::stabilize(NodeId id) {
    if (!live(id))
        return;
    ChordNode& n = nodes_.at(id);
    NodeId succ;
    try {
        succ = first_live_successor(n);
    } catch (const LookupTimeout&) {
        return; // isolated; wait for others to notify us
    }
    n.successor = succ;
    const ChordNode& sn = nodes_.at(succ);
    if (sn.predecessor && live(*sn.predecessor)) {
        const NodeId x = *sn.predecessor;
        const bool between = (succ == id) ? (x != id) : cfg_.ks.in_open(id.value, succ.value, x.value);
        if (between)
            n.successor = x;
    }
    if (n.successor != id)
        notify(n.successor, id);
    refresh_successor_list(n);
    if (!n.finger.empty())
        n.finger[0] = n.successor;
}

void ChordRing::notify(NodeId target, NodeId candidate) {
    if (!live(target) || target == candidate)
        return;
    ChordNode& t = nodes_.at(target);
    if (!t.predecessor || !live(*t.predecessor) ||
        cfg_.ks.in_open(t.predecessor->value, target.value, candidate.value))
        t.predecessor = candidate;
}

void ChordRing::fix_finger(NodeId id, int i) {
    if (!live(id) || i < 1 || i > cfg_.ks.m_bits)
        return;
    ChordNode& n = nodes_.at(id);
    const std::uint64_t start = cfg_.ks.add(id.value, std::uint64_t(1) << (i - 1));
    try {
        n.finger[std::size_t(i - 1)] = lookup_scalable(id, start).owner;
    } catch (const LookupTimeout&) {
        // keep the stale entry; a later round repairs it
    }
}

int ChordRing::put(NodeId via, Descriptor d) {
    const LookupResult r = lookup_scalable(via, d.key.value);
    nodes_.at(r.owner).store.put(d);
    if (nodes_.count(d.owner))
        nodes_.at(d.owner).published[d.key] = d;
    return r.hops;
}

std::vector<Descriptor> ChordRing::get(NodeId via, ResourceKey key) const {
    const LookupResult r = lookup_scalable(via, key.value);
    return nodes_.at(r.owner).store.get(key, engine_.now());
}

void ChordRing::on_timer(NodeId owner, int kind) {
    if (!nodes_.count(owner) || !engine_.is_live(owner))
        return;
    switch (kind) {
    case kMaintenanceTimer: {
        stabilize(owner);
        const int i = 1 + int(engine_.rng().index(std::size_t(cfg_.ks.m_bits)));
        fix_finger(owner, i);
        engine_.schedule_timer(cfg_.stabilize_period_s, owner, kMaintenanceTimer);
        break;
    }
    case kAuditTimer: {
        // Ask a random other node to look our own key up; a miss hints at an
        // inconsistent ring view. Metric only, never a repair action.
        std::vector<NodeId> others;
        for (const auto& [id, node] : nodes_)
            if (id != owner && live(id))
                others.push_back(id);
        if (!others.empty()) {
            const NodeId via = others[engine_.rng().index(others.size())];
            double ok = 0;
            try {
                ok = lookup_scalable(via, owner.value).owner == owner ? 1.0 : 0.0;
            } catch (const LookupTimeout&) {
                ok = 0;
            }
            audits_run_++;
            engine_.metrics().add(engine_.now(), "dsm.audit_ok", std::to_string(owner.value), ok);
        }
        engine_.schedule_timer(cfg_.audit_period_s, owner, kAuditTimer);
        break;
    }
    case kRepublishTimer: {
        ChordNode& n = nodes_.at(owner);
        for (auto& [key, d] : n.published) {
            d.published_at = engine_.now();
            if (cfg_.descriptor_lifetime_s)
                d.lifetime = cfg_.descriptor_lifetime_s;
            try {
                put(owner, d);
            } catch (const LookupTimeout&) {
            }
        }
        engine_.schedule_timer(cfg_.republish_period_s, owner, kRepublishTimer);
        break;
    }
    default:
        break;
    }
}

std::vector<std::uint64_t> ChordRing::live_ids_sorted() const {
    std::vector<std::uint64_t> ids;
    for (const auto& [id, node] : nodes_)
        if (engine_.is_live(id))
            ids.push_back(id.value);
    std::sort(ids.begin(), ids.end());
    return ids;
}

bool ChordRing::successors_match_oracle() const {
    const auto ids = live_ids_sorted();
    if (ids.empty())
        return true;
    for (const auto& [id, node] : nodes_) {
        if (!engine_.is_live(id))
            continue;
        const NodeId expect = successor_oracle(ids, cfg_.ks.add(id.value, 1));
        if (node.successor != expect)
            return false;
    }
    return true;
}

bool ChordRing::fingers_match_oracle() const {
    const auto ids = live_ids_sorted();
    if (ids.empty())
        return true;
    for (const auto& [id, node] : nodes_) {
        if (!engine_.is_live(id))
            continue;
        for (int i = 1; i <= cfg_.ks.m_bits; ++i) {
            const std::uint64_t start = cfg_.ks.add(id.value, std::uint64_t(1) << (i - 1));
            if (node.finger[std::size_t(i - 1)] != successor_oracle(ids, start))
                return false;
        }
    }
    return true;
}

} // namespace p2p
