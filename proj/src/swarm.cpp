#include "p2p/swarm.hpp"

#include <algorithm>
#include <cmath>

#include "p2p/errors.hpp"

namespace p2p {

Digest ContentSpec::info_digest() const {
    Sha1 h;
    for (const Digest& d : piece_digests)
        h.update(std::span<const std::uint8_t>(d.data(), d.size()));
    return h.finish();
}

std::vector<std::uint8_t> ContentSpec::synthetic_piece_bytes(std::uint64_t content_seed,
                                                             std::size_t idx,
                                                             std::uint32_t piece_bytes) {
    Rng r(content_seed ^ (0x9e3779b97f4a7c15ULL * (idx + 1)));
    std::vector<std::uint8_t> out(piece_bytes);
    std::size_t i = 0;
    while (i < out.size()) {
        std::uint64_t word = r.next();
        for (int b = 0; b < 8 && i < out.size(); ++b, ++i) {
            out[i] = std::uint8_t(word);
            word >>= 8;
        }
    }
    return out;
}

ContentSpec ContentSpec::synthetic(std::uint64_t total_size, std::uint32_t piece_size,
                                   std::uint32_t block_size, std::uint64_t content_seed) {
    ContentSpec spec;
    spec.total_size = total_size;
    spec.piece_size = piece_size;
    spec.block_size = block_size;
    if (!spec.valid())
        throw InvalidParams("ContentSpec: block size must divide piece size");
    for (std::size_t i = 0; i < spec.piece_count(); ++i) {
        const auto bytes = synthetic_piece_bytes(content_seed, i, spec.piece_bytes(i));
        spec.piece_digests.push_back(Sha1::of(bytes));
    }
    return spec;
}

PieceCheck verify_piece(std::span<const std::uint8_t> data, const ContentSpec& spec,
                        std::size_t idx) {
    if (idx >= spec.piece_digests.size())
        throw InvalidParams("verify_piece: no digest for piece index");
    if (data.size() != spec.piece_bytes(idx))
        throw InvalidParams("verify_piece: piece is not fully assembled");
    return Sha1::of(data) == spec.piece_digests[idx] ? PieceCheck::Verified : PieceCheck::Corrupt;
}

void PieceMap::add_peer(NodeId peer) {
    bitfields_.emplace(peer, std::vector<bool>(counts_.size(), false));
}

void PieceMap::set_bitfield(NodeId peer, const std::vector<bool>& have) {
    if (have.size() != counts_.size())
        throw InvalidParams("PieceMap: bitfield size mismatch");
    remove_peer(peer);
    bitfields_[peer] = have;
    for (std::size_t i = 0; i < have.size(); ++i)
        if (have[i])
            counts_[i]++;
}

void PieceMap::set_have(NodeId peer, std::size_t piece) {
    auto& bf = bitfields_.at(peer);
    if (!bf.at(piece)) {
        bf[piece] = true;
        counts_[piece]++;
    }
}

void PieceMap::remove_peer(NodeId peer) {
    const auto it = bitfields_.find(peer);
    if (it == bitfields_.end())
        return;
    for (std::size_t i = 0; i < it->second.size(); ++i)
        if (it->second[i])
            counts_[i]--;
    bitfields_.erase(it);
}

bool PieceMap::has(NodeId peer, std::size_t piece) const {
    const auto it = bitfields_.find(peer);
    return it != bitfields_.end() && it->second.at(piece);
}

double PieceMap::replica_variance() const {
    if (counts_.empty())
        return 0;
    double mean = 0;
    for (std::uint32_t c : counts_)
        mean += c;
    mean /= double(counts_.size());
    double var = 0;
    for (std::uint32_t c : counts_)
        var += (c - mean) * (c - mean);
    return var / double(counts_.size());
}

namespace {

std::vector<std::uint32_t> available_candidates(const PieceMap& availability,
                                                const std::set<std::uint32_t>& wanted) {
    std::vector<std::uint32_t> out;
    for (std::uint32_t p : wanted)
        if (availability.availability(p) >= 1)
            out.push_back(p);
    return out;
}

} // namespace

std::uint32_t rarest_first_pick(const PieceMap& availability, const std::set<std::uint32_t>& wanted,
                                Rng& rng) {
    const auto candidates = available_candidates(availability, wanted);
    if (candidates.empty())
        throw NothingWanted("rarest_first_pick: no wanted piece is available");
    std::uint32_t min_count = availability.availability(candidates.front());
    for (std::uint32_t p : candidates)
        min_count = std::min(min_count, availability.availability(p));
    std::vector<std::uint32_t> rarest;
    for (std::uint32_t p : candidates)
        if (availability.availability(p) == min_count)
            rarest.push_back(p);
    return rarest[rng.index(rarest.size())];
}

std::uint32_t uniform_pick(const PieceMap& availability, const std::set<std::uint32_t>& wanted,
                           Rng& rng) {
    const auto candidates = available_candidates(availability, wanted);
    if (candidates.empty())
        throw NothingWanted("uniform_pick: no wanted piece is available");
    return candidates[rng.index(candidates.size())];
}

Digest majority_version(const std::vector<std::pair<Digest, std::size_t>>& observed) {
    if (observed.empty())
        throw InvalidParams("majority_version: empty observation list");
    const auto best = std::max_element(
        observed.begin(), observed.end(),
        [](const auto& a, const auto& b) { return a.second < b.second; });
    for (auto it = observed.begin(); it != observed.end(); ++it)
        if (it != best && it->second == best->second)
            throw AmbiguousVersion("majority_version: replica counts tie");
    return best->first;
}

std::vector<NodeId> replicate_active(const std::set<NodeId>& holders, const std::set<NodeId>& live,
                                     std::size_t k_target, Rng& rng) {
    std::vector<NodeId> candidates;
    for (NodeId n : live)
        if (!holders.count(n))
            candidates.push_back(n);
    if (k_target > candidates.size())
        throw InsufficientPeers("replicate_active: not enough live non-holders");
    return rng.sample(candidates, k_target);
}

std::vector<NodeId> choke_round_regular(std::vector<RatedPeer> interested, std::size_t m_slots,
                                        std::size_t k_optimistic, Rng* tie_rng) {
    if (k_optimistic > m_slots)
        throw InvalidParams("choke_round_regular: K must not exceed M");
    const std::size_t slots = m_slots - k_optimistic;
    if (tie_rng) {
        // seeded shuffle first, then a stable sort on rate alone: equal
        // rates end up in shuffled order
        for (std::size_t i = interested.size(); i > 1; --i)
            std::swap(interested[i - 1], interested[tie_rng->index(i)]);
        std::stable_sort(interested.begin(), interested.end(),
                         [](const RatedPeer& a, const RatedPeer& b) { return a.rate > b.rate; });
    } else {
        std::sort(interested.begin(), interested.end(),
                  [](const RatedPeer& a, const RatedPeer& b) {
                      if (a.rate != b.rate)
                          return a.rate > b.rate;
                      return a.id < b.id;
                  });
    }
    if (interested.size() > slots)
        interested.resize(slots);
    std::vector<NodeId> out;
    for (const RatedPeer& p : interested)
        out.push_back(p.id);
    return out;
}

std::vector<NodeId> choke_round_optimistic(const std::set<NodeId>& interested,
                                           const std::vector<NodeId>& regular, std::size_t k,
                                           Rng& rng) {
    std::vector<NodeId> pool;
    for (NodeId n : interested)
        if (std::find(regular.begin(), regular.end(), n) == regular.end())
            pool.push_back(n);
    return rng.sample(pool, k);
}

void RateWindow::add(double now, double bytes) {
    samples_.emplace_back(now, bytes);
    while (!samples_.empty() && samples_.front().first <= now - window_)
        samples_.pop_front();
}

double RateWindow::rate(double now) const {
    while (!samples_.empty() && samples_.front().first <= now - window_)
        samples_.pop_front();
    double sum = 0;
    for (const auto& [t, b] : samples_)
        sum += b;
    return sum / window_;
}

ChokeScheduler::ChokeScheduler(SimEngine& engine, ChokeParams params,
                               std::function<std::vector<RatedPeer>()> interested_source)
    : engine_(engine), params_(params), source_(std::move(interested_source)) {}

void ChokeScheduler::start() {
    // Regular ticks at k*T1, optimistic at k*T2; at a coincidence the regular
    // round runs first so the optimistic pick sees the fresh regular set.
    struct Ticker {
        ChokeScheduler* self;
        std::uint64_t k1 = 1, k2 = 1;
        void arm() {
            const double t1 = self->params_.t1_s * double(k1);
            const double t2 = self->params_.t2_s * double(k2);
            const double at = std::min(t1, t2);
            auto carry = *this;
            self->engine_.schedule_call_at(at, [carry]() mutable {
                const double now = carry.self->engine_.now();
                if (now >= carry.self->params_.t1_s * double(carry.k1)) {
                    carry.self->regular_round();
                    carry.k1++;
                }
                if (now >= carry.self->params_.t2_s * double(carry.k2)) {
                    carry.self->optimistic_round();
                    carry.k2++;
                }
                carry.arm();
            });
        }
    };
    Ticker{this}.arm();
}

void ChokeScheduler::regular_round() {
    regular_ = choke_round_regular(source_(), params_.m_slots, params_.k_optimistic);
    history_.push_back(Round{engine_.now(), false, regular_});
}

void ChokeScheduler::optimistic_round() {
    std::set<NodeId> interested;
    for (const RatedPeer& p : source_())
        interested.insert(p.id);
    optimistic_ = choke_round_optimistic(interested, regular_, params_.k_optimistic, engine_.rng());
    history_.push_back(Round{engine_.now(), true, optimistic_});
}

SwarmSim::SwarmSim(SimEngine& engine, Tracker& tracker, ContentSpec content, SwarmParams params,
                   std::vector<SwarmPeerSpec> peers)
    : engine_(engine), tracker_(tracker), content_(std::move(content)), params_(params),
      piece_map_(content_.piece_count()) {
    if (!content_.valid())
        throw InvalidParams("SwarmSim: invalid content spec");
    torrent_ = content_.piece_digests.empty() ? Sha1::of(std::string_view("synthetic"))
                                              : content_.info_digest();
    for (const SwarmPeerSpec& spec : peers) {
        Peer p;
        p.spec = spec;
        p.have.assign(content_.piece_count(), spec.cls == PeerClass::Seed);
        p.have_count = spec.cls == PeerClass::Seed ? content_.piece_count() : 0;
        peers_.emplace(spec.id, std::move(p));
        if (spec.cls == PeerClass::Seed)
            initial_seeds_.insert(spec.id);
    }
    engine_.add_message_handler([this](NodeId to, const Message& m) { on_message(to, m); });
    engine_.add_leave_handler([this](NodeId n) { on_leave(n); });
}

bool SwarmSim::is_initial_seed(NodeId n) const { return initial_seeds_.count(n) != 0; }

void SwarmSim::start() {
    if (started_)
        return;
    started_ = true;
    tracker_.publish(torrent_);
    for (auto& [id, p] : peers_) {
        if (!engine_.is_live(id))
            engine_.add_node(id);
        piece_map_.add_peer(id);
        if (p.spec.cls == PeerClass::Seed)
            piece_map_.set_bitfield(id, p.have);
        announce(id);
    }

    // Round dispatcher: regular rounds at k*T1, optimistic at k*T2; regular
    // first when they coincide.
    struct Ticker {
        SwarmSim* self;
        std::uint64_t k1 = 1, k2 = 1;
        void arm(double base) {
            const double t1 = base + self->params_.choke.t1_s * double(k1);
            const double t2 = base + self->params_.choke.t2_s * double(k2);
            auto carry = *this;
            const double b = base;
            self->engine_.schedule_call_at(std::min(t1, t2), [carry, b]() mutable {
                const double now = carry.self->engine_.now();
                const bool reg = now >= b + carry.self->params_.choke.t1_s * double(carry.k1);
                const bool opt = now >= b + carry.self->params_.choke.t2_s * double(carry.k2);
                if (reg)
                    carry.k1++;
                if (opt)
                    carry.k2++;
                carry.self->run_choke_rounds(reg, opt);
                carry.arm(b);
            });
        }
    };
    Ticker{this}.arm(engine_.now());

    if (params_.reannounce_s > 0) {
        struct Announcer {
            SwarmSim* self;
            void arm() {
                auto carry = *this;
                self->engine_.schedule_call(self->params_.reannounce_s, [carry]() mutable {
                    for (auto& [id, p] : carry.self->peers_)
                        if (!p.departed && carry.self->engine_.is_live(id) && !p.complete())
                            carry.self->announce(id);
                    carry.arm();
                });
            }
        };
        Announcer{this}.arm();
    }
}

void SwarmSim::announce(NodeId peer) {
    const auto handout = tracker_.announce(peer, torrent_, engine_.rng());
    for (NodeId other : handout)
        connect(peer, other);
}

void SwarmSim::connect(NodeId a, NodeId b) {
    Peer& pa = peers_.at(a);
    Peer& pb = peers_.at(b);
    if (pa.neighbors.count(b) || pa.departed || pb.departed)
        return;
    pa.neighbors.insert(b);
    pb.neighbors.insert(a);
    Neighbor na;
    na.bitfield.assign(content_.piece_count(), false);
    na.download_rate = RateWindow(params_.choke.rate_window_s);
    pa.nstate.emplace(b, na);
    pb.nstate.emplace(a, na);
    send_bitfield(a, b);
    send_bitfield(b, a);
}

void SwarmSim::send_bitfield(NodeId from, NodeId to) {
    Message m = engine_.make_message(MsgKind::Bitfield, from, BitfieldPayload{peers_.at(from).have});
    m.hop_from = from;
    engine_.send(from, to, m);
}

void SwarmSim::update_interest(NodeId me, NodeId them) {
    Peer& p = peers_.at(me);
    const auto it = p.nstate.find(them);
    if (it == p.nstate.end())
        return;
    Neighbor& ns = it->second;
    bool want = false;
    for (std::size_t i = 0; i < ns.bitfield.size() && !want; ++i)
        want = ns.bitfield[i] && !p.have[i];
    if (want == ns.we_interested)
        return;
    ns.we_interested = want;
    Message m = engine_.make_message(want ? MsgKind::Interested : MsgKind::NotInterested, me);
    m.hop_from = me;
    engine_.send(me, them, m);
}

void SwarmSim::run_choke_rounds(bool regular, bool optimistic) {
    for (auto& [id, p] : peers_) {
        if (p.departed || !engine_.is_live(id))
            continue;
        std::vector<RatedPeer> interested;
        std::set<NodeId> interested_ids;
        for (NodeId nb : p.neighbors) {
            const Neighbor& ns = p.nstate.at(nb);
            if (!ns.interested_in_us || !engine_.is_live(nb))
                continue;
            interested.push_back(RatedPeer{nb, ns.download_rate.rate(engine_.now())});
            interested_ids.insert(nb);
        }
        std::vector<NodeId> reg = p.regular_unchoked;
        std::vector<NodeId> opt = p.optimistic_unchoked;
        if (regular)
            reg = choke_round_regular(interested, params_.choke.m_slots,
                                      params_.choke.k_optimistic);
        // prune departed / now-regular peers from the held optimistic set
        opt.erase(std::remove_if(opt.begin(), opt.end(),
                                 [&](NodeId n) {
                                     return !interested_ids.count(n) ||
                                            std::find(reg.begin(), reg.end(), n) != reg.end();
                                 }),
                  opt.end());
        if (optimistic)
            opt = choke_round_optimistic(interested_ids, reg, params_.choke.k_optimistic,
                                         engine_.rng());
        apply_unchoke_sets(id, std::move(reg), std::move(opt));
    }
}

void SwarmSim::apply_unchoke_sets(NodeId me, std::vector<NodeId> regular,
                                  std::vector<NodeId> optimistic) {
    Peer& p = peers_.at(me);
    std::set<NodeId> before;
    for (NodeId n : p.regular_unchoked)
        before.insert(n);
    for (NodeId n : p.optimistic_unchoked)
        before.insert(n);
    std::set<NodeId> after;
    for (NodeId n : regular)
        after.insert(n);
    for (NodeId n : optimistic)
        after.insert(n);
    if (after.size() > params_.choke.m_slots)
        unchoke_cap_violations_++;
    p.regular_unchoked = std::move(regular);
    p.optimistic_unchoked = std::move(optimistic);

    for (NodeId gone : before) {
        if (after.count(gone) || !p.nstate.count(gone))
            continue;
        p.nstate.at(gone).we_choke_them = true;
        p.upload_queue[gone].clear();
        const auto conn = conn_active_.find({me, gone});
        if (conn != conn_active_.end())
            abort_transfer(conn->second);
        Message m = engine_.make_message(MsgKind::Choke, me);
        m.hop_from = me;
        engine_.send(me, gone, m);
    }
    for (NodeId fresh : after) {
        if (before.count(fresh) || !p.nstate.count(fresh))
            continue;
        p.nstate.at(fresh).we_choke_them = false;
        Message m = engine_.make_message(MsgKind::Unchoke, me);
        m.hop_from = me;
        engine_.send(me, fresh, m);
    }
    recompute_sender(me); // slot count changed, so per-slot shares did too
}

std::optional<std::pair<std::uint32_t, std::uint32_t>> SwarmSim::pick_block(Peer& me,
                                                                            NodeId them) {
    const Neighbor& ns = me.nstate.at(them);
    // continue partially downloaded pieces first
    for (auto& [piece, blocks] : me.partial) {
        if (!ns.bitfield[piece] || me.have[piece])
            continue;
        if (me.bad_sources.count(piece) && me.bad_sources.at(piece).count(them))
            continue;
        for (std::uint32_t b = 0; b < blocks.size(); ++b)
            if (!blocks[b] && !me.assigned.count({piece, b}))
                return std::make_pair(piece, b);
    }
    // otherwise open a new piece according to the selection policy
    std::set<std::uint32_t> wanted;
    for (std::uint32_t piece = 0; piece < me.have.size(); ++piece) {
        if (me.have[piece] || me.partial.count(piece) || !ns.bitfield[piece])
            continue;
        if (me.bad_sources.count(piece) && me.bad_sources.at(piece).count(them))
            continue;
        wanted.insert(piece);
    }
    if (wanted.empty())
        return std::nullopt;
    try {
        const std::uint32_t piece = params_.rarest_first
                                        ? rarest_first_pick(piece_map_, wanted, engine_.rng())
                                        : uniform_pick(piece_map_, wanted, engine_.rng());
        return std::make_pair(piece, 0u);
    } catch (const NothingWanted&) {
        return std::nullopt;
    }
}

void SwarmSim::refill_toward_unchokers(NodeId me, NodeId except) {
    const Peer& p = peers_.at(me);
    for (NodeId nb : std::vector<NodeId>(p.neighbors.begin(), p.neighbors.end()))
        if (nb != except)
            fill_pipeline(me, nb);
}

void SwarmSim::fill_pipeline(NodeId me, NodeId them) {
    Peer& p = peers_.at(me);
    if (p.departed || !engine_.is_live(me) || !p.nstate.count(them))
        return;
    Neighbor& ns = p.nstate.at(them);
    if (ns.they_choke_us || ns.snubbed_until > engine_.now())
        return;
    auto& reqs = p.outstanding[them];
    while (reqs.size() < params_.pipeline) {
        const auto pick = pick_block(p, them);
        if (!pick)
            break;
        const auto [piece, block] = *pick;
        if (!p.partial.count(piece)) {
            p.partial[piece].assign(content_.blocks_in_piece(piece), false);
            p.partial_corrupt[piece] = false;
        }
        p.assigned.insert({piece, block});
        const std::uint64_t assign_id = ++assign_counter_;
        reqs.push_back(Request{piece, block, assign_id});
        Message m =
            engine_.make_message(MsgKind::ChunkRequest, me, ChunkRequestPayload{piece, block});
        m.hop_from = me;
        engine_.send(me, them, m);
        engine_.schedule_call(params_.request_timeout_s, [this, me, them, assign_id]() {
            request_timeout(me, them, assign_id);
        });
    }
}

void SwarmSim::request_timeout(NodeId me, NodeId them, std::uint64_t assign_id) {
    if (!peers_.count(me))
        return;
    Peer& p = peers_.at(me);
    auto reqs_it = p.outstanding.find(them);
    if (reqs_it == p.outstanding.end())
        return;
    auto& reqs = reqs_it->second;
    const auto it = std::find_if(reqs.begin(), reqs.end(), [&](const Request& r) {
        return r.assign_id == assign_id;
    });
    if (it == reqs.end())
        return;
    request_timeouts_++;
    const std::uint32_t piece = it->piece, block = it->block;
    reqs.erase(it);
    p.assigned.erase({piece, block});
    if (p.nstate.count(them)) {
        // snub the stalled sender so the block can be fetched from somebody
        // that actually delivers; cleared the moment they send us anything
        p.nstate.at(them).snubbed_until = engine_.now() + 3 * params_.request_timeout_s;
        Message m = engine_.make_message(MsgKind::Cancel, me, ChunkRequestPayload{piece, block});
        m.hop_from = me;
        engine_.send(me, them, m);
    }
    for (NodeId nb : p.neighbors)
        if (nb != them)
            fill_pipeline(me, nb);
}

void SwarmSim::handle_request(NodeId me, NodeId from, std::uint32_t piece, std::uint32_t block) {
    Peer& p = peers_.at(me);
    const auto it = p.nstate.find(from);
    if (it == p.nstate.end() || it->second.we_choke_them)
        return; // request crossed a choke; the requester will retry later
    if (piece >= p.have.size() || !p.have[piece])
        return;
    p.upload_queue[from].push_back({piece, block});
    if (!conn_active_.count({me, from}))
        start_next_upload(me, from);
}

void SwarmSim::handle_cancel(NodeId me, NodeId from, std::uint32_t piece, std::uint32_t block) {
    Peer& p = peers_.at(me);
    auto qit = p.upload_queue.find(from);
    if (qit != p.upload_queue.end()) {
        auto& q = qit->second;
        const auto it = std::find(q.begin(), q.end(), std::make_pair(piece, block));
        if (it != q.end())
            q.erase(it);
    }
    const auto conn = conn_active_.find({me, from});
    if (conn != conn_active_.end()) {
        const Transfer& t = transfers_.at(conn->second);
        if (t.piece == piece && t.block == block)
            abort_transfer(conn->second);
    }
}

void SwarmSim::start_next_upload(NodeId sender, NodeId receiver) {
    Peer& p = peers_.at(sender);
    auto qit = p.upload_queue.find(receiver);
    if (qit == p.upload_queue.end() || qit->second.empty())
        return;
    if (!engine_.is_live(sender) || !engine_.is_live(receiver))
        return;
    const auto [piece, block] = qit->second.front();
    qit->second.pop_front();

    Transfer t;
    t.id = ++transfer_counter_;
    t.sender = sender;
    t.receiver = receiver;
    t.piece = piece;
    t.block = block;
    t.remaining = double(content_.block_bytes(piece, block));
    t.last_update = engine_.now();
    transfers_.emplace(t.id, t);
    sender_active_[sender].insert(t.id);
    conn_active_[{sender, receiver}] = t.id;
    recompute_sender(sender);
}

void SwarmSim::recompute_sender(NodeId sender) {
    const auto it = sender_active_.find(sender);
    if (it == sender_active_.end() || it->second.empty())
        return;
    const Peer& p = peers_.at(sender);
    // Capacity is split over unchoke slots, not over in-progress transfers:
    // an idle slot wastes its share rather than subsidizing the remaining
    // requesters, otherwise a zero-upload peer that always has something to
    // ask for soaks up everyone's leftover bandwidth and tit-for-tat stops
    // mattering.
    std::set<NodeId> unchoked;
    for (NodeId n : p.regular_unchoked)
        unchoked.insert(n);
    for (NodeId n : p.optimistic_unchoked)
        unchoked.insert(n);
    const std::size_t slots = std::max<std::size_t>(1, unchoked.size());
    const double share = p.spec.up_bps > 0 ? p.spec.up_bps / double(slots) : 0.0;
    const double now = engine_.now();
    for (std::uint64_t id : it->second) {
        Transfer& t = transfers_.at(id);
        t.remaining = std::max(0.0, t.remaining - t.rate * (now - t.last_update));
        t.last_update = now;
        double rate = share;
        const double cap = peers_.at(t.receiver).spec.down_bps;
        if (cap > 0)
            rate = std::min(rate, cap);
        t.rate = rate;
        t.version++;
        schedule_completion(t);
    }
}

void SwarmSim::schedule_completion(Transfer& t) {
    if (t.rate <= 0)
        return; // parked until the sender's rates change
    const double eta = t.remaining / t.rate;
    const std::uint64_t id = t.id, version = t.version;
    engine_.schedule_call(eta, [this, id, version]() {
        const auto it = transfers_.find(id);
        if (it != transfers_.end() && it->second.version == version)
            complete_transfer(id);
    });
}

void SwarmSim::abort_transfer(std::uint64_t id) {
    const auto it = transfers_.find(id);
    if (it == transfers_.end())
        return;
    const Transfer t = it->second;
    transfers_.erase(it);
    sender_active_[t.sender].erase(id);
    conn_active_.erase({t.sender, t.receiver});
    if (!sender_active_[t.sender].empty())
        recompute_sender(t.sender);
}

void SwarmSim::complete_transfer(std::uint64_t id) {
    const Transfer t = transfers_.at(id);
    transfers_.erase(id);
    sender_active_[t.sender].erase(t.id);
    conn_active_.erase({t.sender, t.receiver});

    const std::uint32_t bytes = content_.block_bytes(t.piece, t.block);
    Peer& sender = peers_.at(t.sender);
    sender.ledger.record_sent(t.receiver, double(bytes) / (1024.0 * 1024.0));
    if (is_initial_seed(t.sender)) {
        auto& served = seed_served_blocks_[t.piece];
        served.insert(t.block);
        if (served.size() == content_.blocks_in_piece(t.piece))
            served_by_seed_.insert(t.piece);
        if (params_.seed_exit_on_coverage && !seeds_exited_ &&
            served_by_seed_.size() == content_.piece_count()) {
            seeds_exited_ = true;
            for (NodeId s : initial_seeds_)
                if (engine_.is_live(s))
                    engine_.schedule_leave(engine_.now(), s);
        }
    }

    on_block_received(t.receiver, t.sender, t.piece, t.block, bytes, sender.spec.poisoner);

    if (!sender.departed && engine_.is_live(t.sender)) {
        if (!sender.upload_queue[t.receiver].empty() && !conn_active_.count({t.sender, t.receiver}))
            start_next_upload(t.sender, t.receiver);
        else
            recompute_sender(t.sender);
    }
}

void SwarmSim::on_block_received(NodeId me, NodeId from, std::uint32_t piece, std::uint32_t block,
                                 std::uint32_t bytes, bool corrupt) {
    if (!peers_.count(me))
        return;
    Peer& p = peers_.at(me);
    if (p.departed || !engine_.is_live(me))
        return;
    const auto nit = p.nstate.find(from);
    if (nit != p.nstate.end()) {
        nit->second.download_rate.add(engine_.now(), double(bytes));
        nit->second.snubbed_until = 0;
    }
    p.ledger.record_received(from, double(bytes) / (1024.0 * 1024.0));

    auto oit = p.outstanding.find(from);
    if (oit != p.outstanding.end()) {
        auto& reqs = oit->second;
        const auto rit = std::find_if(reqs.begin(), reqs.end(), [&](const Request& r) {
            return r.piece == piece && r.block == block;
        });
        if (rit != reqs.end())
            reqs.erase(rit);
    }
    p.assigned.erase({piece, block});

    if (!p.have[piece]) {
        auto& blocks = p.partial[piece];
        if (blocks.empty()) {
            blocks.assign(content_.blocks_in_piece(piece), false);
            p.partial_corrupt[piece] = false;
        }
        if (!blocks[block]) {
            blocks[block] = true;
            p.block_sources[piece].insert(from);
            if (corrupt)
                p.partial_corrupt[piece] = true;
            const bool full =
                std::all_of(blocks.begin(), blocks.end(), [](bool b) { return b; });
            if (full) {
                if (p.partial_corrupt[piece]) {
                    corrupt_pieces_++;
                    // discard the blocks and stop asking the contributors
                    for (NodeId bad : p.block_sources[piece])
                        p.bad_sources[piece].insert(bad);
                    for (std::uint32_t b = 0; b < blocks.size(); ++b)
                        p.assigned.erase({piece, b});
                    p.partial.erase(piece);
                    p.partial_corrupt.erase(piece);
                    p.block_sources.erase(piece);
                    refill_toward_unchokers(me, from);
                } else {
                    on_piece_verified(me, piece);
                }
            }
        }
    }

    fill_pipeline(me, from);
    // pipelining check: an unchoked downloader with wanted blocks must keep
    // at least one request pending toward this neighbor
    if (p.nstate.count(from) && !p.nstate.at(from).they_choke_us &&
        p.nstate.at(from).snubbed_until <= engine_.now() && !p.departed) {
        if (p.outstanding[from].empty() && pick_block(p, from).has_value())
            pipeline_violations_++;
    }
}

void SwarmSim::on_piece_verified(NodeId me, std::uint32_t piece) {
    Peer& p = peers_.at(me);
    if (!is_initial_seed(me) && !served_by_seed_.count(piece))
        throw InvariantViolation("piece verified before the initial seed ever served it");
    p.have[piece] = true;
    p.have_count++;
    p.partial.erase(piece);
    p.partial_corrupt.erase(piece);
    p.block_sources.erase(piece);
    piece_map_.set_have(me, piece);

    for (NodeId nb : p.neighbors) {
        Message m = engine_.make_message(MsgKind::Have, me, HavePayload{piece});
        m.hop_from = me;
        engine_.send(me, nb, m);
    }
    // our own interest may lapse now that this piece is in
    for (NodeId nb : std::vector<NodeId>(p.neighbors.begin(), p.neighbors.end()))
        update_interest(me, nb);

    check_half_mark();
    if (p.complete())
        finish_peer(me);
}

void SwarmSim::finish_peer(NodeId me) {
    Peer& p = peers_.at(me);
    completion_times_[me] = engine_.now();
    engine_.metrics().add(engine_.now(), "swarm.completion_s", std::to_string(me.value),
                          engine_.now());
    if (!is_initial_seed(me) && params_.seed_linger_s >= 0)
        engine_.schedule_leave(engine_.now() + params_.seed_linger_s, me);
}

void SwarmSim::check_half_mark() {
    if (variance_at_half_)
        return;
    std::size_t pieces_held = 0, downloaders = 0;
    for (const auto& [id, p] : peers_) {
        if (p.spec.cls == PeerClass::Seed)
            continue;
        downloaders++;
        pieces_held += p.have_count;
    }
    if (downloaders == 0)
        return;
    const double frac =
        double(pieces_held) / (double(downloaders) * double(content_.piece_count()));
    if (frac >= params_.half_mark) {
        variance_at_half_ = piece_map_.replica_variance();
        engine_.metrics().add(engine_.now(), "swarm.replica_variance_at_half", "",
                              *variance_at_half_);
    }
}

void SwarmSim::emit_credit_metrics() {
    for (const auto& [observer, p] : peers_) {
        for (NodeId subject : p.neighbors) {
            if (!p.ledger.knows(subject))
                continue;
            engine_.metrics().add(engine_.now(), "credit",
                                  std::to_string(observer.value) + ":" +
                                      std::to_string(subject.value),
                                  p.ledger.credit_of(subject));
        }
    }
}

void SwarmSim::emit_transfer_totals() {
    for (const auto& [receiver, p] : peers_)
        for (const auto& [sender, other] : peers_)
            if (p.ledger.knows(sender) && p.ledger.totals(sender).uploaded_mb > 0)
                engine_.metrics().add(engine_.now(), "swarm.recv_mb",
                                      std::to_string(receiver.value) + ":" +
                                          std::to_string(sender.value),
                                      p.ledger.totals(sender).uploaded_mb);
}

std::vector<std::string> SwarmSim::debug_idle_slots() const {
    std::vector<std::string> out;
    for (const auto& [id, p] : peers_) {
        if (p.departed)
            continue;
        for (const auto& [nb, ns] : p.nstate) {
            if (ns.they_choke_us)
                continue;
            // we are unchoked by nb; is data flowing?
            if (ns.download_rate.rate(engine_.now()) > 0)
                continue;
            std::string why;
            if (ns.snubbed_until > engine_.now())
                why = "snubbed";
            else if (!ns.we_interested)
                why = "not_interested";
            else {
                const auto oit = p.outstanding.find(nb);
                const std::size_t reqs = oit == p.outstanding.end() ? 0 : oit->second.size();
                why = reqs > 0 ? "requests_pending(" + std::to_string(reqs) + ")"
                               : "no_requests";
            }
            out.push_back(std::to_string(id.value % 1000) + "<-" +
                          std::to_string(nb.value % 1000) + ": " + why);
        }
    }
    return out;
}

std::map<NodeId, SwarmSim::SlotReport> SwarmSim::debug_slots(NodeId fr) const {
    std::map<NodeId, SlotReport> out;
    for (const auto& [id, p] : peers_) {
        if (p.departed)
            continue;
        SlotReport rep;
        for (const auto& [nb, ns] : p.nstate) {
            if (ns.interested_in_us) {
                rep.interested++;
                if (ns.download_rate.rate(engine_.now()) > 0)
                    rep.positive_rate++;
            }
            if (!ns.they_choke_us)
                rep.my_benefactors++;
        }
        rep.fr_regular = std::find(p.regular_unchoked.begin(), p.regular_unchoked.end(), fr) !=
                         p.regular_unchoked.end();
        rep.fr_optimistic =
            std::find(p.optimistic_unchoked.begin(), p.optimistic_unchoked.end(), fr) !=
            p.optimistic_unchoked.end();
        out.emplace(id, rep);
    }
    return out;
}

TopologySnapshot SwarmSim::snapshot() const {
    std::vector<NodeId> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;
    for (const auto& [id, p] : peers_) {
        if (p.departed || !engine_.is_live(id))
            continue;
        nodes.push_back(id);
        for (NodeId nb : p.neighbors)
            if (engine_.is_live(nb) && !peers_.at(nb).departed)
                edges.emplace_back(id, nb);
    }
    return make_snapshot(std::move(nodes), std::move(edges));
}

bool SwarmSim::all_leechers_complete() const {
    for (const auto& [id, p] : peers_)
        if (p.spec.cls != PeerClass::Seed && !p.complete())
            return false;
    return true;
}

void SwarmSim::on_message(NodeId to, const Message& msg) {
    if (!peers_.count(to))
        return;
    Peer& p = peers_.at(to);
    if (p.departed)
        return;
    const NodeId from = msg.hop_from;
    switch (msg.kind) {
    case MsgKind::Bitfield: {
        const auto* pay = std::get_if<BitfieldPayload>(&msg.payload);
        if (!pay || !p.nstate.count(from))
            return;
        p.nstate.at(from).bitfield = pay->have;
        update_interest(to, from);
        break;
    }
    case MsgKind::Have: {
        const auto* pay = std::get_if<HavePayload>(&msg.payload);
        if (!pay || !p.nstate.count(from))
            return;
        if (pay->piece < p.nstate.at(from).bitfield.size())
            p.nstate.at(from).bitfield[pay->piece] = true;
        update_interest(to, from);
        if (!p.nstate.at(from).they_choke_us)
            fill_pipeline(to, from);
        break;
    }
    case MsgKind::Interested:
    case MsgKind::NotInterested: {
        if (!p.nstate.count(from))
            return;
        p.nstate.at(from).interested_in_us = msg.kind == MsgKind::Interested;
        break;
    }
    case MsgKind::Choke: {
        if (!p.nstate.count(from))
            return;
        p.nstate.at(from).they_choke_us = true;
        auto oit = p.outstanding.find(from);
        if (oit != p.outstanding.end()) {
            for (const Request& r : oit->second)
                p.assigned.erase({r.piece, r.block});
            oit->second.clear();
        }
        // the freed blocks may be exactly what another open slot can serve
        refill_toward_unchokers(to, from);
        break;
    }
    case MsgKind::Unchoke: {
        if (!p.nstate.count(from))
            return;
        p.nstate.at(from).they_choke_us = false;
        fill_pipeline(to, from);
        break;
    }
    case MsgKind::ChunkRequest: {
        const auto* pay = std::get_if<ChunkRequestPayload>(&msg.payload);
        if (pay)
            handle_request(to, from, pay->piece, pay->block);
        break;
    }
    case MsgKind::Cancel: {
        const auto* pay = std::get_if<ChunkRequestPayload>(&msg.payload);
        if (pay)
            handle_cancel(to, from, pay->piece, pay->block);
        break;
    }
    default:
        break;
    }
}

void SwarmSim::on_leave(NodeId gone) {
    if (!peers_.count(gone))
        return;
    Peer& p = peers_.at(gone);
    if (p.departed)
        return;
    p.departed = true;
    tracker_.depart(gone, torrent_);
    piece_map_.remove_peer(gone);

    std::vector<std::uint64_t> doomed;
    for (const auto& [id, t] : transfers_)
        if (t.sender == gone || t.receiver == gone)
            doomed.push_back(id);
    for (std::uint64_t id : doomed)
        abort_transfer(id);

    std::vector<NodeId> affected;
    for (auto& [id, q] : peers_) {
        if (id == gone)
            continue;
        if (!q.neighbors.count(gone))
            continue;
        q.neighbors.erase(gone);
        q.nstate.erase(gone);
        auto oit = q.outstanding.find(gone);
        if (oit != q.outstanding.end()) {
            for (const Request& r : oit->second)
                q.assigned.erase({r.piece, r.block});
            q.outstanding.erase(oit);
        }
        q.upload_queue.erase(gone);
        q.regular_unchoked.erase(
            std::remove(q.regular_unchoked.begin(), q.regular_unchoked.end(), gone),
            q.regular_unchoked.end());
        q.optimistic_unchoked.erase(
            std::remove(q.optimistic_unchoked.begin(), q.optimistic_unchoked.end(), gone),
            q.optimistic_unchoked.end());
        affected.push_back(id);
    }
    for (NodeId id : affected)
        if (engine_.is_live(id) && !peers_.at(id).departed)
            refill_toward_unchokers(id, gone);
    p.neighbors.clear();
    p.nstate.clear();
    p.outstanding.clear();
    p.assigned.clear();
    p.upload_queue.clear();
}

} // namespace p2p
