#include "p2p/engine.hpp"

#include <cmath>

#include "p2p/errors.hpp"

namespace p2p {

std::vector<ChurnEvent> churn_process(const ChurnConfig& cfg, const std::vector<NodeId>& population,
                                      double horizon, Rng& rng) {
    if (!(cfg.mean_session_s > 0) || !(cfg.mean_offline_s > 0))
        throw InvalidParams("churn_process: means must be strictly positive");
    std::vector<ChurnEvent> out;
    for (NodeId n : population) {
        double t = 0;
        for (;;) {
            const double session = rng.exponential(cfg.mean_session_s);
            if (std::isinf(session))
                break; // infinite sessions: node never leaves
            t += session;
            if (t > horizon)
                break;
            out.push_back(ChurnEvent{t, true, n});
            const double offline = rng.exponential(cfg.mean_offline_s);
            if (std::isinf(offline))
                break;
            t += offline;
            if (t > horizon)
                break;
            out.push_back(ChurnEvent{t, false, n});
        }
    }
    return out;
}

SimEngine::SimEngine(std::uint64_t seed, LinkModel link) : rng_(seed), link_(link) {
    if (!link_.valid())
        throw InvalidParams("SimEngine: invalid link model");
}

void SimEngine::set_link(const LinkModel& l) {
    if (!l.valid())
        throw InvalidParams("SimEngine: invalid link model");
    link_ = l;
}

void SimEngine::add_node(NodeId n) {
    if (live_.count(n))
        throw DuplicateNodeId("node id assigned twice: " + std::to_string(n.value));
    ever_seen_.insert(n);
    live_.insert(n);
    counters_.joins++;
    for (auto& h : join_handlers_)
        h(n);
}

void SimEngine::schedule_event(double at, EventAction action) {
    if (at < now_)
        throw SchedulingInPast("event at t=" + format_double(at) + " scheduled at now=" +
                               format_double(now_));
    queue_.push(Event{at, ++seq_counter_, std::move(action)});
}

void SimEngine::schedule_join(double at, NodeId n) { schedule_event(at, JoinAction{n}); }

void SimEngine::schedule_leave(double at, NodeId n) { schedule_event(at, LeaveAction{n}); }

Message SimEngine::make_message(MsgKind kind, NodeId src, Payload payload, std::optional<int> ttl,
                                std::optional<std::uint64_t> group_tag) {
    Message m;
    m.msg_id = next_msg_id();
    m.kind = kind;
    m.src = src;
    m.payload = std::move(payload);
    m.ttl = ttl;
    m.group_tag = group_tag;
    return m;
}

double SimEngine::draw_latency() {
    if (link_.latency_max_s > link_.latency_min_s)
        return link_.latency_min_s +
               rng_.uniform01() * (link_.latency_max_s - link_.latency_min_s);
    return link_.latency_min_s;
}

void SimEngine::send(NodeId from, NodeId to, const Message& msg) {
    if (!is_live(from)) {
        counters_.dropped_dead_src++;
        return;
    }
    counters_.messages_sent++;
    if (link_.loss_rate > 0 && rng_.bernoulli(link_.loss_rate)) {
        counters_.dropped_loss++;
        return;
    }
    schedule_event(now_ + draw_latency(), DeliverAction{msg, to});
}

void SimEngine::schedule_timer(double delay, NodeId owner, int kind) {
    if (delay < 0)
        throw SchedulingInPast("negative timer delay");
    schedule_event(now_ + delay, TimerAction{owner, kind, timer_generation_[owner]});
}

void SimEngine::cancel_timers(NodeId owner) { timer_generation_[owner]++; }

void SimEngine::schedule_call(double delay, std::function<void()> fn) {
    if (delay < 0)
        throw SchedulingInPast("negative call delay");
    schedule_event(now_ + delay, CallAction{std::move(fn)});
}

void SimEngine::schedule_call_at(double at, std::function<void()> fn) {
    schedule_event(at, CallAction{std::move(fn)});
}

void SimEngine::add_message_handler(std::function<void(NodeId, const Message&)> h) {
    message_handlers_.push_back(std::move(h));
}
void SimEngine::add_timer_handler(std::function<void(NodeId, int)> h) {
    timer_handlers_.push_back(std::move(h));
}
void SimEngine::add_join_handler(std::function<void(NodeId)> h) {
    join_handlers_.push_back(std::move(h));
}
void SimEngine::add_leave_handler(std::function<void(NodeId)> h) {
    leave_handlers_.push_back(std::move(h));
}

void SimEngine::set_churn(const ChurnConfig& cfg, const std::vector<NodeId>& population,
                          double horizon) {
    for (const ChurnEvent& ev : churn_process(cfg, population, horizon, rng_)) {
        if (ev.is_leave)
            schedule_leave(ev.at, ev.node);
        else
            schedule_join(ev.at, ev.node);
    }
}

void SimEngine::execute(Event& ev) {
    counters_.events_executed++;
    if (auto* d = std::get_if<DeliverAction>(&ev.action)) {
        if (!is_live(d->to)) {
            counters_.dropped_dead_dest++;
            return;
        }
        counters_.messages_delivered++;
        for (auto& h : message_handlers_)
            h(d->to, d->msg);
    } else if (auto* t = std::get_if<TimerAction>(&ev.action)) {
        if (!is_live(t->owner))
            return;
        if (t->generation != timer_generation_[t->owner])
            return; // cancelled
        for (auto& h : timer_handlers_)
            h(t->owner, t->kind);
    } else if (auto* j = std::get_if<JoinAction>(&ev.action)) {
        if (live_.insert(j->node).second) {
            ever_seen_.insert(j->node);
            counters_.joins++;
            for (auto& h : join_handlers_)
                h(j->node);
        }
    } else if (auto* l = std::get_if<LeaveAction>(&ev.action)) {
        if (live_.erase(l->node) > 0) {
            counters_.leaves++;
            cancel_timers(l->node);
            for (auto& h : leave_handlers_)
                h(l->node);
        }
    } else if (auto* c = std::get_if<CallAction>(&ev.action)) {
        c->fn();
    }
}

void SimEngine::run_until(double t_end) {
    if (t_end < now_)
        throw SchedulingInPast("run_until into the past");
    while (!queue_.empty() && queue_.top().fire_at <= t_end) {
        Event ev = queue_.top();
        queue_.pop();
        now_ = ev.fire_at;
        execute(ev);
    }
    now_ = t_end;
}

} // namespace p2p
