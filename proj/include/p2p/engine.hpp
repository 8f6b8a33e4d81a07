#ifndef P2P_ENGINE_HPP
#define P2P_ENGINE_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <set>
#include <variant>
#include <vector>

#include "p2p/message.hpp"
#include "p2p/metrics.hpp"
#include "p2p/rng.hpp"

namespace p2p {

// Per-hop delivery model. Latency is constant when min == max, otherwise a
// seeded uniform draw per delivery. Loss is an independent draw per delivery.
struct LinkModel {
    double latency_min_s = 0.05;
    double latency_max_s = 0.05;
    double loss_rate = 0.0;

    bool valid() const {
        return latency_min_s >= 0 && latency_max_s >= latency_min_s && loss_rate >= 0 &&
               loss_rate <= 1;
    }
};

struct ChurnConfig {
    double mean_session_s = 0; // +inf disables leaves
    double mean_offline_s = 0;

    bool valid() const { return mean_session_s > 0 && mean_offline_s > 0; }
};

struct ChurnEvent {
    double at = 0;
    bool is_leave = false;
    NodeId node;
};

// Alternating Leave/Join schedule with exponential holding times, drawn from
// the given RNG in node order. Pure so a test can replay the stream.
std::vector<ChurnEvent> churn_process(const ChurnConfig& cfg, const std::vector<NodeId>& population,
                                      double horizon, Rng& rng);

struct DeliverAction {
    Message msg;
    NodeId to;
};
struct TimerAction {
    NodeId owner;
    int kind = 0;
    std::uint64_t generation = 0;
};
struct JoinAction {
    NodeId node;
};
struct LeaveAction {
    NodeId node;
};
struct CallAction {
    std::function<void()> fn;
};

using EventAction = std::variant<DeliverAction, TimerAction, JoinAction, LeaveAction, CallAction>;

struct Event {
    double fire_at = 0;
    std::uint64_t seq = 0; // FIFO tiebreak among equal fire_at
    EventAction action;
};

struct EngineCounters {
    std::uint64_t events_executed = 0;
    std::uint64_t messages_sent = 0;
    std::uint64_t messages_delivered = 0;
    std::uint64_t dropped_loss = 0;
    std::uint64_t dropped_dead_dest = 0;
    std::uint64_t dropped_dead_src = 0;
    std::uint64_t joins = 0;
    std::uint64_t leaves = 0;
};

// Deterministic single-threaded discrete-event scheduler with virtual time.
// (scenario, seed) fully determines the event trace and the metrics log.
class SimEngine {
public:
    explicit SimEngine(std::uint64_t seed, LinkModel link = LinkModel{});

    double now() const { return now_; }
    Rng& rng() { return rng_; }
    MetricsLog& metrics() { return metrics_; }
    const MetricsLog& metrics() const { return metrics_; }
    EngineCounters& counters() { return counters_; }
    const LinkModel& link() const { return link_; }
    void set_link(const LinkModel& l);

    bool is_live(NodeId n) const { return live_.count(n) != 0; }
    const std::set<NodeId>& live_nodes() const { return live_; }

    // Immediate join at the current time. Duplicate ids are an error.
    void add_node(NodeId n);
    void schedule_join(double at, NodeId n);
    void schedule_leave(double at, NodeId n);

    std::uint64_t next_msg_id() { return ++msg_id_counter_; }
    Message make_message(MsgKind kind, NodeId src, Payload payload = std::monostate{},
                         std::optional<int> ttl = std::nullopt,
                         std::optional<std::uint64_t> group_tag = std::nullopt);

    // Applies loss and latency; a message from a dead source is dropped.
    void send(NodeId from, NodeId to, const Message& msg);

    void schedule_timer(double delay, NodeId owner, int kind);
    void cancel_timers(NodeId owner); // also happens automatically on leave
    void schedule_call(double delay, std::function<void()> fn);
    void schedule_call_at(double at, std::function<void()> fn);

    void add_message_handler(std::function<void(NodeId, const Message&)> h);
    void add_timer_handler(std::function<void(NodeId, int)> h);
    void add_join_handler(std::function<void(NodeId)> h);
    void add_leave_handler(std::function<void(NodeId)> h);

    // Schedules the full churn trace for the population up to the horizon.
    void set_churn(const ChurnConfig& cfg, const std::vector<NodeId>& population, double horizon);

    // Executes every event with fire_at <= t_end; afterwards now() == t_end.
    void run_until(double t_end);

    // Exposed for the scheduling unit tests.
    void schedule_event(double at, EventAction action);
    std::size_t pending_events() const { return queue_.size(); }

private:
    struct QueueCmp {
        bool operator()(const Event& a, const Event& b) const {
            if (a.fire_at != b.fire_at)
                return a.fire_at > b.fire_at;
            return a.seq > b.seq;
        }
    };

    void execute(Event& ev);
    double draw_latency();

    double now_ = 0;
    std::uint64_t seq_counter_ = 0;
    std::uint64_t msg_id_counter_ = 0;
    Rng rng_;
    LinkModel link_;
    MetricsLog metrics_;
    EngineCounters counters_;
    std::priority_queue<Event, std::vector<Event>, QueueCmp> queue_;
    std::set<NodeId> live_;
    std::set<NodeId> ever_seen_;
    std::map<NodeId, std::uint64_t> timer_generation_;
    std::vector<std::function<void(NodeId, const Message&)>> message_handlers_;
    std::vector<std::function<void(NodeId, int)>> timer_handlers_;
    std::vector<std::function<void(NodeId)>> join_handlers_;
    std::vector<std::function<void(NodeId)>> leave_handlers_;
};

} // namespace p2p

#endif
