#ifndef P2P_REPUTATION_HPP
#define P2P_REPUTATION_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "p2p/ids.hpp"

namespace p2p {

// Subjective credit in [1,10] from transfer totals (binary megabytes):
//   term1 = uploaded*2/downloaded  (10 when downloaded == 0)
//   term2 = sqrt(uploaded + 2)     (1 when uploaded < 1 MB)
//   credit = clamp(min(term1, term2), 1, 10)
// Throws NegativeInput.
double credit(double uploaded_total_mb, double downloaded_total_mb);

inline double priority_weight(double credit_value) { return credit_value; }

// Strictly local experience against remote peers; totals are monotone.
// "uploaded" is what we received from them, "downloaded" what they took.
class CreditLedger {
public:
    struct Totals {
        double uploaded_mb = 0;
        double downloaded_mb = 0;
    };

    void record_received(NodeId from, double mb);
    void record_sent(NodeId to, double mb);

    const Totals& totals(NodeId peer) const;
    double credit_of(NodeId peer) const;
    bool knows(NodeId peer) const { return totals_.count(peer) != 0; }

private:
    std::map<NodeId, Totals> totals_;
    static const Totals kZero;
};

// Requests served by descending weight, FIFO among equal weights.
class UploadQueue {
public:
    void push(NodeId requester, double weight);
    std::optional<NodeId> pop();
    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }

private:
    struct Entry {
        NodeId requester;
        double weight;
        std::uint64_t seq;
    };
    std::vector<Entry> entries_;
    std::uint64_t seq_counter_ = 0;
};

} // namespace p2p

#endif
