#include "p2p/reputation.hpp"

#include <algorithm>
#include <cmath>

#include "p2p/errors.hpp"

namespace p2p {

double credit(double uploaded_total_mb, double downloaded_total_mb) {
    if (uploaded_total_mb < 0 || downloaded_total_mb < 0)
        throw NegativeInput("credit: transfer totals cannot be negative");
    const double term1 =
        downloaded_total_mb == 0 ? 10.0 : uploaded_total_mb * 2.0 / downloaded_total_mb;
    const double term2 = uploaded_total_mb < 1.0 ? 1.0 : std::sqrt(uploaded_total_mb + 2.0);
    return std::clamp(std::min(term1, term2), 1.0, 10.0);
}

const CreditLedger::Totals CreditLedger::kZero{};

void CreditLedger::record_received(NodeId from, double mb) {
    if (mb < 0)
        throw NegativeInput("record_received: negative amount");
    totals_[from].uploaded_mb += mb;
}

void CreditLedger::record_sent(NodeId to, double mb) {
    if (mb < 0)
        throw NegativeInput("record_sent: negative amount");
    totals_[to].downloaded_mb += mb;
}

const CreditLedger::Totals& CreditLedger::totals(NodeId peer) const {
    const auto it = totals_.find(peer);
    return it == totals_.end() ? kZero : it->second;
}

double CreditLedger::credit_of(NodeId peer) const {
    const Totals& t = totals(peer);
    return credit(t.uploaded_mb, t.downloaded_mb);
}

void UploadQueue::push(NodeId requester, double weight) {
    entries_.push_back(Entry{requester, weight, ++seq_counter_});
}

std::optional<NodeId> UploadQueue::pop() {
    if (entries_.empty())
        return std::nullopt;
    auto best = entries_.begin();
    for (auto it = std::next(entries_.begin()); it != entries_.end(); ++it) {
        if (it->weight > best->weight)
            best = it;
        // equal weights: keep the earlier arrival
    }
    const NodeId out = best->requester;
    entries_.erase(best);
    return out;
}

} // namespace p2p
