#ifndef P2P_METRICS_HPP
#define P2P_METRICS_HPP

#include <string>
#include <vector>

namespace p2p {

struct MetricRecord {
    double time = 0.0;
    std::string name;
    std::string subject;
    double value = 0.0;

    bool operator==(const MetricRecord&) const = default;
};

// Append-only run log. Serialized as newline-delimited
// `time,metric_name,subject,value` records; numbers use std::to_chars so the
// byte output is locale-independent and identical across reruns.
class MetricsLog {
public:
    void add(double time, std::string name, std::string subject, double value);
    const std::vector<MetricRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }

    std::string serialize() const;
    void write_file(const std::string& path) const;

    // Records with the given name, in log order.
    std::vector<MetricRecord> by_name(const std::string& name) const;

private:
    std::vector<MetricRecord> records_;
};

// Locale-independent shortest-round-trip formatting, shared with the
// scenario serializer.
std::string format_double(double v);

} // namespace p2p

#endif
