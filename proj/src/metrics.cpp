#include "p2p/metrics.hpp"

#include <charconv>
#include <fstream>

#include "p2p/errors.hpp"

namespace p2p {

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void MetricsLog::add(double time, std::string name, std::string subject, double value) {
    if (!records_.empty() && time < records_.back().time)
        throw InvariantViolation("MetricsLog: time went backwards");
    records_.push_back(MetricRecord{time, std::move(name), std::move(subject), value});
}

std::string MetricsLog::serialize() const {
    std::string out;
    for (const auto& r : records_) {
        out += format_double(r.time);
        out += ',';
        out += r.name;
        out += ',';
        out += r.subject;
        out += ',';
        out += format_double(r.value);
        out += '\n';
    }
    return out;
}

void MetricsLog::write_file(const std::string& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f)
        throw Error("MetricsLog: cannot open " + path);
    const std::string data = serialize();
    f.write(data.data(), static_cast<std::streamsize>(data.size()));
}

std::vector<MetricRecord> MetricsLog::by_name(const std::string& name) const {
    std::vector<MetricRecord> out;
    for (const auto& r : records_)
        if (r.name == name)
            out.push_back(r);
    return out;
}

} // namespace p2p
