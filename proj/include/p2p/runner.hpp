#ifndef P2P_RUNNER_HPP
#define P2P_RUNNER_HPP

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "p2p/metrics.hpp"
#include "p2p/scenario.hpp"
#include "p2p/topology.hpp"

namespace p2p {

struct RunResult {
    MetricsLog log;
    std::vector<std::pair<std::string, double>> summary;
    std::map<double, TopologySnapshot> snapshots;
};

// Builds the scenario's overlay on a fresh engine, runs it to the configured
// horizon and returns the deterministic artifacts.
RunResult run_scenario(const Scenario& s);

// Snapshot at the nearest recorded time (earlier wins a tie); a time past
// the run end resolves to the last snapshot. Throws NoSnapshot.
const TopologySnapshot& snapshot_at(const RunResult& r, double t);

std::string summary_text(const RunResult& r);

} // namespace p2p

#endif
