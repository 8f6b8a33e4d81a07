#ifndef P2P_TOPOLOGY_HPP
#define P2P_TOPOLOGY_HPP

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "p2p/ids.hpp"
#include "p2p/rng.hpp"

namespace p2p {

// Undirected simple graph of the overlay: no self-loops, no multi-edges.
// Edges are stored normalized (u < v) and sorted.
struct TopologySnapshot {
    std::vector<NodeId> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t edge_count() const { return edges.size(); }
};

TopologySnapshot make_snapshot(std::vector<NodeId> nodes,
                               std::vector<std::pair<NodeId, NodeId>> edges);

struct TopologyMetrics {
    std::map<std::size_t, std::size_t> degree_histogram;
    double clustering_coefficient = 0.0;
    double avg_connected_distance = 0.0; // mean shortest path over connected pairs
    std::size_t diameter = 0;            // max shortest path within the largest component
    std::size_t component_count = 0;
};

struct ErParams {
    std::size_t n = 0;
    double alpha = 0; // mean degree; p = alpha / (n - 1)

    double edge_prob() const { return n > 1 ? alpha / double(n - 1) : 0.0; }
    bool valid() const { return n >= 1 && edge_prob() >= 0.0 && edge_prob() <= 1.0; }
};

struct WsParams {
    std::size_t n = 0;
    std::size_t k_ring = 0; // even; K/2 neighbors per side
    double p_rewire = 0;

    bool valid() const {
        return n >= 1 && k_ring % 2 == 0 && k_ring < n && p_rewire >= 0 && p_rewire <= 1;
    }
};

struct BaParams {
    std::size_t n = 0;
    std::size_t m_attach = 0; // edges per arriving node
    std::size_t n0 = 0;       // initial clique size

    bool valid() const { return m_attach >= 1 && m_attach <= n0 && n0 < n; }
};

struct PowerLawFit {
    double tau = 0; // exponent of P(k) ~ c * k^-tau
    double c = 0;
    std::size_t k_min = 0;
    std::size_t k_max = 0;
};

// Each unordered pair linked independently with probability alpha/(n-1).
TopologySnapshot generate_er(const ErParams& p, Rng& rng);

// Ring lattice (K/2 neighbors per side), each edge rewired with p_rewire by
// moving its far endpoint; node and edge counts are preserved.
TopologySnapshot generate_ws(const WsParams& p, Rng& rng);

// Growth with preferential attachment from a complete seed graph on n0 nodes;
// each arrival attaches m edges to distinct existing nodes, degree-biased.
TopologySnapshot generate_ba(const BaParams& p, Rng& rng);

TopologySnapshot generate_ring_lattice(std::size_t n, std::size_t k);

std::map<std::size_t, std::size_t> degree_histogram(const TopologySnapshot& t);

// Mean over all nodes of n_i / (k_i (k_i - 1) / 2), taking 0 for degree < 2.
double clustering_coefficient(const TopologySnapshot& t);

// Full metrics; path statistics use all-pairs BFS. Throws EmptyGraph.
TopologyMetrics metrics(const TopologySnapshot& t);

double mean_degree(const TopologySnapshot& t);
std::size_t component_count(const TopologySnapshot& t);
bool is_connected(const TopologySnapshot& t);

// Least-squares fit of log P(k) against log k over [k_min, k_max].
// Throws DegenerateFit when fewer than 3 distinct degrees fall in range.
PowerLawFit fit_power_law(const std::map<std::size_t, std::size_t>& hist, std::size_t k_min,
                          std::size_t k_max);

// Degree law of non-preferential growth: (1 - e^{-1/m}) e^{1 - k/m} for k >= m.
double exponential_growth_reference(std::size_t m, std::size_t k);

// Edge-list text format, one `u v` per line.
std::string to_edge_list(const TopologySnapshot& t);
TopologySnapshot from_edge_list(const std::string& text);

} // namespace p2p

#endif
