#include "p2p/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "p2p/errors.hpp"

namespace p2p {

namespace {

// Index-based adjacency for the analytics passes.
struct Adjacency {
    std::map<NodeId, std::size_t> index;
    std::vector<std::vector<std::size_t>> neigh;

    explicit Adjacency(const TopologySnapshot& t) {
        for (std::size_t i = 0; i < t.nodes.size(); ++i)
            index.emplace(t.nodes[i], i);
        neigh.resize(t.nodes.size());
        for (const auto& [u, v] : t.edges) {
            const auto iu = index.find(u);
            const auto iv = index.find(v);
            if (iu == index.end() || iv == index.end())
                throw InvalidParams("snapshot edge references unknown node");
            neigh[iu->second].push_back(iv->second);
            neigh[iv->second].push_back(iu->second);
        }
        for (auto& ns : neigh)
            std::sort(ns.begin(), ns.end());
    }
};

std::pair<NodeId, NodeId> norm_edge(NodeId a, NodeId b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

} // namespace

TopologySnapshot make_snapshot(std::vector<NodeId> nodes,
                               std::vector<std::pair<NodeId, NodeId>> edges) {
    std::sort(nodes.begin(), nodes.end());
    nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
    for (auto& e : edges) {
        if (e.first == e.second)
            throw InvalidParams("snapshot contains a self-loop");
        e = norm_edge(e.first, e.second);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    TopologySnapshot t{std::move(nodes), std::move(edges)};
    Adjacency check(t); // validates endpoints
    return t;
}

TopologySnapshot generate_er(const ErParams& p, Rng& rng) {
    if (!p.valid())
        throw InvalidParams("generate_er: need n >= 1 and edge probability in [0,1]");
    const double prob = p.edge_prob();
    TopologySnapshot t;
    t.nodes.reserve(p.n);
    for (std::size_t i = 0; i < p.n; ++i)
        t.nodes.push_back(NodeId{i});
    if (prob >= 1.0) {
        for (std::size_t i = 0; i < p.n; ++i)
            for (std::size_t j = i + 1; j < p.n; ++j)
                t.edges.emplace_back(NodeId{i}, NodeId{j});
        return t;
    }
    if (prob > 0.0) {
        for (std::size_t i = 0; i < p.n; ++i)
            for (std::size_t j = i + 1; j < p.n; ++j)
                if (rng.bernoulli(prob))
                    t.edges.emplace_back(NodeId{i}, NodeId{j});
    }
    return t;
}

TopologySnapshot generate_ring_lattice(std::size_t n, std::size_t k) {
    if (n < 1 || k % 2 != 0 || (n > 0 && k >= n))
        throw InvalidParams("ring lattice: K must be even and < n");
    TopologySnapshot t;
    for (std::size_t i = 0; i < n; ++i)
        t.nodes.push_back(NodeId{i});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t off = 1; off <= k / 2; ++off) {
            const std::size_t j = (i + off) % n;
            t.edges.push_back(norm_edge(NodeId{i}, NodeId{j}));
        }
    std::sort(t.edges.begin(), t.edges.end());
    t.edges.erase(std::unique(t.edges.begin(), t.edges.end()), t.edges.end());
    return t;
}

TopologySnapshot generate_ws(const WsParams& p, Rng& rng) {
    if (!p.valid())
        throw InvalidParams("generate_ws: K must be even and < n, p_rewire in [0,1]");
    const std::size_t n = p.n;
    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    auto connect = [&](std::size_t a, std::size_t b) {
        adj[a][b] = true;
        adj[b][a] = true;
    };
    auto disconnect = [&](std::size_t a, std::size_t b) {
        adj[a][b] = false;
        adj[b][a] = false;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t off = 1; off <= p.k_ring / 2; ++off)
            connect(i, (i + off) % n);

    // Scan edges in (node, offset) order, rewiring the far endpoint.
    // Re-draw on self-loop or existing link; skip when the node is saturated.
    if (p.p_rewire > 0) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t off = 1; off <= p.k_ring / 2; ++off) {
                const std::size_t j = (i + off) % n;
                if (!adj[i][j])
                    continue; // already rewired away by an earlier scan step
                if (!rng.bernoulli(p.p_rewire))
                    continue;
                std::size_t degree_i = 0;
                for (std::size_t w = 0; w < n; ++w)
                    if (adj[i][w])
                        ++degree_i;
                if (degree_i >= n - 1)
                    continue;
                std::size_t w;
                do {
                    w = rng.index(n);
                } while (w == i || adj[i][w]);
                disconnect(i, j);
                connect(i, w);
            }
        }
    }

    TopologySnapshot t;
    for (std::size_t i = 0; i < n; ++i)
        t.nodes.push_back(NodeId{i});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (adj[i][j])
                t.edges.emplace_back(NodeId{i}, NodeId{j});
    return t;
}

TopologySnapshot generate_ba(const BaParams& p, Rng& rng) {
    if (!p.valid())
        throw InvalidParams("generate_ba: need 1 <= m <= n0 < n");
    TopologySnapshot t;
    for (std::size_t i = 0; i < p.n; ++i)
        t.nodes.push_back(NodeId{i});

    // Endpoint urn: each node appears once per incident edge, so a uniform
    // draw from the urn is a degree-proportional draw.
    std::vector<std::size_t> urn;
    for (std::size_t i = 0; i < p.n0; ++i)
        for (std::size_t j = i + 1; j < p.n0; ++j) {
            t.edges.emplace_back(NodeId{i}, NodeId{j});
            urn.push_back(i);
            urn.push_back(j);
        }

    std::vector<std::size_t> targets;
    for (std::size_t v = p.n0; v < p.n; ++v) {
        targets.clear();
        while (targets.size() < p.m_attach) {
            const std::size_t cand = urn[rng.index(urn.size())];
            if (std::find(targets.begin(), targets.end(), cand) == targets.end())
                targets.push_back(cand);
        }
        for (std::size_t u : targets) {
            t.edges.push_back(norm_edge(NodeId{v}, NodeId{u}));
            urn.push_back(v);
            urn.push_back(u);
        }
    }
    std::sort(t.edges.begin(), t.edges.end());
    return t;
}

std::map<std::size_t, std::size_t> degree_histogram(const TopologySnapshot& t) {
    std::map<NodeId, std::size_t> deg;
    for (NodeId n : t.nodes)
        deg[n] = 0;
    for (const auto& [u, v] : t.edges) {
        deg[u]++;
        deg[v]++;
    }
    std::map<std::size_t, std::size_t> hist;
    for (const auto& [n, k] : deg)
        hist[k]++;
    return hist;
}

double mean_degree(const TopologySnapshot& t) {
    if (t.nodes.empty())
        throw EmptyGraph("mean_degree of empty graph");
    return 2.0 * double(t.edges.size()) / double(t.nodes.size());
}

double clustering_coefficient(const TopologySnapshot& t) {
    if (t.nodes.empty())
        throw EmptyGraph("clustering_coefficient of empty graph");
    Adjacency a(t);
    const std::size_t n = t.nodes.size();
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& ns = a.neigh[i];
        const std::size_t k = ns.size();
        if (k < 2)
            continue; // CC_i := 0 below degree 2
        std::size_t links = 0;
        for (std::size_t x = 0; x < k; ++x)
            for (std::size_t y = x + 1; y < k; ++y)
                if (std::binary_search(a.neigh[ns[x]].begin(), a.neigh[ns[x]].end(), ns[y]))
                    ++links;
        sum += double(links) / (double(k) * double(k - 1) / 2.0);
    }
    return sum / double(n);
}

namespace {

// BFS distances from src; unreachable stays SIZE_MAX.
void bfs(const Adjacency& a, std::size_t src, std::vector<std::size_t>& dist) {
    dist.assign(a.neigh.size(), std::size_t(-1));
    std::deque<std::size_t> q;
    dist[src] = 0;
    q.push_back(src);
    while (!q.empty()) {
        const std::size_t u = q.front();
        q.pop_front();
        for (std::size_t v : a.neigh[u])
            if (dist[v] == std::size_t(-1)) {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
    }
}

std::vector<std::size_t> component_labels(const Adjacency& a, std::size_t& count) {
    std::vector<std::size_t> label(a.neigh.size(), std::size_t(-1));
    count = 0;
    for (std::size_t s = 0; s < a.neigh.size(); ++s) {
        if (label[s] != std::size_t(-1))
            continue;
        std::deque<std::size_t> q{s};
        label[s] = count;
        while (!q.empty()) {
            const std::size_t u = q.front();
            q.pop_front();
            for (std::size_t v : a.neigh[u])
                if (label[v] == std::size_t(-1)) {
                    label[v] = count;
                    q.push_back(v);
                }
        }
        ++count;
    }
    return label;
}

} // namespace

std::size_t component_count(const TopologySnapshot& t) {
    if (t.nodes.empty())
        return 0;
    Adjacency a(t);
    std::size_t count = 0;
    component_labels(a, count);
    return count;
}

bool is_connected(const TopologySnapshot& t) {
    return !t.nodes.empty() && component_count(t) == 1;
}

TopologyMetrics metrics(const TopologySnapshot& t) {
    if (t.nodes.empty())
        throw EmptyGraph("metrics of empty graph");
    Adjacency a(t);
    TopologyMetrics m;
    m.degree_histogram = degree_histogram(t);
    m.clustering_coefficient = clustering_coefficient(t);

    std::size_t comp_count = 0;
    const std::vector<std::size_t> label = component_labels(a, comp_count);
    m.component_count = comp_count;
    std::vector<std::size_t> comp_size(comp_count, 0);
    for (std::size_t l : label)
        comp_size[l]++;
    const std::size_t largest =
        std::max_element(comp_size.begin(), comp_size.end()) - comp_size.begin();

    // <l> over connected pairs; diameter restricted to the largest component.
    double dist_sum = 0;
    std::uint64_t pair_count = 0;
    std::size_t diameter = 0;
    std::vector<std::size_t> dist;
    for (std::size_t s = 0; s < a.neigh.size(); ++s) {
        bfs(a, s, dist);
        for (std::size_t v = s + 1; v < a.neigh.size(); ++v) {
            if (dist[v] == std::size_t(-1))
                continue;
            dist_sum += double(dist[v]);
            ++pair_count;
            if (label[s] == largest && dist[v] > diameter)
                diameter = dist[v];
        }
    }
    m.avg_connected_distance = pair_count > 0 ? dist_sum / double(pair_count) : 0.0;
    m.diameter = diameter;
    return m;
}

PowerLawFit fit_power_law(const std::map<std::size_t, std::size_t>& hist, std::size_t k_min,
                          std::size_t k_max) {
    double total = 0;
    for (const auto& [k, c] : hist)
        total += double(c);
    std::vector<std::pair<double, double>> pts; // (log k, log P(k))
    for (const auto& [k, c] : hist) {
        if (k < k_min || k > k_max || k == 0 || c == 0)
            continue;
        pts.emplace_back(std::log(double(k)), std::log(double(c) / total));
    }
    if (pts.size() < 3)
        throw DegenerateFit("fit_power_law: fewer than 3 distinct degrees in range");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto& [x, y] : pts) {
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = double(pts.size());
    const double denom = n * sxx - sx * sx;
    if (denom == 0)
        throw DegenerateFit("fit_power_law: degenerate abscissa");
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    return PowerLawFit{-slope, std::exp(intercept), k_min, k_max};
}

double exponential_growth_reference(std::size_t m, std::size_t k) {
    if (m < 1)
        throw InvalidParams("exponential_growth_reference: m >= 1");
    if (k < m)
        throw DomainError("exponential_growth_reference: requires k >= m");
    const double md = double(m);
    return (1.0 - std::exp(-1.0 / md)) * std::exp(1.0 - double(k) / md);
}

std::string to_edge_list(const TopologySnapshot& t) {
    std::string out;
    for (const auto& [u, v] : t.edges) {
        out += std::to_string(u.value);
        out += ' ';
        out += std::to_string(v.value);
        out += '\n';
    }
    return out;
}

TopologySnapshot from_edge_list(const std::string& text) {
    std::vector<NodeId> nodes;
    std::vector<std::pair<NodeId, NodeId>> edges;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::istringstream ls(line);
        std::uint64_t u, v;
        if (!(ls >> u >> v))
            throw ParseError("edge list: bad line: " + line);
        nodes.push_back(NodeId{u});
        nodes.push_back(NodeId{v});
        edges.emplace_back(NodeId{u}, NodeId{v});
    }
    return make_snapshot(std::move(nodes), std::move(edges));
}

} // namespace p2p
