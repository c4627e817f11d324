#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "rng.hpp"

namespace nethop {

using NodeId = std::uint32_t;
using Edge = std::pair<NodeId, NodeId>;

//! Binary treatment indicators, one per node.
using Labels = std::vector<std::uint8_t>;

struct NodeObservation {
    std::uint8_t z = 0;   // treatment
    double y = 0.0;       // outcome
    std::uint32_t x = 0;  // covariate stratum
};

//! Undirected simple graph over dense ids 0..n-1, stored as CSR with sorted
//! neighbor lists. Immutable once built.
class Graph {
public:
    Graph() = default;

    //! Symmetrizes and deduplicates `edges`. Throws InputError on
    //! out-of-range ids or self-loops.
    static Graph from_edges(std::size_t n, std::span<const Edge> edges)
    {
        std::vector<Edge> arcs;
        arcs.reserve(2 * edges.size());
        for (const auto& [u, v] : edges) {
            if (u >= n || v >= n)
                throw InputError("edge (" + std::to_string(u) + "," + std::to_string(v)
                                 + ") references a node id outside [0," + std::to_string(n) + ")");
            if (u == v)
                throw InputError("self-loop at node " + std::to_string(u));
            arcs.emplace_back(u, v);
            arcs.emplace_back(v, u);
        }
        std::sort(arcs.begin(), arcs.end());
        arcs.erase(std::unique(arcs.begin(), arcs.end()), arcs.end());

        Graph g;
        g.offsets_.assign(n + 1, 0);
        for (const auto& arc : arcs)
            ++g.offsets_[arc.first + 1];
        for (std::size_t i = 0; i < n; ++i)
            g.offsets_[i + 1] += g.offsets_[i];
        g.adjacency_.reserve(arcs.size());
        for (const auto& arc : arcs)
            g.adjacency_.push_back(arc.second);
        return g;
    }

    std::size_t num_nodes() const noexcept { return offsets_.empty() ? 0 : offsets_.size() - 1; }
    std::size_t num_edges() const noexcept { return adjacency_.size() / 2; }

    std::span<const NodeId> neighbors(NodeId i) const
    {
        return {adjacency_.data() + offsets_[i], adjacency_.data() + offsets_[i + 1]};
    }

    std::size_t degree(NodeId i) const { return offsets_[i + 1] - offsets_[i]; }

    bool has_edge(NodeId u, NodeId v) const
    {
        auto nb = neighbors(u);
        return std::binary_search(nb.begin(), nb.end(), v);
    }

    std::vector<Edge> edges() const
    {
        std::vector<Edge> out;
        out.reserve(num_edges());
        for (NodeId u = 0; u < num_nodes(); ++u)
            for (NodeId v : neighbors(u))
                if (u < v)
                    out.emplace_back(u, v);
        return out;
    }

private:
    std::vector<std::size_t> offsets_;
    std::vector<NodeId> adjacency_;
};

inline Graph load_graph(std::span<const Edge> edges, std::size_t n)
{
    return Graph::from_edges(n, edges);
}

//! Reusable breadth-first walker. Visits nodes at distance 1..max_depth from
//! an ego layer by layer; the ego itself is never reported.
class LayerWalker {
public:
    explicit LayerWalker(const Graph& g) : graph_(&g), stamp_(g.num_nodes(), 0) {}

    //! Calls on_node(depth, node) for each node at distance depth in
    //! [1, max_depth]. Returns the number of nonempty layers, which is
    //! min(max_depth, eccentricity(ego)).
    template <class OnNode>
    std::size_t walk(NodeId ego, std::size_t max_depth, OnNode&& on_node)
    {
        if (++epoch_ == 0) {
            std::fill(stamp_.begin(), stamp_.end(), 0);
            epoch_ = 1;
        }
        frontier_.assign(1, ego);
        stamp_[ego] = epoch_;
        std::size_t depth = 0;
        while (depth < max_depth && !frontier_.empty()) {
            next_.clear();
            for (NodeId u : frontier_) {
                for (NodeId v : graph_->neighbors(u)) {
                    if (stamp_[v] != epoch_) {
                        stamp_[v] = epoch_;
                        next_.push_back(v);
                    }
                }
            }
            if (next_.empty())
                break;
            ++depth;
            for (NodeId v : next_)
                on_node(depth, v);
            frontier_.swap(next_);
        }
        return depth;
    }

private:
    const Graph* graph_;
    std::vector<std::uint32_t> stamp_;
    std::uint32_t epoch_ = 0;
    std::vector<NodeId> frontier_;
    std::vector<NodeId> next_;
};

//! Distance layers L_1..L_max_depth around `ego` (L_k = nodes at shortest-path
//! distance exactly k), each sorted ascending.
inline std::vector<std::vector<NodeId>> bfs_layers(const Graph& g, NodeId ego, std::size_t max_depth)
{
    if (ego >= g.num_nodes())
        throw std::invalid_argument("bfs_layers: ego out of range");
    std::vector<std::vector<NodeId>> layers(max_depth);
    LayerWalker walker(g);
    walker.walk(ego, max_depth, [&](std::size_t d, NodeId v) { layers[d - 1].push_back(v); });
    for (auto& layer : layers)
        std::sort(layer.begin(), layer.end());
    return layers;
}

//! max over nodes of min(eccentricity, cap); equals min(diameter, cap) where
//! the diameter is taken over finite distances.
inline std::size_t capped_diameter(const Graph& g, std::size_t cap)
{
    LayerWalker walker(g);
    std::size_t best = 0;
    for (NodeId i = 0; i < g.num_nodes() && best < cap; ++i)
        best = std::max(best, walker.walk(i, cap, [](std::size_t, NodeId) {}));
    return best;
}

//! rows x cols 4-neighbour grid, node id r*cols + c. With `torus` the grid
//! wraps in both directions; coinciding wraparound edges collapse.
inline Graph generate_lattice(std::size_t rows, std::size_t cols, bool torus)
{
    if (rows < 2 || cols < 2)
        throw std::invalid_argument("generate_lattice: rows and cols must be >= 2");
    std::vector<Edge> edges;
    auto id = [cols](std::size_t r, std::size_t c) { return static_cast<NodeId>(r * cols + c); };
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c + 1 < cols)
                edges.emplace_back(id(r, c), id(r, c + 1));
            else if (torus)
                edges.emplace_back(id(r, c), id(r, 0));
            if (r + 1 < rows)
                edges.emplace_back(id(r, c), id(r + 1, c));
            else if (torus)
                edges.emplace_back(id(r, c), id(0, c));
        }
    }
    return Graph::from_edges(rows * cols, edges);
}

//! G(n, p): pair {u<v} is present iff its counter-keyed uniform draw is < p.
inline Graph generate_erdos_renyi(std::size_t n, double p, std::uint64_t seed)
{
    if (n < 1)
        throw std::invalid_argument("generate_erdos_renyi: n must be >= 1");
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("generate_erdos_renyi: p must lie in [0,1]");
    const CounterRng rng(seed, "erdos-renyi");
    std::vector<Edge> edges;
    for (NodeId u = 0; u < n; ++u)
        for (NodeId v = u + 1; v < n; ++v)
            if (rng.uniform(static_cast<std::uint64_t>(u) * n + v) < p)
                edges.emplace_back(u, v);
    return Graph::from_edges(n, edges);
}

inline Labels labels_of(std::span<const NodeObservation> obs)
{
    Labels z(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i)
        z[i] = obs[i].z;
    return z;
}

inline void validate_observations(const Graph& g, std::span<const NodeObservation> obs)
{
    if (obs.size() != g.num_nodes())
        throw InputError("observation count " + std::to_string(obs.size())
                         + " does not match node count " + std::to_string(g.num_nodes()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (obs[i].z > 1)
            throw InputError("node " + std::to_string(i) + ": treatment must be 0 or 1");
        if (!std::isfinite(obs[i].y))
            throw InputError("node " + std::to_string(i) + ": outcome is not finite");
    }
}

} // namespace nethop
