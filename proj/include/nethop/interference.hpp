#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "parallel.hpp"
#include "patterns.hpp"

namespace nethop {

enum class PatternSource { observed, synthetic };
enum class SigmaMode { supplied, pooled_control_sd };

inline constexpr std::size_t kDefaultDepthCap = 10;

struct InterferenceConfig {
    double lambda = 2.0;
    double delta = 0.05;
    double sigma_bar = 1.0;   // sub-Gaussian scale bound, used when sigma_mode == supplied
    std::size_t max_depth = 0; // 0 = min(diameter, 10)
    PatternSource pattern_source = PatternSource::observed;
    SigmaMode sigma_mode = SigmaMode::supplied;
    std::size_t workers = 1;

    void validate() const
    {
        if (!(lambda > 1.0) || !std::isfinite(lambda))
            throw std::invalid_argument("lambda must be > 1");
        if (!(delta > 0.0 && delta < 1.0))
            throw std::invalid_argument("delta must lie in (0,1)");
        if (sigma_mode == SigmaMode::supplied && (!(sigma_bar > 0.0) || !std::isfinite(sigma_bar)))
            throw std::invalid_argument("sigma_bar must be > 0");
        if (workers < 1)
            throw std::invalid_argument("workers must be >= 1");
    }
};

//! Sample standard deviation of control outcomes (0 with fewer than two).
inline double pooled_control_sd(std::span<const NodeObservation> obs)
{
    double sum = 0.0;
    std::size_t count = 0;
    for (const auto& o : obs)
        if (o.z == 0) {
            sum += o.y;
            ++count;
        }
    if (count < 2)
        return 0.0;
    const double mean = sum / static_cast<double>(count);
    double ss = 0.0;
    for (const auto& o : obs)
        if (o.z == 0)
            ss += (o.y - mean) * (o.y - mean);
    return std::sqrt(ss / static_cast<double>(count - 1));
}

//! Fills in the automatic depth cap and, in pooled mode, σ̄. The result has
//! sigma_mode == supplied and the σ̄ actually used.
inline InterferenceConfig resolve_config(InterferenceConfig config, const Graph& g,
                                         std::span<const NodeObservation> obs)
{
    config.validate();
    if (config.max_depth == 0)
        config.max_depth = std::max<std::size_t>(1, capped_diameter(g, kDefaultDepthCap));
    if (config.sigma_mode == SigmaMode::pooled_control_sd) {
        config.sigma_bar = pooled_control_sd(obs);
        config.sigma_mode = SigmaMode::supplied;
    }
    return config;
}

//! f̂(g): mean control outcome over V_g.
inline double leaf_mean(const PatternIndex& index, EntryId id)
{
    const auto& e = index.entry(id);
    if (e.controls.empty())
        throw EstimationError("unestimable key (" + e.key.to_string() + "): V_g is empty");
    return e.control_sum / static_cast<double>(e.controls.size());
}

inline double leaf_mean(const PatternIndex& index, const PatternKey& key)
{
    const auto id = index.find(key);
    if (!id)
        throw EstimationError("unestimable key (" + key.to_string() + "): not in index");
    return leaf_mean(index, *id);
}

//! Noise radius α(g) = σ̄·sqrt(2·log(2n²/δ)/|V_g|).
inline double alpha(std::size_t n_controls, double sigma_bar, double delta, std::size_t n)
{
    if (n_controls == 0)
        throw EstimationError("alpha: V_g is empty");
    const double nn = static_cast<double>(n);
    return sigma_bar * std::sqrt(2.0 * std::log(2.0 * nn * nn / delta) / static_cast<double>(n_controls));
}

inline double alpha(std::size_t n_controls, const InterferenceConfig& config, std::size_t n)
{
    return alpha(n_controls, config.sigma_bar, config.delta, n);
}

//! K̂ together with the per-key estimates it was selected from. Vectors are
//! indexed by EntryId of the index it was pruned from.
struct PrunedTree {
    std::vector<bool> kept;
    std::vector<double> mean;
    std::vector<double> alpha;

    std::size_t kept_count() const { return static_cast<std::size_t>(std::count(kept.begin(), kept.end(), true)); }
};

//! Lepski-type pruning. Key g (non-root) is kept iff some g' ⪰ g and
//! g'' ⪰ par(g) satisfy |f̂(g') - f̂(g'')| > λ(α(g') + α(g'')). The root is
//! always kept.
//!
//! Evaluated with subtree envelopes: with lo = f̂ - λα and hi = f̂ + λα the
//! rule is max_A lo > min_B hi or max_B lo > min_A hi, where A is the subtree
//! of g and B the subtree of par(g).
inline PrunedTree prune(const PatternIndex& index, const InterferenceConfig& config)
{
    const std::size_t size = index.size();
    const std::size_t n = index.num_nodes();
    PrunedTree tree;
    tree.kept.assign(size, false);
    tree.mean.resize(size);
    tree.alpha.resize(size);

    std::vector<double> max_lo(size), min_hi(size);
    for (EntryId id = 0; id < size; ++id) {
        const auto& e = index.entry(id);
        tree.mean[id] = leaf_mean(index, id);
        tree.alpha[id] = alpha(e.controls.size(), config, n);
        max_lo[id] = tree.mean[id] - config.lambda * tree.alpha[id];
        min_hi[id] = tree.mean[id] + config.lambda * tree.alpha[id];
    }
    // children always have larger ids than their parent
    for (EntryId id = static_cast<EntryId>(size); id-- > 1;) {
        const EntryId p = index.entry(id).parent;
        max_lo[p] = std::max(max_lo[p], max_lo[id]);
        min_hi[p] = std::min(min_hi[p], min_hi[id]);
    }

    tree.kept[0] = true;
    std::vector<std::uint8_t> keep(size, 0);
    parallel_for(size - 1, config.workers, [&](std::size_t k) {
        const EntryId id = static_cast<EntryId>(k + 1);
        const EntryId p = index.entry(id).parent;
        keep[id] = (max_lo[id] > min_hi[p]) || (max_lo[p] > min_hi[id]);
    });
    for (EntryId id = 1; id < size; ++id)
        tree.kept[id] = keep[id] != 0;
    return tree;
}

struct KeptKey {
    PatternKey key;
    std::size_t n_controls = 0; // |V_g|
    std::size_t n_members = 0;  // |V̄_g|
    double mean = 0.0;          // f̂(g)
    double alpha = 0.0;         // α(g)

    friend bool operator==(const KeptKey&, const KeptKey&) = default;
};

struct FitDiagnostics {
    std::size_t d_n = 0;
    std::size_t fallback_count = 0; // nodes with m̂_i = 0
    std::size_t index_size = 0;
    std::size_t dropped_keys = 0;   // decoupled: synthetic keys with no real control
};

struct InterferenceFit {
    InterferenceConfig config; // resolved (max_depth and σ̄ filled in)
    std::vector<KeptKey> kept; // depth-first order
    std::vector<std::uint32_t> m_hat;
    std::vector<PatternKey> g_hat;
    std::vector<double> f_hat;
    FitDiagnostics diagnostics;
};

//! max over nodes i of |{k : i is within m̂_k hops of k}|.
inline std::size_t compute_dn(const Graph& g, std::span<const std::uint32_t> m_hat)
{
    const std::size_t n = g.num_nodes();
    if (m_hat.size() != n)
        throw std::invalid_argument("compute_dn: m_hat length does not match node count");
    std::vector<std::size_t> hits(n, 0);
    LayerWalker walker(g);
    for (NodeId k = 0; k < n; ++k) {
        ++hits[k];
        walker.walk(k, m_hat[k], [&](std::size_t, NodeId v) { ++hits[v]; });
    }
    return n == 0 ? 0 : *std::max_element(hits.begin(), hits.end());
}

//! Verifies K̂ is ancestor-closed; throws std::logic_error otherwise.
inline void check_ancestor_closure(const PatternIndex& index, const PrunedTree& tree)
{
    for (EntryId id = 1; id < index.size(); ++id)
        if (tree.kept[id] && !tree.kept[index.entry(id).parent])
            throw std::logic_error("pruned tree is not ancestor-closed at key (" + index.entry(id).key.to_string()
                                   + ")");
}

//! Step 3: m̂_i is the deepest depth at which node i's real signature is a
//! kept key; f̂_i = f̂(ĝ_i). Nodes matching only the root get the grand
//! control mean.
inline InterferenceFit select_depths(const Graph& g, const PatternIndex& index, const PrunedTree& tree,
                                     const InterferenceConfig& resolved)
{
    check_ancestor_closure(index, tree);
    const std::size_t n = index.num_nodes();
    InterferenceFit fit;
    fit.config = resolved;
    for (EntryId id : index.depth_first_order()) {
        if (!tree.kept[id])
            continue;
        const auto& e = index.entry(id);
        fit.kept.push_back({e.key, e.controls.size(), e.members.size(), tree.mean[id], tree.alpha[id]});
    }
    fit.m_hat.resize(n);
    fit.g_hat.resize(n);
    fit.f_hat.resize(n);
    for (NodeId i = 0; i < n; ++i) {
        const auto path = index.node_path(i);
        std::size_t best = 0;
        for (std::size_t d = 0; d < path.size(); ++d)
            if (tree.kept[path[d]])
                best = d;
        fit.m_hat[i] = static_cast<std::uint32_t>(best);
        fit.g_hat[i] = index.entry(path[best]).key;
        fit.f_hat[i] = tree.mean[path[best]];
        if (best == 0)
            ++fit.diagnostics.fallback_count;
    }
    fit.diagnostics.d_n = compute_dn(g, fit.m_hat);
    fit.diagnostics.index_size = index.size();
    fit.diagnostics.dropped_keys = index.dropped_keys();
    return fit;
}

//! Pruned fit on the observed key set Ê_n. Also returns the index, which
//! diagnostics and oracle bounds need.
inline std::pair<PatternIndex, InterferenceFit> fit_with_index(const Graph& g, std::span<const NodeObservation> obs,
                                                               const InterferenceConfig& config)
{
    validate_observations(g, obs);
    const auto resolved = resolve_config(config, g, obs);
    auto index = build_pattern_index(g, obs, resolved.max_depth, resolved.workers);
    const auto tree = prune(index, resolved);
    auto result = select_depths(g, index, tree, resolved);
    result.config.pattern_source = PatternSource::observed;
    result.config.sigma_mode = config.sigma_mode;
    return {std::move(index), std::move(result)};
}

//! Pruned fit with Ê_n replaced by the synthetic key set built from
//! `synthetic` labels; memberships and outcomes stay real.
inline std::pair<PatternIndex, InterferenceFit> fit_decoupled_with_index(const Graph& g,
                                                                         std::span<const NodeObservation> obs,
                                                                         std::span<const std::uint8_t> synthetic,
                                                                         const InterferenceConfig& config)
{
    validate_observations(g, obs);
    const auto resolved = resolve_config(config, g, obs);
    auto index = build_decoupled_index(g, obs, synthetic, resolved.max_depth, resolved.workers);
    const auto tree = prune(index, resolved);
    auto result = select_depths(g, index, tree, resolved);
    result.config.pattern_source = PatternSource::synthetic;
    result.config.sigma_mode = config.sigma_mode;
    return {std::move(index), std::move(result)};
}

inline InterferenceFit fit(const Graph& g, std::span<const NodeObservation> obs, const InterferenceConfig& config)
{
    if (config.pattern_source == PatternSource::synthetic)
        throw std::invalid_argument("fit: synthetic pattern source needs labels; use fit_decoupled");
    return fit_with_index(g, obs, config).second;
}

inline InterferenceFit fit_decoupled(const Graph& g, std::span<const NodeObservation> obs,
                                     std::span<const std::uint8_t> synthetic, const InterferenceConfig& config)
{
    return fit_decoupled_with_index(g, obs, synthetic, config).second;
}

} // namespace nethop
