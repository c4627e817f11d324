#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "error.hpp"
#include "graph.hpp"
#include "interference.hpp"
#include "patterns.hpp"

namespace nethop::sim {

inline constexpr std::size_t kBruteForceMaxNodes = 12;

//! Literal evaluation of the interference estimator for tiny graphs, used as
//! a reference for the indexed implementation. Distances come from
//! Floyd-Warshall, key sets are built by set comprehension and Step 2 is a
//! triple loop over (g, g', g''). With `synthetic` the key set is generated
//! from those labels over all nodes and keys without a real control are
//! dropped.
inline InterferenceFit brute_force_fit(const Graph& g, std::span<const NodeObservation> obs,
                                       const InterferenceConfig& config,
                                       std::optional<std::span<const std::uint8_t>> synthetic = std::nullopt)
{
    const std::size_t n = g.num_nodes();
    if (n > kBruteForceMaxNodes)
        throw std::invalid_argument("brute_force_fit: refusing graphs with more than 12 nodes");
    if (obs.size() != n)
        throw InputError("observation count does not match node count");
    config.validate();

    constexpr std::size_t inf = std::numeric_limits<std::size_t>::max() / 4;
    std::vector<std::vector<std::size_t>> dist(n, std::vector<std::size_t>(n, inf));
    for (std::size_t i = 0; i < n; ++i) {
        dist[i][i] = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (g.has_edge(static_cast<NodeId>(i), static_cast<NodeId>(j)))
                dist[i][j] = 1;
    }
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                dist[i][j] = std::min(dist[i][j], dist[i][k] + dist[k][j]);

    std::vector<std::size_t> ecc(n, 0);
    std::size_t diameter = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            if (dist[i][j] < inf)
                ecc[i] = std::max(ecc[i], dist[i][j]);
        diameter = std::max(diameter, ecc[i]);
    }

    InterferenceConfig cfg = config;
    if (cfg.max_depth == 0)
        cfg.max_depth = std::max<std::size_t>(1, std::min(diameter, kDefaultDepthCap));
    if (cfg.sigma_mode == SigmaMode::pooled_control_sd) {
        std::vector<double> ys;
        for (const auto& o : obs)
            if (o.z == 0)
                ys.push_back(o.y);
        double sd = 0.0;
        if (ys.size() >= 2) {
            double mean = 0.0;
            for (double y : ys)
                mean += y;
            mean /= static_cast<double>(ys.size());
            double ss = 0.0;
            for (double y : ys)
                ss += (y - mean) * (y - mean);
            sd = std::sqrt(ss / static_cast<double>(ys.size() - 1));
        }
        cfg.sigma_bar = sd;
    }
    const std::size_t depth_cap = cfg.max_depth;

    auto sig = [&](std::span<const std::uint8_t> labels, std::size_t i, std::size_t m) {
        PatternKey key{std::vector<std::uint32_t>(m, 0)};
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && dist[i][j] >= 1 && dist[i][j] <= m && labels[j])
                ++key.counts[dist[i][j] - 1];
        return key;
    };
    auto depth_limit = [&](std::size_t i) { return std::min(depth_cap, ecc[i]); };

    Labels z(n);
    for (std::size_t i = 0; i < n; ++i)
        z[i] = obs[i].z;
    if (std::count(z.begin(), z.end(), 0) == 0)
        throw EstimationError("no controls");

    // Step 0 (or the synthetic replacement)
    std::set<PatternKey> keys{PatternKey{}};
    for (std::size_t i = 0; i < n; ++i) {
        if (!synthetic && z[i] != 0)
            continue;
        const std::span<const std::uint8_t> labels = synthetic ? *synthetic : std::span<const std::uint8_t>(z);
        for (std::size_t m = 1; m <= depth_limit(i); ++m)
            keys.insert(sig(labels, i, m));
    }

    auto in_v = [&](const PatternKey& key, std::size_t i) {
        return key.depth() <= depth_limit(i) && sig(z, i, key.depth()) == key;
    };
    std::vector<PatternKey> key_list;
    std::vector<std::size_t> v_size, vbar_size;
    std::vector<double> mean;
    std::size_t dropped = 0;
    for (const auto& key : keys) {
        std::size_t nv = 0, nvbar = 0;
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!in_v(key, i))
                continue;
            ++nvbar;
            if (z[i] == 0) {
                ++nv;
                sum += obs[i].y;
            }
        }
        if (nv == 0) {
            ++dropped;
            continue;
        }
        key_list.push_back(key);
        v_size.push_back(nv);
        vbar_size.push_back(nvbar);
        mean.push_back(sum / static_cast<double>(nv));
    }

    // Step 2
    const double nn = static_cast<double>(n);
    const double radius = cfg.lambda * cfg.sigma_bar * std::sqrt(2.0 * std::log(2.0 * nn * nn / cfg.delta));
    std::set<PatternKey> kept{PatternKey{}};
    for (std::size_t a = 0; a < key_list.size(); ++a) {
        const auto& key = key_list[a];
        if (key.is_root())
            continue;
        const PatternKey par = parent(key);
        bool keep = false;
        for (std::size_t b = 0; b < key_list.size() && !keep; ++b) {
            if (!descends_from(key_list[b], key))
                continue;
            for (std::size_t c = 0; c < key_list.size() && !keep; ++c) {
                if (!descends_from(key_list[c], par))
                    continue;
                const double threshold = radius
                    * (1.0 / std::sqrt(static_cast<double>(v_size[b]))
                       + 1.0 / std::sqrt(static_cast<double>(v_size[c])));
                keep = std::abs(mean[b] - mean[c]) > threshold;
            }
        }
        if (keep)
            kept.insert(key);
    }

    InterferenceFit fit;
    fit.config = cfg;
    fit.config.sigma_mode = config.sigma_mode;
    fit.config.pattern_source = synthetic ? PatternSource::synthetic : PatternSource::observed;
    for (std::size_t a = 0; a < key_list.size(); ++a) {
        if (!kept.count(key_list[a]))
            continue;
        const double alpha_g = cfg.sigma_bar
            * std::sqrt(2.0 * std::log(2.0 * nn * nn / cfg.delta) / static_cast<double>(v_size[a]));
        fit.kept.push_back({key_list[a], v_size[a], vbar_size[a], mean[a], alpha_g});
    }

    // Step 3
    fit.m_hat.resize(n);
    fit.g_hat.resize(n);
    fit.f_hat.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t m = 0; m <= depth_limit(i); ++m)
            if (kept.count(sig(z, i, m)))
                best = m;
        fit.m_hat[i] = static_cast<std::uint32_t>(best);
        fit.g_hat[i] = sig(z, i, best);
        for (std::size_t a = 0; a < key_list.size(); ++a)
            if (key_list[a] == fit.g_hat[i])
                fit.f_hat[i] = mean[a];
        if (best == 0)
            ++fit.diagnostics.fallback_count;
    }

    std::size_t dn = 0;
    for (std::size_t j = 0; j < n; ++j) {
        std::size_t count = 0;
        for (std::size_t k = 0; k < n; ++k)
            if (dist[k][j] <= fit.m_hat[k])
                ++count;
        dn = std::max(dn, count);
    }
    fit.diagnostics.d_n = dn;
    fit.diagnostics.index_size = key_list.size();
    fit.diagnostics.dropped_keys = dropped;
    return fit;
}

} // namespace nethop::sim
