#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "error.hpp"
#include "graph.hpp"

namespace nethop {

enum class PropensityKind { constant, stratified, supplied };

//! Propensity score model. `constant` is taken as a design value and passed
//! through unclipped; estimated (stratified) and supplied scores are clipped
//! to [clip, 1 - clip].
struct PropensityModel {
    PropensityKind kind = PropensityKind::stratified;
    double e0 = 0.5;
    std::vector<double> supplied;
    double clip = 0.01;

    static PropensityModel constant(double e0) { return {PropensityKind::constant, e0, {}, 0.01}; }
    static PropensityModel stratified(double clip = 0.01) { return {PropensityKind::stratified, 0.5, {}, clip}; }
    static PropensityModel from_values(std::vector<double> e, double clip = 0.01)
    {
        return {PropensityKind::supplied, 0.5, std::move(e), clip};
    }

    void validate() const
    {
        if (!(clip > 0.0 && clip < 0.5))
            throw std::invalid_argument("propensity clip must lie in (0, 0.5)");
        if (kind == PropensityKind::constant && !(e0 >= 0.0 && e0 < 1.0))
            throw std::invalid_argument("constant propensity must lie in [0, 1)");
    }
};

enum class EffectMethod { OR, DR, ADTE_OR_A, ADTE_OR_B, ADTE_DR };
enum class VarianceKind { none, conservative, plugin };

inline const char* to_string(EffectMethod m)
{
    switch (m) {
    case EffectMethod::OR: return "OR";
    case EffectMethod::DR: return "DR";
    case EffectMethod::ADTE_OR_A: return "ADTE-OR-a";
    case EffectMethod::ADTE_OR_B: return "ADTE-OR-b";
    case EffectMethod::ADTE_DR: return "ADTE-DR";
    }
    return "?";
}

inline const char* to_string(VarianceKind v)
{
    switch (v) {
    case VarianceKind::none: return "none";
    case VarianceKind::conservative: return "conservative";
    case VarianceKind::plugin: return "plugin";
    }
    return "?";
}

struct EffectEstimate {
    EffectMethod method = EffectMethod::OR;
    double tau_hat = 0.0;
    VarianceKind variance_kind = VarianceKind::none;
    double variance = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double level = 0.0;
    std::size_t n_treated = 0;
};

namespace detail {

inline std::size_t count_treated(std::span<const NodeObservation> obs)
{
    return static_cast<std::size_t>(std::count_if(obs.begin(), obs.end(), [](const auto& o) { return o.z == 1; }));
}

inline void check_lengths(std::span<const NodeObservation> obs, std::size_t other, const char* what)
{
    if (other != obs.size())
        throw std::invalid_argument(std::string(what) + " length does not match observation count");
}

} // namespace detail

//! Two-sided standard normal critical value for confidence `level`.
inline double normal_critical_value(double level)
{
    if (!(level > 0.0 && level < 1.0))
        throw std::invalid_argument("confidence level must lie in (0,1)");
    return boost::math::quantile(boost::math::normal_distribution<>(), 0.5 + level / 2.0);
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

//! τ̂^OR = Σ Z_i (Y_i - f̂_i) / N₁.
inline EffectEstimate estimate_or(std::span<const NodeObservation> obs, std::span<const double> f_hat)
{
    detail::check_lengths(obs, f_hat.size(), "f_hat");
    const std::size_t n1 = detail::count_treated(obs);
    if (n1 == 0)
        throw EstimationError("no treated units");
    double sum = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i)
        if (obs[i].z == 1)
            sum += obs[i].y - f_hat[i];
    EffectEstimate est;
    est.method = EffectMethod::OR;
    est.tau_hat = sum / static_cast<double>(n1);
    est.n_treated = n1;
    return est;
}

inline std::vector<double> estimate_propensity(std::span<const NodeObservation> obs, const PropensityModel& model)
{
    model.validate();
    const std::size_t n = obs.size();
    std::vector<double> e(n);
    auto clip = [&](double v) { return std::min(std::max(v, model.clip), 1.0 - model.clip); };
    switch (model.kind) {
    case PropensityKind::constant:
        std::fill(e.begin(), e.end(), model.e0);
        break;
    case PropensityKind::stratified: {
        std::uint32_t strata = 0;
        for (const auto& o : obs)
            strata = std::max(strata, o.x + 1);
        std::vector<std::size_t> size(strata, 0), treated(strata, 0);
        for (const auto& o : obs) {
            ++size[o.x];
            treated[o.x] += o.z;
        }
        for (std::uint32_t s = 0; s < strata; ++s)
            if (size[s] == 0)
                throw EstimationError("empty stratum " + std::to_string(s));
        for (std::size_t i = 0; i < n; ++i)
            e[i] = clip(static_cast<double>(treated[obs[i].x]) / static_cast<double>(size[obs[i].x]));
        break;
    }
    case PropensityKind::supplied:
        detail::check_lengths(obs, model.supplied.size(), "supplied propensities");
        for (std::size_t i = 0; i < n; ++i) {
            if (!(model.supplied[i] >= 0.0 && model.supplied[i] <= 1.0))
                throw InputError("supplied propensity for node " + std::to_string(i) + " lies outside [0,1]");
            e[i] = clip(model.supplied[i]);
        }
        break;
    }
    return e;
}

namespace detail {

//! Score Z_i(Y_i - t_i - f̂_i) - (Y_i - f̂_i)(1 - Z_i) ê_i/(1 - ê_i).
inline double dr_score(const NodeObservation& o, double f_hat, double e_hat, double tau)
{
    if (o.z == 1)
        return o.y - tau - f_hat;
    return -(o.y - f_hat) * e_hat / (1.0 - e_hat);
}

inline void check_propensities(std::span<const double> e)
{
    for (std::size_t i = 0; i < e.size(); ++i)
        if (!(e[i] >= 0.0 && e[i] < 1.0))
            throw std::invalid_argument("propensity for node " + std::to_string(i) + " must lie in [0,1)");
}

} // namespace detail

//! Σ̃_n: mean squared DR score with the pooled τ̂^DR.
inline double variance_conservative(std::span<const NodeObservation> obs, std::span<const double> f_hat,
                                    std::span<const double> e_hat, double tau_hat)
{
    detail::check_lengths(obs, f_hat.size(), "f_hat");
    detail::check_lengths(obs, e_hat.size(), "propensities");
    const std::size_t n1 = detail::count_treated(obs);
    if (n1 == 0)
        throw EstimationError("no treated units");
    double ss = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double s = detail::dr_score(obs[i], f_hat[i], e_hat[i], tau_hat);
        ss += s * s;
    }
    return ss / static_cast<double>(n1);
}

//! Σ̂_n: as Σ̃_n but with node-specific τ̂(X_i).
inline double variance_plugin(std::span<const NodeObservation> obs, std::span<const double> f_hat,
                              std::span<const double> e_hat, std::span<const double> tau_of_x)
{
    detail::check_lengths(obs, f_hat.size(), "f_hat");
    detail::check_lengths(obs, e_hat.size(), "propensities");
    detail::check_lengths(obs, tau_of_x.size(), "tau_of_x");
    const std::size_t n1 = detail::count_treated(obs);
    if (n1 == 0)
        throw EstimationError("no treated units");
    double ss = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const double s = detail::dr_score(obs[i], f_hat[i], e_hat[i], tau_of_x[i]);
        ss += s * s;
    }
    return ss / static_cast<double>(n1);
}

//! Normal interval τ̂ ± z·sqrt(Σ/N₁).
inline void attach_interval(EffectEstimate& est, double variance, VarianceKind kind, double level)
{
    const double half = normal_critical_value(level) * std::sqrt(variance / static_cast<double>(est.n_treated));
    est.variance = variance;
    est.variance_kind = kind;
    est.level = level;
    est.ci_low = est.tau_hat - half;
    est.ci_high = est.tau_hat + half;
}

//! τ̂^DR = (1/N₁) Σ [Z_i(Y_i - f̂_i) - (Y_i - f̂_i)(1 - Z_i) ê_i/(1 - ê_i)],
//! reported with the conservative variance Σ̃_n.
inline EffectEstimate estimate_dr(std::span<const NodeObservation> obs, std::span<const double> f_hat,
                                  std::span<const double> e_hat, double level = 0.95)
{
    detail::check_lengths(obs, f_hat.size(), "f_hat");
    detail::check_lengths(obs, e_hat.size(), "propensities");
    detail::check_propensities(e_hat);
    const std::size_t n1 = detail::count_treated(obs);
    if (n1 == 0)
        throw EstimationError("no treated units");
    double sum = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i)
        sum += detail::dr_score(obs[i], f_hat[i], e_hat[i], 0.0);
    EffectEstimate est;
    est.method = EffectMethod::DR;
    est.tau_hat = sum / static_cast<double>(n1);
    est.n_treated = n1;
    attach_interval(est, variance_conservative(obs, f_hat, e_hat, est.tau_hat), VarianceKind::conservative, level);
    return est;
}

//! τ̂(x): mean of Y_i - f̂_i over treated nodes of stratum x. Every stratum
//! that contains a node must contain a treated node.
inline std::map<std::uint32_t, double> estimate_tau_of_x(std::span<const NodeObservation> obs,
                                                         std::span<const double> f_hat)
{
    detail::check_lengths(obs, f_hat.size(), "f_hat");
    std::map<std::uint32_t, std::pair<double, std::size_t>> acc;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        auto& [sum, count] = acc[obs[i].x];
        if (obs[i].z == 1) {
            sum += obs[i].y - f_hat[i];
            ++count;
        }
    }
    std::map<std::uint32_t, double> out;
    std::string missing;
    for (const auto& [x, sc] : acc) {
        if (sc.second == 0) {
            missing += (missing.empty() ? "" : ", ") + std::to_string(x);
            continue;
        }
        out[x] = sc.first / static_cast<double>(sc.second);
    }
    if (!missing.empty())
        throw EstimationError("no treated node in stratum " + missing);
    return out;
}

//! Expands a per-stratum map to one value per node.
inline std::vector<double> per_node(std::span<const NodeObservation> obs, const std::map<std::uint32_t, double>& by_x)
{
    std::vector<double> out(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        auto it = by_x.find(obs[i].x);
        if (it == by_x.end())
            throw EstimationError("no estimate for stratum " + std::to_string(obs[i].x));
        out[i] = it->second;
    }
    return out;
}

struct AdteEstimates {
    EffectEstimate or_a;
    EffectEstimate or_b;
    EffectEstimate dr;
};

//! The three average-direct-effect estimators over all units.
inline AdteEstimates estimate_adte(std::span<const NodeObservation> obs, std::span<const double> f_hat,
                                   std::span<const double> e_hat, std::span<const double> tau_of_x)
{
    detail::check_lengths(obs, f_hat.size(), "f_hat");
    detail::check_lengths(obs, e_hat.size(), "propensities");
    detail::check_lengths(obs, tau_of_x.size(), "tau_of_x");
    if (obs.empty())
        throw EstimationError("no nodes");
    for (std::size_t i = 0; i < e_hat.size(); ++i)
        if (!(e_hat[i] > 0.0 && e_hat[i] < 1.0))
            throw EstimationError("propensity for node " + std::to_string(i) + " must lie strictly inside (0,1)");
    double a = 0.0, b = 0.0, dr = 0.0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        const auto& o = obs[i];
        a += tau_of_x[i];
        if (o.z == 1) {
            b += o.y - f_hat[i];
            dr += tau_of_x[i] + (o.y - tau_of_x[i] - f_hat[i]) / e_hat[i];
        } else {
            b += tau_of_x[i];
            dr += tau_of_x[i] - (o.y - f_hat[i]) / (1.0 - e_hat[i]);
        }
    }
    const double n = static_cast<double>(obs.size());
    const std::size_t n1 = detail::count_treated(obs);
    AdteEstimates out;
    out.or_a = {EffectMethod::ADTE_OR_A, a / n, VarianceKind::none, 0.0, 0.0, 0.0, 0.0, n1};
    out.or_b = {EffectMethod::ADTE_OR_B, b / n, VarianceKind::none, 0.0, 0.0, 0.0, 0.0, n1};
    out.dr = {EffectMethod::ADTE_DR, dr / n, VarianceKind::none, 0.0, 0.0, 0.0, 0.0, n1};
    return out;
}

} // namespace nethop
