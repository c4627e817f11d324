#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "estimators.hpp"
#include "interference.hpp"
#include "invariants.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "simulation.hpp"

namespace nethop::sim {

struct McConfig {
    InterferenceConfig interference;
    PropensityModel propensity = PropensityModel::stratified();
    double level = 0.95;
    bool run_observed = true;   // observed-key fit + OR estimate + oracle-inequality check
    bool run_decoupled = true;  // synthetic-label fit + DR estimate with Σ̃_n
    bool run_oracle = true;     // DR with true f and true e, Σ_n
    bool check_invariants = false;
    std::size_t workers = 1;
};

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RepRecord {
    std::size_t rep = 0;
    std::size_t n_treated = 0;
    bool estimable = true; // at least one treated and one control
    double true_adtt = kNaN;
    // observed-pattern fit
    double tau_or = kNaN;
    double max_abs_error = kNaN;
    bool bound_violated = false;
    std::size_t kept_keys = 0;
    std::size_t d_n = 0;
    // decoupled fit
    double tau_dr = kNaN;
    double sigma_conservative = kNaN;
    bool dr_covered = false;
    double max_abs_error_decoupled = kNaN;
    // known nuisances
    double tau_dr_oracle = kNaN;
    double sigma_oracle = kNaN;
    double z_oracle = kNaN;
    bool oracle_covered = false;
    std::size_t invariant_violations = 0;
};

struct EstimatorSummary {
    std::size_t count = 0;
    double mean = kNaN;
    double bias = kNaN;  // mean of (estimate - per-rep truth)
    double sd = kNaN;    // sample SD of the estimate
    double rmse = kNaN;
    double mc_se = kNaN; // sd / sqrt(count)
};

struct MCReport {
    DGPSpec spec;
    McConfig config;
    InterferenceConfig resolved; // depth cap and σ̄ as used
    std::size_t reps = 0;
    std::size_t n = 0;
    std::size_t estimable_reps = 0;
    std::vector<RepRecord> records;

    EstimatorSummary tau_or, tau_dr, tau_dr_oracle;
    double mean_max_abs_error = kNaN;
    double median_max_abs_error = kNaN;
    double max_abs_error_decoupled_mean = kNaN;
    double violation_frequency = kNaN;
    double dr_coverage = kNaN;
    double oracle_coverage = kNaN;
    double mean_sigma_conservative = kNaN;
    double mean_sigma_oracle = kNaN;
    double ks_distance = kNaN; // standardized oracle DR statistic vs N(0,1)
    std::size_t invariant_violations = 0;
};

//! sup_x |F_n(x) - Φ(x)| of a sample against the standard normal.
inline double ks_distance_normal(std::vector<double> sample)
{
    if (sample.empty())
        return kNaN;
    std::sort(sample.begin(), sample.end());
    const double m = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t k = 0; k < sample.size(); ++k) {
        const double cdf = normal_cdf(sample[k]);
        d = std::max({d, static_cast<double>(k + 1) / m - cdf, cdf - static_cast<double>(k) / m});
    }
    return d;
}

namespace detail {

inline EstimatorSummary summarize(const std::vector<RepRecord>& records, double RepRecord::*field)
{
    EstimatorSummary s;
    double sum = 0.0, sum_err = 0.0, sum_sq_err = 0.0;
    std::vector<double> values;
    for (const auto& r : records) {
        const double v = r.*field;
        if (!r.estimable || std::isnan(v))
            continue;
        values.push_back(v);
        sum += v;
        sum_err += v - r.true_adtt;
        sum_sq_err += (v - r.true_adtt) * (v - r.true_adtt);
    }
    s.count = values.size();
    if (s.count == 0)
        return s;
    const double c = static_cast<double>(s.count);
    s.mean = sum / c;
    s.bias = sum_err / c;
    s.rmse = std::sqrt(sum_sq_err / c);
    if (s.count > 1) {
        double ss = 0.0;
        for (double v : values)
            ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / (c - 1.0));
        s.mc_se = s.sd / std::sqrt(c);
    }
    return s;
}

inline double mean_of(const std::vector<double>& v)
{
    if (v.empty())
        return kNaN;
    double s = 0.0;
    for (double x : v)
        s += x;
    return s / static_cast<double>(v.size());
}

} // namespace detail

//! Runs one replicate on a fixed graph. Pure in (graph, spec, config, rep).
inline RepRecord run_replicate(const Graph& graph, const DGPSpec& spec, const McConfig& config,
                               const InterferenceConfig& resolved, std::size_t rep)
{
    RepRecord rec;
    rec.rep = rep;
    const auto data = simulate_on(graph, spec, rep);
    const auto& obs = data.observations;
    rec.n_treated = static_cast<std::size_t>(
        std::count_if(obs.begin(), obs.end(), [](const auto& o) { return o.z == 1; }));
    rec.true_adtt = data.true_adtt;
    rec.estimable = rec.n_treated > 0 && rec.n_treated < obs.size();
    if (!rec.estimable)
        return rec;

    InterferenceConfig fit_config = resolved;
    fit_config.workers = 1;
    const double crit = normal_critical_value(config.level);

    auto max_err = [&](const std::vector<double>& f_hat) {
        double m = 0.0;
        for (std::size_t i = 0; i < f_hat.size(); ++i)
            m = std::max(m, std::abs(f_hat[i] - data.f[i]));
        return m;
    };

    if (config.run_observed) {
        const auto [index, fit] = fit_with_index(graph, obs, fit_config);
        rec.tau_or = estimate_or(obs, fit.f_hat).tau_hat;
        rec.max_abs_error = max_err(fit.f_hat);
        rec.kept_keys = fit.kept.size();
        rec.d_n = fit.diagnostics.d_n;
        const auto bound = oracle_inequality_bound(index, data.f, fit.config);
        for (std::size_t i = 0; i < obs.size(); ++i)
            if (std::abs(data.f[i] - fit.f_hat[i]) > bound[i])
                rec.bound_violated = true;
        if (config.check_invariants)
            rec.invariant_violations += index_violations(index, obs).size() + fit_violations(fit).size();
    }

    if (config.run_decoupled) {
        const auto e_hat = estimate_propensity(obs, config.propensity);
        const CounterRng synth_rng(spec.seed, "synthetic", rep);
        Labels synthetic(obs.size());
        for (std::size_t i = 0; i < obs.size(); ++i)
            synthetic[i] = synth_rng.bernoulli(i, e_hat[i]) ? 1 : 0;
        const auto [index, fit] = fit_decoupled_with_index(graph, obs, synthetic, fit_config);
        const auto dr = estimate_dr(obs, fit.f_hat, e_hat, config.level);
        rec.tau_dr = dr.tau_hat;
        rec.sigma_conservative = dr.variance;
        rec.dr_covered = dr.ci_low <= data.true_adtt && data.true_adtt <= dr.ci_high;
        rec.max_abs_error_decoupled = max_err(fit.f_hat);
        if (config.check_invariants)
            rec.invariant_violations += index_violations(index, obs).size() + fit_violations(fit).size();
    }

    if (config.run_oracle) {
        const auto e_true = estimate_propensity(obs, PropensityModel::from_values(data.propensity));
        const auto dr = estimate_dr(obs, data.f, e_true, config.level);
        rec.tau_dr_oracle = dr.tau_hat;
        rec.sigma_oracle = oracle_variance(data, e_true);
        rec.z_oracle = std::sqrt(static_cast<double>(rec.n_treated)) * (dr.tau_hat - data.true_adtt)
            / std::sqrt(rec.sigma_oracle);
        rec.oracle_covered = std::abs(rec.z_oracle) <= crit;
    }
    return rec;
}

inline MCReport monte_carlo(const DGPSpec& spec, std::size_t reps, const McConfig& config)
{
    if (reps < 1)
        throw std::invalid_argument("monte_carlo: reps must be >= 1");
    spec.validate();
    config.interference.validate();
    config.propensity.validate();
    if (config.interference.sigma_mode == SigmaMode::supplied) {
        if (const auto* g = std::get_if<GaussianNoise>(&spec.noise); g && g->sd > config.interference.sigma_bar)
            throw std::invalid_argument("gaussian noise sd exceeds sigma_bar");
    }

    MCReport report;
    report.spec = spec;
    report.config = config;
    report.reps = reps;
    const Graph graph = make_graph(spec.graph, spec.seed);
    report.n = graph.num_nodes();

    // depth cap is a property of the fixed graph; pooled σ̄ is resolved per rep
    report.resolved = config.interference;
    if (report.resolved.max_depth == 0)
        report.resolved.max_depth = std::max<std::size_t>(1, capped_diameter(graph, kDefaultDepthCap));

    report.records.resize(reps);
    parallel_for(reps, config.workers, [&](std::size_t r) {
        report.records[r] = run_replicate(graph, spec, config, report.resolved, r);
    });

    const auto& recs = report.records;
    report.tau_or = detail::summarize(recs, &RepRecord::tau_or);
    report.tau_dr = detail::summarize(recs, &RepRecord::tau_dr);
    report.tau_dr_oracle = detail::summarize(recs, &RepRecord::tau_dr_oracle);

    std::vector<double> max_err, max_err_dec, sig_c, sig_o, z;
    std::size_t est = 0, violations = 0, dr_cov = 0, or_cov = 0;
    for (const auto& r : recs) {
        report.invariant_violations += r.invariant_violations;
        if (!r.estimable)
            continue;
        ++est;
        if (config.run_observed) {
            max_err.push_back(r.max_abs_error);
            violations += r.bound_violated;
        }
        if (config.run_decoupled) {
            max_err_dec.push_back(r.max_abs_error_decoupled);
            sig_c.push_back(r.sigma_conservative);
            dr_cov += r.dr_covered;
        }
        if (config.run_oracle) {
            sig_o.push_back(r.sigma_oracle);
            z.push_back(r.z_oracle);
            or_cov += r.oracle_covered;
        }
    }
    report.estimable_reps = est;
    if (est > 0) {
        const double e = static_cast<double>(est);
        if (config.run_observed) {
            report.mean_max_abs_error = detail::mean_of(max_err);
            auto sorted = max_err;
            std::sort(sorted.begin(), sorted.end());
            const std::size_t m = sorted.size();
            report.median_max_abs_error = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
            report.violation_frequency = static_cast<double>(violations) / e;
        }
        if (config.run_decoupled) {
            report.max_abs_error_decoupled_mean = detail::mean_of(max_err_dec);
            report.mean_sigma_conservative = detail::mean_of(sig_c);
            report.dr_coverage = static_cast<double>(dr_cov) / e;
        }
        if (config.run_oracle) {
            report.mean_sigma_oracle = detail::mean_of(sig_o);
            report.oracle_coverage = static_cast<double>(or_cov) / e;
            report.ks_distance = ks_distance_normal(z);
        }
    }
    return report;
}

} // namespace nethop::sim
