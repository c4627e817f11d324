#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "estimators.hpp"
#include "interference.hpp"
#include "monte_carlo.hpp"
#include "patterns.hpp"
#include "rng.hpp"
#include "simulation.hpp"

namespace nethop::report {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// NaN/inf are not representable in JSON; they are written as null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json key_json(const PatternKey& k) { return json(k.counts); }

inline const char* to_string(PatternSource s) { return s == PatternSource::observed ? "observed" : "synthetic"; }
inline const char* to_string(SigmaMode s) { return s == SigmaMode::supplied ? "supplied" : "pooled-control-sd"; }

inline json to_json(const InterferenceConfig& c)
{
    return {{"lambda", c.lambda},
            {"delta", c.delta},
            {"sigma_bar", c.sigma_bar},
            {"max_depth", c.max_depth},
            {"pattern_source", to_string(c.pattern_source)},
            {"sigma_mode", to_string(c.sigma_mode)}};
}

inline json to_json(const PropensityModel& m)
{
    json j;
    switch (m.kind) {
    case PropensityKind::constant:
        j = {{"kind", "constant"}, {"e0", m.e0}};
        break;
    case PropensityKind::stratified:
        j = {{"kind", "stratified"}};
        break;
    case PropensityKind::supplied:
        j = {{"kind", "supplied"}};
        break;
    }
    j["clip"] = m.clip;
    return j;
}

inline json to_json(const EffectEstimate& e)
{
    json j = {{"method", to_string(e.method)},
              {"tau_hat", number(e.tau_hat)},
              {"variance_kind", to_string(e.variance_kind)},
              {"n_treated", e.n_treated}};
    if (e.variance_kind != VarianceKind::none) {
        j["variance"] = number(e.variance);
        j["ci"] = {{"level", e.level}, {"low", number(e.ci_low)}, {"high", number(e.ci_high)}};
    } else {
        j["variance"] = nullptr;
        j["ci"] = nullptr;
    }
    return j;
}

//! FNV-1a over the kept-key table (keys, |V_g|, f̂ and α bit patterns).
inline std::string fit_digest(const InterferenceFit& fit)
{
    std::string canon;
    char buf[64];
    for (const auto& k : fit.kept) {
        canon += k.key.to_string();
        std::snprintf(buf, sizeof buf, "|%zu|%zu|%a|%a;", k.n_controls, k.n_members, k.mean, k.alpha);
        canon += buf;
    }
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(canon)));
    return buf;
}

inline json to_json(const InterferenceFit& fit, std::span<const NodeObservation> obs)
{
    json kept = json::array();
    for (const auto& k : fit.kept)
        kept.push_back({{"counts", key_json(k.key)},
                        {"depth", k.key.depth()},
                        {"n_controls", k.n_controls},
                        {"n_members", k.n_members},
                        {"f_hat", number(k.mean)},
                        {"alpha", number(k.alpha)}});
    json nodes = json::array();
    for (std::size_t i = 0; i < fit.f_hat.size(); ++i)
        nodes.push_back({{"id", i},
                         {"z", obs.empty() ? 0 : int(obs[i].z)},
                         {"m_hat", fit.m_hat[i]},
                         {"f_hat", number(fit.f_hat[i])}});
    return {{"schema_version", kSchemaVersion},
            {"kind", "fit"},
            {"config", to_json(fit.config)},
            {"kept", kept},
            {"nodes", nodes},
            {"digest", fit_digest(fit)},
            {"diagnostics",
             {{"d_n", fit.diagnostics.d_n},
              {"fallback_count", fit.diagnostics.fallback_count},
              {"index_size", fit.diagnostics.index_size},
              {"dropped_keys", fit.diagnostics.dropped_keys}}}};
}

//! Trie mirror: every node carries its count sequence, set sizes, and
//! (when `kept` is supplied) membership in K̂.
inline json tree_json(const PatternIndex& index, const std::vector<bool>* kept = nullptr)
{
    auto node = [&](auto&& self, EntryId id) -> json {
        const auto& e = index.entry(id);
        json j = {{"counts", key_json(e.key)},
                  {"depth", e.key.depth()},
                  {"n_controls", e.controls.size()},
                  {"n_members", e.members.size()}};
        if (kept)
            j["kept"] = static_cast<bool>((*kept)[id]);
        json children = json::array();
        for (const auto& [count, child] : e.children)
            children.push_back(self(self, child));
        j["children"] = std::move(children);
        return j;
    };
    return {{"schema_version", kSchemaVersion}, {"kind", "pattern_tree"}, {"max_depth", index.max_depth()},
            {"root", node(node, 0)}};
}

// ---- DGP spec <-> JSON ------------------------------------------------------

inline sim::DGPSpec dgp_from_json(const json& j)
{
    sim::DGPSpec spec;
    try {
        const auto& g = j.at("graph");
        const auto gk = g.at("kind").get<std::string>();
        if (gk == "lattice")
            spec.graph = sim::LatticeSpec{g.at("rows").get<std::size_t>(), g.at("cols").get<std::size_t>(),
                                          g.value("torus", true)};
        else if (gk == "erdos_renyi")
            spec.graph = sim::ErdosRenyiSpec{g.at("n").get<std::size_t>(), g.at("p").get<double>()};
        else
            throw InputError("unknown graph kind `" + gk + "`");

        if (j.contains("propensity")) {
            const auto& p = j.at("propensity");
            const auto pk = p.at("kind").get<std::string>();
            if (pk == "constant")
                spec.propensity.probabilities = {p.at("e0").get<double>()};
            else if (pk == "stratified") {
                spec.propensity.probabilities = p.at("probabilities").get<std::vector<double>>();
                const auto a = p.value("assignment", std::string("modulo"));
                if (a == "modulo")
                    spec.propensity.assignment = sim::StratumAssignment::modulo;
                else if (a == "random")
                    spec.propensity.assignment = sim::StratumAssignment::random;
                else
                    throw InputError("unknown stratum assignment `" + a + "`");
            } else
                throw InputError("unknown propensity kind `" + pk + "`");
        }

        const auto& f = j.at("interference");
        const auto fk = f.at("kind").get<std::string>();
        if (fk == "threshold") {
            sim::ThresholdSpec t;
            t.m0 = f.at("m0").get<std::size_t>();
            t.fallback = f.value("default", 0.0);
            for (const auto& row : f.value("table", json::array()))
                t.table.emplace_back(PatternKey{row.at("key").get<std::vector<std::uint32_t>>()},
                                     row.at("value").get<double>());
            spec.interference = t;
        } else if (fk == "layered_linear") {
            spec.interference = sim::LayeredLinearSpec{f.at("coefficients").get<std::vector<double>>(),
                                                       f.value("intercept", 0.0)};
        } else if (fk == "decay") {
            spec.interference = sim::DecaySpec{f.value("scale", 1.0), f.value("depth", kDefaultDepthCap),
                                               f.value("intercept", 0.0)};
        } else if (fk == "linear_in_means") {
            spec.interference = sim::LinearInMeansSpec{f.at("alpha").get<double>(), f.at("beta").get<double>(),
                                                       f.at("gamma").get<double>()};
        } else
            throw InputError("unknown interference kind `" + fk + "`");

        if (j.contains("tau")) {
            const auto& t = j.at("tau");
            const auto tk = t.at("kind").get<std::string>();
            if (tk == "constant")
                spec.tau.values = {t.at("value").get<double>()};
            else if (tk == "stratified")
                spec.tau.values = t.at("values").get<std::vector<double>>();
            else
                throw InputError("unknown tau kind `" + tk + "`");
        }

        if (j.contains("noise")) {
            const auto& nz = j.at("noise");
            const auto nk = nz.at("kind").get<std::string>();
            if (nk == "gaussian")
                spec.noise = sim::GaussianNoise{nz.at("sd").get<double>()};
            else if (nk == "uniform")
                spec.noise = sim::UniformNoise{nz.at("half_width").get<double>()};
            else
                throw InputError("unknown noise kind `" + nk + "`");
        }
        spec.seed = j.value("seed", std::uint64_t{1});
    } catch (const json::exception& e) {
        throw InputError(std::string("invalid DGP spec: ") + e.what());
    }
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("invalid DGP spec: ") + e.what());
    }
    return spec;
}

inline json to_json(const sim::DGPSpec& spec)
{
    json j;
    if (const auto* l = std::get_if<sim::LatticeSpec>(&spec.graph))
        j["graph"] = {{"kind", "lattice"}, {"rows", l->rows}, {"cols", l->cols}, {"torus", l->torus}};
    else {
        const auto& er = std::get<sim::ErdosRenyiSpec>(spec.graph);
        j["graph"] = {{"kind", "erdos_renyi"}, {"n", er.n}, {"p", er.p}};
    }
    if (spec.propensity.strata() == 1)
        j["propensity"] = {{"kind", "constant"}, {"e0", spec.propensity.probabilities[0]}};
    else
        j["propensity"] = {{"kind", "stratified"},
                           {"probabilities", spec.propensity.probabilities},
                           {"assignment",
                            spec.propensity.assignment == sim::StratumAssignment::modulo ? "modulo" : "random"}};
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, sim::ThresholdSpec>) {
                json table = json::array();
                for (const auto& [k, v] : f.table)
                    table.push_back({{"key", key_json(k)}, {"value", v}});
                j["interference"] = {{"kind", "threshold"}, {"m0", f.m0}, {"default", f.fallback}, {"table", table}};
            } else if constexpr (std::is_same_v<T, sim::LayeredLinearSpec>) {
                j["interference"] = {{"kind", "layered_linear"},
                                     {"coefficients", f.coefficients},
                                     {"intercept", f.intercept}};
            } else if constexpr (std::is_same_v<T, sim::DecaySpec>) {
                j["interference"] = {
                    {"kind", "decay"}, {"scale", f.scale}, {"depth", f.depth}, {"intercept", f.intercept}};
            } else {
                j["interference"] = {{"kind", "linear_in_means"}, {"alpha", f.alpha}, {"beta", f.beta},
                                     {"gamma", f.gamma}};
            }
        },
        spec.interference);
    if (spec.tau.values.size() == 1)
        j["tau"] = {{"kind", "constant"}, {"value", spec.tau.values[0]}};
    else
        j["tau"] = {{"kind", "stratified"}, {"values", spec.tau.values}};
    if (const auto* g = std::get_if<sim::GaussianNoise>(&spec.noise))
        j["noise"] = {{"kind", "gaussian"}, {"sd", g->sd}};
    else
        j["noise"] = {{"kind", "uniform"}, {"half_width", std::get<sim::UniformNoise>(spec.noise).half_width}};
    j["seed"] = spec.seed;
    return j;
}

// ---- Monte Carlo ----------------------------------------------------------

inline json to_json(const sim::EstimatorSummary& s)
{
    return {{"count", s.count}, {"mean", number(s.mean)}, {"bias", number(s.bias)},
            {"sd", number(s.sd)}, {"rmse", number(s.rmse)}, {"mc_se", number(s.mc_se)}};
}

inline json to_json(const sim::MCReport& r)
{
    return {{"schema_version", kSchemaVersion},
            {"kind", "mc_summary"},
            {"spec", to_json(r.spec)},
            {"config",
             {{"interference", to_json(r.resolved)},
              {"propensity", to_json(r.config.propensity)},
              {"level", r.config.level},
              {"run_observed", r.config.run_observed},
              {"run_decoupled", r.config.run_decoupled},
              {"run_oracle", r.config.run_oracle}}},
            {"reps", r.reps},
            {"n", r.n},
            {"estimable_reps", r.estimable_reps},
            {"tau_or", to_json(r.tau_or)},
            {"tau_dr", to_json(r.tau_dr)},
            {"tau_dr_oracle", to_json(r.tau_dr_oracle)},
            {"max_abs_error", {{"mean", number(r.mean_max_abs_error)}, {"median", number(r.median_max_abs_error)}}},
            {"max_abs_error_decoupled_mean", number(r.max_abs_error_decoupled_mean)},
            {"bound_violation_frequency", number(r.violation_frequency)},
            {"coverage", {{"dr_conservative", number(r.dr_coverage)}, {"dr_oracle", number(r.oracle_coverage)}}},
            {"variance", {{"conservative_mean", number(r.mean_sigma_conservative)},
                          {"oracle_mean", number(r.mean_sigma_oracle)}}},
            {"ks_distance_oracle", number(r.ks_distance)},
            {"invariant_violations", r.invariant_violations}};
}

inline void write_rep_csv(std::ostream& out, const sim::MCReport& r)
{
    out << "rep,n_treated,true_adtt,tau_or,max_abs_error,bound_violated,kept_keys,d_n,tau_dr,"
           "sigma_conservative,dr_covered,max_abs_error_decoupled,tau_dr_oracle,sigma_oracle,z_oracle,"
           "oracle_covered\n";
    auto num = [](double v) {
        if (!std::isfinite(v))
            return std::string();
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& x : r.records) {
        out << x.rep << ',' << x.n_treated << ',' << num(x.true_adtt) << ',' << num(x.tau_or) << ','
            << num(x.max_abs_error) << ',' << int(x.bound_violated) << ',' << x.kept_keys << ',' << x.d_n << ','
            << num(x.tau_dr) << ',' << num(x.sigma_conservative) << ',' << int(x.dr_covered) << ','
            << num(x.max_abs_error_decoupled) << ',' << num(x.tau_dr_oracle) << ',' << num(x.sigma_oracle) << ','
            << num(x.z_oracle) << ',' << int(x.oracle_covered) << '\n';
    }
}

} // namespace nethop::report
