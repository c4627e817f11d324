#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "graph.hpp"
#include "interference.hpp"
#include "patterns.hpp"
#include "rng.hpp"

namespace nethop::sim {

struct LatticeSpec {
    std::size_t rows = 20;
    std::size_t cols = 20;
    bool torus = true;
};

struct ErdosRenyiSpec {
    std::size_t n = 50;
    double p = 0.1;
};

using GraphSpec = std::variant<LatticeSpec, ErdosRenyiSpec>;

enum class StratumAssignment { modulo, random };

//! Per-stratum Bernoulli assignment probabilities. A single entry means one
//! stratum with a constant propensity.
struct PropensitySpec {
    std::vector<double> probabilities{0.5};
    StratumAssignment assignment = StratumAssignment::modulo;

    std::size_t strata() const { return probabilities.size(); }
};

//! f depends only on the depth-m0 signature: value from the table, else
//! `fallback`.
struct ThresholdSpec {
    std::size_t m0 = 1;
    std::vector<std::pair<PatternKey, double>> table;
    double fallback = 0.0;
};

//! f = intercept + Σ_k μ_k T_{i,k}.
struct LayeredLinearSpec {
    std::vector<double> coefficients;
    double intercept = 0.0;
};

//! Layered-linear with μ_k = scale·exp(-4k²), k = 1..depth.
struct DecaySpec {
    double scale = 1.0;
    std::size_t depth = kDefaultDepthCap;
    double intercept = 0.0;

    LayeredLinearSpec as_layered() const
    {
        LayeredLinearSpec out;
        out.intercept = intercept;
        for (std::size_t k = 1; k <= depth; ++k)
            out.coefficients.push_back(scale * std::exp(-4.0 * static_cast<double>(k * k)));
        return out;
    }
};

//! Y = α + βÃY + γÃz + ξ with row-normalized adjacency Ã, |β| < 1.
struct LinearInMeansSpec {
    double alpha = 0.0;
    double beta = 0.5;
    double gamma = 1.0;
};

using InterferenceSpec = std::variant<ThresholdSpec, LayeredLinearSpec, DecaySpec, LinearInMeansSpec>;

struct TauSpec {
    std::vector<double> values{1.0}; // one value per stratum; a single value is a constant τ

    double at(std::uint32_t x) const { return values.size() == 1 ? values[0] : values.at(x); }
};

struct GaussianNoise {
    double sd = 1.0;
};

struct UniformNoise {
    double half_width = 1.0;
};

using NoiseSpec = std::variant<GaussianNoise, UniformNoise>;

struct DGPSpec {
    GraphSpec graph = LatticeSpec{};
    PropensitySpec propensity;
    InterferenceSpec interference = ThresholdSpec{};
    TauSpec tau;
    NoiseSpec noise = GaussianNoise{};
    std::uint64_t seed = 1;

    void validate() const
    {
        if (const auto* l = std::get_if<LatticeSpec>(&graph); l && (l->rows < 2 || l->cols < 2))
            throw std::invalid_argument("lattice rows and cols must be >= 2");
        if (const auto* er = std::get_if<ErdosRenyiSpec>(&graph); er && (er->n < 1 || !(er->p >= 0 && er->p <= 1)))
            throw std::invalid_argument("erdos_renyi requires n >= 1 and p in [0,1]");
        if (propensity.probabilities.empty())
            throw std::invalid_argument("propensity needs at least one stratum");
        for (double e : propensity.probabilities)
            if (!(e > 0.0 && e < 1.0))
                throw std::invalid_argument("stratum propensities must lie in (0,1)");
        if (tau.values.empty() || (tau.values.size() != 1 && tau.values.size() != propensity.strata()))
            throw std::invalid_argument("tau needs one value or one per stratum");
        if (const auto* lim = std::get_if<LinearInMeansSpec>(&interference); lim && !(std::abs(lim->beta) < 1.0))
            throw std::invalid_argument("linear-in-means requires |beta| < 1");
        if (const auto* t = std::get_if<ThresholdSpec>(&interference))
            for (const auto& [key, value] : t->table)
                if (key.depth() != t->m0)
                    throw std::invalid_argument("threshold table keys must have depth m0");
        if (const auto* g = std::get_if<GaussianNoise>(&noise); g && !(g->sd >= 0.0))
            throw std::invalid_argument("gaussian sd must be >= 0");
        if (const auto* u = std::get_if<UniformNoise>(&noise); u && !(u->half_width >= 0.0))
            throw std::invalid_argument("uniform half_width must be >= 0");
    }

    //! Variance of one noise draw.
    double noise_variance() const
    {
        if (const auto* g = std::get_if<GaussianNoise>(&noise))
            return g->sd * g->sd;
        const auto& u = std::get<UniformNoise>(noise);
        return u.half_width * u.half_width / 3.0;
    }
};

struct SimulatedData {
    Graph graph;
    std::vector<NodeObservation> observations; // z, y, x
    std::vector<double> f;                     // interference f_i under the realized z
    std::vector<double> tau;                   // τ_i
    std::vector<double> epsilon;               // ε_i
    std::vector<double> noise_variance;        // Var(ε_i | Z_i, X_i)
    std::vector<double> propensity;            // true e(X_i)
    double true_adtt = 0.0;                    // mean τ_i over treated (NaN without treated)
    double true_adte = 0.0;                    // mean τ_i over all nodes
};

inline Graph make_graph(const GraphSpec& spec, std::uint64_t seed)
{
    if (const auto* l = std::get_if<LatticeSpec>(&spec))
        return generate_lattice(l->rows, l->cols, l->torus);
    const auto& er = std::get<ErdosRenyiSpec>(spec);
    return generate_erdos_renyi(er.n, er.p, seed);
}

namespace detail {

inline std::vector<double> layered_f(const Graph& g, const Labels& z, const LayeredLinearSpec& spec)
{
    std::vector<double> f(g.num_nodes(), spec.intercept);
    LayerWalker walker(g);
    for (NodeId i = 0; i < g.num_nodes(); ++i)
        walker.walk(i, spec.coefficients.size(), [&](std::size_t d, NodeId v) {
            if (z[v])
                f[i] += spec.coefficients[d - 1];
        });
    return f;
}

inline std::vector<double> threshold_f(const Graph& g, const Labels& z, const ThresholdSpec& spec)
{
    std::vector<double> f(g.num_nodes(), spec.fallback);
    if (spec.table.empty())
        return f;
    for (NodeId i = 0; i < g.num_nodes(); ++i) {
        const auto key = signature(g, z, i, spec.m0);
        for (const auto& [k, value] : spec.table)
            if (k == key) {
                f[i] = value;
                break;
            }
    }
    return f;
}

//! Exact decomposition of the linear-in-means equilibrium with M = (I - βÃ)^-1:
//! Y = M(α1 + γÃz + ξ), direct coefficient γ[MÃ]_ii, interference
//! [Mα1]_i + γ Σ_{j≠i} [MÃ]_ij z_j, noise [Mξ]_i.
struct LimParts {
    std::vector<double> direct, f, epsilon, noise_variance;
};

inline LimParts linear_in_means(const Graph& g, const Labels& z, const LinearInMeansSpec& spec,
                                std::span<const double> xi, double xi_variance)
{
    const auto n = static_cast<Eigen::Index>(g.num_nodes());
    Eigen::MatrixXd a_tilde = Eigen::MatrixXd::Zero(n, n);
    for (NodeId i = 0; i < g.num_nodes(); ++i) {
        const auto nb = g.neighbors(i);
        for (NodeId j : nb)
            a_tilde(i, j) = 1.0 / static_cast<double>(nb.size());
    }
    const Eigen::MatrixXd system = Eigen::MatrixXd::Identity(n, n) - spec.beta * a_tilde;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    const Eigen::MatrixXd m = lu.inverse();
    if (!m.allFinite() || ((system * m - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() > 1e-8))
        throw EstimationError("linear-in-means: I - beta*A is singular");
    const Eigen::MatrixXd spill = m * a_tilde;
    const Eigen::VectorXd baseline = m * Eigen::VectorXd::Constant(n, spec.alpha);
    const Eigen::VectorXd xi_vec = Eigen::Map<const Eigen::VectorXd>(xi.data(), n);
    const Eigen::VectorXd eps = m * xi_vec;
    Eigen::VectorXd zv(n);
    for (Eigen::Index i = 0; i < n; ++i)
        zv(i) = z[static_cast<std::size_t>(i)];
    const Eigen::VectorXd peer = spill * zv;

    LimParts parts;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double direct = spec.gamma * spill(i, i);
        parts.direct.push_back(direct);
        parts.f.push_back(baseline(i) + spec.gamma * peer(i) - direct * zv(i));
        parts.epsilon.push_back(eps(i));
        parts.noise_variance.push_back(xi_variance * m.row(i).squaredNorm());
    }
    return parts;
}

} // namespace detail

//! Draws one data set on a fixed graph. Strata, treatments and noise come
//! from counter streams keyed by (spec.seed, purpose, rep, node).
inline SimulatedData simulate_on(const Graph& graph, const DGPSpec& spec, std::uint64_t rep = 0)
{
    spec.validate();
    const std::size_t n = graph.num_nodes();
    const CounterRng stratum_rng(spec.seed, "stratum", rep);
    const CounterRng treat_rng(spec.seed, "treat", rep);
    const CounterRng noise_rng(spec.seed, "noise", rep);

    SimulatedData data;
    data.graph = graph;
    data.observations.resize(n);
    data.propensity.resize(n);
    Labels z(n);
    const std::size_t strata = spec.propensity.strata();
    for (NodeId i = 0; i < n; ++i) {
        auto& o = data.observations[i];
        if (strata > 1)
            o.x = static_cast<std::uint32_t>(spec.propensity.assignment == StratumAssignment::modulo
                                                 ? i % strata
                                                 : stratum_rng.below(i, strata));
        data.propensity[i] = spec.propensity.probabilities[o.x];
        o.z = treat_rng.bernoulli(i, data.propensity[i]) ? 1 : 0;
        z[i] = o.z;
    }

    std::vector<double> draws(n);
    for (NodeId i = 0; i < n; ++i) {
        if (const auto* gn = std::get_if<GaussianNoise>(&spec.noise))
            draws[i] = gn->sd * noise_rng.normal(i);
        else
            draws[i] = std::get<UniformNoise>(spec.noise).half_width * (2.0 * noise_rng.uniform(i) - 1.0);
    }

    data.tau.resize(n);
    for (NodeId i = 0; i < n; ++i)
        data.tau[i] = spec.tau.at(data.observations[i].x);

    if (const auto* lim = std::get_if<LinearInMeansSpec>(&spec.interference)) {
        auto parts = detail::linear_in_means(graph, z, *lim, draws, spec.noise_variance());
        for (NodeId i = 0; i < n; ++i)
            data.tau[i] += parts.direct[i];
        data.f = std::move(parts.f);
        data.epsilon = std::move(parts.epsilon);
        data.noise_variance = std::move(parts.noise_variance);
    } else {
        if (const auto* t = std::get_if<ThresholdSpec>(&spec.interference))
            data.f = detail::threshold_f(graph, z, *t);
        else if (const auto* ll = std::get_if<LayeredLinearSpec>(&spec.interference))
            data.f = detail::layered_f(graph, z, *ll);
        else
            data.f = detail::layered_f(graph, z, std::get<DecaySpec>(spec.interference).as_layered());
        data.epsilon = std::move(draws);
        data.noise_variance.assign(n, spec.noise_variance());
    }

    double treated_tau = 0.0, all_tau = 0.0;
    std::size_t n1 = 0;
    for (NodeId i = 0; i < n; ++i) {
        auto& o = data.observations[i];
        o.y = o.z * data.tau[i] + data.f[i] + data.epsilon[i];
        all_tau += data.tau[i];
        if (o.z) {
            treated_tau += data.tau[i];
            ++n1;
        }
    }
    data.true_adtt = n1 ? treated_tau / static_cast<double>(n1) : std::nan("");
    data.true_adte = n ? all_tau / static_cast<double>(n) : std::nan("");
    return data;
}

inline SimulatedData simulate(const DGPSpec& spec)
{
    spec.validate();
    return simulate_on(make_graph(spec.graph, spec.seed), spec, 0);
}

//! r^z(g): max - min of the true f over V̄_g, the nodes whose signature at
//! depth |g| equals g (nodes whose eccentricity is below |g| never match).
inline double true_approx_error(const SimulatedData& data, const PatternKey& g)
{
    const auto z = labels_of(data.observations);
    const std::size_t n = data.graph.num_nodes();
    const auto sigs = node_signatures(data.graph, z, g.depth());
    double lo = INFINITY, hi = -INFINITY;
    for (NodeId i = 0; i < n; ++i) {
        if (sigs[i] == g) {
            lo = std::min(lo, data.f[i]);
            hi = std::max(hi, data.f[i]);
        }
    }
    if (lo > hi)
        throw EstimationError("true_approx_error: no node matches pattern (" + g.to_string() + ")");
    return hi - lo;
}

//! Σ_n with the conditional expectation in closed form:
//! (1/N₁) Σ [Z_i v_i + (1 - Z_i) v_i (e_i/(1 - e_i))²], v_i = Var(ε_i).
inline double oracle_variance(const SimulatedData& data, std::span<const double> propensity)
{
    const auto& obs = data.observations;
    if (propensity.size() != obs.size())
        throw std::invalid_argument("oracle_variance: propensity length mismatch");
    double sum = 0.0;
    std::size_t n1 = 0;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        if (obs[i].z) {
            sum += data.noise_variance[i];
            ++n1;
        } else {
            const double ratio = propensity[i] / (1.0 - propensity[i]);
            sum += data.noise_variance[i] * ratio * ratio;
        }
    }
    if (n1 == 0)
        throw EstimationError("no treated units");
    return sum / static_cast<double>(n1);
}

//! Per-node right-hand side of the uniform oracle inequality,
//! min over depths m of λ/(λ-1)·r(g_m) + 3λσ̄·sqrt(2log(2n²/δ)/|V_{g_m}|),
//! with g_m node i's depth-m signature and patterns with |V_g| = 0 skipped.
//! r(g) is evaluated from the index's V̄_g and the true f.
inline std::vector<double> oracle_inequality_bound(const PatternIndex& index, std::span<const double> f_true,
                                                   const InterferenceConfig& resolved)
{
    const std::size_t n = index.num_nodes();
    std::vector<double> r(index.size());
    for (EntryId id = 0; id < index.size(); ++id) {
        double lo = INFINITY, hi = -INFINITY;
        for (NodeId i : index.entry(id).members) {
            lo = std::min(lo, f_true[i]);
            hi = std::max(hi, f_true[i]);
        }
        r[id] = hi - lo;
    }
    const double lam = resolved.lambda;
    std::vector<double> bound(n, INFINITY);
    for (NodeId i = 0; i < n; ++i) {
        for (EntryId id : index.node_path(i)) {
            const auto& e = index.entry(id);
            if (e.controls.empty())
                continue;
            const double rhs = lam / (lam - 1.0) * r[id] + 3.0 * lam * alpha(e.controls.size(), resolved, n);
            bound[i] = std::min(bound[i], rhs);
        }
    }
    return bound;
}

} // namespace nethop::sim
