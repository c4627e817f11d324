#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"

namespace nethop {
namespace {

using testing::path_config;
using testing::path_fixture;
using testing::random_fixture;

PatternKey key(std::initializer_list<std::uint32_t> c) { return PatternKey{std::vector<std::uint32_t>(c)}; }

void expect_same_fit(const InterferenceFit& a, const InterferenceFit& b, const std::string& ctx)
{
    ASSERT_EQ(a.kept.size(), b.kept.size()) << ctx;
    std::vector<PatternKey> ka, kb;
    for (const auto& k : a.kept)
        ka.push_back(k.key);
    for (const auto& k : b.kept)
        kb.push_back(k.key);
    std::sort(ka.begin(), ka.end());
    std::sort(kb.begin(), kb.end());
    EXPECT_EQ(ka, kb) << ctx;
    EXPECT_EQ(a.m_hat, b.m_hat) << ctx;
    EXPECT_EQ(a.g_hat, b.g_hat) << ctx;
    ASSERT_EQ(a.f_hat.size(), b.f_hat.size());
    for (std::size_t i = 0; i < a.f_hat.size(); ++i)
        EXPECT_NEAR(a.f_hat[i], b.f_hat[i], 1e-12) << ctx << " node " << i;
    EXPECT_EQ(a.diagnostics.d_n, b.diagnostics.d_n) << ctx;
    EXPECT_EQ(a.diagnostics.fallback_count, b.diagnostics.fallback_count) << ctx;
}

TEST(Config, Validation)
{
    InterferenceConfig c;
    EXPECT_NO_THROW(c.validate());
    c.lambda = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.delta = 1.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = {};
    c.sigma_bar = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c.sigma_mode = SigmaMode::pooled_control_sd; // σ̄ ignored when pooled
    EXPECT_NO_THROW(c.validate());
}

TEST(LeafMean, Examples)
{
    const auto fx = path_fixture();
    const auto index = build_pattern_index(fx.graph, fx.obs, 1);
    EXPECT_DOUBLE_EQ(leaf_mean(index, key({0})), 1.0);
    EXPECT_DOUBLE_EQ(leaf_mean(index, PatternKey{}), 3.0);
    EXPECT_THROW(leaf_mean(index, key({7})), EstimationError);

    std::vector<NodeObservation> obs{{0, 2.0, 0}, {0, 4.0, 0}};
    const std::vector<Edge> e{{0, 1}};
    const auto two = build_pattern_index(load_graph(e, 2), obs, 1);
    EXPECT_DOUBLE_EQ(leaf_mean(two, key({0})), 3.0);
}

TEST(Alpha, Examples)
{
    EXPECT_NEAR(alpha(2, 1.0, 0.05, 5), std::sqrt(std::log(1000.0)), 1e-12);
    EXPECT_NEAR(alpha(2, 1.0, 0.05, 5), 2.62826, 1e-5);
    EXPECT_NEAR(alpha(8, 1.0, 0.05, 5), 0.5 * alpha(2, 1.0, 0.05, 5), 1e-12);
    EXPECT_NEAR(alpha(50, 1.0, 0.05, 100), 0.718, 1e-3);
    EXPECT_THROW(alpha(0, 1.0, 0.05, 5), EstimationError);
}

// Paths a-b-c; in half of them b is treated, so a and c have T1 = 1 and
// outcome 10, every other control has T1 = 0 and outcome 0. Both depth-1 keys
// are separated by far more than λ(α+α) and are kept.
TEST(Prune, SeparatedSiblingsKept)
{
    std::vector<Edge> edges;
    std::vector<NodeObservation> obs(150);
    for (NodeId k = 0; k < 50; ++k) {
        edges.emplace_back(3 * k, 3 * k + 1);
        edges.emplace_back(3 * k + 1, 3 * k + 2);
        const bool treated = k < 25;
        obs[3 * k] = {0, treated ? 10.0 : 0.0, 0};
        obs[3 * k + 1] = {static_cast<std::uint8_t>(treated), 0.0, 0};
        obs[3 * k + 2] = {0, treated ? 10.0 : 0.0, 0};
    }
    const auto g = load_graph(edges, 150);
    InterferenceConfig c;
    const auto index = build_pattern_index(g, obs, 1);
    const auto tree = prune(index, c);
    const auto one = *index.find(key({1}));
    const auto zero = *index.find(key({0}));
    EXPECT_EQ(index.entry(one).controls.size(), 50u);
    EXPECT_EQ(index.entry(zero).controls.size(), 75u);
    EXPECT_TRUE(tree.kept[one]);
    EXPECT_TRUE(tree.kept[zero]);
    EXPECT_LT(c.lambda * (tree.alpha[one] + tree.alpha[zero]), 10.0);
}

TEST(Prune, IdenticalOutcomesKeepOnlyRoot)
{
    for (std::uint64_t s = 0; s < 30; ++s) {
        auto fx = random_fixture(s);
        for (auto& o : fx.obs)
            o.y = 1.25;
        InterferenceConfig c;
        c.sigma_bar = 1e-3;
        const auto f = fit(fx.graph, fx.obs, c);
        ASSERT_EQ(f.kept.size(), 1u);
        EXPECT_TRUE(f.kept[0].key.is_root());
        for (double v : f.f_hat)
            EXPECT_DOUBLE_EQ(v, 1.25);
        for (auto m : f.m_hat)
            EXPECT_EQ(m, 0u);
    }
}

TEST(Prune, SingleDepthOneKeyWithoutVariationPruned)
{
    // Isolated-free path of controls: all depth-1 signatures are (0).
    const std::vector<Edge> edges{{0, 1}, {1, 2}};
    const std::vector<NodeObservation> obs{{0, 1.0, 0}, {0, 1.0, 0}, {0, 1.0, 0}};
    const auto index = build_pattern_index(load_graph(edges, 3), obs, 1);
    ASSERT_EQ(index.size(), 2u);
    EXPECT_FALSE(prune(index, InterferenceConfig{}).kept[1]);
}

TEST(Fit, PathFixture)
{
    const auto fx = path_fixture(2.0);
    const auto f = fit(fx.graph, fx.obs, path_config());
    EXPECT_NEAR(f.f_hat[0], 5.0, 1e-12);
    EXPECT_NEAR(f.f_hat[2], 5.0, 1e-12);
    EXPECT_NEAR(f.f_hat[3], 1.0, 1e-12);
    EXPECT_NEAR(f.f_hat[4], 1.0, 1e-12);
    EXPECT_NEAR(f.f_hat[1], 1.0, 1e-12);
    EXPECT_EQ(f.m_hat, (std::vector<std::uint32_t>{1, 1, 1, 1, 1}));
    expect_same_fit(f, sim::brute_force_fit(fx.graph, fx.obs, path_config()), "path");
    EXPECT_EQ(f.config.max_depth, 4u);
    EXPECT_EQ(f.diagnostics.d_n, 3u);
    EXPECT_TRUE(fit_violations(f).empty());
}

TEST(Fit, ConstantSignalPrunesToRoot)
{
    const auto g = generate_lattice(6, 6, true);
    std::vector<NodeObservation> obs(g.num_nodes());
    for (NodeId i = 0; i < obs.size(); ++i)
        obs[i] = {static_cast<std::uint8_t>(i % 3 == 0), 4.0 + 1.5 * (i % 3 == 0), 0};
    const auto f = fit(g, obs, InterferenceConfig{});
    for (std::size_t i = 0; i < obs.size(); ++i) {
        EXPECT_DOUBLE_EQ(f.f_hat[i], 4.0);
        EXPECT_EQ(f.m_hat[i], 0u);
    }
    EXPECT_EQ(f.diagnostics.fallback_count, obs.size());
    EXPECT_EQ(f.diagnostics.d_n, 1u);
}

TEST(Fit, UnmatchedTreatedNodeFallsBack)
{
    // Star: hub 0 treated with 3 treated leaves; controls on a separate path.
    const std::vector<Edge> edges{{0, 1}, {0, 2}, {0, 3}, {4, 5}, {5, 6}};
    std::vector<NodeObservation> obs{{1, 9, 0}, {1, 9, 0}, {1, 9, 0}, {1, 9, 0}, {0, 1, 0}, {0, 3, 0}, {0, 5, 0}};
    const auto g = load_graph(edges, 7);
    const auto f = fit(g, obs, InterferenceConfig{});
    EXPECT_EQ(f.m_hat[0], 0u); // signature (3) never seen at a control
    EXPECT_DOUBLE_EQ(f.f_hat[0], 3.0);
}

TEST(Fit, RejectsNoControlsAndSyntheticSource)
{
    auto fx = path_fixture();
    InterferenceConfig c;
    c.pattern_source = PatternSource::synthetic;
    EXPECT_THROW(fit(fx.graph, fx.obs, c), std::invalid_argument);
    for (auto& o : fx.obs)
        o.z = 1;
    EXPECT_THROW(fit(fx.graph, fx.obs, InterferenceConfig{}), EstimationError);
}

TEST(Fit, SingleControlNode)
{
    const auto g = load_graph(std::vector<Edge>{}, 1);
    const std::vector<NodeObservation> obs{{0, 2.5, 0}};
    const auto f = fit(g, obs, InterferenceConfig{});
    EXPECT_EQ(f.kept.size(), 1u);
    EXPECT_DOUBLE_EQ(f.f_hat[0], 2.5);
    const Labels synth{1};
    EXPECT_DOUBLE_EQ(fit_decoupled(g, obs, synth, InterferenceConfig{}).f_hat[0], 2.5);
}

TEST(Fit, MatchesBruteForceOnRandomFixtures)
{
    for (std::uint64_t s = 0; s < 300; ++s) {
        const auto fx = random_fixture(5000 + s);
        InterferenceConfig c;
        c.sigma_bar = std::vector<double>{0.02, 0.1, 0.5, 1.0}[s % 4];
        c.lambda = 1.5 + 0.5 * static_cast<double>(s % 3);
        c.delta = s % 2 ? 0.05 : 0.5;
        c.max_depth = s % 5;
        if (s % 7 == 0)
            c.sigma_mode = SigmaMode::pooled_control_sd;
        expect_same_fit(fit(fx.graph, fx.obs, c), sim::brute_force_fit(fx.graph, fx.obs, c),
                        "seed " + std::to_string(s));
    }
}

TEST(Fit, EnvelopePruneMatchesLiteralRule)
{
    // Bigger than brute_force_fit allows; compare against a direct scan of the
    // rule over the same index.
    const auto g = generate_lattice(8, 8, true);
    for (std::uint64_t s = 0; s < 10; ++s) {
        std::vector<NodeObservation> obs(g.num_nodes());
        const CounterRng rng(s, "fixture");
        for (NodeId i = 0; i < obs.size(); ++i)
            obs[i].z = rng.bernoulli(i, 0.4);
        const auto z = labels_of(obs);
        for (NodeId i = 0; i < obs.size(); ++i)
            obs[i].y = signature(g, z, i, 2).counts[0] * 1.0 + signature(g, z, i, 2).counts[1] * 0.3
                + 0.1 * rng.normal(1000 + i);
        InterferenceConfig c;
        c.sigma_bar = 0.1;
        c.max_depth = 4;
        const auto index = build_pattern_index(g, obs, 4);
        const auto tree = prune(index, c);
        const std::size_t n = g.num_nodes();
        for (EntryId id = 1; id < index.size(); ++id) {
            const auto& gk = index.entry(id).key;
            const auto par = parent(gk);
            bool keep = false;
            for (const auto& a : index.entries())
                for (const auto& b : index.entries())
                    if (!keep && descends_from(a.key, gk) && descends_from(b.key, par)) {
                        const double fa = a.control_sum / a.controls.size();
                        const double fb = b.control_sum / b.controls.size();
                        keep = std::abs(fa - fb) > c.lambda * (alpha(a.controls.size(), c, n)
                                                               + alpha(b.controls.size(), c, n));
                    }
            EXPECT_EQ(tree.kept[id], keep) << gk.to_string();
        }
    }
}

TEST(FitDecoupled, RealLabelsMatchBruteForce)
{
    for (std::uint64_t s = 0; s < 150; ++s) {
        const auto fx = random_fixture(7000 + s);
        InterferenceConfig c;
        c.sigma_bar = s % 2 ? 0.05 : 0.3;
        const auto z = labels_of(fx.obs);
        expect_same_fit(fit_decoupled(fx.graph, fx.obs, z, c), sim::brute_force_fit(fx.graph, fx.obs, c, z),
                        "seed " + std::to_string(s));
    }
}

TEST(FitDecoupled, RandomSyntheticLabelsMatchBruteForce)
{
    for (std::uint64_t s = 0; s < 150; ++s) {
        const auto fx = random_fixture(8000 + s);
        std::mt19937_64 gen(s);
        Labels synth(fx.obs.size());
        for (auto& v : synth)
            v = gen() % 2;
        InterferenceConfig c;
        c.sigma_bar = 0.1;
        expect_same_fit(fit_decoupled(fx.graph, fx.obs, synth, c), sim::brute_force_fit(fx.graph, fx.obs, c, synth),
                        "seed " + std::to_string(s));
    }
}

TEST(FitDecoupled, AllZeroSyntheticLabelsGiveChain)
{
    const auto fx = path_fixture();
    const Labels zeros(5, 0);
    const auto [index, f] = fit_decoupled_with_index(fx.graph, fx.obs, zeros, path_config());
    for (const auto& e : index.entries())
        EXPECT_LE(e.children.size(), 1u);
    // Nodes 3, 4 have no treated neighbour: all-zero keys. Nodes 0 and 2 sit
    // next to the treated node and only match the root.
    EXPECT_EQ(f.m_hat[0], 0u);
    EXPECT_EQ(f.m_hat[2], 0u);
    EXPECT_DOUBLE_EQ(f.f_hat[0], 3.0);
    EXPECT_GE(f.m_hat[3], 1u);
    EXPECT_DOUBLE_EQ(f.f_hat[3], 1.0);
    expect_same_fit(f, sim::brute_force_fit(fx.graph, fx.obs, path_config(), zeros), "zeros");
}

TEST(FitDecoupled, KeySetIgnoresOutcomes)
{
    const auto fx = random_fixture(99);
    Labels synth(fx.obs.size(), 0);
    synth[0] = 1;
    auto shuffled = fx.obs;
    std::mt19937_64 gen(4);
    for (auto& o : shuffled)
        o.y = std::normal_distribution<double>(0, 5)(gen);
    const auto a = build_decoupled_index(fx.graph, fx.obs, synth, 3).keys();
    const auto b = build_decoupled_index(fx.graph, shuffled, synth, 3).keys();
    EXPECT_EQ(a, b);
}

TEST(ComputeDn, Examples)
{
    const auto fx = path_fixture();
    EXPECT_EQ(compute_dn(fx.graph, std::vector<std::uint32_t>(5, 0)), 1u);
    EXPECT_EQ(compute_dn(fx.graph, std::vector<std::uint32_t>(5, 1)), 3u);
    const auto k5 = generate_erdos_renyi(5, 1.0, 0);
    EXPECT_EQ(compute_dn(k5, std::vector<std::uint32_t>(5, 1)), 5u);
}

TEST(Properties, TreatedOutcomesNeverChangeFit)
{
    for (std::uint64_t s = 0; s < 60; ++s) {
        auto fx = random_fixture(9000 + s);
        InterferenceConfig c;
        c.sigma_bar = 0.2;
        const auto before = fit(fx.graph, fx.obs, c);
        for (auto& o : fx.obs)
            if (o.z)
                o.y += 1000.0 * static_cast<double>(s + 1);
        expect_same_fit(before, fit(fx.graph, fx.obs, c), "seed " + std::to_string(s));
    }
}

TEST(Properties, AlphaNondecreasingAlongPaths)
{
    for (std::uint64_t s = 0; s < 60; ++s) {
        const auto fx = random_fixture(9500 + s);
        const auto index = build_pattern_index(fx.graph, fx.obs, 4);
        const auto tree = prune(index, InterferenceConfig{});
        for (EntryId id = 1; id < index.size(); ++id)
            EXPECT_GE(tree.alpha[id], tree.alpha[index.entry(id).parent]);
    }
}

TEST(Properties, AncestorClosureAndWorkerInvariance)
{
    const auto g = generate_lattice(12, 12, true);
    std::vector<NodeObservation> obs(g.num_nodes());
    const CounterRng rng(17, "fixture");
    for (NodeId i = 0; i < obs.size(); ++i)
        obs[i] = {static_cast<std::uint8_t>(rng.bernoulli(i, 0.5)), 0.0, 0};
    const auto z = labels_of(obs);
    for (NodeId i = 0; i < obs.size(); ++i)
        obs[i].y = 2.0 * (signature(g, z, i, 1).counts[0] >= 2) + 0.3 * rng.normal(500 + i);
    InterferenceConfig c;
    c.sigma_bar = 0.3;
    c.workers = 1;
    const auto one = fit(g, obs, c);
    c.workers = 4;
    const auto four = fit(g, obs, c);
    EXPECT_TRUE(fit_violations(one).empty());
    EXPECT_EQ(one.f_hat, four.f_hat); // bitwise
    EXPECT_EQ(one.m_hat, four.m_hat);
    EXPECT_EQ(report::fit_digest(one), report::fit_digest(four));
}

} // namespace
} // namespace nethop
