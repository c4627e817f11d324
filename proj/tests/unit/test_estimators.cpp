#include <gtest/gtest.h>

#include "oracles.hpp"

namespace nethop {
namespace {

using testing::path_config;
using testing::path_fixture;

std::vector<NodeObservation> table(std::initializer_list<std::tuple<int, double, int>> rows)
{
    std::vector<NodeObservation> out;
    for (const auto& [z, y, x] : rows)
        out.push_back({static_cast<std::uint8_t>(z), y, static_cast<std::uint32_t>(x)});
    return out;
}

TEST(Or, Examples)
{
    const auto obs = table({{1, 2.0, 0}, {1, 4.0, 0}, {0, 9.0, 0}});
    EXPECT_DOUBLE_EQ(estimate_or(obs, std::vector<double>(3, 0.0)).tau_hat, 3.0);
    EXPECT_DOUBLE_EQ(estimate_or(obs, std::vector<double>{2.0, 4.0, 0.0}).tau_hat, 0.0);
    EXPECT_EQ(estimate_or(obs, std::vector<double>(3, 0.0)).variance_kind, VarianceKind::none);
    const auto none = table({{0, 1.0, 0}});
    EXPECT_THROW(estimate_or(none, std::vector<double>{0.0}), EstimationError);
}

TEST(Or, PathFixtureRecoversTau)
{
    const auto fx = path_fixture(2.0);
    const auto f = fit(fx.graph, fx.obs, path_config());
    EXPECT_NEAR(estimate_or(fx.obs, f.f_hat).tau_hat, 2.0, 1e-12);
    const auto bf = sim::brute_force_fit(fx.graph, fx.obs, path_config());
    EXPECT_NEAR(estimate_or(fx.obs, bf.f_hat).tau_hat, 2.0, 1e-12);
}

TEST(Propensity, Kinds)
{
    const auto obs = table({{1, 0, 0}, {1, 0, 0}, {0, 0, 0}, {0, 0, 0}});
    EXPECT_EQ(estimate_propensity(obs, PropensityModel::constant(0.5)), std::vector<double>(4, 0.5));
    EXPECT_EQ(estimate_propensity(obs, PropensityModel::stratified()), std::vector<double>(4, 0.5));
    const auto all = table({{1, 0, 0}, {1, 0, 0}, {0, 0, 1}});
    const auto e = estimate_propensity(all, PropensityModel::stratified(0.05));
    EXPECT_DOUBLE_EQ(e[0], 0.95);
    EXPECT_DOUBLE_EQ(e[2], 0.05);
    const auto sup = estimate_propensity(obs, PropensityModel::from_values({0.0, 0.3, 1.0, 0.5}, 0.1));
    EXPECT_EQ(sup, (std::vector<double>{0.1, 0.3, 0.9, 0.5}));
    const auto gap = table({{1, 0, 0}, {0, 0, 2}});
    EXPECT_THROW(estimate_propensity(gap, PropensityModel::stratified()), EstimationError);
    EXPECT_THROW(estimate_propensity(obs, PropensityModel::from_values({0.5})), std::invalid_argument);
    EXPECT_THROW(estimate_propensity(obs, PropensityModel::from_values({0.5, 0.5, 0.5, 1.5})), InputError);
    auto bad = PropensityModel::stratified(0.5);
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Dr, EqualsOrWhenPropensityZero)
{
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto fx = testing::random_fixture(s);
        fx.obs[0].z = 1;
        fx.obs[1].z = 0;
        const auto f = fit(fx.graph, fx.obs, path_config());
        const std::vector<double> zeros(fx.obs.size(), 0.0);
        EXPECT_NEAR(estimate_dr(fx.obs, f.f_hat, zeros).tau_hat, estimate_or(fx.obs, f.f_hat).tau_hat, 1e-12);
    }
}

TEST(Dr, SingleTreatedNode)
{
    const auto obs = table({{0, 3.0, 0}, {1, 7.0, 0}, {0, 1.0, 0}});
    const std::vector<double> f{0.0, 2.0, 0.0};
    const auto est = estimate_dr(obs, f, std::vector<double>(3, 0.0));
    EXPECT_DOUBLE_EQ(est.tau_hat, 5.0);
    EXPECT_DOUBLE_EQ(est.variance, 0.0);
    EXPECT_DOUBLE_EQ(est.ci_low, 5.0);
}

TEST(Dr, HandComputedWithInterval)
{
    // scores: treated (5-1)=4, (3-1)=2 ; controls -(2-1)*1 = -1, -(0-1)*1 = 1
    const auto obs = table({{1, 5.0, 0}, {1, 3.0, 0}, {0, 2.0, 0}, {0, 0.0, 0}});
    const std::vector<double> f(4, 1.0), e(4, 0.5);
    const auto est = estimate_dr(obs, f, e, 0.95);
    EXPECT_DOUBLE_EQ(est.tau_hat, (4.0 + 2.0 - 1.0 + 1.0) / 2.0);
    // centered scores: 1, -1, -1, 1 -> Σ̃ = 4/2
    EXPECT_DOUBLE_EQ(est.variance, 2.0);
    const double half = 1.959963984540054 * std::sqrt(2.0 / 2.0);
    EXPECT_NEAR(est.ci_low, 3.0 - half, 1e-12);
    EXPECT_NEAR(est.ci_high, 3.0 + half, 1e-12);
    EXPECT_LE(est.ci_low, est.tau_hat);
    EXPECT_EQ(est.variance_kind, VarianceKind::conservative);
    EXPECT_THROW(estimate_dr(obs, f, std::vector<double>(4, 1.0)), std::invalid_argument);
}

TEST(Variance, ConservativeExamples)
{
    const auto obs = table({{1, 2.0, 0}, {0, 1.0, 0}});
    EXPECT_DOUBLE_EQ(variance_conservative(obs, std::vector<double>{1.0, 1.0}, std::vector<double>{0.3, 0.3}, 1.0),
                     0.0);
    EXPECT_DOUBLE_EQ(variance_conservative(obs, std::vector<double>{0.5, 9.0}, std::vector<double>{0.0, 0.0}, 0.0),
                     1.5 * 1.5);
}

TEST(Variance, PluginEqualsConservativeForConstantTau)
{
    for (std::uint64_t s = 0; s < 50; ++s) {
        auto fx = testing::random_fixture(100 + s);
        fx.obs[0].z = 1;
        fx.obs[1].z = 0;
        const auto f = fit(fx.graph, fx.obs, path_config());
        const auto e = estimate_propensity(fx.obs, PropensityModel::stratified());
        const auto dr = estimate_dr(fx.obs, f.f_hat, e);
        const std::vector<double> tau(fx.obs.size(), dr.tau_hat);
        EXPECT_NEAR(variance_plugin(fx.obs, f.f_hat, e, tau), dr.variance, 1e-12);
        EXPECT_GE(dr.variance, 0.0);
    }
}

TEST(TauOfX, Examples)
{
    const auto obs = table({{1, 1.0, 0}, {1, 3.0, 0}, {1, 5.0, 1}, {0, 0.0, 1}});
    const std::vector<double> zero(4, 0.0);
    const auto m = estimate_tau_of_x(obs, zero);
    EXPECT_DOUBLE_EQ(m.at(0), 2.0);
    EXPECT_DOUBLE_EQ(m.at(1), 5.0);
    EXPECT_EQ(per_node(obs, m), (std::vector<double>{2.0, 2.0, 5.0, 5.0}));

    const auto single = table({{1, 1.0, 0}, {1, 4.0, 0}, {0, 2.0, 0}});
    EXPECT_DOUBLE_EQ(estimate_tau_of_x(single, std::vector<double>(3, 0.5)).at(0),
                     estimate_or(single, std::vector<double>(3, 0.5)).tau_hat);

    const auto lonely = table({{1, 1.0, 0}, {0, 4.0, 3}});
    try {
        estimate_tau_of_x(lonely, std::vector<double>(2, 0.0));
        FAIL();
    } catch (const EstimationError& e) {
        EXPECT_NE(std::string(e.what()).find("stratum 3"), std::string::npos);
    }
}

TEST(Adte, NoiselessHomogeneousCollapse)
{
    const double tau = 1.75;
    std::vector<NodeObservation> obs;
    std::vector<double> f;
    for (int i = 0; i < 10; ++i) {
        const double fi = 0.3 * i;
        const int z = i % 2;
        obs.push_back({static_cast<std::uint8_t>(z), z * tau + fi, 0});
        f.push_back(fi);
    }
    const auto e = estimate_propensity(obs, PropensityModel::stratified());
    const auto tx = per_node(obs, estimate_tau_of_x(obs, f));
    const auto est = estimate_adte(obs, f, e, tx);
    EXPECT_NEAR(est.or_a.tau_hat, tau, 1e-12);
    EXPECT_NEAR(est.or_b.tau_hat, tau, 1e-12);
    EXPECT_NEAR(est.dr.tau_hat, tau, 1e-12);
    EXPECT_EQ(est.dr.variance_kind, VarianceKind::none);
}

TEST(Adte, ZeroTauMapGivesZeroOrA)
{
    const auto obs = table({{0, 1.0, 0}, {0, 2.0, 0}});
    const std::vector<double> zero(2, 0.0), e(2, 0.5);
    EXPECT_DOUBLE_EQ(estimate_adte(obs, zero, e, zero).or_a.tau_hat, 0.0);
    EXPECT_THROW(estimate_adte(obs, zero, std::vector<double>{0.0, 0.5}, zero), EstimationError);
}

TEST(Properties, OrIgnoresControlOutcomesGivenFHat)
{
    auto fx = testing::random_fixture(3);
    fx.obs[0].z = 1;
    fx.obs[1].z = 0;
    const auto f = fit(fx.graph, fx.obs, path_config());
    const double before = estimate_or(fx.obs, f.f_hat).tau_hat;
    for (auto& o : fx.obs)
        if (!o.z)
            o.y = -123.0;
    EXPECT_DOUBLE_EQ(estimate_or(fx.obs, f.f_hat).tau_hat, before);
}

TEST(Properties, ShiftInvariance)
{
    for (std::uint64_t s = 0; s < 40; ++s) {
        auto fx = testing::random_fixture(200 + s);
        fx.obs[0].z = 1;
        fx.obs[1].z = 0;
        InterferenceConfig c;
        c.sigma_bar = 0.3;
        const double a = estimate_or(fx.obs, fit(fx.graph, fx.obs, c).f_hat).tau_hat;
        for (auto& o : fx.obs)
            o.y += 17.0;
        const double b = estimate_or(fx.obs, fit(fx.graph, fx.obs, c).f_hat).tau_hat;
        EXPECT_NEAR(a, b, 1e-9);
    }
}

TEST(Normal, CriticalValue)
{
    EXPECT_NEAR(normal_critical_value(0.95), 1.959963984540054, 1e-12);
    EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-12);
    EXPECT_THROW(normal_critical_value(1.0), std::invalid_argument);
}

} // namespace
} // namespace nethop
