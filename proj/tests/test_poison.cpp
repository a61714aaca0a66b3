#include <gtest/gtest.h>

#include <cmath>

#include "sslpoison/poison/bridge.hpp"
#include "sslpoison/poison/density.hpp"
#include "sslpoison/poison/transfer.hpp"

using namespace sslpoison;
using namespace sslpoison::poison;
using data::Vector;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index k = 0;
    for (double x : v) out(k++) = x;
    return out;
}

DensityFn norm(const char* name, std::function<double(double)> f) { return normalize_density(DensityFn(name, std::move(f))); }

// Bisection on a midpoint-rule CDF with a fine grid; shares no code with DensityFn.
double brute_quantile(const std::function<double(double)>& rho, double q) {
    const int n = 200000;
    auto F = [&](double a) {
        double s = 0, total = 0;
        for (int i = 0; i < n; ++i) {
            const double x = (i + 0.5) / n;
            total += rho(x) / n;
            if (x < a) s += rho(x) / n;
        }
        return s / total;
    };
    double lo = 0, hi = 1;
    for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (lo + hi);
        (F(mid) < q ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

PoisonSpec spec_between(const Vector& a, const Vector& b, int budget) {
    PoisonSpec s;
    s.source = a;
    s.target = b;
    s.budget = budget;
    return s;
}

} // namespace

TEST(Interp, EndpointsAndMidpoint) {
    EXPECT_EQ(interp(vec({0, 0}), vec({2, 4}), 0.5), vec({1, 2}));
    const Vector a = vec({0.1, -0.3, 0.7}), b = vec({-0.9, 0.2, 0.3});
    EXPECT_EQ(interp(a, b, 0.0), a);
    EXPECT_EQ(interp(a, b, 1.0), b);
}

TEST(Interp, ContractViolations) {
    EXPECT_THROW(interp(vec({0}), vec({0, 1}), 0.5), ShapeError);
    EXPECT_THROW(interp(vec({0}), vec({1}), 1.5), ContractError);
    EXPECT_THROW(interp(vec({0}), vec({1}), -0.1), ContractError);
}

TEST(Density, NormalizationExamples) {
    const auto one = norm("1", [](double) { return 1.0; });
    EXPECT_NEAR(one(0.3), 1.0, 1e-12);
    const auto lin = norm("1.5-x", [](double x) { return 1.5 - x; });
    EXPECT_NEAR(lin(0.2), 1.3, 1e-9);
    const auto x = norm("x", [](double t) { return t; });
    EXPECT_NEAR(x(0.25), 0.5, 1e-9);
    EXPECT_NEAR(x(1.0), 2.0, 1e-9);
}

TEST(Density, NonPositiveOrUnnormalizedIsContractError) {
    EXPECT_THROW(norm("neg", [](double x) { return x - 0.5; }), ContractError);
    EXPECT_THROW(norm("zero", [](double) { return 0.0; }), ContractError);
    EXPECT_THROW(norm("nan", [](double) { return std::nan(""); }), ContractError);
    const DensityFn raw("1", [](double) { return 1.0; });
    EXPECT_THROW(sample_alphas(raw, 3), ContractError);
    EXPECT_THROW(density_by_name("x^3"), ConfigError);
}

TEST(Quantiles, UniformFivePoints) {
    const auto a = sample_alphas(density_by_name("1"), 5);
    const std::vector<double> want{0, 0.25, 0.5, 0.75, 1};
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(a[i], want[i], 1e-9);
}

TEST(Quantiles, LinearDensityMiddlePointIsRootHalf) {
    const auto a = sample_alphas(density_by_name("x"), 3);
    EXPECT_EQ(a[0], 0.0);
    EXPECT_EQ(a[2], 1.0);
    EXPECT_NEAR(a[1], std::sqrt(0.5), 1e-6);
    EXPECT_NEAR(a[1], 0.7071, 1e-4);
}

TEST(Quantiles, DecreasingLinearDensityFourPoints) {
    // 1.5 a - a^2 / 2 = q  =>  a = (3 - sqrt(9 - 8 q)) / 2
    const auto a = sample_alphas(density_by_name("1.5-x"), 4);
    const double q1 = (3 - std::sqrt(9 - 8.0 / 3)) / 2;
    const double q2 = (3 - std::sqrt(9 - 16.0 / 3)) / 2;
    EXPECT_NEAR(a[1], q1, 1e-6);
    EXPECT_NEAR(a[2], q2, 1e-6);
    EXPECT_NEAR(a[1], 0.2417, 1e-4);
    EXPECT_NEAR(a[2], 0.5426, 1e-4);
    const auto rho = [](double x) { return 1.5 - x; };
    EXPECT_NEAR(a[1], brute_quantile(rho, 1.0 / 3), 1e-5);
    EXPECT_NEAR(a[2], brute_quantile(rho, 2.0 / 3), 1e-5);
}

TEST(Quantiles, AllRegisteredDensitiesAgainstBruteForce) {
    for (const auto& d : registered_densities()) {
        const auto n = normalize_density(d);
        for (double q : {0.1, 0.5, 0.9})
            EXPECT_NEAR(n.quantile(q), brute_quantile([&](double x) { return d.raw(x); }, q), 2e-5) << d.name();
    }
}

TEST(Quantiles, StrictlyIncreasingWithFixedEndpoints) {
    const auto all = registered_densities();
    ASSERT_EQ(all.size(), 11u);
    for (const auto& d : all) {
        const auto n = normalize_density(d);
        for (int N = 2; N <= 512; N = N < 16 ? N + 1 : N * 2) {
            const auto a = sample_alphas(n, N);
            ASSERT_EQ(a.size(), static_cast<std::size_t>(N));
            EXPECT_EQ(a.front(), 0.0) << d.name();
            EXPECT_EQ(a.back(), 1.0) << d.name();
            for (int i = 1; i < N; ++i) ASSERT_LT(a[static_cast<std::size_t>(i) - 1], a[static_cast<std::size_t>(i)]) << d.name() << " N=" << N;
        }
    }
    EXPECT_THROW(sample_alphas(density_by_name("1"), 1), ContractError);
}

TEST(Bridge, TwoPointsAreTheEndpoints) {
    const Vector a = vec({0.1, 0.2}), b = vec({-0.5, 0.6});
    const auto p = build_bridge(spec_between(a, b, 2));
    ASSERT_EQ(p.points.size(), 2u);
    EXPECT_EQ(p.points[0].features, a);
    EXPECT_EQ(p.points[1].features, b);
    EXPECT_FALSE(p.points[0].label.has_value());
}

TEST(Bridge, NoiselessPointsAreConvexAndCollinear) {
    const Vector a = vec({0.1, 0.2, -0.8}), b = vec({-0.5, 0.6, 0.4});
    const auto p = build_bridge(spec_between(a, b, 25));
    ASSERT_EQ(p.points.size(), 25u);
    for (const auto& e : p.points) {
        for (Eigen::Index k = 0; k < 3; ++k) {
            EXPECT_GE(e.features(k), std::min(a(k), b(k)) - 1e-15);
            EXPECT_LE(e.features(k), std::max(a(k), b(k)) + 1e-15);
        }
        EXPECT_LE(distance_to_segment(e.features, a, b), 1e-9);
    }
    for (std::size_t i = 1; i < p.alphas.size(); ++i) EXPECT_LT(p.alphas[i - 1], p.alphas[i]);
}

TEST(Bridge, NoiseMovesPointsOffTheLineAndStaysInBox) {
    auto s = spec_between(vec({0.9, 0.9}), vec({-0.9, 0.9}), 50);
    s.noise_sigma = 0.05;
    const auto p = build_bridge(s);
    double off = 0;
    for (const auto& e : p.points) {
        off = std::max(off, distance_to_segment(e.features, s.source, s.target));
        EXPECT_LE(e.features.cwiseAbs().maxCoeff(), 1.0);
    }
    EXPECT_GT(off, 1e-3);
    s.noise_kind = NoiseKind::uniform;
    for (const auto& e : build_bridge(s).points) EXPECT_LE(e.features.cwiseAbs().maxCoeff(), 1.0);
}

TEST(Bridge, BudgetMustStayBelowOnePercent) {
    auto s = spec_between(vec({0, 0}), vec({1, 1}), 49);
    s.unlabeled_size = 5000;
    EXPECT_EQ(build_bridge(s).points.size(), 49u);
    s.budget = 50;
    EXPECT_THROW(build_bridge(s), ConfigError);
    s.allow_over_budget = true;
    EXPECT_EQ(build_bridge(s).points.size(), 50u);
}

TEST(Bridge, InvalidSpecs) {
    auto s = spec_between(vec({0, 0}), vec({1, 1}), 1);
    EXPECT_THROW(build_bridge(s), ContractError);
    s = spec_between(vec({0, 0}), vec({1}), 5);
    EXPECT_THROW(build_bridge(s), ShapeError);
    s = spec_between(vec({0, 0}), vec({1, 1}), 5);
    s.desired_label = 1;
    s.target_label = 1;
    EXPECT_THROW(build_bridge(s), ContractError);
}

TEST(ZeroKnowledge, OneSupportSplitsTenIntoFiveAndFive) {
    auto s = spec_between(vec({0, 0}), vec({1, 1}), 10);
    s.support = {vec({-1, 0})};
    const auto p = build_zero_knowledge(s);
    ASSERT_EQ(p.points.size(), 10u);
    EXPECT_EQ(std::count(p.path.begin(), p.path.end(), 0), 5);
    EXPECT_EQ(std::count(p.path.begin(), p.path.end(), 1), 5);
    // the support path ends at the source
    EXPECT_EQ(p.points.back().features, s.source);
}

TEST(ZeroKnowledge, NoSupportEqualsBridge) {
    const auto s = spec_between(vec({0, 0.5}), vec({1, 1}), 7);
    const auto a = build_zero_knowledge(s);
    const auto b = build_bridge(s);
    ASSERT_EQ(a.points.size(), b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_EQ(a.points[i].features, b.points[i].features);
}

TEST(ZeroKnowledge, TooSmallBudgetIsConfigError) {
    auto s = spec_between(vec({0, 0}), vec({1, 1}), 5);
    s.support = {vec({-1, 0}), vec({0, -1})};
    EXPECT_THROW(build_zero_knowledge(s), ConfigError);
    s.budget = 6;
    EXPECT_EQ(build_zero_knowledge(s).points.size(), 6u);
}

TEST(Transfer, LinearModelMatchesMarginOverWeightNorm) {
    // For logits (w.x + b, 0) the nearest point of the other class is at |w.x + b| / |w|.
    for (int seed = 0; seed < 10; ++seed) {
        auto m = nn::make_model({3, {}, 2, nn::Activation::tanh}, static_cast<std::uint64_t>(seed));
        m.layers[0].weight.row(1).setZero();
        m.layers[0].bias << 0.1, 0.0;
        const Vector w = m.layers[0].weight.row(0).transpose();
        Vector x = Vector::Constant(3, 0.2);
        const int c = nn::predict_class(m, x);
        const auto r = find_transfer_source(m, x, 1 - c, 100, 0.1);
        ASSERT_TRUE(r.found) << seed;
        EXPECT_EQ(nn::predict_class(m, r.source), 1 - c);
        const double oracle = std::abs(w.dot(x) + 0.1) / w.norm();
        EXPECT_NEAR(r.delta_norm, oracle, 0.05 * oracle) << seed;
    }
}

TEST(Transfer, AlreadyDesiredGivesZeroPerturbation) {
    auto m = nn::make_model({2, {8}, 2, nn::Activation::tanh}, 3);
    const Vector x = vec({0.3, -0.2});
    const auto r = find_transfer_source(m, x, nn::predict_class(m, x), 10, 0.1);
    EXPECT_TRUE(r.found);
    EXPECT_EQ(r.delta_norm, 0.0);
    EXPECT_EQ(r.source, x);
}

TEST(Transfer, NoStepsReportsFailure) {
    auto m = nn::make_model({2, {8}, 2, nn::Activation::tanh}, 3);
    const Vector x = vec({0.3, -0.2});
    const auto r = find_transfer_source(m, x, 1 - nn::predict_class(m, x), 0, 0.1);
    EXPECT_FALSE(r.found);
    EXPECT_THROW(find_transfer_source(m, x, 5, 10, 0.1), ContractError);
}
