#include "rwbound/dists.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace rwbound;

namespace {

Distribution two_point(std::size_t i) {
    const double up = 1.0 / static_cast<double>(i + 1);
    return Distribution::discrete({{-1.0, 1.0 - up}, {1.0, up}});
}

double rel_gap(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(a)); }

} // namespace

TEST(Dists, UniformExpPlusClosedForm) {
    const double v = evaluate(Distribution::uniform(0, 2), fn::ExpPlus{0.8});
    EXPECT_NEAR(v, 0.625 * (std::exp(1.6) - 1.0), 1e-14);
    EXPECT_LT(v, 2.48);
}

TEST(Dists, ShiftedExponentialExpPlus) {
    const double v = evaluate(Distribution::exponential(1.0, -2.0), fn::ExpPlus{0.8});
    EXPECT_NEAR(v, 5.0 * std::exp(-2.0), 1e-14);
    EXPECT_LT(v, 0.68);
}

TEST(Dists, DegenerateMeanIsPoint) {
    EXPECT_EQ(evaluate(Distribution::degenerate(0.0), fn::Mean{}), 0.0);
    RandomStream rs(7);
    EXPECT_EQ(sample(Distribution::degenerate(4.0), rs), 4.0);
}

TEST(Dists, TwoPointMean) {
    for (std::size_t i = 1; i <= 20; ++i) {
        EXPECT_NEAR(evaluate(two_point(i), fn::Mean{}), 2.0 / (i + 1.0) - 1.0, 1e-15);
        EXPECT_NEAR(evaluate(two_point(i), fn::ExpPlus{1.0}), std::exp(1.0) / (i + 1.0), 1e-15);
    }
}

TEST(Dists, HarmonicErlangClaimExpMoment) {
    for (std::size_t i : {2u, 5u, 9u, 40u}) {
        for (double g : {0.1, 1.0 / 3.0, 0.7}) {
            const double di = static_cast<double>(i);
            const double expected =
                (di - 1.0) / (di * (1.0 - g)) + 1.0 / (di * (1.0 - g) * (1.0 - g));
            EXPECT_NEAR(evaluate(harmonic_erlang_claim(i), fn::ExpMoment{g}), expected, 1e-13);
        }
        EXPECT_NEAR(evaluate(harmonic_erlang_claim(i), fn::Mean{}), 1.0 + 1.0 / i, 1e-14);
    }
    // e^{-x}(1 + x/i) tail: survival at x via the closed form of NegProb on a shift.
    const auto z = harmonic_erlang_claim(5);
    for (double x : {0.5, 1.0, 3.0}) {
        const double below = evaluate(shifted(z, -x), fn::NegProb{});
        EXPECT_NEAR(1.0 - below, std::exp(-x) * (1.0 + x / 5.0), 1e-14);
    }
}

TEST(Dists, ExpMomentDivergesAtRate) {
    EXPECT_TRUE(std::isinf(evaluate(Distribution::exponential(1.0), fn::ExpMoment{1.0})));
    EXPECT_TRUE(std::isinf(evaluate(harmonic_erlang_claim(3), fn::ExpMoment{1.5})));
    EXPECT_TRUE(std::isinf(evaluate(Distribution::erlang_two(2.0), fn::ExpPlus{2.0})));
}

TEST(Dists, DifferenceExamples) {
    EXPECT_EQ(evaluate_difference(Distribution::degenerate(10), 1.0, Distribution::degenerate(1),
                                  fn::Mean{}),
              9.0);
    EXPECT_NEAR(evaluate_difference(Distribution::degenerate(0), 2.0, Distribution::uniform(1, 3),
                                    fn::NegProb{}),
                1.0, 1e-15);
    EXPECT_NEAR(evaluate_difference(harmonic_erlang_claim(5), 2.0, Distribution::uniform(1, 3),
                                    fn::Mean{}),
                -2.8, 1e-14);
}

TEST(Dists, DifferenceMgfFactorizes) {
    const auto z = Distribution::exponential(1.0);
    const auto t = Distribution::exponential(1.0);
    for (double y : {0.1, 0.25, 0.5, 0.9}) {
        EXPECT_NEAR(evaluate_difference(z, 2.0, t, fn::Mgf{y}),
                    1.0 / (1.0 - y) / (1.0 + 2.0 * y), 1e-14);
    }
    EXPECT_TRUE(std::isinf(evaluate_difference(z, 2.0, t, fn::Mgf{1.0})));
}

// Nested-quadrature functionals of Z - p*theta against independent
// brute-force references.
TEST(Dists, DifferenceTruncatedFunctionalsMatchBruteForce) {
    const double p = 1.5;
    const auto z = Distribution::uniform(0.0, 4.0);
    const auto t = Distribution::uniform(1.0, 3.0);
    auto density = [](double, double) { return 1.0 / (4.0 * 2.0); };
    const std::size_t n = 3000;

    const double neg = oracle::midpoint2d(
        [&](double a, double b) { return (a - p * b <= 0.0 ? 1.0 : 0.0) * density(a, b); }, 0, 4, 1,
        3, n);
    EXPECT_NEAR(evaluate_difference(z, p, t, fn::NegProb{}), neg, 2e-4);

    const double trunc = oracle::midpoint2d(
        [&](double a, double b) {
            const double x = a - p * b;
            return (x <= -1.0 ? -x : 0.0) * density(a, b);
        },
        0, 4, 1, 3, n);
    EXPECT_NEAR(evaluate_difference(z, p, t, fn::TruncAbsBelow{1.0}), trunc, 2e-4);

    const double plus = oracle::midpoint2d(
        [&](double a, double b) {
            const double x = a - p * b;
            return (x > 0.0 ? std::exp(0.7 * x) : 0.0) * density(a, b);
        },
        0, 4, 1, 3, n);
    EXPECT_NEAR(evaluate_difference(z, p, t, fn::ExpPlus{0.7}), plus, 2e-4);
}

TEST(Dists, DifferenceWithExponentialClaimsMatchesSimpson) {
    // Z ~ Exp(1), theta ~ U(1, 3), p = 2: inner law conditional on theta = s is
    // closed form; integrate over s with a fine Simpson rule.
    const double p = 2.0;
    const double h = 1.0 / 3.0;
    const auto z = Distribution::exponential(1.0);
    const auto t = Distribution::uniform(1.0, 3.0);
    auto inner_plus = [&](double s) {
        // E(e^{h(Z - ps)} 1{Z > ps}) = e^{-ps} / (1 - h)
        return std::exp(-p * s) / (1.0 - h) * 0.5;
    };
    auto inner_neg = [&](double s) { return (1.0 - std::exp(-p * s)) * 0.5; };
    auto inner_trunc = [&](double s) {
        // E((ps - Z) 1{Z <= ps - 3}), nonzero once ps > 3
        const double u = p * s - 3.0;
        if (u <= 0.0) return 0.0;
        return (p * s * (1.0 - std::exp(-u)) - (1.0 - std::exp(-u) * (u + 1.0))) * 0.5;
    };
    EXPECT_NEAR(evaluate_difference(z, p, t, fn::ExpPlus{h}), oracle::simpson(inner_plus, 1, 3, 4000),
                1e-10);
    EXPECT_NEAR(evaluate_difference(z, p, t, fn::NegProb{}), oracle::simpson(inner_neg, 1, 3, 4000),
                1e-10);
    EXPECT_NEAR(evaluate_difference(z, p, t, fn::TruncAbsBelow{3.0}),
                oracle::simpson(inner_trunc, 1.5, 3, 4000), 1e-10);
    // ps never exceeds 6 on the support, so nothing lies below -6.
    EXPECT_EQ(evaluate_difference(z, p, t, fn::TruncAbsBelow{6.0}), 0.0);
}

TEST(Dists, ClosedFormMatchesQuadratureOnGrid) {
    std::vector<Distribution> dists{
        Distribution::uniform(0, 2),      Distribution::uniform(-2, 0),
        Distribution::uniform(-3, 1.5),   Distribution::exponential(1.0, -2.0),
        Distribution::exponential(2.5, 0.3), Distribution::exponential(0.7, -4.0),
        Distribution::erlang_two(1.0),    Distribution::erlang_two(3.0, -1.2),
        harmonic_erlang_claim(7),
    };
    std::vector<FunctionalKind> fs;
    for (double c : {0.5, 2.0}) fs.emplace_back(fn::TruncAbsBelow{c});
    for (double h : {0.3, 0.6}) fs.emplace_back(fn::ExpPlus{h});
    for (double y : {-0.8, 0.25}) fs.emplace_back(fn::Mgf{y});
    fs.emplace_back(fn::Mean{});
    fs.emplace_back(fn::NegProb{});
    fs.emplace_back(fn::InterarrivalTrunc{0.5});
    fs.emplace_back(fn::ExpMoment{0.2});
    fs.emplace_back(fn::NegProbPlusExpPlus{0.45});
    for (const auto& d : dists) {
        for (const auto& f : fs) {
            const double a = evaluate(d, f);
            const double q = evaluate_by_quadrature(d, f);
            EXPECT_LE(rel_gap(a, q), 1e-8) << to_string(f);
        }
    }
}

TEST(Dists, MgfAtZeroIsOne) {
    std::vector<Distribution> dists{Distribution::degenerate(3), two_point(4),
                                    Distribution::uniform(-1, 5), Distribution::exponential(2, -1),
                                    Distribution::erlang_two(0.5), harmonic_erlang_claim(3),
                                    Distribution::difference(harmonic_erlang_claim(6), 2.0,
                                                             Distribution::uniform(1, 3))};
    for (const auto& d : dists) {
        EXPECT_NEAR(evaluate(d, fn::Mgf{0.0}), 1.0, 1e-15);
        const double np = evaluate(d, fn::NegProb{});
        EXPECT_GE(np, 0.0);
        EXPECT_LE(np, 1.0);
    }
}

TEST(Dists, MonotoneInParameters) {
    std::vector<Distribution> dists{two_point(2), Distribution::uniform(-3, 2),
                                    Distribution::exponential(1.5, -1.0), Distribution::erlang_two(2.0, -3.0),
                                    Distribution::difference(Distribution::exponential(1.0), 2.0,
                                                             Distribution::uniform(1, 3))};
    for (const auto& d : dists) {
        double prev = -1.0;
        for (double h = 0.05; h < 0.95; h += 0.05) {
            const double v = evaluate(d, fn::ExpPlus{h});
            EXPECT_GE(v, prev - 1e-12);
            prev = v;
        }
        prev = kInfinity;
        for (double c = 0.1; c < 6.0; c += 0.1) {
            const double v = evaluate(d, fn::TruncAbsBelow{c});
            EXPECT_LE(v, prev + 1e-12);
            prev = v;
        }
    }
}

TEST(Dists, MalformedSpecsRejected) {
    EXPECT_THROW(Distribution::uniform(1, 1), spec_error);
    EXPECT_THROW(Distribution::exponential(0.0), spec_error);
    EXPECT_THROW(Distribution::erlang_two(-1.0), spec_error);
    EXPECT_THROW(Distribution::discrete({{0, 0.5}, {1, 0.4}}), spec_error);
    EXPECT_THROW(Distribution::discrete({{0, 1.2}, {1, -0.2}}), spec_error);
    EXPECT_THROW(Distribution::discrete({}), spec_error);
    EXPECT_THROW(Distribution::mixture({{0.5, Distribution::uniform(0, 1)}}), spec_error);
    const auto diff = Distribution::difference(Distribution::degenerate(1), 1.0,
                                               Distribution::degenerate(1));
    EXPECT_THROW(Distribution::difference(diff, 1.0, Distribution::degenerate(0)), spec_error);
    EXPECT_THROW(Distribution::difference(Distribution::degenerate(0), 0.0,
                                          Distribution::degenerate(0)),
                 spec_error);
    EXPECT_THROW(evaluate(diff, fn::ExpMoment{0.1}), spec_error);
    EXPECT_THROW(evaluate(Distribution::uniform(0, 1), fn::TruncAbsBelow{0.0}), spec_error);
    EXPECT_NO_THROW(Distribution::discrete({{0, 0.5}, {1, 0.5 + 1e-13}}));
}

TEST(Dists, SampleMomentsMatch) {
    const std::size_t n = 1'000'000;
    {
        RandomStream rs(11);
        double s = 0.0, s2 = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const double x = sample(Distribution::uniform(0, 2), rs);
            s += x;
            s2 += x * x;
        }
        const double mean = s / n;
        const double se = std::sqrt((s2 / n - mean * mean) / n);
        EXPECT_NEAR(mean, 1.0, 3.0 * se);
    }
    {
        // P(xi <= 0) for the two-point law at i = 1 is 1/2.
        RandomStream rs(12);
        std::size_t hits = 0;
        const auto d = two_point(1);
        for (std::size_t k = 0; k < n; ++k) hits += sample(d, rs) <= 0.0;
        const double phat = static_cast<double>(hits) / n;
        EXPECT_NEAR(phat, 0.5, 4.0 * std::sqrt(0.25 / n));
    }
}

// Monte Carlo moments against evaluate() for every functional with finite
// variance, 4 standard errors at 10^6 draws.
TEST(Dists, MonteCarloMomentsAgreeWithEvaluate) {
    std::vector<Distribution> dists{
        two_point(3), Distribution::uniform(-2, 1), Distribution::exponential(1.0, -2.0),
        harmonic_erlang_claim(5),
        Distribution::difference(harmonic_erlang_claim(6), 2.0, Distribution::uniform(1, 3))};
    std::vector<FunctionalKind> fs{fn::Mean{},       fn::NegProb{},         fn::TruncAbsBelow{0.5},
                                   fn::ExpPlus{0.3}, fn::Mgf{0.2},          fn::NegProbPlusExpPlus{0.3}};
    const std::size_t n = 1'000'000;
    std::uint64_t seed = 100;
    for (const auto& d : dists) {
        std::vector<double> draws(n);
        RandomStream rs(seed++);
        for (auto& x : draws) x = sample(d, rs);
        for (const auto& f : fs) {
            double s = 0.0, s2 = 0.0;
            for (double x : draws) {
                const double g = detail::point_value(x, f);
                s += g;
                s2 += g * g;
            }
            const double mean = s / n;
            const double se = std::sqrt(std::max(s2 / n - mean * mean, 0.0) / n);
            EXPECT_NEAR(mean, evaluate(d, f), 4.0 * se + 1e-12) << to_string(f);
        }
    }
}
