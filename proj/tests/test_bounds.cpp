#include "rwbound/bounds.hpp"
#include "rwbound/families.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace rwbound;

namespace {

const double e = std::exp(1.0);

const TheoremConstants ex1{1.0 / 7.0, 7, 2.0, 0.0, 0.8, 1.8, 2.5};
const TheoremConstants ex2{5.0 / 18.0, 3, 1.1, 0.0, 1.0, 1.625, (e + 1.0) / 2.0};
const TheoremConstants ex3_mapped{2.0, 1, 6.0, 0.0, 1.0 / 3.0, 3.4, 2.0};

SequenceSpec mod_three_walk() {
    return SequenceSpec::periodic({}, {Distribution::uniform(0, 2), Distribution::uniform(-2, 0),
                                       Distribution::exponential(1.0, -2.0)});
}

// Naive long-double evaluation of c1 straight from the displayed formula.
long double c1_oracle(const TheoremConstants& k, long double delta) {
    const long double m = std::max((long double)k.c * k.c / 2.0L, 2.0L / ((long double)k.h * k.h));
    const long double cap = k.a - k.epsilon - delta * k.h * k.d1 * m;
    long double s = 0.0L;
    for (std::size_t n = 1; n + 1 <= k.b; ++n) s += std::pow((long double)k.d2, (long double)n);
    const long double r = delta * k.h * cap;
    return s + std::exp(-r * k.b) / (1.0L - std::exp(-r));
}

} // namespace

TEST(Bounds, MaxFeasibleDelta) {
    EXPECT_NEAR(max_feasible_delta(ex2), 10.0 / 117.0, 1e-12);
    EXPECT_NEAR(max_feasible_delta(ex1), 2.0 / 63.0, 1e-15);
    EXPECT_NEAR(max_feasible_delta(ex3_mapped), 10.0 / 102.0, 1e-15);
    TheoremConstants zero_margin = ex1;
    zero_margin.epsilon = zero_margin.a;
    EXPECT_THROW(max_feasible_delta(zero_margin), infeasible_error);
    // A loose walk hits the 1/2 cap.
    EXPECT_EQ(max_feasible_delta({10.0, 1, 1.0, 0.0, 2.0, 1.0, 1.0}), 0.5);
}

TEST(Bounds, CapitalDelta) {
    EXPECT_NEAR(capital_delta(ex1, 1.0 / 63.0), 1.0 / 14.0, 1e-15);
    EXPECT_NEAR(capital_delta(ex3_mapped, 9.0 / 102.0), 0.2, 1e-14);
    EXPECT_NEAR(capital_delta(ex3_mapped, 5.0 / 102.0), 1.0, 1e-14);
    EXPECT_NEAR(capital_delta(ex2, 0.05), 5.0 / 18.0 - 3.25 * 0.05, 1e-15);
    EXPECT_THROW(capital_delta(ex1, 0.0), spec_error);
    EXPECT_THROW(capital_delta(ex1, 0.6), spec_error);
}

TEST(Bounds, SFactor) {
    double direct = 0.0;
    for (int n = 1; n <= 6; ++n) direct += std::pow(2.5, n);
    EXPECT_NEAR(s_factor(7, 2.5), direct, 1e-12 * direct);
    EXPECT_NEAR(s_factor(7, 2.5), 405.234375, 1e-9);
    for (std::size_t b : {1u, 2u, 5u, 30u}) EXPECT_EQ(s_factor(b, 1.0), static_cast<double>(b - 1));
    EXPECT_EQ(s_factor(1, 7.0), 0.0);
    for (std::size_t b : {2u, 7u, 40u}) {
        EXPECT_NEAR(s_factor(b, 1.0 + 1e-9), static_cast<double>(b - 1), 1e-6);
    }
}

TEST(Bounds, C1MatchesNaiveFormula) {
    for (const auto& [k, d] : std::vector<std::pair<TheoremConstants, double>>{
             {ex1, 1.0 / 63.0}, {ex2, 0.05}, {ex3_mapped, 9.0 / 102.0}, {ex3_mapped, 5.0 / 102.0}}) {
        const double c1 = c1_constant(k, d);
        EXPECT_NEAR(c1, static_cast<double>(c1_oracle(k, d)), 1e-12 * c1);
    }
}

TEST(Bounds, GoldenPrefactors) {
    const double c1_ex1 = c1_constant(ex1, 1.0 / 63.0);
    EXPECT_GE(c1_ex1, 1490.0);
    EXPECT_LE(c1_ex1, 1502.0);
    const double c1_ex2 = c1_constant(ex2, 0.05);
    EXPECT_GE(c1_ex2, 175.0);
    EXPECT_LE(c1_ex2, 178.0);
    EXPECT_NEAR(make_certificate(ex1, 1.0 / 63.0).rate, 4.0 / 315.0, 1e-17);
}

TEST(Bounds, GeometricIdentity) {
    // b = 1, d2 = 1, delta h Delta = ln 2 gives c1 = (1/2)/(1/2) = 1.
    const TheoremConstants k{0.5 + std::log(2.0), 1, 1.0, 0.0, 2.0, 1.0, 1.0};
    EXPECT_NEAR(capital_delta(k, 0.5) * 0.5 * k.h, std::log(2.0), 1e-15);
    EXPECT_NEAR(c1_constant(k, 0.5), 1.0, 1e-15);
}

TEST(Bounds, InfeasibleDeltaIsRejected) {
    EXPECT_THROW(c1_constant(ex2, 10.0 / 117.0), infeasible_error);
    EXPECT_THROW(c1_constant(ex2, 0.1), infeasible_error);
    EXPECT_THROW(tail_bound(ex2, 0.2, 1.0), infeasible_error);
}

TEST(Bounds, TailBoundValues) {
    EXPECT_EQ(tail_bound(ex1, 1.0 / 63.0, 0.0), 1.0);
    EXPECT_LT(tail_bound(ex1, 1.0 / 63.0, 578.0), 1.0);
    EXPECT_LE(tail_bound(ex2, 0.05, 100.0), 178.0 * std::exp(-5.0));
    const auto cert = make_certificate(ex1, 1.0 / 63.0);
    EXPECT_GE(cert.crossover_x, 575.0);
    EXPECT_LE(cert.crossover_x, 579.0);
    EXPECT_EQ(cert.bound(cert.crossover_x), 1.0);
    EXPECT_LT(cert.bound(cert.crossover_x + 1e-9), 1.0);
}

TEST(Bounds, TailBoundMonotonicity) {
    const double d = 1.0 / 63.0;
    double prev = 2.0;
    for (double x = 0.0; x <= 2000.0; x += 7.5) {
        const double v = tail_bound(ex1, d, x);
        EXPECT_LE(v, prev);
        EXPECT_GT(v, 0.0);
        prev = v;
    }
    for (double x : {0.0, 300.0, 600.0, 1200.0}) {
        TheoremConstants k = ex1;
        double last = tail_bound(k, d, x);
        for (double eps : {0.001, 0.005, 0.01}) {
            k.epsilon = eps;
            const double v = tail_bound(k, d, x);
            EXPECT_GE(v, last);
            last = v;
        }
        k = ex1;
        last = tail_bound(k, d, x);
        for (double d1 : {1.85, 1.9, 2.0}) {
            k.d1 = d1;
            const double v = tail_bound(k, d, x);
            EXPECT_GE(v, last);
            last = v;
        }
        k = ex1;
        last = tail_bound(k, d, x);
        for (double d2 : {2.6, 3.0, 4.0}) {
            k.d2 = d2;
            const double v = tail_bound(k, d, x);
            EXPECT_GE(v, last);
            last = v;
        }
    }
}

TEST(Bounds, C1BlowsUpAtDeltaMax) {
    const double dmax = max_feasible_delta(ex2);
    double prev = 0.0;
    for (double gap : {1e-1, 1e-2, 1e-4, 1e-6, 1e-9}) {
        const double c1 = c1_constant(ex2, dmax * (1.0 - gap));
        EXPECT_GT(c1, prev);
        prev = c1;
    }
    EXPECT_GT(prev, 1e9);
    // Larger a (larger Delta) at fixed delta gives a smaller c1.
    TheoremConstants k = ex2;
    double last = c1_constant(k, 0.05);
    for (double a : {0.3, 0.4, 0.6}) {
        k.a = a;
        const double c1 = c1_constant(k, 0.05);
        EXPECT_LT(c1, last);
        last = c1;
    }
}

TEST(Bounds, OptimizeAtPointMatchesGridScan) {
    for (double x : {0.0, 50.0, 200.0, 1000.0, 5000.0}) {
        const auto cert = optimize_delta(ex2, AtPoint{x});
        const double dmax = max_feasible_delta(ex2);
        auto g = [x](double d) { return std::log(c1_constant(ex2, d)) - d * ex2.h * x; };
        double best = std::numeric_limits<double>::infinity();
        double best_d = 0.0;
        for (int i = 1; i < 10000; ++i) {
            const double d = dmax * i / 10000.0;
            if (g(d) < best) {
                best = g(d);
                best_d = d;
            }
        }
        const double found = g(cert.delta);
        EXPECT_LE(found, best + 1e-12) << "x=" << x;
        EXPECT_NEAR(cert.delta, best_d, dmax / 10000.0) << "x=" << x;
        EXPECT_GT(cert.capital_delta, 0.0);
    }
    // Far out, the optimum drifts towards delta_max with c1 still finite.
    const auto far = optimize_delta(ex2, AtPoint{1e6});
    EXPECT_GT(far.delta, 0.95 * max_feasible_delta(ex2));
    EXPECT_TRUE(std::isfinite(far.c1));
}

TEST(Bounds, OptimizeAtZeroIsCapped) {
    for (const auto& k : {ex1, ex2, ex3_mapped}) {
        EXPECT_EQ(optimize_delta(k, AtPoint{0.0}).bound(0.0), 1.0);
    }
}

TEST(Bounds, AsymptoticRate) {
    const auto cert = optimize_delta(ex2, AsymptoticRate{});
    EXPECT_NEAR(cert.delta, 0.999 * 10.0 / 117.0, 1e-15);
}

TEST(Bounds, CorollaryTwoTradeoff) {
    const auto fast = make_certificate(ex3_mapped, 9.0 / 102.0);
    const auto slow = make_certificate(ex3_mapped, 5.0 / 102.0);
    EXPECT_NEAR(fast.rate, 9.0 / 306.0, 1e-16);
    EXPECT_NEAR(slow.rate, 5.0 / 306.0, 1e-16);
    EXPECT_GT(fast.c1, 169.0);
    EXPECT_LE(fast.c1, 170.0);
    EXPECT_GT(slow.c1, 60.0);
    EXPECT_LE(slow.c1, 61.0);
    // Faster decay, larger prefactor: the curves cross once.
    const double cross = std::log(fast.c1 / slow.c1) / (fast.rate - slow.rate);
    EXPECT_LT(fast.uncapped(cross + 1.0), slow.uncapped(cross + 1.0));
    EXPECT_GT(fast.uncapped(cross - 1.0), slow.uncapped(cross - 1.0));
}

TEST(Bounds, DirectSeriesOnDeterministicWalk) {
    const auto seq = SequenceSpec::iid(Distribution::degenerate(-1.0));
    const TheoremConstants k{1.0, 1, 1.0, 0.0, 1.0, 1.0, 1.0};
    const double exact = 1.0 / std::expm1(0.1);
    // The geometric closure beyond N overestimates e^{-0.1 n}; it vanishes as N grows.
    const double short_series = direct_chernoff_bound(seq, k, 0.1, 0.0, 10);
    EXPECT_GE(short_series, exact);
    EXPECT_NEAR(direct_chernoff_bound(seq, k, 0.1, 0.0, 2000), exact, 1e-12 * exact);
}

TEST(Bounds, DirectSeriesIsDominatedByTheBound) {
    const auto derived1 = derive_constants(mod_three_walk(), 0.8, 2.0, 7).constants;
    const auto walk2 = make_family("harmonic_two_point", {}, {}, 200);
    const auto derived2 = derive_constants(walk2, 1.0, 1.1, 3).constants;
    struct Case {
        SequenceSpec seq;
        TheoremConstants k;
        std::vector<double> deltas;
    };
    const std::vector<Case> cases{{mod_three_walk(), derived1, {1.0 / 63.0, 0.005, 0.03}},
                                  {mod_three_walk(), ex1, {1.0 / 63.0}},
                                  {walk2, derived2, {0.05, 0.01, 0.08}},
                                  {walk2, ex2, {0.05}}};
    for (const auto& cs : cases) {
        for (double d : cs.deltas) {
            const auto cert = make_certificate(cs.k, d);
            for (std::size_t n : {cs.k.b, std::size_t{50}, std::size_t{500}}) {
                for (double x = 0.0; x <= 1000.0; x += 50.0) {
                    const double direct = direct_chernoff_bound(cs.seq, cs.k, cert.rate, x, n);
                    EXPECT_LE(direct, cert.uncapped(x) * (1.0 + 1e-9))
                        << "delta=" << d << " N=" << n << " x=" << x;
                }
            }
        }
    }
}

TEST(Bounds, DirectSeriesPreconditions) {
    const auto seq = mod_three_walk();
    EXPECT_THROW(direct_chernoff_bound(seq, ex1, 0.5, 0.0, 10), spec_error);
    EXPECT_THROW(direct_chernoff_bound(seq, ex1, 0.01, 0.0, 6), spec_error);
    EXPECT_THROW(direct_chernoff_bound(seq, ex1, 0.0, 0.0, 10), spec_error);
    // Beyond delta_max the geometric tail diverges.
    EXPECT_THROW(direct_chernoff_bound(seq, ex1, 0.4, 0.0, 10), infeasible_error);
}

TEST(Bounds, TuneCPicksTheBestCandidate) {
    const auto walk2 = make_family("harmonic_two_point", {}, {}, 200);
    const std::vector<double> cs{0.5, 1.1, 2.0, 3.0};
    const double x = 100.0;
    const auto tuned = tune_c(walk2, 1.0, 3, x, cs);
    // c = 0.5 puts the whole lower atom into epsilon and is infeasible.
    EXPECT_THROW(optimize_delta(derive_constants(walk2, 1.0, 0.5, 3).constants, AtPoint{x}),
                 infeasible_error);
    for (double c : {1.1, 2.0, 3.0}) {
        const auto k = derive_constants(walk2, 1.0, c, 3).constants;
        const auto cert = optimize_delta(k, AtPoint{x});
        EXPECT_LE(std::log(tuned.certificate.c1) - tuned.certificate.rate * x,
                  std::log(cert.c1) - cert.rate * x + 1e-12);
    }
    EXPECT_THROW(tune_c(SequenceSpec::iid(Distribution::degenerate(1.0)), 1.0, 1, x, cs),
                 infeasible_error);
}
