#pragma once

// The four worked models: their job configs and the published constants
// each must reproduce.
//
//   1  period-3 walk U(0,2), U(-2,0), Exp(1) - 2
//   2  +-1 walk with P(xi_i = 1) = 1/(i+1)
//   3  renewal model, claims with tail e^{-x}(1 + x/i) after four fixed
//      ones, premium 2, interarrivals U(1,3)
//   4  renewal model with two claims of 10 and unit interarrivals
//
// The published d1 (walks) and nu1 (model 3) are rounded-up numbers and are
// carried as stated constants; the derived values are checked against them.

#include "rwbound/bounds.hpp"
#include "rwbound/config.hpp"
#include "rwbound/families.hpp"
#include "rwbound/mc.hpp"
#include "rwbound/riskmodel.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace rwbound {

inline constexpr int kExampleCount = 4;

inline SequenceSpec period_three_walk() {
    return SequenceSpec::periodic({}, {Distribution::uniform(0, 2), Distribution::uniform(-2, 0),
                                       Distribution::exponential(1.0, -2.0)});
}

inline SequenceSpec harmonic_walk(std::size_t horizon = 200) {
    return make_family("harmonic_two_point", {}, {}, horizon);
}

inline RiskModelSpec erlang_claims_model(std::size_t horizon = 200) {
    auto claims = make_family("harmonic_erlang_mixture", {},
                              {Distribution::degenerate(0), Distribution::degenerate(0),
                               Distribution::degenerate(4), Distribution::degenerate(4)},
                              horizon);
    return {2.0, std::move(claims), SequenceSpec::iid(Distribution::uniform(1, 3))};
}

inline RiskModelSpec two_claims_model() {
    auto claims = SequenceSpec::periodic({Distribution::degenerate(10), Distribution::degenerate(10)},
                                         {Distribution::degenerate(0)});
    return {1.0, std::move(claims), SequenceSpec::iid(Distribution::degenerate(1))};
}

inline std::vector<double> evenly_spaced(double from, double step, std::size_t count) {
    std::vector<double> g;
    for (std::size_t i = 0; i < count; ++i) g.push_back(from + step * static_cast<double>(i));
    return g;
}

inline JobConfig example_config(int which) {
    JobConfig cfg;
    cfg.simulation.plan.trials = 100000;
    cfg.simulation.plan.horizon = 10000;
    cfg.simulation.plan.seed = 42;
    switch (which) {
    case 1:
        cfg.model = WalkModel{period_three_walk()};
        cfg.constants = {0.8, 2.0, 7, 1.0 / 63.0, {std::nullopt, std::nullopt, 1.8, 2.5}};
        cfg.simulation.grid = evenly_spaced(0.0, 100.0, 10);
        break;
    case 2:
        cfg.model = WalkModel{harmonic_walk()};
        cfg.constants = {1.0, 1.1, 3, 0.05, {std::nullopt, std::nullopt, 1.625, std::nullopt}};
        cfg.simulation.grid = evenly_spaced(0.0, 20.0, 10);
        break;
    case 3:
        cfg.model = RiskModel{erlang_claims_model()};
        cfg.constants = {1.0 / 3.0, 6.0, 1, 5.0 / 102.0, {std::nullopt, std::nullopt, 2.4, std::nullopt}};
        cfg.simulation.grid = evenly_spaced(0.0, 50.0, 10);
        break;
    case 4:
        cfg.model = RiskModel{two_claims_model()};
        // Average drift turns negative after 20 steps.
        cfg.constants = {0.1, 2.0, 21, std::nullopt, {}};
        cfg.simulation.plan.trials = 1000;
        cfg.simulation.plan.horizon = 50;
        cfg.simulation.grid = {0.0, 10.0, 17.9, 17.99, 18.0, 20.0, 100.0};
        break;
    default:
        throw spec_error("examples are numbered 1 to " + std::to_string(kExampleCount));
    }
    return cfg;
}

struct GoldenCheck {
    std::string quantity;
    double computed = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    bool pass() const { return computed >= lo && computed <= hi; }
};

struct ExampleRun {
    int id = 0;
    std::vector<GoldenCheck> checks;
    bool pass() const {
        for (const auto& c : checks) {
            if (!c.pass()) return false;
        }
        return true;
    }
};

namespace detail {

inline GoldenCheck near(std::string q, double computed, double expected, double tol) {
    return {std::move(q), computed, expected - tol, expected + tol};
}

inline GoldenCheck within(std::string q, double computed, double lo, double hi) {
    return {std::move(q), computed, lo, hi};
}

inline void walk_checks(ExampleRun& run, const SequenceSpec& seq, const JobConfig& cfg) {
    const auto& k = cfg.constants;
    const auto derived = derive_constants(seq, k.h, k.c, *k.b);
    const auto& d = derived.constants;
    TheoremConstants used = d;
    if (k.stated.d1) used.d1 = *k.stated.d1;
    if (k.stated.d2) used.d2 = *k.stated.d2;
    const auto cert = make_certificate(used, *k.delta);
    auto& c = run.checks;
    if (run.id == 1) {
        c.push_back(near("a", d.a, 1.0 / 7.0, 0.0));
        c.push_back(near("a attained at n", static_cast<double>(derived.drift.attained_at.value_or(0)), 7, 0));
        c.push_back(near("epsilon", d.epsilon, 0.0, 0.0));
        c.push_back(within("d1 (derived)", d.d1, 1.0, 1.79));
        c.push_back(within("d2 (derived)", d.d2, 1.0, 2.48));
        c.push_back(near("delta_max", max_feasible_delta(used), 2.0 / 63.0, 1e-12));
        c.push_back(near("Delta", cert.capital_delta, 1.0 / 14.0, 1e-12));
        c.push_back(near("rate", cert.rate, 4.0 / 315.0, 1e-15));
        c.push_back(within("c1", cert.c1, 1490.0, 1502.0));
        c.push_back(within("crossover x", cert.crossover_x, 575.0, 579.0));
    } else {
        const double e = std::exp(1.0);
        c.push_back(near("a", d.a, 5.0 / 18.0, 1e-12));
        c.push_back(near("epsilon", d.epsilon, 0.0, 0.0));
        c.push_back(within("d1 (derived)", d.d1, 1.0, 1.625));
        c.push_back(near("d2", d.d2, (e + 1.0) / 2.0, 1e-12));
        c.push_back(near("delta_max", max_feasible_delta(used), 10.0 / 117.0, 1e-12));
        c.push_back(near("Delta", cert.capital_delta, 0.11528, 1e-5));
        c.push_back(near("rate", cert.rate, 0.05, 1e-15));
        c.push_back(within("c1", cert.c1, 175.0, 178.0));
    }
}

inline void erlang_model_checks(ExampleRun& run, const RiskModelSpec& m, const JobConfig& cfg) {
    const auto& k = cfg.constants;
    const auto in = derive_corollary2_inputs(m, k.h, k.c, *k.b);
    const auto& d = in.constants;
    CorollaryTwoConstants used = d;
    used.nu1 = *k.stated.d1;
    auto& c = run.checks;
    c.push_back(near("alpha", d.alpha, 2.0, 1e-12));
    c.push_back(near("epsilon", d.epsilon, 0.0, 0.0));
    c.push_back(within("nu1 (derived)", d.nu1, 1.0, 2.4));
    c.push_back(near("nu2", d.nu2, 1.0, 0.0));
    c.push_back(near("delta_max", max_feasible_delta(map_to_theorem(used, m.p)), 10.0 / 102.0, 1e-12));
    const auto fast = lundberg_certificate(used, m.p, 9.0 / 102.0);
    c.push_back(near("Delta-hat (delta = 9/102)", delta_hat(used, m.p, 9.0 / 102.0), 0.2, 1e-12));
    c.push_back(within("c2 (delta = 9/102)", fast.c1, 169.0, 170.0));
    c.push_back(near("rate (delta = 9/102)", fast.rate, 9.0 / 306.0, 1e-15));
    const auto slow = lundberg_certificate(used, m.p, 5.0 / 102.0);
    c.push_back(near("Delta-hat (delta = 5/102)", delta_hat(used, m.p, 5.0 / 102.0), 1.0, 1e-12));
    c.push_back(within("c2 (delta = 5/102)", slow.c1, 60.0, 61.0));
    c.push_back(near("rate (delta = 5/102)", slow.rate, 5.0 / 306.0, 1e-15));
}

inline void two_claims_checks(ExampleRun& run, const RiskModelSpec& m) {
    SimulationPlan plan;
    plan.trials = 1000;
    plan.horizon = 50;
    plan.seed = 42;
    const std::vector<double> us{0.0, 10.0, 17.9, 17.99, 18.0, 100.0};
    const auto sim = simulate_ruin_grid(m, us, plan);
    for (std::size_t j = 0; j < us.size(); ++j) {
        const double expected = us[j] < 18.0 ? 1.0 : 0.0;
        std::ostringstream u;
        u << us[j];
        run.checks.push_back(near("psi(" + u.str() + ") exact", exact_ruin_degenerate(m, us[j]), expected, 0.0));
        run.checks.push_back(near("psi(" + u.str() + ") simulated", sim[j].point, expected, 0.0));
    }
}

} // namespace detail

inline ExampleRun run_example(int which) {
    const JobConfig cfg = example_config(which);
    ExampleRun run;
    run.id = which;
    if (which <= 2) {
        detail::walk_checks(run, std::get<WalkModel>(cfg.model).sequence, cfg);
    } else if (which == 3) {
        detail::erlang_model_checks(run, std::get<RiskModel>(cfg.model).spec, cfg);
    } else {
        detail::two_claims_checks(run, std::get<RiskModel>(cfg.model).spec);
    }
    return run;
}

} // namespace rwbound
