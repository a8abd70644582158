#pragma once

// Exponential tail bound for the supremum of an inhomogeneous random walk:
//
//   P(sup_n S_n > x) <= min{1, c1 e^{-delta h x}},
//   Delta = a - eps - delta h d1 M,   M = max{c^2/2, 2/h^2},
//   c1 = S(b, d2) + e^{-delta h Delta b} / (1 - e^{-delta h Delta}),
//
// plus delta selection and the sharper Chernoff series the bound is built
// from, which serves as a dominance check.

#include "rwbound/constants.hpp"
#include "rwbound/errors.hpp"
#include "rwbound/seqmodel.hpp"

#include <boost/math/tools/minima.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <variant>
#include <vector>

namespace rwbound {

inline double big_m(const TheoremConstants& k) {
    return std::max(k.c * k.c / 2.0, 2.0 / (k.h * k.h));
}

// Supremum of the admissible delta; callers must stay strictly below it
// unless it is the 1/2 cap.
inline double max_feasible_delta(const TheoremConstants& k) {
    k.validate();
    if (!(k.a > k.epsilon)) {
        std::ostringstream msg;
        msg << "infeasible constants: a = " << k.a << " does not exceed epsilon = " << k.epsilon;
        throw infeasible_error(msg.str());
    }
    return std::min(0.5, (k.a - k.epsilon) / (k.h * k.d1 * big_m(k)));
}

inline double capital_delta(const TheoremConstants& k, double delta) {
    if (!(delta > 0.0 && delta <= 0.5)) {
        throw spec_error("delta must lie in (0, 1/2]");
    }
    return k.a - k.epsilon - delta * k.h * k.d1 * big_m(k);
}

// d2 (d2^{b-1} - 1)/(d2 - 1), continuous through d2 = 1 where it is b - 1.
inline double s_factor(std::size_t b, double d2) {
    if (b < 1) throw spec_error("s_factor: b must be >= 1");
    if (!(d2 >= 1.0)) throw spec_error("s_factor: d2 must be >= 1");
    if (b == 1) return 0.0;
    const double m = static_cast<double>(b - 1);
    const double t = d2 - 1.0;
    if (t == 0.0) return m;
    return d2 * std::expm1(m * std::log1p(t)) / t;
}

namespace detail {

// e^{-r b} / (1 - e^{-r}) for r > 0, accurate for small r.
inline double geometric_tail(double r, std::size_t b) {
    return std::exp(-r * static_cast<double>(b)) / -std::expm1(-r);
}

// Delta values within rounding of zero count as zero: at delta = delta_max
// the computed margin is noise and c1 would be meaningless.
inline bool margin_positive(double margin, double a, double eps, double load) {
    return margin > 4.0 * std::numeric_limits<double>::epsilon() * (a + eps + load);
}

inline double checked_delta_rate(const TheoremConstants& k, double delta, double& cap_delta) {
    k.validate();
    cap_delta = capital_delta(k, delta);
    if (!margin_positive(cap_delta, k.a, k.epsilon, delta * k.h * k.d1 * big_m(k))) {
        std::ostringstream msg;
        msg << "infeasible delta " << delta << ": Delta = " << cap_delta << " is not positive";
        throw infeasible_error(msg.str());
    }
    return delta * k.h;
}

} // namespace detail

inline double c1_constant(const TheoremConstants& k, double delta) {
    double cap_delta = 0.0;
    const double rate = detail::checked_delta_rate(k, delta, cap_delta);
    CompensatedSum sum;
    sum += s_factor(k.b, k.d2);
    sum += detail::geometric_tail(rate * cap_delta, k.b);
    return sum.value();
}

struct BoundCertificate {
    TheoremConstants constants;
    double delta = 0.0;
    double capital_delta = 0.0;
    double big_m = 0.0;
    double s = 0.0;
    double c1 = 0.0;
    double rate = 0.0;
    double crossover_x = 0.0;

    // min{1, c1 e^{-rate x}}; exactly 1 up to the crossover.
    double bound(double x) const {
        if (x <= crossover_x) return 1.0;
        return std::min(1.0, std::exp(std::log(c1) - rate * x));
    }

    // c1 e^{-rate x} without the cap.
    double uncapped(double x) const { return std::exp(std::log(c1) - rate * x); }
};

inline BoundCertificate make_certificate(const TheoremConstants& k, double delta) {
    BoundCertificate cert;
    cert.constants = k;
    cert.delta = delta;
    cert.rate = detail::checked_delta_rate(k, delta, cert.capital_delta);
    cert.big_m = big_m(k);
    cert.s = s_factor(k.b, k.d2);
    cert.c1 = c1_constant(k, delta);
    cert.crossover_x = cert.c1 > 1.0 ? std::log(cert.c1) / cert.rate : 0.0;
    return cert;
}

inline double tail_bound(const TheoremConstants& k, double delta, double x) {
    if (!(x >= 0.0)) throw spec_error("tail_bound: x must be >= 0");
    return make_certificate(k, delta).bound(x);
}

struct AtPoint {
    double x = 0.0;
};
struct AsymptoticRate {};
using DeltaObjective = std::variant<AtPoint, AsymptoticRate>;

inline constexpr double kAsymptoticMargin = 1e-3;

// Chooses delta for the given objective. AtPoint(x) minimizes
// ln c1(delta) - delta h x, the log of the uncapped bound at x.
inline BoundCertificate optimize_delta(const TheoremConstants& k, const DeltaObjective& objective) {
    const double dmax = max_feasible_delta(k);
    if (std::holds_alternative<AsymptoticRate>(objective)) {
        return make_certificate(k, (1.0 - kAsymptoticMargin) * dmax);
    }
    const double x = std::get<AtPoint>(objective).x;
    if (!(x >= 0.0)) throw spec_error("optimize_delta: x must be >= 0");
    // At the 1/2 cap Delta stays positive, so the right end is admissible.
    const double hi = dmax < 0.5 ? dmax * (1.0 - 1e-12) : 0.5;
    auto g = [&k, x](double d) {
        try {
            return std::log(c1_constant(k, d)) - d * k.h * x;
        } catch (const infeasible_error&) {
            return kInfinity;
        }
    };

    constexpr int grid = 256;
    double best_d = hi;
    double best_g = g(hi);
    int best_k = grid;
    for (int i = 1; i < grid; ++i) {
        const double d = hi * static_cast<double>(i) / grid;
        const double v = g(d);
        if (v < best_g) {
            best_g = v;
            best_d = d;
            best_k = i;
        }
    }
    const double lo_b = hi * static_cast<double>(best_k - 1) / grid;
    const double hi_b = std::min(hi, hi * static_cast<double>(best_k + 1) / grid);
    std::uintmax_t iters = 200;
    const auto [d_opt, g_opt] = boost::math::tools::brent_find_minima(
        g, std::max(lo_b, hi * 1e-12), hi_b, std::numeric_limits<double>::digits / 2, iters);
    return make_certificate(k, g_opt < best_g ? d_opt : best_d);
}

// e^{-yx} (sum_{n<=N} prod_{i<=n} E e^{y xi_i} + sum_{n>N} r^n) with
// r = exp(y(-a + eps + y d1 M)), valid for 0 < y <= h/2 and N >= b.
// Not capped at 1.
inline double direct_chernoff_bound(const SequenceSpec& seq, const TheoremConstants& k, double y,
                                    double x, std::size_t n_terms) {
    k.validate();
    if (!(y > 0.0 && y <= k.h / 2.0 * (1.0 + 1e-15))) {
        throw spec_error("direct_chernoff_bound: y must lie in (0, h/2]");
    }
    if (n_terms < k.b) throw spec_error("direct_chernoff_bound: N must be >= b");
    const double log_r = y * (-k.a + k.epsilon + y * k.d1 * big_m(k));
    if (!(log_r < 0.0)) {
        throw infeasible_error("direct_chernoff_bound: geometric tail does not converge for this y");
    }
    CompensatedSum sum;
    double log_prod = 0.0;
    for (std::size_t n = 1; n <= n_terms; ++n) {
        const double m = seq.term(fn::Mgf{y}, n);
        if (std::isinf(m)) {
            throw infeasible_error("direct_chernoff_bound: E e^{y xi} diverges at index " +
                                   std::to_string(n));
        }
        log_prod += std::log(m);
        sum += std::exp(log_prod - y * x);
    }
    sum += std::exp(log_r * static_cast<double>(n_terms + 1) - y * x) / -std::expm1(log_r);
    return sum.value();
}

struct TunedC {
    double c = 0.0;
    DerivedConstants derived;
    BoundCertificate certificate;
};

// Picks c from the candidates minimizing the optimized bound at x.
inline TunedC tune_c(const SequenceSpec& seq, double h, std::size_t b, double x,
                     const std::vector<double>& candidates) {
    std::optional<TunedC> best;
    for (double c : candidates) {
        try {
            auto derived = derive_constants(seq, h, c, b);
            auto cert = optimize_delta(derived.constants, AtPoint{x});
            const double score = std::log(cert.c1) - cert.rate * x;
            if (!best || score < std::log(best->certificate.c1) - best->certificate.rate * x) {
                best = TunedC{c, std::move(derived), cert};
            }
        } catch (const infeasible_error&) {
        }
    }
    if (!best) throw infeasible_error("tune_c: no candidate c gives feasible constants");
    return *best;
}

} // namespace rwbound
