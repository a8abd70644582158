#pragma once

// Inhomogeneous renewal risk model R(t) = u + p t - sum_{i <= Theta(t)} Z_i.
// Ruin happens iff the walk with increments xi_i = Z_i - p theta_i exceeds u,
// so the walk bound applies directly. The corollary form works with claims
// and inter-occurrence times separately:
//
//   Delta^ = alpha - p eps - delta gamma (1 + nu1) max{kappa^2/2, 2/gamma^2},
//   c2 = ((1+nu2)/nu2)((1+nu2)^{beta-1} - 1)
//        + e^{-delta gamma Delta^ beta} / (1 - e^{-delta gamma Delta^}).

#include "rwbound/bounds.hpp"
#include "rwbound/seqmodel.hpp"

#include <boost/math/tools/roots.hpp>

#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace rwbound {

struct RiskModelSpec {
    double p = 1.0;
    SequenceSpec claims;
    SequenceSpec interarrivals;

    void validate() const;
};

namespace detail {

// Distinct laws the sequence can produce, as far as its structure reveals.
inline std::vector<Distribution> known_laws(const SequenceSpec& seq) {
    std::vector<Distribution> out;
    if (const auto* p = seq.periodic_rule()) {
        out = p->preperiod;
        out.insert(out.end(), p->cycle.begin(), p->cycle.end());
        return out;
    }
    for (std::size_t i = 1; i <= seq.horizon(); ++i) out.push_back(seq.at(i));
    if (const auto* r = seq.parametric_rule(); r && r->limit_law) out.push_back(r->limit_law->law);
    return out;
}

inline bool has_difference(const Distribution& d) { return d.is<Difference>(); }

} // namespace detail

inline void RiskModelSpec::validate() const {
    if (!(p > 0.0) || !std::isfinite(p)) throw spec_error("risk model: premium rate p must be > 0");
    for (const auto& z : detail::known_laws(claims)) {
        if (detail::has_difference(z)) throw spec_error("risk model: claims cannot be differences");
        if (support_min(z) < 0.0) throw spec_error("risk model: claim amounts must be nonnegative");
    }
    for (const auto& t : detail::known_laws(interarrivals)) {
        if (detail::has_difference(t)) {
            throw spec_error("risk model: inter-occurrence times cannot be differences");
        }
        if (support_min(t) < 0.0) {
            throw spec_error("risk model: inter-occurrence times must be nonnegative");
        }
        if (!(support_max(t) > 0.0)) {
            throw spec_error("risk model: inter-occurrence times must not be degenerate at zero");
        }
    }
}

// Law of Z - p theta; a deterministic pair collapses to a point mass.
inline Distribution make_increment(const Distribution& z, double p, const Distribution& theta) {
    if (z.is<Degenerate>() && theta.is<Degenerate>()) {
        return Distribution::degenerate(z.as<Degenerate>().point - p * theta.as<Degenerate>().point);
    }
    return Distribution::difference(z, p, theta);
}

namespace detail {

// The law that every index from `from` on shares, if the sequence is
// eventually identically distributed.
inline std::optional<std::pair<std::size_t, Distribution>> eventual_law(const SequenceSpec& seq) {
    if (const auto* p = seq.periodic_rule(); p && p->cycle.size() == 1) {
        return std::make_pair(p->preperiod.size() + 1, p->cycle.front());
    }
    return std::nullopt;
}

} // namespace detail

// Increments xi_i = Z_i - p theta_i. Structure is inherited when both inputs
// are periodic (cycle length = lcm), or when one side is eventually i.i.d.
// and the other carries a limit law. Otherwise the result has no declaration
// and a warning is appended.
inline SequenceSpec to_increment_sequence(const RiskModelSpec& m,
                                          std::vector<std::string>* warnings = nullptr) {
    m.validate();
    const double p = m.p;
    const auto* zc = m.claims.periodic_rule();
    const auto* tc = m.interarrivals.periodic_rule();
    if (zc && tc) {
        const std::size_t pre = std::max(zc->preperiod.size(), tc->preperiod.size());
        const std::size_t len = std::lcm(zc->cycle.size(), tc->cycle.size());
        std::vector<Distribution> head, cycle;
        for (std::size_t i = 1; i <= pre + len; ++i) {
            auto d = make_increment(m.claims.at(i), p, m.interarrivals.at(i));
            (i <= pre ? head : cycle).push_back(std::move(d));
        }
        const std::size_t horizon =
            std::max({m.claims.horizon(), m.interarrivals.horizon(), pre + 2 * len});
        return SequenceSpec::periodic(std::move(head), std::move(cycle), horizon);
    }

    ParametricRule rule;
    rule.family = "custom";
    SequenceSpec claims = m.claims;
    SequenceSpec inter = m.interarrivals;
    rule.term = [claims, inter, p](std::size_t i) {
        return make_increment(claims.at(i), p, inter.at(i));
    };
    const auto z_iid = detail::eventual_law(claims);
    const auto t_iid = detail::eventual_law(inter);
    const auto* zr = claims.parametric_rule();
    const auto* tr = inter.parametric_rule();
    if (zr && zr->limit_law && t_iid) {
        rule.limit_law = LimitLaw{std::max(zr->limit_law->from_index, t_iid->first),
                                  make_increment(zr->limit_law->law, p, t_iid->second)};
    } else if (tr && tr->limit_law && z_iid) {
        rule.limit_law = LimitLaw{std::max(tr->limit_law->from_index, z_iid->first),
                                  make_increment(z_iid->second, p, tr->limit_law->law)};
    } else if (warnings) {
        warnings->push_back(
            "claim and inter-occurrence structures are not compatible; tail suprema of the "
            "increments cannot be certified beyond the horizon");
    }
    const std::size_t horizon = std::max(claims.horizon(), inter.horizon());
    if (rule.limit_law) rule.limit_law->from_index = std::min(rule.limit_law->from_index, horizon);
    return SequenceSpec::parametric(std::move(rule), horizon);
}

struct CorollaryTwoConstants {
    double alpha = 0.0;
    std::size_t beta = 1;
    double kappa = 0.0;
    double epsilon = 0.0;
    double gamma = 0.0;
    double nu1 = 1.0;
    double nu2 = 1.0;

    void validate() const {
        auto fail = [](const char* what) { throw spec_error(std::string("corollary constants: ") + what); };
        if (!(alpha > 0.0) || !std::isfinite(alpha)) fail("alpha must be finite and > 0");
        if (beta < 1) fail("beta must be >= 1");
        if (!(kappa > 0.0) || !std::isfinite(kappa)) fail("kappa must be finite and > 0");
        if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) fail("epsilon must be finite and >= 0");
        if (!(gamma > 0.0) || !std::isfinite(gamma)) fail("gamma must be finite and > 0");
        if (!(nu1 >= 1.0) || !std::isfinite(nu1)) fail("nu1 must be finite and >= 1");
        if (!(nu2 >= 1.0) || !std::isfinite(nu2)) fail("nu2 must be finite and >= 1");
    }

    bool operator==(const CorollaryTwoConstants&) const = default;
};

struct CorollaryTwoInputs {
    CorollaryTwoConstants constants;
    AverageCertificate drift;         // sup of averaged E Z - p E theta
    AverageCertificate interarrival;  // sup of averaged E(theta; theta >= kappa/p)
    AverageCertificate exp_moment;    // sup of averaged E e^{gamma Z}
    double head_exp_moment = 1.0;
};

inline CorollaryTwoInputs derive_corollary2_inputs(const RiskModelSpec& m, double gamma,
                                                   double kappa, std::size_t beta) {
    if (!(gamma > 0.0)) throw spec_error("gamma must be > 0");
    if (!(kappa > 0.0)) throw spec_error("kappa must be > 0");
    if (beta < 1) throw spec_error("beta must be >= 1");
    const auto xi = to_increment_sequence(m);

    CorollaryTwoInputs out;
    out.drift = sup_tail_average(xi, fn::Mean{}, beta);
    if (!(out.drift.value < 0.0)) {
        std::ostringstream msg;
        msg << "condition (i) fails: sup_{n>=" << beta << "} of the averaged E Z - p E theta is "
            << out.drift.value << " (" << detail::index_note(out.drift.attained_at)
            << "), not negative";
        throw infeasible_error(msg.str());
    }
    out.interarrival = sup_tail_average(m.interarrivals, fn::InterarrivalTrunc{kappa / m.p}, beta);
    out.exp_moment = sup_tail_average(m.claims, fn::ExpMoment{gamma}, beta);
    out.head_exp_moment = max_head_average(m.claims, fn::ExpMoment{gamma}, beta);
    if (std::isinf(out.exp_moment.value) || std::isinf(out.head_exp_moment)) {
        std::ostringstream msg;
        msg << "gamma too large: E e^{" << gamma << " Z} diverges for some claim";
        throw infeasible_error(msg.str());
    }
    auto& k = out.constants;
    k.alpha = -out.drift.value;
    k.beta = beta;
    k.kappa = kappa;
    k.epsilon = std::max(0.0, out.interarrival.value);
    k.gamma = gamma;
    k.nu1 = std::max(1.0, out.exp_moment.value);
    k.nu2 = beta == 1 ? 1.0 : std::max(1.0, out.head_exp_moment);
    return out;
}

inline TheoremConstants map_to_theorem(const CorollaryTwoConstants& k, double p) {
    return {k.alpha, k.beta, k.kappa, p * k.epsilon, k.gamma, 1.0 + k.nu1, 1.0 + k.nu2};
}

inline double delta_hat(const CorollaryTwoConstants& k, double p, double delta) {
    k.validate();
    if (!(delta > 0.0 && delta <= 0.5)) throw spec_error("delta must lie in (0, 1/2]");
    const double m = std::max(k.kappa * k.kappa / 2.0, 2.0 / (k.gamma * k.gamma));
    return k.alpha - p * k.epsilon - delta * k.gamma * (1.0 + k.nu1) * m;
}

// Computed from the corollary's own expression; coincides with c1 of the
// mapped constants.
inline double c2_constant(const CorollaryTwoConstants& k, double p, double delta) {
    const double dh = delta_hat(k, p, delta);
    if (!detail::margin_positive(dh, k.alpha, p * k.epsilon, k.alpha - p * k.epsilon - dh)) {
        std::ostringstream msg;
        msg << "infeasible delta " << delta << ": Delta^ = " << dh << " is not positive";
        throw infeasible_error(msg.str());
    }
    const double r = delta * k.gamma * dh;
    const double head = (1.0 + k.nu2) / k.nu2 *
                        std::expm1(static_cast<double>(k.beta - 1) * std::log1p(k.nu2));
    CompensatedSum sum;
    sum += head;
    sum += std::exp(-r * static_cast<double>(k.beta)) / -std::expm1(-r);
    return sum.value();
}

inline BoundCertificate lundberg_certificate(const CorollaryTwoConstants& k, double p, double delta) {
    BoundCertificate cert;
    cert.constants = map_to_theorem(k, p);
    cert.delta = delta;
    cert.capital_delta = delta_hat(k, p, delta);
    cert.big_m = big_m(cert.constants);
    cert.s = s_factor(k.beta, 1.0 + k.nu2);
    cert.c1 = c2_constant(k, p, delta);
    cert.rate = delta * k.gamma;
    cert.crossover_x = cert.c1 > 1.0 ? std::log(cert.c1) / cert.rate : 0.0;
    return cert;
}

inline double lundberg_bound(const RiskModelSpec& m, const CorollaryTwoConstants& k, double delta,
                             double u) {
    if (!(u >= 0.0)) throw spec_error("lundberg_bound: u must be >= 0");
    return lundberg_certificate(k, m.p, delta).bound(u);
}

// Positive root R of E e^{R(Z - p theta)} = 1 for a homogeneous model, or
// nullopt when the moment generating function diverges (or stays below 1)
// before reaching 1.
inline std::optional<double> adjustment_coefficient(const Distribution& claim,
                                                    const Distribution& interarrival, double p) {
    if (!(p > 0.0)) throw spec_error("adjustment_coefficient: p must be > 0");
    const double drift = evaluate(claim, fn::Mean{}) - p * evaluate(interarrival, fn::Mean{});
    if (!(drift < 0.0)) {
        std::ostringstream msg;
        msg << "net profit condition fails: E Z - p E theta = " << drift << " is not negative";
        throw infeasible_error(msg.str());
    }
    auto g = [&](double y) { return evaluate_difference(claim, p, interarrival, fn::Mgf{y}) - 1.0; };

    double lo = 1e-6;
    double glo = g(lo);
    if (glo >= 0.0) throw quadrature_error("adjustment_coefficient: no sign change near zero");
    double hi = lo;
    double ghi = glo;
    while (true) {
        hi = 2.0 * lo;
        ghi = g(hi);
        if (std::isinf(ghi) || ghi >= 0.0 || hi > 1e8) break;
        lo = hi;
        glo = ghi;
    }
    if (hi > 1e8 && ghi < 0.0) return std::nullopt;
    if (std::isinf(ghi)) {
        // Shrink towards the divergence point looking for a finite crossing.
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const double gm = g(mid);
            if (std::isinf(gm)) {
                hi = mid;
            } else if (gm >= 0.0) {
                hi = mid;
                ghi = gm;
                break;
            } else {
                lo = mid;
                glo = gm;
            }
        }
        if (std::isinf(ghi) || ghi < 0.0) return std::nullopt;
    }
    if (ghi == 0.0) return hi;
    std::uintmax_t iters = 300;
    const auto [a, b] = boost::math::tools::toms748_solve(g, lo, hi, glo, ghi,
                                                          boost::math::tools::eps_tolerance<double>(45),
                                                          iters);
    return 0.5 * (a + b);
}

// Exact psi(u) in {0, 1} for a model whose claims and inter-occurrence times
// are all point masses with eventually periodic structure.
inline int exact_ruin_degenerate(const RiskModelSpec& m, double u) {
    if (!(u >= 0.0)) throw spec_error("exact_ruin_degenerate: u must be >= 0");
    const auto xi = to_increment_sequence(m);
    const auto* rule = xi.periodic_rule();
    if (!rule) {
        throw spec_error("exact_ruin_degenerate: requires eventually periodic claims and "
                         "inter-occurrence times");
    }
    auto point = [](const Distribution& d) {
        if (!d.is<Degenerate>()) {
            throw spec_error("exact_ruin_degenerate: every claim and inter-occurrence time must be "
                             "a point mass");
        }
        return d.as<Degenerate>().point;
    };
    long double cycle_sum = 0.0L;
    for (const auto& d : rule->cycle) cycle_sum += point(d);
    for (const auto& d : rule->preperiod) point(d);
    if (cycle_sum > 0.0L) return 1;  // the walk drifts to +infinity
    // With a nonpositive cycle sum the running maximum is reached within one
    // pass of the cycle after the preperiod.
    long double s = 0.0L;
    long double best = 0.0L;
    const std::size_t last = rule->preperiod.size() + rule->cycle.size();
    for (std::size_t i = 1; i <= last; ++i) {
        s += point(xi.at(i));
        best = std::max(best, s);
    }
    return best > static_cast<long double>(u) ? 1 : 0;
}

struct TunedKappa {
    double kappa = 0.0;
    CorollaryTwoInputs inputs;
    BoundCertificate certificate;
};

// Candidate kappas default to p times the finite support maxima of the
// inter-occurrence laws and p times multiples of their means.
inline TunedKappa tune_kappa(const RiskModelSpec& m, double gamma, std::size_t beta, double u,
                             std::vector<double> candidates = {}) {
    if (candidates.empty()) {
        for (const auto& t : detail::known_laws(m.interarrivals)) {
            const double hi = support_max(t);
            if (std::isfinite(hi)) candidates.push_back(m.p * hi);
            const double mean = evaluate(t, fn::Mean{});
            for (double f : {0.5, 1.0, 2.0, 4.0, 8.0}) candidates.push_back(m.p * mean * f);
        }
        std::sort(candidates.begin(), candidates.end());
        candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    }
    std::optional<TunedKappa> best;
    auto score = [u](const BoundCertificate& c) { return std::log(c.c1) - c.rate * u; };
    for (double kappa : candidates) {
        if (!(kappa > 0.0)) continue;
        try {
            auto inputs = derive_corollary2_inputs(m, gamma, kappa, beta);
            const auto mapped = map_to_theorem(inputs.constants, m.p);
            const double delta = optimize_delta(mapped, AtPoint{u}).delta;
            auto cert = lundberg_certificate(inputs.constants, m.p, delta);
            if (!best || score(cert) < score(best->certificate)) {
                best = TunedKappa{kappa, std::move(inputs), cert};
            }
        } catch (const infeasible_error&) {
        }
    }
    if (!best) throw infeasible_error("tune_kappa: no candidate kappa gives feasible constants");
    return *best;
}

} // namespace rwbound
