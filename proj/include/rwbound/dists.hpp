#pragma once

// Symbolic distributions and the expectation functionals used by the
// exponential tail bounds. Closed forms are used wherever the family admits
// one; compound distributions Z - p*theta are handled by conditioning on theta
// and integrating numerically over its law.

#include "rwbound/errors.hpp"
#include "rwbound/quadrature.hpp"
#include "rwbound/random.hpp"

#include <algorithm>
#include <cmath>
#include <compare>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

namespace rwbound {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

class Distribution;

struct Degenerate {
    double point = 0.0;
    bool operator==(const Degenerate&) const = default;
};

struct Atom {
    double value = 0.0;
    double prob = 0.0;
    bool operator==(const Atom&) const = default;
};

struct FiniteDiscrete {
    std::vector<Atom> atoms;
    bool operator==(const FiniteDiscrete&) const = default;
};

struct Uniform {
    double lo = 0.0;
    double hi = 1.0;
    bool operator==(const Uniform&) const = default;
};

// Density rate * exp(-rate * (x - shift)) on [shift, inf).
struct ShiftedExponential {
    double rate = 1.0;
    double shift = 0.0;
    bool operator==(const ShiftedExponential&) const = default;
};

// shift + Gamma(2, rate): density rate^2 (x - shift) exp(-rate (x - shift)).
struct ErlangTwo {
    double rate = 1.0;
    double shift = 0.0;
    bool operator==(const ErlangTwo&) const = default;
};

struct MixtureComponent;

struct Mixture {
    std::vector<MixtureComponent> components;
    bool operator==(const Mixture& other) const;
};

// Law of Z - scale * theta with Z and theta independent.
struct Difference {
    std::shared_ptr<const Distribution> minuend;
    double scale = 1.0;
    std::shared_ptr<const Distribution> subtrahend;
    bool operator==(const Difference& other) const;
};

class Distribution {
public:
    using Variant = std::variant<Degenerate, FiniteDiscrete, Uniform, ShiftedExponential,
                                 ErlangTwo, Mixture, Difference>;

    Distribution() : value_(Degenerate{0.0}) {}

    // Validating constructor; throws spec_error on malformed input.
    explicit Distribution(Variant v) : value_(std::move(v)) { validate(); }

    static Distribution degenerate(double point) { return Distribution(Degenerate{point}); }
    static Distribution discrete(std::vector<Atom> atoms) {
        return Distribution(FiniteDiscrete{std::move(atoms)});
    }
    static Distribution uniform(double lo, double hi) { return Distribution(Uniform{lo, hi}); }
    static Distribution exponential(double rate, double shift = 0.0) {
        return Distribution(ShiftedExponential{rate, shift});
    }
    static Distribution erlang_two(double rate, double shift = 0.0) {
        return Distribution(ErlangTwo{rate, shift});
    }
    static Distribution mixture(std::vector<MixtureComponent> components);
    static Distribution difference(Distribution minuend, double scale, Distribution subtrahend);

    const Variant& variant() const { return value_; }

    template <class T>
    bool is() const {
        return std::holds_alternative<T>(value_);
    }

    template <class T>
    const T& as() const {
        return std::get<T>(value_);
    }

    bool operator==(const Distribution& other) const { return value_ == other.value_; }

private:
    void validate() const;

    Variant value_;
};

struct MixtureComponent {
    double weight = 0.0;
    Distribution dist;
    bool operator==(const MixtureComponent&) const = default;
};

inline bool Mixture::operator==(const Mixture& other) const {
    return components == other.components;
}

inline bool Difference::operator==(const Difference& other) const {
    return scale == other.scale && *minuend == *other.minuend && *subtrahend == *other.subtrahend;
}

inline Distribution Distribution::mixture(std::vector<MixtureComponent> components) {
    return Distribution(Mixture{std::move(components)});
}

inline Distribution Distribution::difference(Distribution minuend, double scale,
                                             Distribution subtrahend) {
    return Distribution(Difference{std::make_shared<const Distribution>(std::move(minuend)), scale,
                                   std::make_shared<const Distribution>(std::move(subtrahend))});
}

namespace detail {

inline constexpr double kProbabilitySumTolerance = 1e-12;

inline void check_probabilities(const std::vector<double>& probs, const char* what) {
    if (probs.empty()) {
        throw spec_error(std::string(what) + ": must have at least one entry");
    }
    CompensatedSum total;
    for (double p : probs) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
            throw spec_error(std::string(what) + ": probabilities must be finite and nonnegative");
        }
        total += p;
    }
    if (std::abs(total.value() - 1.0) > kProbabilitySumTolerance) {
        std::ostringstream msg;
        msg << what << ": probabilities sum to " << total.value() << ", expected 1";
        throw spec_error(msg.str());
    }
}

} // namespace detail

inline void Distribution::validate() const {
    std::visit(
        [](const auto& d) {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, Degenerate>) {
                if (!std::isfinite(d.point)) {
                    throw spec_error("degenerate: point must be finite");
                }
            } else if constexpr (std::is_same_v<T, FiniteDiscrete>) {
                std::vector<double> probs;
                for (const auto& a : d.atoms) {
                    if (!std::isfinite(a.value)) {
                        throw spec_error("discrete: atom values must be finite");
                    }
                    probs.push_back(a.prob);
                }
                detail::check_probabilities(probs, "discrete");
            } else if constexpr (std::is_same_v<T, Uniform>) {
                if (!std::isfinite(d.lo) || !std::isfinite(d.hi) || !(d.lo < d.hi)) {
                    throw spec_error("uniform: requires finite lo < hi");
                }
            } else if constexpr (std::is_same_v<T, ShiftedExponential> ||
                                 std::is_same_v<T, ErlangTwo>) {
                if (!(d.rate > 0.0) || !std::isfinite(d.rate) || !std::isfinite(d.shift)) {
                    throw spec_error("exponential family: rate must be finite and > 0");
                }
            } else if constexpr (std::is_same_v<T, Mixture>) {
                std::vector<double> weights;
                for (const auto& c : d.components) {
                    if (c.dist.template is<Difference>()) {
                        throw spec_error("mixture: components may not be differences");
                    }
                    weights.push_back(c.weight);
                }
                detail::check_probabilities(weights, "mixture");
            } else if constexpr (std::is_same_v<T, Difference>) {
                if (!d.minuend || !d.subtrahend) {
                    throw spec_error("difference: both operands are required");
                }
                if (!(d.scale > 0.0) || !std::isfinite(d.scale)) {
                    throw spec_error("difference: scale must be finite and > 0");
                }
                if (d.minuend->template is<Difference>() || d.subtrahend->template is<Difference>()) {
                    throw spec_error("difference: operands may not themselves be differences");
                }
            }
        },
        value_);
}

// Tail e^{-x}(1 + x/i) on [0, inf) (for rate 1): an Exp(rate)/Erlang-2 mixture
// whose Erlang weight decays like 1/i.
inline Distribution harmonic_erlang_claim(std::size_t index, double rate = 1.0) {
    if (index < 1) {
        throw spec_error("harmonic_erlang_claim: index must be >= 1");
    }
    const double w = 1.0 / static_cast<double>(index);
    if (index == 1) {
        return Distribution::erlang_two(rate);
    }
    return Distribution::mixture(
        {{1.0 - w, Distribution::exponential(rate)}, {w, Distribution::erlang_two(rate)}});
}

// ---------------------------------------------------------------------------
// Functionals
// ---------------------------------------------------------------------------

namespace fn {

struct Mean {
    auto operator<=>(const Mean&) const = default;
};
// E(|X| 1{X <= -c})
struct TruncAbsBelow {
    double c = 1.0;
    auto operator<=>(const TruncAbsBelow&) const = default;
};
// P(X <= 0)
struct NegProb {
    auto operator<=>(const NegProb&) const = default;
};
// E(e^{hX} 1{X > 0})
struct ExpPlus {
    double h = 1.0;
    auto operator<=>(const ExpPlus&) const = default;
};
// E e^{yX}
struct Mgf {
    double y = 0.0;
    auto operator<=>(const Mgf&) const = default;
};
// E(X 1{X >= threshold}); used with threshold = kappa / p on inter-occurrence times.
struct InterarrivalTrunc {
    double threshold = 0.0;
    auto operator<=>(const InterarrivalTrunc&) const = default;
};
// E e^{gamma Z} on claim sizes.
struct ExpMoment {
    double gamma = 0.0;
    auto operator<=>(const ExpMoment&) const = default;
};
// P(X <= 0) + E(e^{hX} 1{X > 0})
struct NegProbPlusExpPlus {
    double h = 1.0;
    auto operator<=>(const NegProbPlusExpPlus&) const = default;
};

} // namespace fn

using FunctionalKind = std::variant<fn::Mean, fn::TruncAbsBelow, fn::NegProb, fn::ExpPlus, fn::Mgf,
                                    fn::InterarrivalTrunc, fn::ExpMoment, fn::NegProbPlusExpPlus>;

inline std::string to_string(const FunctionalKind& f) {
    std::ostringstream out;
    std::visit(
        [&out](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, fn::Mean>) {
                out << "E[X]";
            } else if constexpr (std::is_same_v<T, fn::TruncAbsBelow>) {
                out << "E[|X|;X<=-" << k.c << "]";
            } else if constexpr (std::is_same_v<T, fn::NegProb>) {
                out << "P(X<=0)";
            } else if constexpr (std::is_same_v<T, fn::ExpPlus>) {
                out << "E[e^{" << k.h << "X};X>0]";
            } else if constexpr (std::is_same_v<T, fn::Mgf>) {
                out << "E[e^{" << k.y << "X}]";
            } else if constexpr (std::is_same_v<T, fn::InterarrivalTrunc>) {
                out << "E[X;X>=" << k.threshold << "]";
            } else if constexpr (std::is_same_v<T, fn::ExpMoment>) {
                out << "E[e^{" << k.gamma << "Z}]";
            } else {
                out << "P(X<=0)+E[e^{" << k.h << "X};X>0]";
            }
        },
        f);
    return out.str();
}

inline void validate(const FunctionalKind& f) {
    std::visit(
        [](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, fn::TruncAbsBelow>) {
                if (!(k.c > 0.0)) throw spec_error("TruncAbsBelow: c must be > 0");
            } else if constexpr (std::is_same_v<T, fn::ExpPlus> ||
                                 std::is_same_v<T, fn::NegProbPlusExpPlus>) {
                if (!(k.h > 0.0)) throw spec_error("ExpPlus: h must be > 0");
            } else if constexpr (std::is_same_v<T, fn::Mgf>) {
                if (!std::isfinite(k.y)) throw spec_error("Mgf: y must be finite");
            } else if constexpr (std::is_same_v<T, fn::ExpMoment>) {
                if (!std::isfinite(k.gamma)) throw spec_error("ExpMoment: gamma must be finite");
            } else if constexpr (std::is_same_v<T, fn::InterarrivalTrunc>) {
                if (!std::isfinite(k.threshold)) {
                    throw spec_error("InterarrivalTrunc: threshold must be finite");
                }
            }
        },
        f);
}

// ---------------------------------------------------------------------------
// Closed forms
// ---------------------------------------------------------------------------

namespace detail {

// Exponential rate of growth of the integrand of f as x -> +inf
// (0 for polynomially bounded integrands).
inline double growth_rate(const FunctionalKind& f) {
    if (const auto* e = std::get_if<fn::ExpPlus>(&f)) return e->h;
    if (const auto* m = std::get_if<fn::Mgf>(&f)) return std::max(0.0, m->y);
    if (const auto* g = std::get_if<fn::ExpMoment>(&f)) return std::max(0.0, g->gamma);
    return 0.0;
}

inline double exp_mgf(double y, double x) { return std::exp(y * x); }

inline double point_value(double x, const FunctionalKind& f) {
    return std::visit(
        [x](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, fn::Mean>) {
                return x;
            } else if constexpr (std::is_same_v<T, fn::TruncAbsBelow>) {
                return x <= -k.c ? -x : 0.0;
            } else if constexpr (std::is_same_v<T, fn::NegProb>) {
                return x <= 0.0 ? 1.0 : 0.0;
            } else if constexpr (std::is_same_v<T, fn::ExpPlus>) {
                return x > 0.0 ? std::exp(k.h * x) : 0.0;
            } else if constexpr (std::is_same_v<T, fn::Mgf>) {
                return std::exp(k.y * x);
            } else if constexpr (std::is_same_v<T, fn::InterarrivalTrunc>) {
                return x >= k.threshold ? x : 0.0;
            } else if constexpr (std::is_same_v<T, fn::ExpMoment>) {
                return std::exp(k.gamma * x);
            } else {
                return x <= 0.0 ? 1.0 : std::exp(k.h * x);
            }
        },
        f);
}

inline double closed_form(const Degenerate& d, const FunctionalKind& f) {
    return point_value(d.point, f);
}

inline double closed_form(const FiniteDiscrete& d, const FunctionalKind& f) {
    CompensatedSum total;
    for (const auto& a : d.atoms) {
        if (a.prob > 0.0) {
            total += a.prob * point_value(a.value, f);
        }
    }
    return total.value();
}

// (e^{y b} - e^{y a}) / y, evaluated without cancellation.
inline double exp_integral(double y, double a, double b) {
    if (y == 0.0) return b - a;
    return std::exp(y * a) * std::expm1(y * (b - a)) / y;
}

inline double closed_form(const Uniform& d, const FunctionalKind& f) {
    const double w = d.hi - d.lo;
    return std::visit(
        [&](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, fn::Mean>) {
                return 0.5 * (d.lo + d.hi);
            } else if constexpr (std::is_same_v<T, fn::TruncAbsBelow>) {
                const double u = std::min(d.hi, -k.c);
                if (u <= d.lo) return 0.0;
                return (d.lo - u) * (d.lo + u) / (2.0 * w);
            } else if constexpr (std::is_same_v<T, fn::NegProb>) {
                return std::clamp((std::min(0.0, d.hi) - d.lo) / w, 0.0, 1.0);
            } else if constexpr (std::is_same_v<T, fn::ExpPlus>) {
                const double l = std::max(d.lo, 0.0);
                if (d.hi <= l) return 0.0;
                return exp_integral(k.h, l, d.hi) / w;
            } else if constexpr (std::is_same_v<T, fn::Mgf>) {
                return exp_integral(k.y, d.lo, d.hi) / w;
            } else if constexpr (std::is_same_v<T, fn::ExpMoment>) {
                return exp_integral(k.gamma, d.lo, d.hi) / w;
            } else if constexpr (std::is_same_v<T, fn::InterarrivalTrunc>) {
                const double l = std::max(d.lo, k.threshold);
                if (d.hi <= l) return 0.0;
                return (d.hi - l) * (d.hi + l) / (2.0 * w);
            } else {
                return closed_form(d, fn::NegProb{}) + closed_form(d, fn::ExpPlus{k.h});
            }
        },
        f);
}

inline double closed_form(const ShiftedExponential& d, const FunctionalKind& f) {
    const double lam = d.rate;
    const double s = d.shift;
    return std::visit(
        [&](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, fn::Mean>) {
                return s + 1.0 / lam;
            } else if constexpr (std::is_same_v<T, fn::TruncAbsBelow>) {
                const double u = -k.c - s;  // X <= -c  iff  E <= u
                if (u <= 0.0) return 0.0;
                const double q = -std::expm1(-lam * u);
                return -s * q - q / lam + u * std::exp(-lam * u);
            } else if constexpr (std::is_same_v<T, fn::NegProb>) {
                return s >= 0.0 ? 0.0 : -std::expm1(lam * s);
            } else if constexpr (std::is_same_v<T, fn::ExpPlus>) {
                if (k.h >= lam) return kInfinity;
                const double e0 = std::max(0.0, -s);
                const double mu = lam - k.h;
                return std::exp(k.h * s - mu * e0) * lam / mu;
            } else if constexpr (std::is_same_v<T, fn::Mgf> || std::is_same_v<T, fn::ExpMoment>) {
                double y;
                if constexpr (std::is_same_v<T, fn::Mgf>) {
                    y = k.y;
                } else {
                    y = k.gamma;
                }
                if (y >= lam) return kInfinity;
                return std::exp(y * s) * lam / (lam - y);
            } else if constexpr (std::is_same_v<T, fn::InterarrivalTrunc>) {
                const double e0 = std::max(0.0, k.threshold - s);
                return std::exp(-lam * e0) * (s + e0 + 1.0 / lam);
            } else {
                return closed_form(d, fn::NegProb{}) + closed_form(d, fn::ExpPlus{k.h});
            }
        },
        f);
}

inline double closed_form(const ErlangTwo& d, const FunctionalKind& f) {
    const double lam = d.rate;
    const double s = d.shift;
    // P(G <= g) for G ~ Gamma(2, lam) and P(G3 <= g) for Gamma(3, lam)
    auto cdf2 = [lam](double g) { return -std::expm1(-lam * g) - lam * g * std::exp(-lam * g); };
    auto cdf3 = [lam](double g) {
        const double lg = lam * g;
        return -std::expm1(-lg) - std::exp(-lg) * (lg + 0.5 * lg * lg);
    };
    return std::visit(
        [&](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, fn::Mean>) {
                return s + 2.0 / lam;
            } else if constexpr (std::is_same_v<T, fn::TruncAbsBelow>) {
                const double u = -k.c - s;
                if (u <= 0.0) return 0.0;
                // E(-(s + G) 1{G <= u}) with E(G 1{G <= u}) = (2/lam) P(G3 <= u)
                return -s * cdf2(u) - 2.0 / lam * cdf3(u);
            } else if constexpr (std::is_same_v<T, fn::NegProb>) {
                return s >= 0.0 ? 0.0 : cdf2(-s);
            } else if constexpr (std::is_same_v<T, fn::ExpPlus>) {
                if (k.h >= lam) return kInfinity;
                const double e0 = std::max(0.0, -s);
                const double mu = lam - k.h;
                const double r = lam / mu;
                return std::exp(k.h * s - mu * e0) * r * r * (1.0 + mu * e0);
            } else if constexpr (std::is_same_v<T, fn::Mgf> || std::is_same_v<T, fn::ExpMoment>) {
                double y;
                if constexpr (std::is_same_v<T, fn::Mgf>) {
                    y = k.y;
                } else {
                    y = k.gamma;
                }
                if (y >= lam) return kInfinity;
                const double r = lam / (lam - y);
                return std::exp(y * s) * r * r;
            } else if constexpr (std::is_same_v<T, fn::InterarrivalTrunc>) {
                const double e0 = std::max(0.0, k.threshold - s);
                const double le = lam * e0;
                const double tail2 = std::exp(-le) * (1.0 + le);
                const double tail3 = std::exp(-le) * (1.0 + le + 0.5 * le * le);
                return s * tail2 + 2.0 / lam * tail3;
            } else {
                return closed_form(d, fn::NegProb{}) + closed_form(d, fn::ExpPlus{k.h});
            }
        },
        f);
}

inline bool allowed_on_difference(const FunctionalKind& f) {
    return !std::holds_alternative<fn::InterarrivalTrunc>(f) &&
           !std::holds_alternative<fn::ExpMoment>(f);
}

// Points of non-smoothness of the law (atoms, support endpoints).
inline void critical_points(const Distribution& d, std::vector<double>& out) {
    std::visit(
        [&out](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Degenerate>) {
                out.push_back(k.point);
            } else if constexpr (std::is_same_v<T, FiniteDiscrete>) {
                for (const auto& a : k.atoms) out.push_back(a.value);
            } else if constexpr (std::is_same_v<T, Uniform>) {
                out.push_back(k.lo);
                out.push_back(k.hi);
            } else if constexpr (std::is_same_v<T, ShiftedExponential> ||
                                 std::is_same_v<T, ErlangTwo>) {
                out.push_back(k.shift);
            } else if constexpr (std::is_same_v<T, Mixture>) {
                for (const auto& c : k.components) critical_points(c.dist, out);
            }
        },
        d.variant());
}

// Value of X at which the integrand of f jumps or has a kink.
inline std::vector<double> functional_thresholds(const FunctionalKind& f) {
    if (const auto* t = std::get_if<fn::TruncAbsBelow>(&f)) return {-t->c};
    if (const auto* t = std::get_if<fn::InterarrivalTrunc>(&f)) return {t->threshold};
    if (std::holds_alternative<fn::NegProb>(f) || std::holds_alternative<fn::ExpPlus>(f) ||
        std::holds_alternative<fn::NegProbPlusExpPlus>(f)) {
        return {0.0};
    }
    return {};
}

} // namespace detail

// Law of X + offset (X non-difference).
inline Distribution shifted(const Distribution& d, double offset) {
    return std::visit(
        [offset](const auto& k) -> Distribution {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Degenerate>) {
                return Distribution::degenerate(k.point + offset);
            } else if constexpr (std::is_same_v<T, FiniteDiscrete>) {
                FiniteDiscrete out = k;
                for (auto& a : out.atoms) a.value += offset;
                return Distribution(std::move(out));
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return Distribution::uniform(k.lo + offset, k.hi + offset);
            } else if constexpr (std::is_same_v<T, ShiftedExponential>) {
                return Distribution::exponential(k.rate, k.shift + offset);
            } else if constexpr (std::is_same_v<T, ErlangTwo>) {
                return Distribution::erlang_two(k.rate, k.shift + offset);
            } else if constexpr (std::is_same_v<T, Mixture>) {
                Mixture out;
                for (const auto& c : k.components) {
                    out.components.push_back({c.weight, shifted(c.dist, offset)});
                }
                return Distribution(std::move(out));
            } else {
                throw spec_error("shifted: differences cannot be shifted");
            }
        },
        d.variant());
}

inline double evaluate(const Distribution& dist, const FunctionalKind& f);
inline double evaluate_difference(const Distribution& z, double p, const Distribution& theta,
                           const FunctionalKind& f);

namespace detail {

// E[g(theta)] over the law of theta, g evaluated pointwise; continuous parts
// are integrated adaptively with the given breakpoints.
template <class G>
double expect_over(const Distribution& theta, G&& g, const std::vector<double>& breakpoints,
                   const QuadratureOptions& opts) {
    return std::visit(
        [&](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Degenerate>) {
                return g(k.point);
            } else if constexpr (std::is_same_v<T, FiniteDiscrete>) {
                CompensatedSum total;
                for (const auto& a : k.atoms) {
                    if (a.prob > 0.0) total += a.prob * g(a.value);
                }
                return total.value();
            } else if constexpr (std::is_same_v<T, Uniform>) {
                const double w = k.hi - k.lo;
                return integrate_piecewise([&](double t) { return g(t) / w; }, k.lo, k.hi,
                                           breakpoints, opts);
            } else if constexpr (std::is_same_v<T, ShiftedExponential>) {
                const double lam = k.rate;
                const double s = k.shift;
                return integrate_piecewise(
                    [&](double t) {
                        const double dens = lam * std::exp(-lam * (t - s));
                        return dens == 0.0 ? 0.0 : g(t) * dens;
                    },
                    s, kInfinity, breakpoints, opts);
            } else if constexpr (std::is_same_v<T, ErlangTwo>) {
                const double lam = k.rate;
                const double s = k.shift;
                return integrate_piecewise(
                    [&](double t) {
                        const double u = t - s;
                        const double dens = lam * lam * u * std::exp(-lam * u);
                        return dens == 0.0 ? 0.0 : g(t) * dens;
                    },
                    s, kInfinity, breakpoints, opts);
            } else if constexpr (std::is_same_v<T, Mixture>) {
                CompensatedSum total;
                for (const auto& c : k.components) {
                    if (c.weight > 0.0) {
                        total += c.weight * expect_over(c.dist, g, breakpoints, opts);
                    }
                }
                return total.value();
            } else {
                throw spec_error("expectation over a difference is not supported");
            }
        },
        theta.variant());
}

} // namespace detail

// Exact closed form (primitives, mixtures) or conditioning quadrature
// (differences). Returns +inf when an exponential moment diverges.
inline double evaluate(const Distribution& dist, const FunctionalKind& f) {
    validate(f);
    return std::visit(
        [&f](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Mixture>) {
                CompensatedSum total;
                for (const auto& c : k.components) {
                    if (c.weight > 0.0) {
                        const double v = evaluate(c.dist, f);
                        if (std::isinf(v)) return v;
                        total += c.weight * v;
                    }
                }
                return total.value();
            } else if constexpr (std::is_same_v<T, Difference>) {
                return evaluate_difference(*k.minuend, k.scale, *k.subtrahend, f);
            } else {
                return detail::closed_form(k, f);
            }
        },
        dist.variant());
}

// Functionals of Z - p*theta. Mean and Mgf factor exactly; the truncated
// functionals condition on theta and integrate the closed form for the
// shifted law of Z over theta.
inline double evaluate_difference(const Distribution& z, double p, const Distribution& theta,
                                  const FunctionalKind& f) {
    validate(f);
    if (z.is<Difference>() || theta.is<Difference>()) {
        throw spec_error("evaluate_difference: operands may not be differences");
    }
    if (!(p > 0.0)) {
        throw spec_error("evaluate_difference: scale must be > 0");
    }
    if (!detail::allowed_on_difference(f)) {
        throw spec_error("evaluate_difference: functional " + to_string(f) +
                         " is not defined for increments");
    }
    if (std::holds_alternative<fn::Mean>(f)) {
        return evaluate(z, f) - p * evaluate(theta, f);
    }
    if (const auto* m = std::get_if<fn::Mgf>(&f)) {
        const double mz = evaluate(z, fn::Mgf{m->y});
        const double mt = evaluate(theta, fn::Mgf{-p * m->y});
        if (std::isinf(mz) || std::isinf(mt)) return kInfinity;
        return mz * mt;
    }
    if (const auto* c = std::get_if<fn::NegProbPlusExpPlus>(&f)) {
        const double e = evaluate_difference(z, p, theta, fn::ExpPlus{c->h});
        if (std::isinf(e)) return e;
        return evaluate_difference(z, p, theta, fn::NegProb{}) + e;
    }
    if (const auto* e = std::get_if<fn::ExpPlus>(&f)) {
        // E(e^{h(Z-pt)}; Z > pt) <= E e^{hZ}; divergence of the latter at
        // every t is the only way the conditional value can be infinite.
        if (std::isinf(evaluate(z, fn::ExpPlus{e->h}))) return kInfinity;
    }

    std::vector<double> zcrit;
    detail::critical_points(z, zcrit);
    std::vector<double> breakpoints;
    for (double thr : detail::functional_thresholds(f)) {
        for (double k : zcrit) breakpoints.push_back((k - thr) / p);
    }
    QuadratureOptions opts;
    opts.rel_tol = 1e-10;
    return detail::expect_over(
        theta, [&](double t) { return evaluate(shifted(z, -p * t), f); }, breakpoints, opts);
}

// ---------------------------------------------------------------------------
// Quadrature route for the primitive families (independent of the closed
// forms above): integrate the functional's integrand against the density.
// ---------------------------------------------------------------------------

inline double evaluate_by_quadrature(const Distribution& dist, const FunctionalKind& f,
                                     const QuadratureOptions& opts = {}) {
    validate(f);
    if (const auto* c = std::get_if<fn::NegProbPlusExpPlus>(&f)) {
        const double e = evaluate_by_quadrature(dist, fn::ExpPlus{c->h}, opts);
        if (std::isinf(e)) return e;
        return evaluate_by_quadrature(dist, fn::NegProb{}, opts) + e;
    }
    const auto bps = detail::functional_thresholds(f);
    auto g = [&f](double x) { return detail::point_value(x, f); };
    return std::visit(
        [&](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Degenerate> || std::is_same_v<T, FiniteDiscrete>) {
                return detail::expect_over(dist, g, bps, opts);
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return detail::expect_over(dist, g, bps, opts);
            } else if constexpr (std::is_same_v<T, ShiftedExponential> ||
                                 std::is_same_v<T, ErlangTwo>) {
                if (detail::growth_rate(f) >= k.rate) return kInfinity;
                // Integrate in log space so e^{yx} * density cannot overflow.
                const double lam = k.rate;
                const double s = k.shift;
                const bool erlang = std::is_same_v<T, ErlangTwo>;
                auto integrand = [&](double x) {
                    const double u = x - s;
                    if (u <= 0.0) return 0.0;
                    double log_dens = std::log(lam) - lam * u;
                    if (erlang) log_dens += std::log(lam * u);
                    double gx;
                    double log_growth = 0.0;
                    if (const auto* e = std::get_if<fn::ExpPlus>(&f)) {
                        if (x <= 0.0) return 0.0;
                        log_growth = e->h * x;
                        gx = 1.0;
                    } else if (const auto* m = std::get_if<fn::Mgf>(&f)) {
                        log_growth = m->y * x;
                        gx = 1.0;
                    } else if (const auto* em = std::get_if<fn::ExpMoment>(&f)) {
                        log_growth = em->gamma * x;
                        gx = 1.0;
                    } else {
                        gx = detail::point_value(x, f);
                    }
                    if (gx == 0.0) return 0.0;
                    return gx * std::exp(log_dens + log_growth);
                };
                return integrate_piecewise(integrand, s, kInfinity, bps, opts);
            } else if constexpr (std::is_same_v<T, Mixture>) {
                CompensatedSum total;
                for (const auto& c : k.components) {
                    if (c.weight > 0.0) {
                        const double v = evaluate_by_quadrature(c.dist, f, opts);
                        if (std::isinf(v)) return v;
                        total += c.weight * v;
                    }
                }
                return total.value();
            } else {
                return evaluate(dist, f);
            }
        },
        dist.variant());
}

// ---------------------------------------------------------------------------
// Support and sampling
// ---------------------------------------------------------------------------

// Infimum of the support.
inline double support_min(const Distribution& dist) {
    return std::visit(
        [](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Degenerate>) {
                return k.point;
            } else if constexpr (std::is_same_v<T, FiniteDiscrete>) {
                double m = kInfinity;
                for (const auto& a : k.atoms) {
                    if (a.prob > 0.0) m = std::min(m, a.value);
                }
                return m;
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return k.lo;
            } else if constexpr (std::is_same_v<T, ShiftedExponential> ||
                                 std::is_same_v<T, ErlangTwo>) {
                return k.shift;
            } else if constexpr (std::is_same_v<T, Mixture>) {
                double m = kInfinity;
                for (const auto& c : k.components) {
                    if (c.weight > 0.0) m = std::min(m, support_min(c.dist));
                }
                return m;
            } else {
                return -kInfinity;
            }
        },
        dist.variant());
}

// Supremum of the support (+inf for unbounded laws).
inline double support_max(const Distribution& dist) {
    return std::visit(
        [](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Degenerate>) {
                return k.point;
            } else if constexpr (std::is_same_v<T, FiniteDiscrete>) {
                double m = -kInfinity;
                for (const auto& a : k.atoms) {
                    if (a.prob > 0.0) m = std::max(m, a.value);
                }
                return m;
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return k.hi;
            } else if constexpr (std::is_same_v<T, Mixture>) {
                double m = -kInfinity;
                for (const auto& c : k.components) {
                    if (c.weight > 0.0) m = std::max(m, support_max(c.dist));
                }
                return m;
            } else {
                return kInfinity;
            }
        },
        dist.variant());
}

inline double sample(const Distribution& dist, RandomStream& stream) {
    return std::visit(
        [&stream](const auto& k) -> double {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, Degenerate>) {
                return k.point;
            } else if constexpr (std::is_same_v<T, FiniteDiscrete>) {
                double u = stream.uniform();
                for (const auto& a : k.atoms) {
                    if (u < a.prob) return a.value;
                    u -= a.prob;
                }
                return k.atoms.back().value;
            } else if constexpr (std::is_same_v<T, Uniform>) {
                return k.lo + (k.hi - k.lo) * stream.uniform();
            } else if constexpr (std::is_same_v<T, ShiftedExponential>) {
                return k.shift + stream.standard_exponential() / k.rate;
            } else if constexpr (std::is_same_v<T, ErlangTwo>) {
                const double u1 = stream.uniform();
                const double u2 = stream.uniform();
                return k.shift - std::log(u1 * u2) / k.rate;
            } else if constexpr (std::is_same_v<T, Mixture>) {
                double u = stream.uniform();
                for (const auto& c : k.components) {
                    if (u < c.weight) return sample(c.dist, stream);
                    u -= c.weight;
                }
                return sample(k.components.back().dist, stream);
            } else {
                const double z = sample(*k.minuend, stream);
                return z - k.scale * sample(*k.subtrahend, stream);
            }
        },
        dist.variant());
}

} // namespace rwbound
