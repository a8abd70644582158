#pragma once

// Inhomogeneous increment sequences and certified Cesaro averages.
//
// A SequenceSpec maps an index i >= 1 to a Distribution. Averages
// (1/n) sum_{i<=n} f(i) are memoized per functional. Suprema over n >= b are
// certified from the declared structure of the sequence: exactly for
// eventually periodic rules, and for parametric rules whose functional values
// are eventually monotone with a known limit.

#include "rwbound/constants.hpp"
#include "rwbound/dists.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace rwbound {

// f(i) is monotone for i >= from_index and tends to limit.
struct MonotoneDeclaration {
    FunctionalKind kind;
    std::size_t from_index = 1;
    double limit = 0.0;
};

// Every functional value f(i) is monotone for i >= from_index with limit
// evaluate(law, f).
struct LimitLaw {
    std::size_t from_index = 1;
    Distribution law;

    bool operator==(const LimitLaw&) const = default;
};

struct PeriodicRule {
    std::vector<Distribution> preperiod;
    std::vector<Distribution> cycle;
};

struct ParametricRule {
    // Registry name of the family, or "custom" for rules built in code.
    std::string family = "custom";
    std::map<std::string, double> params;
    // Explicit leading terms for indices 1..head.size().
    std::vector<Distribution> head;
    // Law of the i-th increment for i > head.size().
    std::function<Distribution(std::size_t)> term;
    std::vector<MonotoneDeclaration> monotone;
    std::optional<LimitLaw> limit_law;
};

struct AverageCertificate {
    double value = 0.0;
    // Index attaining the reported value; empty when the value is a limit.
    std::optional<std::size_t> attained_at;
    std::size_t horizon_used = 0;
    // Upper bound on (value - true supremum); 0 when exact.
    double error_budget = 0.0;
};

class SequenceSpec {
public:
    static SequenceSpec periodic(std::vector<Distribution> preperiod,
                                 std::vector<Distribution> cycle, std::size_t horizon = 0) {
        if (cycle.empty()) {
            throw spec_error("periodic sequence: cycle must be nonempty");
        }
        const std::size_t min_horizon = preperiod.size() + 2 * cycle.size();
        if (horizon == 0) {
            horizon = min_horizon;
        }
        if (horizon < min_horizon) {
            std::ostringstream msg;
            msg << "periodic sequence: horizon " << horizon << " is below preperiod + 2*cycle = "
                << min_horizon;
            throw spec_error(msg.str());
        }
        return SequenceSpec(PeriodicRule{std::move(preperiod), std::move(cycle)}, horizon);
    }

    static SequenceSpec iid(Distribution d, std::size_t horizon = 0) {
        return periodic({}, {std::move(d)}, horizon);
    }

    static SequenceSpec parametric(ParametricRule rule, std::size_t horizon) {
        if (!rule.term) {
            throw spec_error("parametric sequence: term rule is required");
        }
        if (horizon < 1) {
            throw spec_error("parametric sequence: horizon must be >= 1");
        }
        for (const auto& d : rule.monotone) {
            validate(d.kind);
            if (d.from_index < 1) throw spec_error("monotone declaration: from_index must be >= 1");
            if (d.from_index > horizon) {
                throw spec_error("monotone declaration: from_index exceeds the horizon");
            }
        }
        if (rule.limit_law && (rule.limit_law->from_index < 1 || rule.limit_law->from_index > horizon)) {
            throw spec_error("limit law: from_index must lie in [1, horizon]");
        }
        return SequenceSpec(std::move(rule), horizon);
    }

    std::size_t horizon() const { return state_->horizon; }

    const PeriodicRule* periodic_rule() const { return std::get_if<PeriodicRule>(&state_->rule); }
    const ParametricRule* parametric_rule() const {
        return std::get_if<ParametricRule>(&state_->rule);
    }

    // Law of the i-th increment (i >= 1).
    const Distribution& at(std::size_t i) const {
        if (i < 1) throw spec_error("sequence index must be >= 1");
        if (const auto* p = periodic_rule()) {
            if (i <= p->preperiod.size()) return p->preperiod[i - 1];
            return p->cycle[(i - 1 - p->preperiod.size()) % p->cycle.size()];
        }
        std::lock_guard lock(state_->mutex);
        return materialize(i);
    }

    double term(const FunctionalKind& f, std::size_t i) const {
        if (i < 1) throw spec_error("sequence index must be >= 1");
        std::lock_guard lock(state_->mutex);
        Series& s = series(f);
        extend(s, f, i);
        return s.terms[i - 1];
    }

    // sum_{i<=n} f(i), compensated; +inf if any term is infinite.
    double prefix_sum(const FunctionalKind& f, std::size_t n) const {
        std::lock_guard lock(state_->mutex);
        Series& s = series(f);
        extend(s, f, n);
        return s.prefix[n];
    }

    // Monotonicity declaration governing f, if any.
    std::optional<MonotoneDeclaration> declaration_for(const FunctionalKind& f) const {
        const auto* p = parametric_rule();
        if (!p) return std::nullopt;
        for (const auto& d : p->monotone) {
            if (d.kind == f) return d;
        }
        if (p->limit_law) {
            return MonotoneDeclaration{f, p->limit_law->from_index, evaluate(p->limit_law->law, f)};
        }
        return std::nullopt;
    }

    // Structural equality: same rule description and horizon. Custom
    // parametric rules only compare equal to copies of themselves.
    bool operator==(const SequenceSpec& other) const {
        if (state_ == other.state_) return true;
        if (horizon() != other.horizon()) return false;
        const auto* p1 = periodic_rule();
        const auto* p2 = other.periodic_rule();
        if (p1 && p2) return p1->preperiod == p2->preperiod && p1->cycle == p2->cycle;
        const auto* q1 = parametric_rule();
        const auto* q2 = other.parametric_rule();
        if (q1 && q2) {
            return q1->family != "custom" && q1->family == q2->family && q1->params == q2->params &&
                   q1->head == q2->head;
        }
        return false;
    }

private:
    struct Series {
        std::vector<double> terms;
        std::vector<double> prefix{0.0};
        CompensatedSum running;
    };

    struct State {
        std::variant<PeriodicRule, ParametricRule> rule;
        std::size_t horizon = 1;
        std::mutex mutex;
        std::deque<Distribution> materialized;
        std::map<FunctionalKind, Series> cache;
    };

    template <class Rule>
    SequenceSpec(Rule rule, std::size_t horizon) : state_(std::make_shared<State>()) {
        state_->rule = std::move(rule);
        state_->horizon = horizon;
    }

    // Caller holds the mutex.
    const Distribution& materialize(std::size_t i) const {
        if (const auto* p = periodic_rule()) {
            if (i <= p->preperiod.size()) return p->preperiod[i - 1];
            return p->cycle[(i - 1 - p->preperiod.size()) % p->cycle.size()];
        }
        const auto& rule = std::get<ParametricRule>(state_->rule);
        auto& mat = state_->materialized;
        while (mat.size() < i) {
            const std::size_t k = mat.size() + 1;
            mat.push_back(k <= rule.head.size() ? rule.head[k - 1] : rule.term(k));
        }
        return mat[i - 1];
    }

    Series& series(const FunctionalKind& f) const {
        validate(f);
        return state_->cache[f];
    }

    void extend(Series& s, const FunctionalKind& f, std::size_t n) const {
        while (s.terms.size() < n) {
            const std::size_t i = s.terms.size() + 1;
            const double v = evaluate(materialize(i), f);
            s.terms.push_back(v);
            s.running += v;
            s.prefix.push_back(s.running.value());
        }
    }

    std::shared_ptr<State> state_;
};

inline double average(const SequenceSpec& seq, const FunctionalKind& f, std::size_t n) {
    if (n < 1) throw spec_error("average: n must be >= 1");
    const double s = seq.prefix_sum(f, n);
    return std::isinf(s) ? s : s / static_cast<double>(n);
}

namespace detail {

inline std::string index_note(const std::optional<std::size_t>& at) {
    return at ? "n=" + std::to_string(*at) : std::string("limit");
}

struct RangeMax {
    double value = -kInfinity;
    std::size_t at = 0;
};

inline RangeMax max_average(const SequenceSpec& seq, const FunctionalKind& f, std::size_t from,
                            std::size_t to) {
    RangeMax best;
    for (std::size_t n = from; n <= to; ++n) {
        const double v = average(seq, f, n);
        if (v > best.value) {
            best.value = v;
            best.at = n;
        }
    }
    return best;
}

inline AverageCertificate sup_periodic(const SequenceSpec& seq, const PeriodicRule& rule,
                                       const FunctionalKind& f, std::size_t b) {
    const std::size_t pre = rule.preperiod.size();
    const std::size_t len = rule.cycle.size();
    const std::size_t start = std::max(b, pre);
    const std::size_t last = start + len;  // covers every residue class once

    // Any infinite term before `last` poisons every average from there on.
    for (std::size_t i = 1; i <= last; ++i) {
        if (std::isinf(seq.term(f, i))) {
            return {kInfinity, i, last, 0.0};
        }
    }
    CompensatedSum cyc;
    for (std::size_t i = pre + 1; i <= pre + len; ++i) cyc += seq.term(f, i);
    const double cycle_mean = cyc.value() / static_cast<double>(len);

    AverageCertificate cert;
    cert.value = -kInfinity;
    cert.horizon_used = std::max(seq.horizon(), last);
    auto offer = [&cert](double v, std::optional<std::size_t> at) {
        if (v > cert.value) {
            cert.value = v;
            cert.attained_at = at;
        }
    };
    for (std::size_t n = std::max<std::size_t>(b, 1); n < start; ++n) {
        offer(average(seq, f, n), n);
    }
    // For n >= max(b, preperiod), average(n) = cycle_mean + C/n where C depends
    // only on the residue of n mod the cycle length: decreasing along the class
    // when C > 0 (sup at its first member), increasing to cycle_mean otherwise.
    for (std::size_t n = std::max<std::size_t>(start, 1); n < std::max<std::size_t>(start, 1) + len;
         ++n) {
        const double sum = seq.prefix_sum(f, n);
        const double excess = sum - static_cast<double>(n) * cycle_mean;
        const double noise = 1e-12 * (1.0 + std::abs(sum));
        if (excess >= -noise) {
            offer(sum / static_cast<double>(n), n);
        } else {
            offer(cycle_mean, std::nullopt);
        }
    }
    return cert;
}

inline AverageCertificate sup_monotone(const SequenceSpec& seq, const MonotoneDeclaration& decl,
                                       const FunctionalKind& f, std::size_t b) {
    const std::size_t horizon = std::max({seq.horizon(), b, decl.from_index});
    const double first = seq.term(f, decl.from_index);
    if (std::isinf(first) || std::isinf(decl.limit)) {
        return {kInfinity, decl.from_index, horizon, 0.0};
    }
    const bool nonincreasing = first > decl.limit;

    // Verify the declaration on [from_index, horizon + 1].
    double prev = first;
    for (std::size_t i = decl.from_index + 1; i <= horizon + 1; ++i) {
        const double v = seq.term(f, i);
        const double tol = 1e-9 * (1.0 + std::abs(prev));
        const bool ok = nonincreasing ? (v <= prev + tol && v >= decl.limit - tol)
                                      : (v >= prev - tol && v <= decl.limit + tol);
        if (!ok || std::isinf(v)) {
            std::ostringstream msg;
            msg << "declared monotone functional " << to_string(f) << " violates "
                << (nonincreasing ? "nonincreasing" : "nondecreasing") << " behaviour towards "
                << decl.limit << " at index " << i << " (value " << v << ", previous " << prev << ")";
            throw spec_error(msg.str());
        }
        prev = v;
    }

    AverageCertificate cert;
    cert.horizon_used = horizon;
    if (!nonincreasing) {
        // f(i) <= limit for all i >= from, so average(n) <= max(average(N), limit).
        const RangeMax head = max_average(seq, f, b, horizon);
        if (head.value >= decl.limit) {
            cert.value = head.value;
            cert.attained_at = head.at;
        } else {
            cert.value = decl.limit;
        }
        return cert;
    }
    // Nonincreasing terms: once f(n1) <= average(n1) for some n1 >= from, the
    // averages are nonincreasing from n1 on.
    for (std::size_t n1 = decl.from_index; n1 <= horizon; ++n1) {
        if (seq.term(f, n1) <= average(seq, f, n1)) {
            const RangeMax head = max_average(seq, f, b, std::max(b, n1));
            cert.value = head.value;
            cert.attained_at = head.at;
            return cert;
        }
    }
    // Not closed within the horizon: average(n) <= max(average(N), f(N+1)).
    const RangeMax head = max_average(seq, f, b, horizon);
    const double upper = std::max(head.value, seq.term(f, horizon + 1));
    const double lower = std::max(head.value, decl.limit);
    cert.value = upper;
    cert.attained_at = upper == head.value ? std::optional<std::size_t>(head.at) : std::nullopt;
    cert.error_budget = upper - lower;
    return cert;
}

} // namespace detail

// sup_{n >= b} average(seq, f, n), certified from the declared structure.
inline AverageCertificate sup_tail_average(const SequenceSpec& seq, const FunctionalKind& f,
                                           std::size_t b) {
    if (b < 1) throw spec_error("sup_tail_average: b must be >= 1");
    if (const auto* p = seq.periodic_rule()) {
        return detail::sup_periodic(seq, *p, f, b);
    }
    const auto decl = seq.declaration_for(f);
    if (!decl) {
        throw spec_error("sup_tail_average: no monotone declaration or limit law covers " +
                         to_string(f) + "; the supremum cannot be certified");
    }
    return detail::sup_monotone(seq, *decl, f, b);
}

// max_{1 <= n <= b-1} average(seq, f, n); the empty range (b = 1) yields 1.
inline double max_head_average(const SequenceSpec& seq, const FunctionalKind& f, std::size_t b) {
    if (b <= 1) return 1.0;
    return detail::max_average(seq, f, 1, b - 1).value;
}

struct DerivedConstants {
    TheoremConstants constants;
    AverageCertificate drift;       // sup_{n>=b} average of E xi
    AverageCertificate truncation;  // sup_{n>=b} average of E(|xi|; xi <= -c)
    AverageCertificate tail_mass;   // sup_{n>=b} average of P(xi<=0) + E(e^{h xi}; xi>0)
    double head_mass = 1.0;         // max_{n<b} of the same average
};

inline DerivedConstants derive_constants(const SequenceSpec& seq, double h, double c,
                                         std::size_t b) {
    if (!(h > 0.0)) throw spec_error("derive_constants: h must be > 0");
    if (!(c > 0.0)) throw spec_error("derive_constants: c must be > 0");
    if (b < 1) throw spec_error("derive_constants: b must be >= 1");

    DerivedConstants out;
    out.drift = sup_tail_average(seq, fn::Mean{}, b);
    if (!(out.drift.value < 0.0)) {
        std::ostringstream msg;
        msg << "condition (i) fails: sup_{n>=" << b << "} of the averaged means is "
            << out.drift.value << " (" << detail::index_note(out.drift.attained_at)
            << "), not negative";
        throw infeasible_error(msg.str());
    }
    out.truncation = sup_tail_average(seq, fn::TruncAbsBelow{c}, b);
    out.tail_mass = sup_tail_average(seq, fn::NegProbPlusExpPlus{h}, b);
    out.head_mass = max_head_average(seq, fn::NegProbPlusExpPlus{h}, b);
    if (std::isinf(out.tail_mass.value) || std::isinf(out.head_mass)) {
        std::ostringstream msg;
        msg << "h too large: E(e^{" << h << " xi}; xi > 0) diverges for some increment";
        throw infeasible_error(msg.str());
    }
    if (std::isinf(out.truncation.value)) {
        throw infeasible_error("condition (ii) fails: truncated lower moment is infinite");
    }

    out.constants.a = -out.drift.value;
    out.constants.b = b;
    out.constants.c = c;
    out.constants.epsilon = std::max(0.0, out.truncation.value);
    out.constants.h = h;
    out.constants.d1 = std::max(1.0, out.tail_mass.value);
    out.constants.d2 = std::max(1.0, out.head_mass);
    return out;
}

// Smallest b (up to the horizon) beyond which the averaged drift is negative.
inline std::size_t suggest_b(const SequenceSpec& seq) {
    const std::size_t n0 = seq.horizon();
    auto negative = [&seq](std::size_t b) { return sup_tail_average(seq, fn::Mean{}, b).value < 0.0; };
    if (!negative(n0)) {
        throw infeasible_error("suggest_b: no b within the horizon " + std::to_string(n0) +
                               " has negative averaged drift");
    }
    std::size_t lo = 1;
    std::size_t hi = n0;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (negative(mid)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo;
}

} // namespace rwbound
