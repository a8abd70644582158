#pragma once

// Named parametric sequence families, addressable from configs.
//
//   harmonic_two_point      {up, down, offset}: P(xi_i = up) = 1/(i + offset),
//                           otherwise down. Limit law: point mass at down.
//   harmonic_erlang_mixture {rate}: claim with tail e^{-rate x}(1 + rate x / i),
//                           i.e. Exp(rate) w.p. 1 - 1/i, Erlang-2 w.p. 1/i.
//                           Limit law: Exp(rate).
//
// Every functional of both families is a monotone function of i (an affine
// function of 1/(i + offset) or 1/i), which is what the limit law declares.

#include "rwbound/seqmodel.hpp"

#include <map>
#include <string>
#include <vector>

namespace rwbound {

namespace detail {

inline double family_param(const std::map<std::string, double>& params, const std::string& key,
                           double fallback) {
    auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

inline void reject_unknown_params(const std::map<std::string, double>& params,
                                  const std::string& family, std::vector<std::string> known) {
    for (const auto& [key, _] : params) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw spec_error("family " + family + ": unknown parameter '" + key + "'");
        }
    }
}

} // namespace detail

inline std::vector<std::string> family_names() {
    return {"harmonic_two_point", "harmonic_erlang_mixture"};
}

inline SequenceSpec make_family(const std::string& family, const std::map<std::string, double>& params,
                                std::vector<Distribution> head, std::size_t horizon) {
    ParametricRule rule;
    rule.family = family;
    rule.params = params;
    const std::size_t from = head.size() + 1;
    rule.head = std::move(head);

    if (family == "harmonic_two_point") {
        detail::reject_unknown_params(params, family, {"up", "down", "offset"});
        const double up = detail::family_param(params, "up", 1.0);
        const double down = detail::family_param(params, "down", -1.0);
        const double offset = detail::family_param(params, "offset", 1.0);
        if (!(offset >= 0.0)) throw spec_error("family harmonic_two_point: offset must be >= 0");
        if (!(up > down)) throw spec_error("family harmonic_two_point: up must exceed down");
        rule.term = [up, down, offset](std::size_t i) {
            const double q = 1.0 / (static_cast<double>(i) + offset);
            if (q >= 1.0) return Distribution::degenerate(up);
            return Distribution::discrete({{down, 1.0 - q}, {up, q}});
        };
        rule.limit_law = LimitLaw{from, Distribution::degenerate(down)};
    } else if (family == "harmonic_erlang_mixture") {
        detail::reject_unknown_params(params, family, {"rate"});
        const double rate = detail::family_param(params, "rate", 1.0);
        if (!(rate > 0.0)) throw spec_error("family harmonic_erlang_mixture: rate must be > 0");
        rule.term = [rate](std::size_t i) { return harmonic_erlang_claim(i, rate); };
        rule.limit_law = LimitLaw{from, Distribution::exponential(rate)};
    } else {
        throw spec_error("unknown sequence family '" + family + "'");
    }
    if (horizon < from) horizon = from;
    return SequenceSpec::parametric(std::move(rule), horizon);
}

} // namespace rwbound
