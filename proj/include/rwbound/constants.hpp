#pragma once

#include "rwbound/errors.hpp"

#include <cmath>
#include <cstddef>
#include <sstream>

namespace rwbound {

// Constants (a, b, c, eps, h, d1, d2) of the four averaged conditions on the
// increments: negative drift a beyond index b, truncated lower mass eps below
// -c, and the averaged tail masses d1 (beyond b) and d2 (head, n < b) for the
// exponent h.
struct TheoremConstants {
    double a = 0.0;
    std::size_t b = 1;
    double c = 0.0;
    double epsilon = 0.0;
    double h = 0.0;
    double d1 = 1.0;
    double d2 = 1.0;

    void validate() const {
        auto fail = [](const char* what) { throw spec_error(std::string("constants: ") + what); };
        if (!(a > 0.0) || !std::isfinite(a)) fail("a must be finite and > 0");
        if (b < 1) fail("b must be >= 1");
        if (!(c > 0.0) || !std::isfinite(c)) fail("c must be finite and > 0");
        if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) fail("epsilon must be finite and >= 0");
        if (!(h > 0.0) || !std::isfinite(h)) fail("h must be finite and > 0");
        if (!(d1 >= 1.0) || !std::isfinite(d1)) fail("d1 must be finite and >= 1");
        if (!(d2 >= 1.0) || !std::isfinite(d2)) fail("d2 must be finite and >= 1");
    }

    bool operator==(const TheoremConstants&) const = default;
};

} // namespace rwbound
