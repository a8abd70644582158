#pragma once

#include "rwbound/errors.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>
#include <vector>

namespace rwbound {

// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) {
        if (std::isinf(x) || std::isinf(sum_)) {
            sum_ += x;
            return;
        }
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    CompensatedSum& operator+=(double x) {
        add(x);
        return *this;
    }

    double value() const { return std::isinf(sum_) ? sum_ : sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

struct QuadratureOptions {
    double rel_tol = 1e-10;
    // Absolute floor: integrals whose total error estimate is below this are
    // accepted regardless of the relative criterion.
    double abs_tol = 1e-15;
    std::size_t max_panels = 4000;
};

namespace detail {

struct Panel {
    double lo;
    double hi;
    double value;
    double error;
    bool operator<(const Panel& other) const { return error < other.error; }
};

template <class F>
Panel gk_panel(F& f, double lo, double hi) {
    double error = 0.0;
    const double value =
        boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, lo, hi, 0, 0.0, &error);
    return {lo, hi, value, error};
}

// Globally adaptive Gauss-Kronrod: repeatedly bisects the panel with the
// largest error estimate until the summed estimate meets the tolerance.
template <class F>
double adaptive_gk(F& f, double a, double b, const QuadratureOptions& opts) {
    std::priority_queue<Panel> panels;
    panels.push(gk_panel(f, a, b));
    double total_error = panels.top().error;
    double total_value = panels.top().value;
    while (total_error > std::max(opts.abs_tol, opts.rel_tol * std::abs(total_value))) {
        if (panels.size() >= opts.max_panels) {
            std::ostringstream msg;
            msg << "quadrature did not converge on [" << a << ", " << b << "]: error estimate "
                << total_error << " after " << panels.size() << " panels";
            throw quadrature_error(msg.str());
        }
        const Panel worst = panels.top();
        panels.pop();
        const double mid = 0.5 * (worst.lo + worst.hi);
        if (!(mid > worst.lo && mid < worst.hi)) {
            throw quadrature_error("quadrature panel collapsed below machine resolution");
        }
        const Panel left = gk_panel(f, worst.lo, mid);
        const Panel right = gk_panel(f, mid, worst.hi);
        panels.push(left);
        panels.push(right);
        total_error += left.error + right.error - worst.error;
        total_value += left.value + right.value - worst.value;
    }
    CompensatedSum sum;
    while (!panels.empty()) {
        sum += panels.top().value;
        panels.pop();
    }
    return sum.value();
}

} // namespace detail

// Adaptive 31-point Gauss-Kronrod on [a, b]; b may be +inf, in which case the
// half line is mapped onto [0, 1) by x = a + t / (1 - t).
template <class F>
double integrate(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
    if (!(b > a)) {
        return 0.0;
    }
    double value;
    if (std::isinf(b)) {
        auto g = [&f, a](double t) {
            const double u = 1.0 - t;
            const double fx = f(a + t / u);
            return fx == 0.0 ? 0.0 : fx / (u * u);
        };
        value = detail::adaptive_gk(g, 0.0, 1.0, opts);
    } else {
        value = detail::adaptive_gk(f, a, b, opts);
    }
    if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "quadrature produced a non-finite value on [" << a << ", " << b << "]";
        throw quadrature_error(msg.str());
    }
    return value;
}

// Splits [a, b] at the interior breakpoints before integrating, so that kinks
// and jumps of the integrand sit on panel boundaries.
template <class F>
double integrate_piecewise(F&& f, double a, double b, std::vector<double> breakpoints,
                           const QuadratureOptions& opts = {}) {
    if (!(b > a)) {
        return 0.0;
    }
    std::vector<double> cuts{a};
    std::sort(breakpoints.begin(), breakpoints.end());
    for (double x : breakpoints) {
        if (x > cuts.back() && x < b) {
            cuts.push_back(x);
        }
    }
    cuts.push_back(b);
    CompensatedSum total;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        total += integrate(f, cuts[k], cuts[k + 1], opts);
    }
    return total.value();
}

} // namespace rwbound
