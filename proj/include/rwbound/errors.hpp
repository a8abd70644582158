#pragma once

#include <stdexcept>
#include <string>

namespace rwbound {

// Malformed distribution, sequence or model description.
class spec_error : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Constants that cannot satisfy the bound hypotheses (nonnegative drift,
// divergent exponential moments, nonpositive margin).
class infeasible_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Adaptive quadrature failed to reach the requested tolerance.
class quadrature_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace rwbound
