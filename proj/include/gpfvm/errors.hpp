#pragma once

#include <stdexcept>
#include <string>

namespace gpfvm {

/// A derivative order exceeds what the kernel's smoothness supports.
class SmoothnessError : public std::invalid_argument {
public:
    SmoothnessError(int order, int q)
        : std::invalid_argument("derivative order " + std::to_string(order) +
                                " exceeds kernel smoothness q = " + std::to_string(q)),
          order_(order), q_(q) {}

    int order() const noexcept { return order_; }
    int q() const noexcept { return q_; }

private:
    int order_;
    int q_;
};

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a dense factorization meets a matrix that is not positive definite.
class NotPositiveDefiniteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised by iterative solvers when a search direction has non-positive curvature.
class SolverBreakdown : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace gpfvm
