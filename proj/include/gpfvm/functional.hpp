#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gpfvm {

/// One-dimensional linear functional: either the m-th derivative at a point,
/// or the integral of the m-th derivative over [a, b].
struct Functional1D {
    enum class Kind { point_derivative, interval_integral };

    Kind kind = Kind::point_derivative;
    int order = 0;
    double a = 0.0;  ///< location for point functionals, lower limit for integrals
    double b = 0.0;  ///< upper limit (integrals only)

    static Functional1D point(double x, int order = 0) {
        if (order < 0) throw std::invalid_argument("Functional1D: negative derivative order");
        return {Kind::point_derivative, order, x, x};
    }

    /// Degenerate intervals (a == b) are allowed and integrate to zero.
    static Functional1D integral(double a, double b, int order = 0) {
        if (order < 0) throw std::invalid_argument("Functional1D: negative derivative order");
        if (a > b) throw std::invalid_argument("Functional1D: interval with a > b");
        return {Kind::interval_integral, order, a, b};
    }

    bool is_point() const noexcept { return kind == Kind::point_derivative; }
    bool is_integral() const noexcept { return kind == Kind::interval_integral; }

    /// Value of the functional applied to a constant function c.
    double apply_to_constant(double c) const noexcept {
        if (order > 0) return 0.0;
        return is_point() ? c : c * (b - a);
    }

    friend bool operator==(const Functional1D&, const Functional1D&) = default;
};

/// Tensor product of one-dimensional functionals, one per input dimension.
using ProductFunctional = std::vector<Functional1D>;

/// A weighted product functional acting on one output of a multi-output function.
struct FunctionalTerm {
    double weight = 1.0;
    std::size_t output = 0;
    ProductFunctional factors;
};

/// Linear combination of product functionals, possibly across outputs.
/// Represents collocation, FVM, initial, boundary, periodic and radiation
/// observations alike.
struct OutputFunctional {
    std::vector<FunctionalTerm> terms;

    OutputFunctional() = default;
    explicit OutputFunctional(std::vector<FunctionalTerm> t) : terms(std::move(t)) {}

    static OutputFunctional single(ProductFunctional factors, std::size_t output = 0, double weight = 1.0) {
        return OutputFunctional({FunctionalTerm{weight, output, std::move(factors)}});
    }

    /// Point evaluation u_output(x).
    static OutputFunctional evaluation(const std::vector<double>& x, std::size_t output = 0) {
        ProductFunctional f;
        f.reserve(x.size());
        for (double xi : x) f.push_back(Functional1D::point(xi));
        return single(std::move(f), output);
    }

    double apply_to_constant(double c) const noexcept {
        double acc = 0.0;
        for (const auto& t : terms) {
            double v = t.weight * c;
            for (const auto& f : t.factors) v = f.apply_to_constant(1.0) * v;
            acc += v;
        }
        return acc;
    }
};

}  // namespace gpfvm
