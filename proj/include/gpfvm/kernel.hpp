#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "gpfvm/errors.hpp"
#include "gpfvm/exp_poly.hpp"
#include "gpfvm/functional.hpp"

namespace gpfvm {

/// One-dimensional Matern kernel with half-integer smoothness nu = q + 1/2,
///
///     k(x1, x2) = variance * exp(-s) p_q(s),   s = sqrt(2q + 1) |x1 - x2| / lengthscale.
///
/// All derivatives up to order q per argument, and the first two
/// antiderivatives in the distance, are evaluated in closed form.
class KernelFactor {
public:
    static constexpr int kMaxQ = 3;

    KernelFactor(int q, double lengthscale, double variance_scale = 1.0)
        : q_(q), lengthscale_(lengthscale), variance_(variance_scale),
          anti_(ExpPoly(1.0, {1.0})) {
        if (q < 0 || q > kMaxQ)
            throw std::invalid_argument("KernelFactor: q must be in [0, " + std::to_string(kMaxQ) + "]");
        if (!(lengthscale > 0.0)) throw std::invalid_argument("KernelFactor: lengthscale must be positive");
        if (!(variance_scale > 0.0)) throw std::invalid_argument("KernelFactor: variance_scale must be positive");

        const double rate = std::sqrt(2.0 * q + 1.0) / lengthscale;
        ExpPoly base(rate, matern_polynomial(q), Parity::symmetric, 2 * q, variance_scale);
        derivatives_.reserve(2 * q + 1);
        derivatives_.push_back(base);
        for (int n = 1; n <= 2 * q; ++n) derivatives_.push_back(derivatives_.back().derivative());
        anti_ = ExpPolyAntiderivative(base);
    }

    int q() const noexcept { return q_; }
    double lengthscale() const noexcept { return lengthscale_; }
    double variance_scale() const noexcept { return variance_; }
    double rate() const noexcept { return derivatives_.front().rate(); }

    double eval(double x1, double x2) const { return derivatives_.front()(x1 - x2); }

    /// d^{a+b} k / dx1^a dx2^b at (x1, x2).
    double derivative(int a, int b, double x1, double x2) const {
        check_order(a);
        check_order(b);
        const double v = distance_derivative(a + b, x1 - x2);
        return (b % 2 == 0) ? v : -v;
    }

    /// n-th derivative of k as a function of d = x1 - x2 for 0 <= n <= 2q;
    /// n = -1 and n = -2 give the antiderivatives anchored at d = 0.
    double distance_derivative(int n, double d) const {
        if (n >= 0) {
            if (n > 2 * q_) throw SmoothnessError(n, 2 * q_);
            return derivatives_[static_cast<std::size_t>(n)](d);
        }
        if (n == -1) return anti_.first(d);
        if (n == -2) return anti_.second(d);
        throw std::invalid_argument("KernelFactor: antiderivative order below -2");
    }

    /// f1 k f2' for two one-dimensional functionals.
    ///
    /// Every functional becomes at most two signed atoms (location, order):
    /// a point keeps its order, an interval of order m becomes the endpoint
    /// difference at order m - 1, where order -1 denotes the antiderivative.
    /// Derivatives in x2 pick up (-1)^order since k depends on x1 - x2.
    double functional_cov(const Functional1D& f1, const Functional1D& f2) const {
        check_order(f1.order);
        check_order(f2.order);
        const auto lhs = atoms(f1);
        const auto rhs = atoms(f2);
        double acc = 0.0;
        for (std::size_t i = 0; i < lhs.count; ++i) {
            for (std::size_t j = 0; j < rhs.count; ++j) {
                const Atom& l = lhs.items[i];
                const Atom& r = rhs.items[j];
                double v = distance_derivative(l.order + r.order, l.location - r.location);
                if (r.order % 2 != 0) v = -v;
                acc += l.weight * r.weight * v;
            }
        }
        return acc;
    }

    /// Coefficients of p_q in s, normalized so p_q(0) = 1.
    static std::vector<double> matern_polynomial(int q) {
        switch (q) {
            case 0: return {1.0};
            case 1: return {1.0, 1.0};
            case 2: return {1.0, 1.0, 1.0 / 3.0};
            case 3: return {1.0, 1.0, 2.0 / 5.0, 1.0 / 15.0};
            default: throw std::invalid_argument("KernelFactor: unsupported q");
        }
    }

private:
    struct Atom {
        double weight;
        double location;
        int order;
    };
    struct Atoms {
        std::array<Atom, 2> items;
        std::size_t count;
    };

    static Atoms atoms(const Functional1D& f) {
        if (f.is_point()) return {{Atom{1.0, f.a, f.order}, Atom{}}, 1};
        return {{Atom{1.0, f.b, f.order - 1}, Atom{-1.0, f.a, f.order - 1}}, 2};
    }

    void check_order(int order) const {
        if (order < 0) throw std::invalid_argument("negative derivative order");
        if (order > q_) throw SmoothnessError(order, q_);
    }

    int q_;
    double lengthscale_;
    double variance_;
    std::vector<ExpPoly> derivatives_;
    ExpPolyAntiderivative anti_;
};

/// Tensor product of one-dimensional Matern factors.
class TensorKernel {
public:
    TensorKernel() = default;
    explicit TensorKernel(std::vector<KernelFactor> factors) : factors_(std::move(factors)) {}

    std::size_t dim() const noexcept { return factors_.size(); }
    const std::vector<KernelFactor>& factors() const noexcept { return factors_; }
    const KernelFactor& factor(std::size_t i) const { return factors_.at(i); }

    double eval(const std::vector<double>& x1, const std::vector<double>& x2) const {
        if (x1.size() != dim() || x2.size() != dim()) throw DimensionError("TensorKernel::eval: dimension mismatch");
        double v = 1.0;
        for (std::size_t i = 0; i < dim(); ++i) v *= factors_[i].eval(x1[i], x2[i]);
        return v;
    }

    double functional_cov(const ProductFunctional& f1, const ProductFunctional& f2) const {
        if (f1.size() != dim() || f2.size() != dim())
            throw DimensionError("tensor_functional_cov: functional dimensionality differs from kernel");
        double v = 1.0;
        for (std::size_t i = 0; i < dim(); ++i) {
            v *= factors_[i].functional_cov(f1[i], f2[i]);
            if (v == 0.0) break;
        }
        return v;
    }

    /// Prior variance at any point.
    double variance() const noexcept {
        double v = 1.0;
        for (const auto& f : factors_) v *= f.variance_scale();
        return v;
    }

private:
    std::vector<KernelFactor> factors_;
};

/// Diagonal multi-output kernel: independent tensor kernels per output.
class MultiOutputKernel {
public:
    MultiOutputKernel() = default;
    explicit MultiOutputKernel(std::vector<TensorKernel> outputs) : outputs_(std::move(outputs)) {
        for (const auto& o : outputs_)
            if (o.dim() != outputs_.front().dim())
                throw DimensionError("MultiOutputKernel: outputs disagree on input dimension");
    }
    /// Single-output convenience.
    explicit MultiOutputKernel(TensorKernel k) : outputs_{std::move(k)} {}

    std::size_t num_outputs() const noexcept { return outputs_.size(); }
    std::size_t dim() const noexcept { return outputs_.empty() ? 0 : outputs_.front().dim(); }
    const TensorKernel& output(std::size_t i) const {
        if (i >= outputs_.size()) throw std::out_of_range("MultiOutputKernel: output index out of range");
        return outputs_[i];
    }
    const std::vector<TensorKernel>& outputs() const noexcept { return outputs_; }

    double term_cov(const FunctionalTerm& t1, const FunctionalTerm& t2) const {
        const TensorKernel& k1 = output(t1.output);
        if (t2.output >= outputs_.size()) throw std::out_of_range("MultiOutputKernel: output index out of range");
        if (t1.output != t2.output) return 0.0;
        return t1.weight * t2.weight * k1.functional_cov(t1.factors, t2.factors);
    }

    double functional_cov(const OutputFunctional& f1, const OutputFunctional& f2) const {
        double acc = 0.0;
        for (const auto& t1 : f1.terms)
            for (const auto& t2 : f2.terms) acc += term_cov(t1, t2);
        return acc;
    }

private:
    std::vector<TensorKernel> outputs_;
};

// Free-function spellings of the kernel calculus operations.

inline double factor_derivative(const KernelFactor& k, int a, int b, double x1, double x2) {
    return k.derivative(a, b, x1, x2);
}

inline double factor_functional_cov(const KernelFactor& k, const Functional1D& f1, const Functional1D& f2) {
    return k.functional_cov(f1, f2);
}

inline double tensor_functional_cov(const TensorKernel& k, const ProductFunctional& f1, const ProductFunctional& f2) {
    return k.functional_cov(f1, f2);
}

inline double multioutput_functional_cov(const MultiOutputKernel& k, const OutputFunctional& f1,
                                         const OutputFunctional& f2) {
    return k.functional_cov(f1, f2);
}

}  // namespace gpfvm
