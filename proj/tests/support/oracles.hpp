#pragma once

// Reference computations used only by tests. Nothing here calls into the
// closed-form kernel calculus: kernels are evaluated from the textbook Matern
// formulas, derivatives by Richardson-extrapolated central differences in
// 50-digit arithmetic, integrals by adaptive Gauss-Kronrod quadrature.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "gpfvm/functional.hpp"

namespace oracle {

using mp = boost::multiprecision::cpp_bin_float_50;

/// Textbook half-integer Matern kernel in the distance r.
template <typename T>
T matern(int q, double lengthscale, double variance, const T& r_signed) {
    using std::abs;
    using std::exp;
    using std::sqrt;
    using boost::multiprecision::abs;
    using boost::multiprecision::exp;
    const T r = abs(r_signed) / T(lengthscale);
    switch (q) {
        case 0: return T(variance) * exp(-r);
        case 1: {
            const T s = sqrt(T(3)) * r;
            return T(variance) * (1 + s) * exp(-s);
        }
        case 2: {
            const T s = sqrt(T(5)) * r;
            return T(variance) * (1 + s + 5 * r * r / 3) * exp(-s);
        }
        case 3: {
            const T s = sqrt(T(7)) * r;
            return T(variance) * (1 + s + 2 * s * s / 5 + s * s * s / 15) * exp(-s);
        }
        default: throw std::invalid_argument("oracle::matern: unsupported q");
    }
}

/// Central-difference weights for the n-th derivative on the stencil -n..n (step 1),
/// second-order accurate: nested first differences of half step.
inline std::vector<mp> central_weights(int n) {
    // n-fold application of (f(x+1/2) - f(x-1/2)) gives the binomial stencil on
    // half-integer offsets; we use offsets k - n/2 for k = 0..n.
    std::vector<mp> w(static_cast<std::size_t>(n + 1));
    for (int k = 0; k <= n; ++k) {
        mp binom = 1;
        for (int j = 1; j <= k; ++j) binom = binom * (n - k + j) / j;
        w[static_cast<std::size_t>(k)] = ((n - k) % 2 == 0) ? binom : mp(-binom);
    }
    return w;
}

/// d^{a+b} k / dx1^a dx2^b by tensor-product central differences at step h.
inline mp mixed_fd(int q, double ell, double var, int a, int b, const mp& x1, const mp& x2, const mp& h) {
    const auto wa = central_weights(a);
    const auto wb = central_weights(b);
    mp acc = 0;
    for (int i = 0; i <= a; ++i) {
        const mp xi = x1 + (mp(i) - mp(a) / 2) * h;
        for (int j = 0; j <= b; ++j) {
            const mp xj = x2 + (mp(j) - mp(b) / 2) * h;
            acc += wa[static_cast<std::size_t>(i)] * wb[static_cast<std::size_t>(j)] * matern<mp>(q, ell, var, xi - xj);
        }
    }
    return acc / pow(h, a + b);
}

/// Richardson-extrapolated mixed derivative. The symmetric stencil has an
/// even error expansion in h, so each halving removes one power of h^2.
inline double mixed_derivative(int q, double ell, double var, int a, int b, double x1, double x2) {
    if (a + b == 0) return static_cast<double>(matern<mp>(q, ell, var, mp(x1) - mp(x2)));
    // Near the diagonal the kernel has a |d|^{2q+1} kink; keep the stencil tiny.
    const bool near_diag = std::abs(x1 - x2) < 1e-3;
    const mp h0 = near_diag ? mp("1e-8") : mp(std::min(1e-3 * ell, std::abs(x1 - x2) / 8));
    constexpr int levels = 4;
    std::vector<std::vector<mp>> table(levels);
    mp h = h0;
    for (int i = 0; i < levels; ++i) {
        table[i].push_back(mixed_fd(q, ell, var, a, b, mp(x1), mp(x2), h));
        mp factor = 4;
        for (int j = 1; j <= i; ++j) {
            table[i].push_back(table[i][j - 1] + (table[i][j - 1] - table[i - 1][j - 1]) / (factor - 1));
            factor *= 4;
        }
        h /= 2;
    }
    return static_cast<double>(table.back().back());
}

/// Adaptive Gauss-Kronrod over [a, b], split at the given breakpoints.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        std::vector<double> breaks = {}, double tol = 1e-13) {
    if (a == b) return 0.0;
    std::vector<double> pts{a};
    std::sort(breaks.begin(), breaks.end());
    for (double p : breaks)
        if (p > a && p < b) pts.push_back(p);
    pts.push_back(b);
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
        acc += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, pts[i], pts[i + 1], 12, tol);
    return acc;
}

/// Reference value of f1 k f2' for one-dimensional functionals.
inline double functional_cov_1d(int q, double ell, double var, const gpfvm::Functional1D& f1,
                                const gpfvm::Functional1D& f2) {
    auto kernel_deriv = [&](double x1, double x2) {
        if (f1.order == 0 && f2.order == 0) return matern<double>(q, ell, var, x1 - x2);
        return mixed_derivative(q, ell, var, f1.order, f2.order, x1, x2);
    };
    if (f1.is_point() && f2.is_point()) return kernel_deriv(f1.a, f2.a);
    if (f1.is_integral() && f2.is_point())
        return integrate([&](double x) { return kernel_deriv(x, f2.a); }, f1.a, f1.b, {f2.a});
    if (f1.is_point() && f2.is_integral())
        return integrate([&](double y) { return kernel_deriv(f1.a, y); }, f2.a, f2.b, {f1.a});
    return integrate(
        [&](double x) {
            return integrate([&](double y) { return kernel_deriv(x, y); }, f2.a, f2.b, {x}, 1e-11);
        },
        f1.a, f1.b, {f2.a, f2.b}, 1e-10);
}

}  // namespace oracle
