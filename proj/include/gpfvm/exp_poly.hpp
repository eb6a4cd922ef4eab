#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gpfvm {

namespace detail {

inline double horner(const std::vector<double>& coeffs, double s) {
    double acc = 0.0;
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) acc = acc * s + *it;
    return acc;
}

inline std::vector<double> poly_derivative(const std::vector<double>& p) {
    if (p.size() <= 1) return {0.0};
    std::vector<double> out(p.size() - 1);
    for (std::size_t k = 1; k < p.size(); ++k) out[k - 1] = static_cast<double>(k) * p[k];
    return out;
}

/// Sum of all derivatives of p, i.e. p + p' + p'' + ...
inline std::vector<double> poly_derivative_sum(const std::vector<double>& p) {
    std::vector<double> acc(p.size(), 0.0);
    std::vector<double> cur = p;
    while (true) {
        for (std::size_t k = 0; k < cur.size(); ++k) acc[k] += cur[k];
        if (cur.size() == 1) break;
        cur = poly_derivative(cur);
    }
    return acc;
}

}  // namespace detail

enum class Parity { symmetric, signed_ };

/// A function of the signed distance d = x1 - x2 of the form
///
///     f(d) = scale * exp(-rate |d|) * P(rate |d|) * sign(d)^parity
///
/// with P stored in the scaled variable s = rate * |d|. The family is closed
/// under differentiation; `smooth_orders` counts how many more derivatives
/// stay continuous across d = 0.
class ExpPoly {
public:
    ExpPoly(double rate, std::vector<double> coefficients, Parity parity = Parity::symmetric,
            int smooth_orders = 0, double scale = 1.0)
        : rate_(rate), coeffs_(std::move(coefficients)), parity_(parity),
          smooth_orders_(smooth_orders), scale_(scale) {
        if (!(rate_ > 0.0)) throw std::invalid_argument("ExpPoly: decay rate must be positive");
        if (coeffs_.empty()) coeffs_.push_back(0.0);
    }

    double rate() const noexcept { return rate_; }
    double scale() const noexcept { return scale_; }
    Parity parity() const noexcept { return parity_; }
    int smooth_orders() const noexcept { return smooth_orders_; }
    const std::vector<double>& coefficients() const noexcept { return coeffs_; }

    double operator()(double d) const {
        const double s = rate_ * std::abs(d);
        if (parity_ == Parity::signed_) {
            if (d == 0.0) return 0.0;  // odd and continuous when P(0) = 0
            const double v = scale_ * std::exp(-s) * detail::horner(coeffs_, s);
            return d > 0.0 ? v : -v;
        }
        return scale_ * std::exp(-s) * detail::horner(coeffs_, s);
    }

    /// d/dd of this function. For d > 0: rate * exp(-s) (P' - P); parity flips.
    ExpPoly derivative() const {
        std::vector<double> dp = detail::poly_derivative(coeffs_);
        std::vector<double> next(coeffs_.size(), 0.0);
        for (std::size_t k = 0; k < coeffs_.size(); ++k) next[k] = -coeffs_[k];
        for (std::size_t k = 0; k < dp.size(); ++k) next[k] += dp[k];
        const Parity flipped = parity_ == Parity::symmetric ? Parity::signed_ : Parity::symmetric;
        return ExpPoly(rate_, std::move(next), flipped, smooth_orders_ - 1, scale_ * rate_);
    }

    /// True if P(0) vanishes, so an odd member is continuous at d = 0.
    bool vanishes_at_origin() const { return coeffs_.front() == 0.0; }

private:
    double rate_;
    std::vector<double> coeffs_;
    Parity parity_;
    int smooth_orders_;
    double scale_;
};

/// First and second antiderivatives of a symmetric ExpPoly, anchored at d = 0:
///
///     F1(d) = int_0^d f(t) dt              (odd)
///     F2(d) = int_0^d F1(t) dt             (even)
///
/// Small arguments use the Taylor series of exp(-s) P(s); larger ones the
/// closed form exp(-s) * sum_j P^(j)(s).
class ExpPolyAntiderivative {
public:
    explicit ExpPolyAntiderivative(const ExpPoly& f) : rate_(f.rate()), scale_(f.scale()) {
        if (f.parity() != Parity::symmetric)
            throw std::invalid_argument("ExpPolyAntiderivative: integrand must be symmetric");
        const auto& p = f.coefficients();
        r1_ = detail::poly_derivative_sum(p);
        r2_ = detail::poly_derivative_sum(r1_);
        // Taylor coefficients of exp(-s) P(s).
        series_.resize(kSeriesTerms);
        double fact = 1.0;
        std::vector<double> inv_fact(kSeriesTerms);
        for (std::size_t n = 0; n < kSeriesTerms; ++n) {
            if (n > 0) fact *= static_cast<double>(n);
            inv_fact[n] = 1.0 / fact;
        }
        for (std::size_t n = 0; n < kSeriesTerms; ++n) {
            double c = 0.0;
            for (std::size_t k = 0; k < p.size() && k <= n; ++k) {
                const double sign = ((n - k) % 2 == 0) ? 1.0 : -1.0;
                c += p[k] * sign * inv_fact[n - k];
            }
            series_[n] = c;
        }
    }

    double first(double d) const {
        const double s = rate_ * std::abs(d);
        const double g = s < kSeriesCutoff ? series_g(s) : r1_.front() - std::exp(-s) * detail::horner(r1_, s);
        const double v = scale_ / rate_ * g;
        return d < 0.0 ? -v : v;
    }

    double second(double d) const {
        const double s = rate_ * std::abs(d);
        const double h = s < kSeriesCutoff
                             ? series_h(s)
                             : r1_.front() * s - r2_.front() + std::exp(-s) * detail::horner(r2_, s);
        return scale_ / (rate_ * rate_) * h;
    }

private:
    static constexpr std::size_t kSeriesTerms = 30;
    static constexpr double kSeriesCutoff = 1.0;

    double series_g(double s) const {
        double acc = 0.0;
        for (std::size_t n = kSeriesTerms; n-- > 0;) acc = acc * s + series_[n] / static_cast<double>(n + 1);
        return acc * s;
    }

    double series_h(double s) const {
        double acc = 0.0;
        for (std::size_t n = kSeriesTerms; n-- > 0;)
            acc = acc * s + series_[n] / static_cast<double>((n + 1) * (n + 2));
        return acc * s * s;
    }

    double rate_;
    double scale_;
    std::vector<double> r1_;
    std::vector<double> r2_;
    std::vector<double> series_;
};

}  // namespace gpfvm
