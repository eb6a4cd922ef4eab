#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace gpfvm {

/// Tensor-product Gauss-Legendre rule of order 8 per dimension over a box.
class BoxQuadrature {
public:
    using Integrand = std::function<double(const std::vector<double>&)>;

    BoxQuadrature() {
        using rule = boost::math::quadrature::gauss<double, 8>;
        const auto& x = rule::abscissa();
        const auto& w = rule::weights();
        std::size_t k = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            nodes_[k] = -x[i];
            weights_[k++] = w[i];
            nodes_[k] = x[i];
            weights_[k++] = w[i];
        }
    }

    double integrate(const Integrand& f, const std::vector<std::pair<double, double>>& box) const {
        const std::size_t d = box.size();
        std::vector<std::size_t> idx(d, 0);
        std::vector<double> x(d);
        double acc = 0.0;
        while (true) {
            double w = 1.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double half = 0.5 * (box[i].second - box[i].first);
                const double mid = 0.5 * (box[i].second + box[i].first);
                x[i] = mid + half * nodes_[idx[i]];
                w *= half * weights_[idx[i]];
            }
            acc += w * f(x);
            std::size_t i = d;
            while (i > 0) {
                --i;
                if (++idx[i] < kPoints) break;
                idx[i] = 0;
                if (i == 0) return acc;
            }
            if (d == 0) return acc;
        }
    }

    /// Integrates once on the box and once on its 2^d bisections; keeps the
    /// refined value if the two disagree beyond `tol`.
    double integrate_adaptive(const Integrand& f, const std::vector<std::pair<double, double>>& box,
                              double tol = 1e-12) const {
        const double coarse = integrate(f, box);
        const std::size_t d = box.size();
        double fine = 0.0;
        std::vector<std::pair<double, double>> sub(d);
        for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
            for (std::size_t i = 0; i < d; ++i) {
                const double mid = 0.5 * (box[i].first + box[i].second);
                sub[i] = (mask >> i) & 1u ? std::pair{mid, box[i].second} : std::pair{box[i].first, mid};
            }
            fine += integrate(f, sub);
        }
        return std::abs(fine - coarse) > tol * std::max(1.0, std::abs(fine)) ? fine : coarse;
    }

private:
    static constexpr std::size_t kPoints = 8;
    std::array<double, kPoints> nodes_{};
    std::array<double, kPoints> weights_{};
};

}  // namespace gpfvm
