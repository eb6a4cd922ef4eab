#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "gpfvm/gram.hpp"
#include "gpfvm/solver.hpp"

namespace gpfvm {

/// A query location for a given output.
struct QueryPoint {
    Point x;
    std::size_t output = 0;
};

/// Conditioned GP with a constant prior mean. The inverse approximation
/// comes from a solver: exact (Cholesky) or low rank (IterGP), in which case
/// covariances include the computational uncertainty.
class PosteriorGP {
public:
    static constexpr std::size_t kSampleCap = 5000;
    static constexpr double kSampleJitter = 1e-10;

    PosteriorGP(MultiOutputKernel kernel, std::vector<ObservationBlock> blocks, Eigen::VectorXd weights,
                InverseFactors inverse, double prior_mean = 0.0)
        : kernel_(std::move(kernel)), blocks_(std::move(blocks)), weights_(std::move(weights)),
          inverse_(std::move(inverse)), prior_mean_(prior_mean) {
        Eigen::Index n = 0;
        for (const auto& b : blocks_) n += static_cast<Eigen::Index>(b.size());
        if (weights_.size() != n) throw DimensionError("PosteriorGP: weights length differs from observation count");
        if (inverse_.rank() > 0 && inverse_.size() != n)
            throw DimensionError("PosteriorGP: inverse factors do not match observation count");
    }

    /// The residual y - mu - L[m] that the representer weights must solve against.
    static Eigen::VectorXd targets(const std::vector<ObservationBlock>& blocks, double prior_mean = 0.0) {
        return stacked_targets(blocks) - apply_constant(blocks, prior_mean);
    }

    /// Prior-only posterior (no observations).
    static PosteriorGP prior(MultiOutputKernel kernel, double prior_mean = 0.0) {
        return PosteriorGP(std::move(kernel), {}, Eigen::VectorXd(0), InverseFactors{}, prior_mean);
    }

    const MultiOutputKernel& kernel() const noexcept { return kernel_; }
    const std::vector<ObservationBlock>& blocks() const noexcept { return blocks_; }
    const Eigen::VectorXd& weights() const noexcept { return weights_; }
    const InverseFactors& inverse() const noexcept { return inverse_; }
    double prior_mean() const noexcept { return prior_mean_; }
    std::size_t clamp_count() const noexcept { return clamps_->load(); }

    /// Posterior mean of arbitrary linear functionals: L*[m] + (L k L*')^T w.
    Eigen::VectorXd mean(const std::vector<OutputFunctional>& tests) const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(tests.size()));
        for_batches(tests, [&](Eigen::Index off, const std::vector<OutputFunctional>& batch, const Eigen::MatrixXd& kx) {
            for (std::size_t m = 0; m < batch.size(); ++m)
                out[off + static_cast<Eigen::Index>(m)] = batch[m].apply_to_constant(prior_mean_);
            if (kx.rows() > 0) out.segment(off, kx.cols()).noalias() += kx.transpose() * weights_;
        });
        return out;
    }

    Eigen::VectorXd mean_at(const std::vector<QueryPoint>& points) const { return mean(evaluations(points)); }

    /// Combined covariance between two functionals: k - (Lk1)^T C (Lk2).
    double combined_cov(const OutputFunctional& a, const OutputFunctional& b) const {
        const double prior = kernel_.functional_cov(a, b);
        if (weights_.size() == 0 || inverse_.rank() == 0) return prior;
        const Eigen::MatrixXd ka = cross_covariance(kernel_, blocks_, {a});
        const Eigen::MatrixXd kb = cross_covariance(kernel_, blocks_, {b});
        return prior - (inverse_.project(ka).transpose() * inverse_.project(kb))(0, 0);
    }

    double combined_cov_at(const Point& x1, const Point& x2, std::size_t o1 = 0, std::size_t o2 = 0) const {
        return combined_cov(OutputFunctional::evaluation(x1, o1), OutputFunctional::evaluation(x2, o2));
    }

    /// Marginal variances, clamped at zero. Each clamp of a value below
    /// -1e-10 is counted (see clamp_count).
    Eigen::VectorXd variance(const std::vector<OutputFunctional>& tests) const {
        Eigen::VectorXd out(static_cast<Eigen::Index>(tests.size()));
        for_batches(tests, [&](Eigen::Index off, const std::vector<OutputFunctional>& batch, const Eigen::MatrixXd& kx) {
            Eigen::VectorXd reduce = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(batch.size()));
            if (kx.rows() > 0 && inverse_.rank() > 0) reduce = inverse_.project(kx).colwise().squaredNorm().transpose();
            for (std::size_t m = 0; m < batch.size(); ++m) {
                double v = kernel_.functional_cov(batch[m], batch[m]) - reduce[static_cast<Eigen::Index>(m)];
                if (v < 0.0) {
                    if (v < -1e-10) clamps_->fetch_add(1);
                    v = 0.0;
                }
                out[off + static_cast<Eigen::Index>(m)] = v;
            }
        });
        return out;
    }

    Eigen::VectorXd variance_at(const std::vector<QueryPoint>& points) const { return variance(evaluations(points)); }

    Eigen::VectorXd std_at(const std::vector<QueryPoint>& points) const { return variance_at(points).cwiseSqrt(); }

    /// Full combined covariance matrix over the given points.
    Eigen::MatrixXd covariance_at(const std::vector<QueryPoint>& points) const {
        const auto tests = evaluations(points);
        Eigen::MatrixXd k = detail::entrywise_cross_cov(kernel_, tests, tests, true);
        if (weights_.size() > 0 && inverse_.rank() > 0) {
            const Eigen::MatrixXd p = inverse_.project(cross_covariance(kernel_, blocks_, tests));
            k.noalias() -= p.transpose() * p;
        }
        return k;
    }

    /// count x M matrix of draws from N(mean_at, covariance_at + jitter I).
    Eigen::MatrixXd sample_paths(const std::vector<QueryPoint>& points, std::size_t count, std::uint64_t seed) const {
        if (points.size() > kSampleCap)
            throw std::invalid_argument("sample_paths: more than 5000 points would densify too large a covariance");
        const auto m = static_cast<Eigen::Index>(points.size());
        if (count == 0 || m == 0) return Eigen::MatrixXd(static_cast<Eigen::Index>(count), m);
        const Eigen::VectorXd mu = mean_at(points);
        Eigen::MatrixXd cov = covariance_at(points);
        cov.diagonal().array() += kSampleJitter;
        Eigen::MatrixXd factor;
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) {
            factor = llt.matrixL();
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
            factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
        }
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> n01;
        Eigen::MatrixXd z(m, static_cast<Eigen::Index>(count));
        for (Eigen::Index c = 0; c < z.cols(); ++c)
            for (Eigen::Index r = 0; r < m; ++r) z(r, c) = n01(rng);
        Eigen::MatrixXd out = (factor * z).transpose();
        out.rowwise() += mu.transpose();
        return out;
    }

    /// Posterior mean of one output on the tensor grid axes[0] x ... x
    /// axes[d-1] (row-major). Layout blocks contribute through one
    /// Kronecker product per term, other observations through rank-one
    /// outer products, so dense cross-covariances are never formed.
    Eigen::VectorXd mean_on_grid(const std::vector<std::vector<double>>& axes, std::size_t output = 0) const {
        const std::size_t d = axes.size();
        if (d != kernel_.dim()) throw DimensionError("mean_on_grid: grid dimension differs from kernel");
        Eigen::Index m = 1;
        for (const auto& a : axes) m *= static_cast<Eigen::Index>(a.size());
        Eigen::VectorXd out = Eigen::VectorXd::Constant(m, prior_mean_);
        if (weights_.size() == 0) return out;
        const TensorKernel& tk = kernel_.output(output);

        Eigen::Index off = 0;
        std::vector<Eigen::VectorXd> per_dim(d);
        Eigen::VectorXd prod(m), next(m);
        for (const auto& block : blocks_) {
            const auto n = static_cast<Eigen::Index>(block.size());
            const Eigen::VectorXd w = weights_.segment(off, n);
            off += n;
            if (block.layout) {
                const auto& layout = *block.layout;
                for (const auto& lt : layout.terms) {
                    if (lt.output != output) continue;
                    KroneckerTerm term;
                    term.scale = lt.coefficient;
                    term.right_mask = lt.mask;
                    for (std::size_t i = 0; i < d; ++i) {
                        Eigen::MatrixXd f(static_cast<Eigen::Index>(axes[i].size()),
                                          static_cast<Eigen::Index>(layout.axes[i].size()));
                        for (std::size_t c = 0; c < layout.axes[i].size(); ++c) {
                            const Functional1D fc = layout.axes[i][c].functional(lt.orders[i]);
                            for (std::size_t a = 0; a < axes[i].size(); ++a)
                                f(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(c)) =
                                    tk.factor(i).functional_cov(Functional1D::point(axes[i][a]), fc);
                        }
                        term.factors.push_back(std::move(f));
                    }
                    out += term.apply(w);
                }
                continue;
            }
            for (Eigen::Index j = 0; j < n; ++j) {
                for (const auto& ft : block.functionals[static_cast<std::size_t>(j)].terms) {
                    if (ft.output != output) continue;
                    if (ft.factors.size() != d) throw DimensionError("mean_on_grid: functional dimension mismatch");
                    for (std::size_t i = 0; i < d; ++i) {
                        per_dim[i].resize(static_cast<Eigen::Index>(axes[i].size()));
                        for (std::size_t a = 0; a < axes[i].size(); ++a)
                            per_dim[i][static_cast<Eigen::Index>(a)] =
                                tk.factor(i).functional_cov(Functional1D::point(axes[i][a]), ft.factors[i]);
                    }
                    Eigen::Index len = 1;
                    prod[0] = ft.weight * w[j];
                    for (std::size_t i = 0; i < d; ++i) {
                        const auto k = per_dim[i].size();
                        for (Eigen::Index a = 0; a < len; ++a) next.segment(a * k, k) = prod[a] * per_dim[i];
                        len *= k;
                        prod.head(len) = next.head(len);
                    }
                    out += prod;
                }
            }
        }
        return out;
    }

    static std::vector<OutputFunctional> evaluations(const std::vector<QueryPoint>& points) {
        std::vector<OutputFunctional> tests;
        tests.reserve(points.size());
        for (const auto& p : points) tests.push_back(OutputFunctional::evaluation(p.x, p.output));
        return tests;
    }

private:
    static constexpr std::size_t kBatch = 512;

    template <class Fn>
    void for_batches(const std::vector<OutputFunctional>& tests, Fn&& fn) const {
        for (std::size_t start = 0; start < tests.size(); start += kBatch) {
            const std::size_t stop = std::min(tests.size(), start + kBatch);
            const std::vector<OutputFunctional> batch(tests.begin() + static_cast<std::ptrdiff_t>(start),
                                                      tests.begin() + static_cast<std::ptrdiff_t>(stop));
            const Eigen::MatrixXd kx = weights_.size() > 0 ? cross_covariance(kernel_, blocks_, batch)
                                                           : Eigen::MatrixXd(0, static_cast<Eigen::Index>(batch.size()));
            fn(static_cast<Eigen::Index>(start), batch, kx);
        }
    }

    MultiOutputKernel kernel_;
    std::vector<ObservationBlock> blocks_;
    Eigen::VectorXd weights_;
    InverseFactors inverse_;
    double prior_mean_ = 0.0;
    std::shared_ptr<std::atomic<std::size_t>> clamps_ = std::make_shared<std::atomic<std::size_t>>(0);
};

/// Posterior from an exact Cholesky solve of the full Gram matrix.
inline PosteriorGP exact_posterior(const MultiOutputKernel& k, const std::vector<ObservationBlock>& blocks,
                                   double prior_mean = 0.0) {
    const auto g = build_gram(k, blocks);
    const auto r = cholesky_solve(g.dense(), PosteriorGP::targets(blocks, prior_mean));
    return PosteriorGP(k, blocks, r.weights, r.inverse, prior_mean);
}

/// Posterior from an IterGP trace.
inline PosteriorGP trace_posterior(const MultiOutputKernel& k, const std::vector<ObservationBlock>& blocks,
                                   const SolverTrace& t, double prior_mean = 0.0) {
    return PosteriorGP(k, blocks, t.weights, t.inverse(), prior_mean);
}

}  // namespace gpfvm
