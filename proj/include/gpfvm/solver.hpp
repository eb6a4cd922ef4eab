#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gpfvm/errors.hpp"
#include "gpfvm/gram.hpp"

namespace gpfvm {

/// Low-rank or exact representation of an approximate inverse C ~ G^{-1}
/// as C = F F^T. Either explicit columns F = D, or F = L^{-T} from a
/// Cholesky factor G = L L^T.
class InverseFactors {
public:
    InverseFactors() = default;

    static InverseFactors explicit_columns(Eigen::MatrixXd d) {
        InverseFactors f;
        f.columns_ = std::move(d);
        return f;
    }

    static InverseFactors cholesky(Eigen::MatrixXd lower) {
        InverseFactors f;
        f.lower_ = std::move(lower);
        f.is_cholesky_ = true;
        return f;
    }

    bool is_cholesky() const noexcept { return is_cholesky_; }
    Eigen::Index size() const noexcept { return is_cholesky_ ? lower_.rows() : columns_.rows(); }
    Eigen::Index rank() const noexcept { return is_cholesky_ ? lower_.cols() : columns_.cols(); }

    /// F^T X, so that X^T C Y = project(X)^T project(Y).
    Eigen::MatrixXd project(const Eigen::MatrixXd& x) const {
        if (is_cholesky_) return lower_.triangularView<Eigen::Lower>().solve(x);
        if (columns_.cols() == 0) return Eigen::MatrixXd::Zero(0, x.cols());
        return columns_.transpose() * x;
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        if (is_cholesky_) {
            const Eigen::VectorXd y = lower_.triangularView<Eigen::Lower>().solve(x);
            return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
        }
        if (columns_.cols() == 0) return Eigen::VectorXd::Zero(x.size());
        return columns_ * (columns_.transpose() * x);
    }

    const Eigen::MatrixXd& columns() const noexcept { return columns_; }
    const Eigen::MatrixXd& lower() const noexcept { return lower_; }

private:
    Eigen::MatrixXd columns_;
    Eigen::MatrixXd lower_;
    bool is_cholesky_ = false;
};

struct SolveReport {
    Eigen::VectorXd weights;
    InverseFactors inverse;
    int iterations = 0;
    double final_residual = 0.0;
    double wall_time = 0.0;
};

/// State of an IterGP solve. C_i = D D^T with GD = G D kept alongside, so
/// projections against earlier directions need no extra products with G.
/// Column storage grows geometrically; D() and GD() view the filled part.
class SolverTrace {
public:
    Eigen::VectorXd weights;
    Eigen::VectorXd residual;              ///< b - G weights, updated recursively
    std::vector<double> residual_norms;
    int budget_used = 0;                   ///< iterations spent in iterative stages
    Eigen::Index stage1_rank = 0;          ///< columns of D produced by exact solves
    bool breakdown = false;
    std::string diagnostic;

    auto D() const { return d_.leftCols(rank_); }
    auto GD() const { return gd_.leftCols(rank_); }
    /// Recorded actions, one column per update (SolverOptions::record_actions).
    auto actions() const { return actions_.leftCols(num_actions_); }
    Eigen::Index rank() const noexcept { return rank_; }
    InverseFactors inverse() const { return InverseFactors::explicit_columns(D()); }

    void reserve(Eigen::Index extra) {
        grow(d_, rank_ + extra);
        grow(gd_, rank_ + extra);
    }

    void append(const Eigen::MatrixXd& d, const Eigen::MatrixXd& gd) {
        grow(d_, rank_ + d.cols());
        grow(gd_, rank_ + d.cols());
        d_.middleCols(rank_, d.cols()) = d;
        gd_.middleCols(rank_, d.cols()) = gd;
        rank_ += d.cols();
    }

    void record_actions(const Eigen::MatrixXd& s) {
        grow(actions_, num_actions_ + s.cols());
        actions_.middleCols(num_actions_, s.cols()) = s;
        num_actions_ += s.cols();
    }

    static SolverTrace empty(const Eigen::VectorXd& b) {
        SolverTrace t;
        t.weights = Eigen::VectorXd::Zero(b.size());
        t.residual = b;
        t.d_.resize(b.size(), 0);
        t.gd_.resize(b.size(), 0);
        t.actions_.resize(b.size(), 0);
        return t;
    }

private:
    static void grow(Eigen::MatrixXd& m, Eigen::Index needed) {
        if (m.cols() >= needed) return;
        m.conservativeResize(m.rows(), std::max(needed, 2 * m.cols()));
    }

    Eigen::MatrixXd d_;
    Eigen::MatrixXd gd_;
    Eigen::MatrixXd actions_;
    Eigen::Index rank_ = 0;
    Eigen::Index num_actions_ = 0;
};

struct IterationInfo {
    int iteration = 0;
    double residual_norm = 0.0;
    double elapsed_s = 0.0;
};

struct SolverOptions {
    int budget = 100;
    double tol = 1e-6;
    bool reorthogonalize = true;
    bool record_actions = false;
    double breakdown_tol = 1e-14;
    /// An action whose component outside span(D) is below this fraction of its
    /// norm is treated as dependent and ends the solve.
    double dependence_tol = 1e-8;
    std::ostream* log = nullptr;
    std::function<void(const SolverTrace&, const IterationInfo&)> observer;
    std::size_t dense_cap = 20000;
};

/// Exact weights G^{-1} b through a dense Cholesky factorization.
inline SolveReport cholesky_solve(const Eigen::MatrixXd& g, const Eigen::VectorXd& b, std::size_t dense_cap = 20000) {
    const auto start = std::chrono::steady_clock::now();
    if (g.rows() != g.cols() || g.rows() != b.size()) throw DimensionError("cholesky_solve: size mismatch");
    if (static_cast<std::size_t>(g.rows()) > dense_cap)
        throw ConfigError("cholesky_solve: system of size " + std::to_string(g.rows()) + " exceeds the dense cap");
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError("cholesky_solve: Gram matrix is not positive definite; increase the observation "
                                       "noise (nugget)");
    SolveReport r;
    r.weights = llt.solve(b);
    r.inverse = InverseFactors::cholesky(llt.matrixL());
    r.iterations = static_cast<int>(g.rows());
    r.final_residual = (b - g * r.weights).norm();
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

inline SolverTrace empty_trace(const Eigen::VectorXd& b) { return SolverTrace::empty(b); }

namespace detail {

enum class StepResult { ok, breakdown };

/// One IterGP update with action s: d = (I - C G) s, C += d d^T / (d^T G d).
inline StepResult itergp_step(const StructuredGram& g, SolverTrace& t, const Eigen::VectorXd& s,
                              const SolverOptions& opt) {
    Eigen::VectorXd d = s;
    const Eigen::Index k = t.rank();
    if (k > 0) {
        if (opt.reorthogonalize) {
            // Two passes of classical Gram-Schmidt in the G inner product.
            for (int pass = 0; pass < 2; ++pass) d.noalias() -= t.D() * (t.GD().transpose() * d);
        } else {
            d.noalias() -= t.D().col(k - 1) * t.GD().col(k - 1).dot(d);
        }
    }
    const double dn2 = d.squaredNorm();
    if (k > 0 && dn2 <= opt.dependence_tol * opt.dependence_tol * s.squaredNorm()) {
        t.breakdown = true;
        t.diagnostic = "breakdown at iteration " + std::to_string(t.budget_used + 1) +
                       ": action lies in the span of previous directions";
        return StepResult::breakdown;
    }
    const Eigen::VectorXd gd = g.matvec(d);
    const double eta = d.dot(gd);
    if (!(eta > opt.breakdown_tol * dn2) || dn2 == 0.0) {
        t.breakdown = true;
        t.diagnostic = "breakdown at iteration " + std::to_string(t.budget_used + 1) + ": d'Gd = " +
                       std::to_string(eta) + " with |d|^2 = " + std::to_string(dn2);
        return StepResult::breakdown;
    }
    const double inv = 1.0 / std::sqrt(eta);
    const double alpha = d.dot(t.residual) * inv;
    if (opt.record_actions) t.record_actions(s);
    t.append(d * inv, gd * inv);
    t.weights.noalias() += (alpha * inv) * d;
    t.residual.noalias() -= (alpha * inv) * gd;
    return StepResult::ok;
}

inline void log_iteration(const SolverOptions& opt, const SolverTrace& t, std::chrono::steady_clock::time_point start) {
    IterationInfo info{t.budget_used, t.residual_norms.empty() ? 0.0 : t.residual_norms.back(),
                       std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
    if (opt.log) *opt.log << "iter " << info.iteration << " residual " << info.residual_norm << " time " << info.elapsed_s << "\n";
    if (opt.observer) opt.observer(t, info);
}

}  // namespace detail

/// Continues a CG-policy IterGP solve (action = current residual) from an
/// existing trace, e.g. after exact stage-1 solves.
inline SolverTrace continue_cg(const StructuredGram& g, const Eigen::VectorXd& b, SolverTrace t,
                               const SolverOptions& opt = {}) {
    if (opt.budget < 1) throw std::invalid_argument("itergp_cg: budget must be >= 1");
    const auto start = std::chrono::steady_clock::now();
    const double target = opt.tol * b.norm();
    t.reserve(opt.budget);
    for (int it = 0; it < opt.budget; ++it) {
        if (t.residual.norm() <= target) break;
        const Eigen::VectorXd s = t.residual;
        if (detail::itergp_step(g, t, s, opt) == detail::StepResult::breakdown) break;
        ++t.budget_used;
        t.residual_norms.push_back(t.residual.norm());
        detail::log_iteration(opt, t, start);
    }
    return t;
}

inline SolverTrace itergp_cg(const StructuredGram& g, const Eigen::VectorXd& b, const SolverOptions& opt = {}) {
    if (b.size() != g.size()) throw DimensionError("itergp_cg: right-hand side length mismatch");
    return continue_cg(g, b, empty_trace(b), opt);
}

/// Exact solve restricted to span(S): appends D = S L^{-T} where S^T G S = L L^T.
/// `gs` must hold G S.
inline void exact_subspace_solve(SolverTrace& t, const Eigen::MatrixXd& s, const Eigen::MatrixXd& gs,
                                 const SolverOptions& opt = {}) {
    if (s.cols() == 0) return;
    if (static_cast<std::size_t>(s.cols()) > opt.dense_cap)
        throw ConfigError("exact_subspace_solve: " + std::to_string(s.cols()) + " actions exceed the dense cap");
    // Project out earlier directions so the update stays G-conjugate to them.
    Eigen::MatrixXd sp = s, gsp = gs;
    if (t.rank() > 0) {
        const Eigen::MatrixXd coef = t.GD().transpose() * s;
        sp.noalias() -= t.D() * coef;
        gsp.noalias() -= t.GD() * coef;
    }
    Eigen::MatrixXd small = sp.transpose() * gsp;
    small = 0.5 * (small + small.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(small);
    if (llt.info() != Eigen::Success)
        throw NotPositiveDefiniteError("exact_subspace_solve: projected Gram is not positive definite; increase the "
                                       "observation noise (nugget)");
    const auto lower = llt.matrixL();
    const Eigen::MatrixXd d = lower.solve(sp.transpose()).transpose();
    const Eigen::MatrixXd gd = lower.solve(gsp.transpose()).transpose();
    const Eigen::VectorXd coef = d.transpose() * t.residual;
    t.weights.noalias() += d * coef;
    t.residual.noalias() -= gd * coef;
    t.append(d, gd);
    if (opt.record_actions) t.record_actions(s);
    t.stage1_rank += d.cols();
}

/// Unit-vector actions on the given coordinates, realized as one Cholesky solve.
inline void unit_vector_stage(const StructuredGram& g, SolverTrace& t, const std::vector<Eigen::Index>& coords,
                              const SolverOptions& opt = {}) {
    if (coords.empty()) return;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(g.size(), static_cast<Eigen::Index>(coords.size()));
    for (std::size_t c = 0; c < coords.size(); ++c) s(coords[c], static_cast<Eigen::Index>(c)) = 1.0;
    exact_subspace_solve(t, s, g.columns(coords), opt);
}

/// Stage 1: exact solve on the IC/BC coordinates. Stage 2: CG on the full
/// system with every direction G-orthogonalized against stage 1, so the IC/BC
/// residual coordinates stay at zero.
inline SolverTrace two_stage_solve(const StructuredGram& g, const Eigen::VectorXd& b,
                                   const std::vector<Eigen::Index>& icbc_coords, const SolverOptions& opt = {}) {
    if (b.size() != g.size()) throw DimensionError("two_stage_solve: right-hand side length mismatch");
    SolverTrace t = empty_trace(b);
    unit_vector_stage(g, t, icbc_coords, opt);
    SolverOptions stage2 = opt;
    stage2.reorthogonalize = true;
    return continue_cg(g, b, std::move(t), stage2);
}

/// Action vectors that aggregate fine observations: column c is the
/// indicator of children[c], offset into the stacked observation vector.
inline Eigen::MatrixXd aggregate_actions(Eigen::Index n, Eigen::Index offset,
                                         const std::vector<std::vector<std::size_t>>& children,
                                         const std::vector<std::vector<double>>& weights = {}) {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(children.size()));
    for (std::size_t c = 0; c < children.size(); ++c)
        for (std::size_t k = 0; k < children[c].size(); ++k)
            s(offset + static_cast<Eigen::Index>(children[c][k]), static_cast<Eigen::Index>(c)) =
                weights.empty() ? 1.0 : weights[c][k];
    return s;
}

/// Two-stage solve whose stage 1 also conditions exactly on coarse FVM
/// observations, each synthesized as the sum of its fine children.
inline SolverTrace coarse_warmstart(const StructuredGram& g, const Eigen::VectorXd& b,
                                    const std::vector<Eigen::Index>& icbc_coords, const Eigen::MatrixXd& coarse_actions,
                                    const SolverOptions& opt = {}) {
    if (b.size() != g.size() || coarse_actions.rows() != g.size())
        throw DimensionError("coarse_warmstart: size mismatch");
    SolverTrace t = empty_trace(b);
    const auto m = static_cast<Eigen::Index>(icbc_coords.size());
    Eigen::MatrixXd s(g.size(), m + coarse_actions.cols());
    s.leftCols(m).setZero();
    for (Eigen::Index c = 0; c < m; ++c) s(icbc_coords[static_cast<std::size_t>(c)], c) = 1.0;
    s.rightCols(coarse_actions.cols()) = coarse_actions;
    Eigen::MatrixXd gs(g.size(), s.cols());
    gs.leftCols(m) = g.columns(icbc_coords);
    for (Eigen::Index c = 0; c < coarse_actions.cols(); ++c) gs.col(m + c) = g.matvec(coarse_actions.col(c));
    exact_subspace_solve(t, s, gs, opt);
    SolverOptions stage2 = opt;
    stage2.reorthogonalize = true;
    return continue_cg(g, b, std::move(t), stage2);
}

/// Uncertainty-targeting actions: each iteration draws beta ~ Dir(1, ..., 1)
/// and uses the residual t - G C t of the combined column t = T beta.
inline SolverTrace targeted_actions(const StructuredGram& g, const Eigen::VectorXd& b, SolverTrace t,
                                    const Eigen::MatrixXd& targets, int extra_budget, std::uint64_t seed,
                                    const SolverOptions& opt = {}) {
    if (targets.cols() < 1) throw std::invalid_argument("targeted_actions: need at least one target column");
    if (targets.rows() != g.size() || b.size() != g.size()) throw DimensionError("targeted_actions: size mismatch");
    const auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    Eigen::VectorXd beta(targets.cols());
    t.reserve(std::max(extra_budget, 0));
    for (int it = 0; it < extra_budget; ++it) {
        for (auto& v : beta) v = expo(rng);
        beta /= beta.sum();
        const Eigen::VectorXd col = targets * beta;
        Eigen::VectorXd s = col;
        if (t.rank() > 0) s.noalias() -= t.GD() * (t.D().transpose() * col);
        if (detail::itergp_step(g, t, s, opt) == detail::StepResult::breakdown) break;
        ++t.budget_used;
        t.residual_norms.push_back(t.residual.norm());
        detail::log_iteration(opt, t, start);
    }
    return t;
}

/// Summary of a trace with the residual recomputed from scratch.
inline SolveReport report(const StructuredGram& g, const Eigen::VectorXd& b, const SolverTrace& t, double wall_time = 0.0) {
    SolveReport r;
    r.weights = t.weights;
    r.inverse = t.inverse();
    r.iterations = t.budget_used;
    r.final_residual = (b - g.matvec(t.weights)).norm();
    r.wall_time = wall_time;
    return r;
}

/// Rows = iterations, columns = slices along `axis` of a factorized block
/// (shape, row-major, starting at `offset`); entries sum |action| over the
/// remaining axes.
inline Eigen::MatrixXd action_axis_profile(const Eigen::MatrixXd& actions, Eigen::Index offset,
                                           const std::vector<std::size_t>& shape, std::size_t axis = 0,
                                           Eigen::Index skip_columns = 0) {
    std::size_t n = 1, inner = 1;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        n *= shape[i];
        if (i > axis) inner *= shape[i];
    }
    const Eigen::Index iters = actions.cols() - skip_columns;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(std::max<Eigen::Index>(iters, 0), static_cast<Eigen::Index>(shape.at(axis)));
    for (Eigen::Index it = 0; it < iters; ++it)
        for (std::size_t j = 0; j < n; ++j)
            out(it, static_cast<Eigen::Index>((j / inner) % shape[axis])) +=
                std::abs(actions(offset + static_cast<Eigen::Index>(j), skip_columns + it));
    return out;
}

}  // namespace gpfvm
