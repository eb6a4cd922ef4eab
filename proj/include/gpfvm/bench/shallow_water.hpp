#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gpfvm/bench/experiment.hpp"
#include "gpfvm/bench/metrics.hpp"
#include "gpfvm/bench/problems.hpp"

namespace gpfvm::bench {

struct PdeResidual {
    std::size_t equation = 0;
    Point center;
    double residual = 0.0;  ///< L_V[m] - int_V f for one volume
};

struct ShallowWaterResult {
    RunResult run;                       ///< rmse/mae over the per-volume PDE residuals
    Eigen::MatrixXd action_profile;      ///< CG iterations x time slices
    double kendall_tau = 0.0;            ///< argmax slice vs iteration, first 100 iterations
    double ic_std_ratio = 0.0;           ///< max posterior std / prior std of h at IC points
    double ic_mean_error = 0.0;          ///< max |mean h - bump| at IC points
    double target_std_before = 0.0;      ///< mean std of h on the targeted grid
    double target_std_after = 0.0;
    int cg_iterations = 0;
    int targeted_iterations = 0;
    std::size_t observations = 0;
    std::vector<PdeResidual> residuals;
};

namespace detail {

inline std::vector<QueryPoint> box_grid(const std::vector<double>& lo, const std::vector<double>& hi,
                                        const std::vector<std::size_t>& n, std::size_t output) {
    std::vector<std::vector<double>> axes;
    for (std::size_t i = 0; i < lo.size(); ++i) axes.push_back(linspace(lo[i], hi[i], n.at(i)));
    return grid_queries(axes, output);
}

}  // namespace detail

/// Linearized shallow-water equations with a Gaussian surface displacement,
/// radiation conditions on every face, a two-stage IterGP solve and optional
/// uncertainty-targeted post-iterations.
inline ShallowWaterResult shallow_water_demo(const ProblemSpec& spec, const RunOptions& ro = {}) {
    const auto start = std::chrono::steady_clock::now();
    if (spec.kind != ProblemKind::shallow_water_demo) throw ConfigError("shallow_water_demo: wrong problem kind");
    if (spec.method != ObservationMethod::fvm) throw ConfigError("shallow_water_demo: only FVM observations are supported");
    spec.validate();
    ShallowWaterResult out;
    out.run.dim_names = spec.dim_names();

    const Problem p = build_problem(make_instance(spec));
    const StructuredGram g = build_gram(p.kernel, p.blocks);
    const Eigen::VectorXd b = PosteriorGP::targets(p.blocks);
    out.observations = static_cast<std::size_t>(g.size());

    SolverSpec s2 = spec.solver;
    s2.method = SolverMethod::two_stage;
    const SolverOptions opt = solver_options(s2, ro.log, true);
    SolverTrace t = two_stage_solve(g, b, p.icbc_coords(), opt);
    out.cg_iterations = t.budget_used;

    // Every action reduced to its PDE components, summed per time slice.
    const Eigen::Index skip = t.actions().cols() - t.budget_used;
    const Eigen::MatrixXd actions = t.actions();
    Eigen::Index off = p.pde_offset();
    for (std::size_t bi = p.first_pde_block; bi < p.blocks.size(); ++bi) {
        const Eigen::MatrixXd prof = action_axis_profile(actions, off, p.scheme.shape(), 0, skip);
        if (out.action_profile.size() == 0)
            out.action_profile = prof;
        else
            out.action_profile += prof;
        off += static_cast<Eigen::Index>(p.blocks[bi].size());
    }
    {
        std::vector<double> it, arg;
        const Eigen::Index rows = std::min<Eigen::Index>(100, out.action_profile.rows());
        for (Eigen::Index r = 0; r < rows; ++r) {
            Eigen::Index c = 0;
            out.action_profile.row(r).maxCoeff(&c);
            it.push_back(static_cast<double>(r));
            arg.push_back(static_cast<double>(c));
        }
        out.kendall_tau = kendall_tau(it, arg);
    }

    // Initial-condition collapse (h at the IC points).
    std::vector<QueryPoint> ic;
    std::vector<double> bump;
    for (double x : cell_centers(spec.lo[1], spec.hi[1], spec.ic_points))
        for (double y : cell_centers(spec.lo[2], spec.hi[2], spec.ic_points)) {
            ic.push_back({{spec.lo[0], x, y}, 0});
            bump.push_back(spec.bump(x, y));
        }
    const double prior_std = std::sqrt(p.kernel.functional_cov(OutputFunctional::evaluation(ic.front().x, 0),
                                                                OutputFunctional::evaluation(ic.front().x, 0)));

    const bool targeted = spec.solver.targeted_budget > 0 && !spec.target_points.empty();
    std::vector<QueryPoint> tq;
    if (targeted) tq = detail::box_grid(spec.target_lo, spec.target_hi, spec.target_points, 0);
    if (targeted) {
        const PosteriorGP before(p.kernel, p.blocks, t.weights, t.inverse());
        out.target_std_before = before.std_at(tq).mean();
        const Eigen::MatrixXd targets = cross_covariance(p.kernel, p.blocks, PosteriorGP::evaluations(tq));
        const int used = t.budget_used;
        t = targeted_actions(g, b, std::move(t), targets, spec.solver.targeted_budget, spec.seed, opt);
        out.targeted_iterations = t.budget_used - used;
    }

    const PosteriorGP post(p.kernel, p.blocks, t.weights, t.inverse());
    if (targeted) out.target_std_after = post.std_at(tq).mean();
    const Eigen::VectorXd ic_sd = post.std_at(ic);
    const Eigen::VectorXd ic_mean = post.mean_at(ic);
    out.ic_std_ratio = ic_sd.maxCoeff() / prior_std;
    for (std::size_t j = 0; j < ic.size(); ++j)
        out.ic_mean_error = std::max(out.ic_mean_error, std::abs(ic_mean[static_cast<Eigen::Index>(j)] - bump[j]));

    // L_V[m] = (G - Sigma) w, so the PDE residual needs only one product with G.
    Eigen::VectorXd noise(g.size());
    {
        Eigen::Index o = 0;
        for (const auto& blk : p.blocks) {
            noise.segment(o, static_cast<Eigen::Index>(blk.size())) = blk.noise_var;
            o += static_cast<Eigen::Index>(blk.size());
        }
    }
    const Eigen::VectorXd gw = g.matvec(t.weights);
    const Eigen::VectorXd lm = gw - noise.cwiseProduct(t.weights);
    off = p.pde_offset();
    const auto n_pde = static_cast<Eigen::Index>(p.scheme.size());
    Eigen::VectorXd res(g.size() - off);
    for (std::size_t bi = p.first_pde_block; bi < p.blocks.size(); ++bi) {
        for (Eigen::Index j = 0; j < n_pde; ++j) {
            const double r = lm[off + j] - b[off + j];
            res[off - p.pde_offset() + j] = r;
            out.residuals.push_back({bi - p.first_pde_block, p.scheme.volume(static_cast<std::size_t>(j)).center(), r});
        }
        off += n_pde;
    }
    out.run.rmse = std::sqrt(res.squaredNorm() / static_cast<double>(res.size()));
    out.run.mae = res.cwiseAbs().maxCoeff();
    out.run.iterations = t.budget_used;
    out.run.final_residual = (b - gw).norm();
    out.run.draw_rmse = {out.run.rmse};
    out.run.draw_mae = {out.run.mae};
    if (ro.dump) detail::fill_table(out.run, post, spec);
    out.run.wall_time_s =
        ro.deterministic ? 0.0 : std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

inline void write_residuals_csv(const std::string& path, const ShallowWaterResult& r) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "equation";
    for (const auto& n : r.run.dim_names) f << "," << n;
    f << ",residual\n";
    for (const auto& row : r.residuals) {
        f << row.equation;
        for (double x : row.center) f << "," << format_double(x);
        f << "," << format_double(row.residual) << "\n";
    }
}

}  // namespace gpfvm::bench
