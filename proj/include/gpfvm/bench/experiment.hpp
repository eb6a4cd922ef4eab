#pragma once

#include <chrono>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "gpfvm/bench/metrics.hpp"
#include "gpfvm/bench/problems.hpp"
#include "gpfvm/gram.hpp"
#include "gpfvm/posterior.hpp"
#include "gpfvm/solver.hpp"

namespace gpfvm::bench {

struct TableRow {
    Point x;
    std::size_t output = 0;
    double mean = 0.0;
    double std = 0.0;
};

struct RunResult {
    double rmse = 0.0;             ///< mean over IBVP draws
    double mae = 0.0;              ///< mean over IBVP draws
    int iterations = 0;            ///< largest over draws
    double final_residual = 0.0;   ///< largest over draws
    double wall_time_s = 0.0;
    std::vector<double> draw_rmse, draw_mae;
    std::vector<std::string> dim_names;
    std::vector<TableRow> table;   ///< first draw, dump grid
};

struct RunOptions {
    bool dump = true;              ///< fill the mean/std table
    bool deterministic = false;    ///< report wall_time_s = 0
    std::ostream* log = nullptr;   ///< per-iteration solver log
};

/// Weights and inverse approximation for one right-hand side.
struct Solved {
    Eigen::VectorXd weights;
    InverseFactors inverse;
    int iterations = 0;
    double final_residual = 0.0;
    std::optional<SolverTrace> trace;
};

inline SolverOptions solver_options(const SolverSpec& s, std::ostream* log = nullptr, bool record_actions = false) {
    SolverOptions o;
    o.budget = s.budget;
    o.tol = s.tol;
    o.reorthogonalize = s.reorthogonalize;
    o.record_actions = record_actions;
    o.log = log;
    return o;
}

/// Indicator actions of coarse volumes over their fine children, for every
/// PDE block of the problem.
inline Eigen::MatrixXd warmstart_actions(const Problem& p, const std::vector<std::size_t>& factors) {
    const auto& s = p.instance.spec;
    std::vector<std::size_t> coarse_n;
    for (std::size_t i = 0; i < s.dim(); ++i) {
        if (factors.at(i) < 1 || s.n_pde[i] % factors[i] != 0)
            throw ConfigError("coarse_factors must divide n_pde in every dimension");
        coarse_n.push_back(s.n_pde[i] / factors[i]);
    }
    const auto children = partition_children(FactorizedScheme::uniform(s.lo, s.hi, coarse_n), p.scheme);
    const Eigen::Index n = p.size();
    std::vector<Eigen::MatrixXd> parts;
    Eigen::Index off = p.pde_offset(), cols = 0;
    for (std::size_t bi = p.first_pde_block; bi < p.blocks.size(); ++bi) {
        parts.push_back(aggregate_actions(n, off, children));
        cols += parts.back().cols();
        off += static_cast<Eigen::Index>(p.blocks[bi].size());
    }
    Eigen::MatrixXd out(n, cols);
    Eigen::Index c = 0;
    for (const auto& m : parts) {
        out.middleCols(c, m.cols()) = m;
        c += m.cols();
    }
    return out;
}

/// Runs the configured iterative solver on one right-hand side.
inline Solved solve_iterative(const Problem& p, const StructuredGram& g, const Eigen::VectorXd& b, const SolverSpec& s,
                              std::ostream* log = nullptr, bool record_actions = false) {
    const SolverOptions opt = solver_options(s, log, record_actions);
    SolverTrace t = [&] {
        switch (s.method) {
            case SolverMethod::cg: return itergp_cg(g, b, opt);
            case SolverMethod::two_stage: return two_stage_solve(g, b, p.icbc_coords(), opt);
            case SolverMethod::warmstart:
                return coarse_warmstart(g, b, p.icbc_coords(), warmstart_actions(p, s.coarse_factors), opt);
            case SolverMethod::cholesky: break;
        }
        throw ConfigError("solve_iterative: cholesky is not an iterative method");
    }();
    const auto r = report(g, b, t);
    return {r.weights, r.inverse, r.iterations, r.final_residual, std::move(t)};
}

/// Exact solves of several right-hand sides sharing one Gram matrix.
inline std::vector<Solved> solve_cholesky(const StructuredGram& g, const std::vector<Eigen::VectorXd>& bs) {
    const Eigen::MatrixXd dense = g.dense();
    Eigen::LLT<Eigen::MatrixXd> llt(dense);
    if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError("solve_cholesky: Gram matrix is not positive definite");
    const InverseFactors inv = InverseFactors::cholesky(llt.matrixL());
    std::vector<Solved> out;
    for (const auto& b : bs) {
        Solved s{llt.solve(b), inv, 0, 0.0, std::nullopt};
        s.iterations = static_cast<int>(b.size());
        s.final_residual = (b - dense * s.weights).norm();
        out.push_back(std::move(s));
    }
    return out;
}

namespace detail {

inline std::vector<QueryPoint> grid_queries(const std::vector<std::vector<double>>& axes, std::size_t output) {
    std::vector<QueryPoint> q;
    for (auto& x : bench::detail::grid_points(axes)) q.push_back({std::move(x), output});
    return q;
}

inline void fill_table(RunResult& r, const PosteriorGP& post, const ProblemSpec& s) {
    const auto axes = test_axes(s, s.dump_points);
    for (std::size_t o = 0; o < s.num_outputs(); ++o) {
        const auto q = grid_queries(axes, o);
        const Eigen::VectorXd mean = post.mean_on_grid(axes, o);
        const Eigen::VectorXd sd = post.std_at(q);
        for (std::size_t j = 0; j < q.size(); ++j)
            r.table.push_back({q[j].x, o, mean[static_cast<Eigen::Index>(j)], sd[static_cast<Eigen::Index>(j)]});
    }
}

}  // namespace detail

/// Analytic solution on the metric grid (row-major).
inline Eigen::VectorXd truth_on_grid(const Instance& inst, const std::vector<std::vector<double>>& axes) {
    const auto pts = detail::grid_points(axes);
    Eigen::VectorXd v(static_cast<Eigen::Index>(pts.size()));
    for (std::size_t j = 0; j < pts.size(); ++j) v[static_cast<Eigen::Index>(j)] = analytic_solution(inst, pts[j]);
    return v;
}

/// Builds, solves and scores every IBVP draw of a spec against its oracle.
inline RunResult run_experiment(const ProblemSpec& spec, const RunOptions& ro = {}) {
    const auto start = std::chrono::steady_clock::now();
    spec.validate();
    if (!has_analytic_solution(spec.kind))
        throw std::invalid_argument("run_experiment: " + to_string(spec.kind) +
                                    " has no analytic solution; use shallow_water_demo");
    RunResult r;
    r.dim_names = spec.dim_names();

    std::vector<Problem> problems;
    std::vector<Eigen::VectorXd> targets;
    for (std::size_t k = 0; k < spec.ibvp_draws; ++k) {
        problems.push_back(build_problem(make_instance(spec, k)));
        targets.push_back(PosteriorGP::targets(problems.back().blocks));
    }
    // The Gram matrix depends on the functionals only, which all draws share.
    const StructuredGram g = build_gram(problems.front().kernel, problems.front().blocks);
    std::vector<Solved> solved;
    if (spec.solver.method == SolverMethod::cholesky) {
        solved = solve_cholesky(g, targets);
    } else {
        for (std::size_t k = 0; k < problems.size(); ++k)
            solved.push_back(solve_iterative(problems[k], g, targets[k], spec.solver, ro.log));
    }

    const auto axes = test_axes(spec, spec.test_points);
    for (std::size_t k = 0; k < problems.size(); ++k) {
        const PosteriorGP post(problems[k].kernel, problems[k].blocks, solved[k].weights, solved[k].inverse);
        const Eigen::VectorXd pred = post.mean_on_grid(axes, 0);
        const Eigen::VectorXd truth = truth_on_grid(problems[k].instance, axes);
        r.draw_rmse.push_back(rmse(pred, truth));
        r.draw_mae.push_back(mae(pred, truth));
        r.iterations = std::max(r.iterations, solved[k].iterations);
        r.final_residual = std::max(r.final_residual, solved[k].final_residual);
        if (k == 0 && ro.dump) detail::fill_table(r, post, spec);
    }
    for (std::size_t k = 0; k < problems.size(); ++k) {
        r.rmse += r.draw_rmse[k] / static_cast<double>(problems.size());
        r.mae += r.draw_mae[k] / static_cast<double>(problems.size());
    }
    r.wall_time_s = ro.deterministic ? 0.0 : std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

/// Lengthscale search space: dimensions in one group share a lengthscale,
/// and values[i] lists the candidates of group i.
struct SearchSpace {
    std::vector<std::vector<std::size_t>> groups;
    std::vector<std::vector<double>> values;
    std::uint64_t seed_offset = 0;  ///< tune on draws seeded spec.seed + seed_offset + k

    bool empty() const noexcept { return groups.empty(); }

    void validate(std::size_t dim) const {
        if (groups.size() != values.size()) throw ConfigError("search space: one value list per group");
        std::vector<int> seen(dim, 0);
        for (std::size_t i = 0; i < groups.size(); ++i) {
            if (groups[i].empty() || values[i].empty()) throw ConfigError("search space: empty group or value list");
            for (auto d : groups[i]) {
                if (d >= dim) throw ConfigError("search space: dimension index out of range");
                if (seen[d]++) throw ConfigError("search space: dimension listed twice");
            }
            for (double v : values[i])
                if (!(v > 0)) throw ConfigError("search space: lengthscales must be positive");
        }
    }
};

struct GridSearchRow {
    std::vector<double> lengthscale;
    double score = 0.0;  ///< mean RMSE over the tuning draws
};

struct GridSearchResult {
    ProblemSpec best;
    double best_score = std::numeric_limits<double>::infinity();
    std::vector<GridSearchRow> table;
};

/// Exhaustive search over the lengthscale grid (first group outermost);
/// the first combination reaching the lowest score wins.
inline GridSearchResult grid_search(const ProblemSpec& spec, const SearchSpace& space) {
    space.validate(spec.dim());
    if (space.empty()) throw ConfigError("grid_search: empty search space");
    GridSearchResult out;
    out.best = spec;
    ProblemSpec trial = spec;
    trial.seed = spec.seed + space.seed_offset;
    std::vector<std::size_t> idx(space.groups.size(), 0);
    while (true) {
        for (std::size_t gi = 0; gi < space.groups.size(); ++gi)
            for (auto d : space.groups[gi]) trial.kernel.lengthscale[d] = space.values[gi][idx[gi]];
        const double score = run_experiment(trial, {.dump = false, .deterministic = true}).rmse;
        out.table.push_back({trial.kernel.lengthscale, score});
        if (score < out.best_score) {
            out.best_score = score;
            out.best.kernel.lengthscale = trial.kernel.lengthscale;
        }
        std::size_t gi = space.groups.size();
        while (gi-- > 0) {
            if (++idx[gi] < space.values[gi].size()) break;
            idx[gi] = 0;
        }
        if (gi == static_cast<std::size_t>(-1)) break;
    }
    return out;
}

struct SweepRow {
    ObservationMethod method;
    std::vector<std::size_t> n_pde;
    double rmse = 0.0, mae = 0.0;
    std::vector<double> lengthscale;

    std::size_t total() const {
        std::size_t n = 1;
        for (auto v : n_pde) n *= v;
        return n;
    }
};

/// Runs every (method, n_pde) combination; with a search space, the
/// lengthscales are tuned per cell first.
inline std::vector<SweepRow> sweep(const ProblemSpec& spec, const std::vector<ObservationMethod>& methods,
                                   const std::vector<std::vector<std::size_t>>& resolutions,
                                   const SearchSpace& space = {}) {
    std::vector<SweepRow> rows;
    for (auto m : methods)
        for (const auto& n : resolutions) {
            ProblemSpec s = spec;
            s.method = m;
            s.n_pde = n;
            if (!space.empty()) s = grid_search(s, space).best;
            const auto r = run_experiment(s, {.dump = false, .deterministic = true});
            rows.push_back({m, n, r.rmse, r.mae, s.kernel.lengthscale});
        }
    return rows;
}

inline std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_table_csv(const std::string& path, const RunResult& r) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    for (const auto& n : r.dim_names) f << n << ",";
    f << "output,mean,std\n";
    for (const auto& row : r.table) {
        for (double x : row.x) f << format_double(x) << ",";
        f << row.output << "," << format_double(row.mean) << "," << format_double(row.std) << "\n";
    }
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "method,n_pde,rmse,mae\n";
    for (const auto& r : rows)
        f << to_string(r.method) << "," << r.total() << "," << format_double(r.rmse) << "," << format_double(r.mae) << "\n";
}

inline void write_gridsearch_csv(const std::string& path, const GridSearchResult& g) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    const std::size_t d = g.best.dim();
    for (std::size_t i = 0; i < d; ++i) f << "lengthscale_" << i << ",";
    f << "rmse\n";
    for (const auto& row : g.table) {
        for (double l : row.lengthscale) f << format_double(l) << ",";
        f << format_double(row.score) << "\n";
    }
}

/// rows = iterations, columns = time slices.
inline void write_actions_csv(const std::string& path, const Eigen::MatrixXd& profile) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << "iteration";
    for (Eigen::Index c = 0; c < profile.cols(); ++c) f << ",slice_" << c;
    f << "\n";
    for (Eigen::Index r = 0; r < profile.rows(); ++r) {
        f << r;
        for (Eigen::Index c = 0; c < profile.cols(); ++c) f << "," << format_double(profile(r, c));
        f << "\n";
    }
}

}  // namespace gpfvm::bench
