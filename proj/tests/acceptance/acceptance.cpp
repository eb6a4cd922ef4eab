#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "gpfvm/bench/bench.hpp"
#include "gpfvm/gpfvm.hpp"
#include "support/oracles.hpp"
#include "support/problems.hpp"

namespace fs = std::filesystem;
using namespace gpfvm;
using namespace gpfvm::bench;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / b.norm(); }

Config load_config(const std::string& name) {
    std::ifstream in(fs::path(GPFVM_SOURCE_DIR) / "configs" / name);
    if (!in) throw std::runtime_error("cannot open config " + name);
    return parse_config(in);
}

Outcome kernel_oracles() {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> ell(0.2, 3.0);
    std::uniform_real_distribution<double> u(-1.0, 2.0);
    std::uniform_real_distribution<double> variance(0.5, 2.0);
    double worst_off = 0.0, worst_diag = 0.0, worst_int = 0.0;
    for (int q = 0; q <= 2; ++q) {
        for (int trial = 0; trial < 100; ++trial) {
            const double l = ell(rng);
            const double var = variance(rng);
            KernelFactor k(q, l, var);
            const double x1 = u(rng);
            const bool diagonal = trial % 4 == 0;
            const double x2 = diagonal ? x1 : u(rng);
            for (int a = 0; a <= q; ++a)
                for (int b = 0; b <= q; ++b) {
                    const double ref = oracle::mixed_derivative(q, l, var, a, b, x1, x2);
                    const double err = std::abs(factor_derivative(k, a, b, x1, x2) - ref) / std::max(std::abs(ref), 1e-6);
                    double& worst = diagonal ? worst_diag : worst_off;
                    worst = std::max(worst, err);
                }
            double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
            if (a > b) std::swap(a, b);
            if (c > d) std::swap(c, d);
            const auto single = Functional1D::integral(a, b);
            const auto point = Functional1D::point(u(rng));
            const auto other = Functional1D::integral(c, d);
            worst_int = std::max(worst_int, std::abs(factor_functional_cov(k, single, point) -
                                                     oracle::functional_cov_1d(q, l, var, single, point)));
            worst_int = std::max(worst_int, std::abs(factor_functional_cov(k, single, other) -
                                                     oracle::functional_cov_1d(q, l, var, single, other)));
        }
    }
    return {worst_off <= 1e-6 && worst_diag <= 1e-5 && worst_int <= 1e-8,
            "300 cases; derivative rel err off-diagonal " + fmt(worst_off) + " (tol 1e-6), diagonal " + fmt(worst_diag) +
                " (tol 1e-5); integral abs err " + fmt(worst_int) + " (tol 1e-8)"};
}

std::vector<Interval> random_grid(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> cuts{lo, hi};
    while (cuts.size() < n + 1) cuts.push_back(u(rng));
    std::sort(cuts.begin(), cuts.end());
    std::vector<Interval> g;
    for (std::size_t i = 0; i < n; ++i) g.push_back({cuts[i], cuts[i + 1]});
    return g;
}

LinearDiffOp random_operator(std::mt19937_64& rng, std::size_t dim, int q, std::size_t terms) {
    std::uniform_int_distribution<int> order(0, q);
    std::uniform_real_distribution<double> coef(-2.0, 2.0);
    std::vector<DiffOpTerm> t;
    for (std::size_t i = 0; i < terms; ++i) {
        std::vector<int> o(dim);
        for (auto& v : o) v = order(rng);
        t.push_back(DiffOpTerm{coef(rng), MultiIndex(std::move(o)), 0, {}});
    }
    return LinearDiffOp(std::move(t));
}

Outcome kronecker_correctness() {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> count(2, 8);
    std::uniform_real_distribution<double> ell(0.3, 1.5);
    double worst_dense = 0.0, worst_mv = 0.0;
    std::size_t largest = 0;
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<std::size_t> n(3);
        do {
            for (auto& v : n) v = count(rng);
        } while (n[0] * n[1] * n[2] > 512);
        std::vector<std::vector<Interval>> grids;
        for (std::size_t i = 0; i < 3; ++i) grids.push_back(random_grid(rng, n[i], 0.0, 1.0 + static_cast<double>(i)));
        const FactorizedScheme scheme(grids);
        largest = std::max(largest, scheme.size());
        const MultiOutputKernel k(TensorKernel({KernelFactor(2, ell(rng)), KernelFactor(1, ell(rng)), KernelFactor(2, ell(rng))}));
        std::uniform_int_distribution<std::size_t> nterms(2, 3);
        auto op = random_operator(rng, 3, 1, nterms(rng));
        if (trial % 2 == 1) op.terms[0].spatial_coefficient = [](const Point& x) { return 1.0 + x[1] * x[2]; };
        const auto fvm = fvm_block(op, scheme, SourceFunction::zero());
        std::vector<std::vector<double>> axes;
        for (std::size_t i = 0; i < 3; ++i) {
            std::vector<double> a;
            for (std::size_t j = 0; j < 3; ++j) a.push_back(0.2 + 0.3 * static_cast<double>(j) * static_cast<double>(i + 1));
            axes.push_back(a);
        }
        const auto coll = collocation_grid_block(random_operator(rng, 3, 1, 2), axes, SourceFunction::zero());
        const auto pts = dirichlet_block({{0.0, 0.5, 1.0}, {0.3, 1.9, 2.2}, {0.7, 0.1, 0.4}}, {0.0, 1.0, 2.0});
        const std::vector<ObservationBlock> blocks{pts, fvm, coll};
        const auto g = build_gram(k, blocks);
        const Eigen::MatrixXd dense = g.dense();

        std::vector<OutputFunctional> all;
        for (const auto& b : blocks) all.insert(all.end(), b.functionals.begin(), b.functionals.end());
        Eigen::MatrixXd ref = gpfvm::detail::entrywise_cross_cov(k, all, all, true);
        ref.diagonal() += g.noise();
        worst_dense = std::max(worst_dense, (dense - ref).norm() / ref.norm());

        std::mt19937_64 vr(static_cast<std::uint64_t>(trial));
        std::normal_distribution<double> n01;
        Eigen::VectorXd x(g.size());
        for (auto& v : x) v = n01(vr);
        worst_mv = std::max(worst_mv, rel(g.matvec(x), ref * x));
    }
    return {worst_dense <= 1e-10 && worst_mv <= 1e-10,
            "10 schemes up to " + std::to_string(largest) + " volumes; dense rel err " + fmt(worst_dense) +
                ", matvec rel err " + fmt(worst_mv) + " (tol 1e-10)"};
}

/// 2D transport problem with 20 boundary points and an 8 x 10 FVM grid.
struct SmallProblem {
    MultiOutputKernel kernel;
    std::vector<ObservationBlock> blocks;
    std::vector<Eigen::Index> icbc;
};

SmallProblem hundred_observations() {
    SmallProblem p{MultiOutputKernel(TensorKernel({KernelFactor(2, 0.6), KernelFactor(2, 0.4)})), {}, {}};
    std::vector<Point> ic;
    std::vector<double> v;
    for (double x : cell_centers(0.0, 1.0, 20)) {
        ic.push_back({0.0, x});
        v.push_back(std::sin(std::numbers::pi * x));
    }
    p.blocks.push_back(dirichlet_block(ic, v));
    const LinearDiffOp op({DiffOpTerm{1.0, {1, 0}, 0, {}}, DiffOpTerm{0.5, {0, 1}, 0, {}}});
    p.blocks.push_back(fvm_block(op, FactorizedScheme::uniform({0.0, 0.0}, {1.0, 1.0}, {8, 10}), SourceFunction::zero()));
    for (Eigen::Index i = 0; i < 20; ++i) p.icbc.push_back(i);
    return p;
}

std::vector<QueryPoint> probes(std::size_t n, const Point& lo, const Point& hi, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<QueryPoint> q;
    for (std::size_t j = 0; j < n; ++j) {
        Point x(lo.size());
        for (std::size_t i = 0; i < lo.size(); ++i) x[i] = std::uniform_real_distribution<double>(lo[i], hi[i])(rng);
        q.push_back({x, 0});
    }
    return q;
}

Outcome solver_exactness() {
    const auto p = hundred_observations();
    const auto g = build_gram(p.kernel, p.blocks);
    const auto b = PosteriorGP::targets(p.blocks);
    const auto exact = cholesky_solve(g.dense(), b);
    const auto t = itergp_cg(g, b, {.budget = static_cast<int>(g.size()), .tol = 0.0, .reorthogonalize = true});
    const auto pts = probes(30, {0.0, 0.0}, {1.0, 1.0}, 5);
    const Eigen::VectorXd v_exact = PosteriorGP(p.kernel, p.blocks, exact.weights, exact.inverse).variance_at(pts);
    const Eigen::VectorXd v_iter = trace_posterior(p.kernel, p.blocks, t).variance_at(pts);
    const double w_err = rel(t.weights, exact.weights);
    const double v_err = rel(v_iter, v_exact);

    double worst_icbc = 0.0;
    int calls = 0;
    SolverOptions opt{.budget = 80, .tol = 0.0};
    opt.observer = [&](const SolverTrace& tr, const IterationInfo&) {
        ++calls;
        const Eigen::VectorXd r = b - g.matvec(tr.weights);
        worst_icbc = std::max(worst_icbc, r.head(20).cwiseAbs().maxCoeff());
    };
    two_stage_solve(g, b, p.icbc, opt);
    return {w_err <= 1e-6 && v_err <= 1e-6 && worst_icbc <= 1e-8 && calls > 0,
            "N=" + std::to_string(g.size()) + "; weights rel err " + fmt(w_err) + ", variance rel err " + fmt(v_err) +
                " (tol 1e-6); two-stage IC/BC residual max " + fmt(worst_icbc) + " over " + std::to_string(calls) +
                " iterations (tol 1e-8)"};
}

Outcome variance_monotonicity() {
    auto s = default_spec(ProblemKind::advection1d);
    s.n_pde = {5, 10};
    const Problem p = build_problem(make_instance(s));
    const auto g = build_gram(p.kernel, p.blocks);
    const auto b = PosteriorGP::targets(p.blocks);
    const auto pts = probes(20, s.lo, s.hi, 9);
    const auto tests = PosteriorGP::evaluations(pts);
    const Eigen::MatrixXd kx = cross_covariance(p.kernel, p.blocks, tests);
    Eigen::VectorXd prior(kx.cols());
    for (Eigen::Index j = 0; j < prior.size(); ++j)
        prior[j] = p.kernel.functional_cov(tests[static_cast<std::size_t>(j)], tests[static_cast<std::size_t>(j)]);

    const Eigen::MatrixXd dense = g.dense();
    Eigen::LLT<Eigen::MatrixXd> llt(dense);
    const Eigen::VectorXd full = prior - (kx.array() * llt.solve(kx).array()).colwise().sum().transpose().matrix();

    Eigen::VectorXd prev = prior;
    double worst_increase = -1e300, worst_below = -1e300;
    int iterations = 0;
    SolverOptions opt{.budget = static_cast<int>(g.size()), .tol = 0.0};
    opt.observer = [&](const SolverTrace& t, const IterationInfo&) {
        ++iterations;
        const Eigen::MatrixXd proj = t.D().transpose() * kx;
        const Eigen::VectorXd v = prior - proj.colwise().squaredNorm().transpose();
        worst_increase = std::max(worst_increase, (v - prev).maxCoeff());
        worst_below = std::max(worst_below, (full - v).maxCoeff());
        prev = v;
    };
    itergp_cg(g, b, opt);
    return {g.size() == 200 && worst_increase <= 1e-12 && worst_below <= 1e-12,
            std::to_string(g.size()) + " observations, " + std::to_string(iterations) +
                " iterations; largest per-step increase " + fmt(worst_increase) + ", largest dip below full solve " +
                fmt(worst_below) + " (slack 1e-12)"};
}

Outcome cos_ode_figure() {
    const Config c = load_config("cos_ode.ini");
    double rmse[2];
    double worst_ratio = 0.0;
    const ObservationMethod methods[2] = {ObservationMethod::fvm, ObservationMethod::collocation};
    std::string lengths;
    for (int m = 0; m < 2; ++m) {
        ProblemSpec s = c.spec;
        s.method = methods[m];
        s.n_pde = {8};
        const auto best = grid_search(s, c.search).best;
        rmse[m] = run_experiment(best, {.dump = false, .deterministic = true}).rmse;
        lengths += (m ? ", " : "") + to_string(methods[m]) + " l=" + fmt(best.kernel.lengthscale[0]);

        const Problem p = build_problem(make_instance(best));
        const PosteriorGP post = exact_posterior(p.kernel, p.blocks);
        std::vector<QueryPoint> pts;
        for (double x : linspace(best.lo[0], best.hi[0], 64)) pts.push_back({{x}, 0});
        const Eigen::MatrixXd paths = post.sample_paths(pts, 10, 2024);
        const Eigen::VectorXd sd = post.std_at(pts);
        for (Eigen::Index j : {Eigen::Index{0}, static_cast<Eigen::Index>(pts.size()) - 1})
            for (Eigen::Index r = 0; r < paths.rows(); ++r)
                worst_ratio = std::max(worst_ratio, std::abs(paths(r, j)) / sd[j]);
    }
    return {rmse[0] < rmse[1] && worst_ratio <= 3.0,
            "RMSE FVM " + fmt(rmse[0]) + " < collocation " + fmt(rmse[1]) + " (" + lengths +
                "); worst boundary deviation of 10 sampled paths " + fmt(worst_ratio) + " std (tol 3)"};
}

Outcome advection_trend() {
    const Config c = load_config("advection.ini");
    const std::vector<std::vector<std::size_t>> res{{8, 8}, {16, 16}, {32, 32}};
    const auto rows = sweep(c.spec, {ObservationMethod::fvm, ObservationMethod::collocation}, res, c.search);
    std::vector<double> fvm, col;
    for (const auto& r : rows) (r.method == ObservationMethod::fvm ? fvm : col).push_back(r.rmse);
    bool ok = fvm.size() == 3 && col.size() == 3;
    std::string detail;
    for (std::size_t i = 0; ok && i < 3; ++i) {
        ok = ok && fvm[i] < col[i];
        if (i > 0) ok = ok && fvm[i] <= fvm[i - 1] && col[i] <= col[i - 1];
        detail += (i ? "; " : "") + std::string("N=") + std::to_string(res[i][0] * res[i][1]) + " FVM " + fmt(fvm[i]) +
                  " collocation " + fmt(col[i]);
    }
    return {ok, std::to_string(c.spec.ibvp_draws) + " IBVPs, mean RMSE " + detail};
}

Outcome wave_trend() {
    const Config c = load_config("wave.ini");
    double r[2][2];
    std::string detail;
    const ObservationMethod methods[2] = {ObservationMethod::fvm, ObservationMethod::collocation};
    int max_iterations = 0;
    for (int m = 0; m < 2; ++m)
        for (int n = 0; n < 2; ++n) {
            ProblemSpec s = c.spec;
            s.method = methods[m];
            s.n_pde = n == 0 ? std::vector<std::size_t>{4, 4, 4} : std::vector<std::size_t>{8, 8, 8};
            ProblemSpec best = grid_search(s, c.search).best;
            best.solver.method = SolverMethod::two_stage;
            best.solver.budget = static_cast<int>(s.n_pde[0] * s.n_pde[1] * s.n_pde[2]);
            best.solver.tol = 1e-6;
            const auto out = run_experiment(best, {.dump = false, .deterministic = true});
            r[m][n] = out.rmse;
            max_iterations = std::max(max_iterations, out.iterations);
            detail += (detail.empty() ? "" : "; ") + to_string(methods[m]) + " " + std::to_string(s.n_pde[0]) + "^3 " +
                      fmt(out.rmse);
        }
    return {r[0][1] < r[0][0] && r[0][1] < r[1][1],
            std::to_string(c.spec.ibvp_draws) + " draws, two-stage IterGP (max " + std::to_string(max_iterations) +
                " iterations), mean RMSE " + detail};
}

Outcome pde_satisfaction() {
    auto s = load_config("wave.ini").spec;
    s.n_pde = {4, 4, 4};
    s.ibvp_draws = 1;
    const Problem p = build_problem(make_instance(s));
    const auto g = build_gram(p.kernel, p.blocks);
    const auto solved = cholesky_solve(g.dense(), PosteriorGP::targets(p.blocks));
    const PosteriorGP post(p.kernel, p.blocks, solved.weights, solved.inverse);
    const auto& block = p.blocks.back();
    const auto n = static_cast<Eigen::Index>(block.size());
    const Eigen::VectorXd residual = post.mean(block.functionals) - block.rhs;
    double worst = 0.0, largest_term = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        double scale = std::abs(block.rhs[j]);
        for (const auto& term : block.functionals[static_cast<std::size_t>(j)].terms)
            scale = std::max(scale, std::abs(post.mean({OutputFunctional({term})})[0]));
        largest_term = std::max(largest_term, scale);
        worst = std::max(worst, std::abs(residual[j]) / scale);
    }
    const Eigen::VectorXd nugget = -block.noise_var.cwiseProduct(solved.weights.tail(n));
    const double nugget_gap = (residual - nugget).cwiseAbs().maxCoeff();
    return {worst <= 1e-6, std::to_string(n) + " FVM functionals; max |L m - y| relative to that volume's largest operator term " +
                               fmt(worst) + " (tol 1e-6); relative to the largest term over all volumes " +
                               fmt(residual.cwiseAbs().maxCoeff() / largest_term) + "; residual equals -Sigma w to " +
                               fmt(nugget_gap)};
}

Outcome partition_identity() {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<std::size_t> dims(1, 3), cells(1, 3), split(1, 3), nterms(1, 3);
    std::uniform_real_distribution<double> ell(0.3, 1.5), u(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = dims(rng);
        std::vector<std::vector<Interval>> grids;
        std::vector<std::size_t> factors;
        std::vector<KernelFactor> kf;
        for (std::size_t i = 0; i < d; ++i) {
            grids.push_back(random_grid(rng, cells(rng), 0.0, 1.0));
            factors.push_back(split(rng));
            kf.push_back(KernelFactor(2, ell(rng)));
        }
        const FactorizedScheme coarse(grids);
        const auto fine = refine_scheme(coarse, factors);
        const MultiOutputKernel k{TensorKernel(kf)};
        const auto op = random_operator(rng, d, 2, nterms(rng));
        const auto cb = fvm_block(op, coarse, SourceFunction::zero());
        const auto fb = fvm_block(op, fine, SourceFunction::zero());

        std::vector<OutputFunctional> tests = fb.functionals;
        for (int j = 0; j < 5; ++j) {
            Point x(d);
            for (auto& v : x) v = u(rng);
            tests.push_back(OutputFunctional::evaluation(x));
        }
        const Eigen::MatrixXd kc = cross_covariance(k, {cb}, tests);
        const Eigen::MatrixXd kf_rows = cross_covariance(k, {fb}, tests);
        const auto children = partition_children(coarse, fine);
        for (std::size_t c = 0; c < coarse.size(); ++c) {
            Eigen::VectorXd sum = Eigen::VectorXd::Zero(kc.cols());
            for (auto j : children[c]) sum += kf_rows.row(static_cast<Eigen::Index>(j)).transpose();
            const Eigen::VectorXd row = kc.row(static_cast<Eigen::Index>(c)).transpose();
            worst = std::max(worst, (row - sum).cwiseAbs().maxCoeff() / std::max(1.0, row.cwiseAbs().maxCoeff()));
        }
    }

    auto s = default_spec(ProblemKind::cos_ode);
    s.n_pde = {64};
    const Problem p = build_problem(make_instance(s));
    const auto g = build_gram(p.kernel, p.blocks);
    const auto b = PosteriorGP::targets(p.blocks);
    const SolverOptions opt{.budget = static_cast<int>(g.size()), .tol = 1e-6};
    const auto plain = two_stage_solve(g, b, p.icbc_coords(), opt);
    const auto warm = coarse_warmstart(g, b, p.icbc_coords(), warmstart_actions(p, {8}), opt);
    return {worst <= 1e-10 && warm.budget_used <= plain.budget_used,
            "20 refinements, max row mismatch " + fmt(worst) + " (tol 1e-10, relative to max(1, |row|)); cos ODE 64 volumes: warmstart " +
                std::to_string(warm.budget_used) + " vs two-stage " + std::to_string(plain.budget_used) + " iterations"};
}

Outcome shallow_water() {
    const auto start = std::chrono::steady_clock::now();
    const auto s = load_config("shallow_water.ini").spec;
    const auto r = shallow_water_demo(s, {.dump = false, .deterministic = true});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const std::size_t pde = s.n_pde[0] * s.n_pde[1] * s.n_pde[2] * 3;
    const bool ok = pde <= 30u * 20u * 20u * 3u && secs < 900.0 && r.cg_iterations == 300 && r.targeted_iterations == 100 &&
                    r.ic_std_ratio <= 1e-4 && r.target_std_after < r.target_std_before && r.kendall_tau > 0.5;
    return {ok, std::to_string(r.observations) + " observations (" + std::to_string(pde) + " PDE, cap 36000), " +
                    std::to_string(r.cg_iterations) + "+" + std::to_string(r.targeted_iterations) + " iterations in " +
                    fmt(secs) + " s; IC std ratio " + fmt(r.ic_std_ratio) + " (tol 1e-4); target std " +
                    fmt(r.target_std_before) + " -> " + fmt(r.target_std_after) + "; Kendall tau " + fmt(r.kendall_tau) +
                    " (> 0.5)"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / ("gpfvm_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(root);
    const std::vector<std::pair<std::string, std::string>> configs{
        {"cos.ini", "[problem]\nkind = cos_ode\n[kernel]\nsearch_groups = 0\nsearch_values = 0.5:5.0:4\n"
                    "[discretization]\nsweep_n_pde = 4; 8\n"},
        {"advection.ini", "[problem]\nkind = advection1d\nibvp_draws = 2\n[discretization]\nn_pde = 8, 8\n"
                          "[output]\ntest_points = 20\ndump_points = 10\n"},
        {"wave.ini", "[problem]\nkind = wave2d\nibvp_draws = 1\n[discretization]\nn_pde = 4, 4, 4\n"
                     "[solver]\nmethod = warmstart\nbudget = 64\ncoarse_factors = 2, 2, 2\n"
                     "[output]\ntest_points = 10\ndump_points = 5\n"},
        {"shallow.ini", "[problem]\nkind = shallow_water_demo\nhi = 0.2, 1, 1\ndepth_deep = 0.3\ndepth_shelf = 0.3\n"
                        "ic_points = 6\nbc_times = 4\nbc_points = 5\ntarget_lo = 0.1, 0.5, 0.3\n"
                        "target_hi = 0.2, 0.8, 0.7\ntarget_points = 3, 3, 3\n[kernel]\nlengthscale = 0.02, 0.15, 0.2\n"
                        "[discretization]\nn_pde = 10, 6, 6\n[solver]\nbudget = 30\ntargeted_budget = 10\n"
                        "[output]\ndump_points = 3\n"},
    };
    const std::vector<std::pair<std::string, std::string>> runs{
        {"run", "cos.ini"}, {"gridsearch", "cos.ini"}, {"sweep", "cos.ini"},
        {"run", "advection.ini"}, {"run", "wave.ini"}, {"run", "shallow.ini"}};
    for (const auto& [name, text] : configs) std::ofstream(root / name) << text;

    std::size_t compared = 0;
    std::vector<std::string> mismatched;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        fs::path dirs[2];
        for (int rep = 0; rep < 2; ++rep) {
            dirs[rep] = root / (std::to_string(i) + "_" + std::to_string(rep));
            const std::string cmd = std::string("\"") + GPFVM_CLI_PATH + "\" " + runs[i].first + " \"" +
                                    (root / runs[i].second).string() + "\" --seed 7 --out-dir \"" + dirs[rep].string() +
                                    "\" > /dev/null";
            if (std::system(cmd.c_str()) != 0) return {false, "CLI failed: " + cmd};
        }
        std::set<std::string> names;
        for (const auto& e : fs::directory_iterator(dirs[0])) {
            const auto ext = e.path().extension();
            if (ext == ".csv" || ext == ".json") names.insert(e.path().filename().string());
        }
        if (names.empty()) return {false, "no outputs from " + runs[i].first + " " + runs[i].second};
        for (const auto& n : names) {
            ++compared;
            if (!fs::exists(dirs[1] / n) || slurp(dirs[0] / n) != slurp(dirs[1] / n))
                mismatched.push_back(runs[i].first + "/" + runs[i].second + "/" + n);
        }
    }
    fs::remove_all(root);
    std::string detail = std::to_string(runs.size()) + " CLI pipelines run twice, " + std::to_string(compared) +
                         " CSV/JSON files compared byte for byte";
    for (const auto& m : mismatched) detail += "; differs: " + m;
    return {mismatched.empty(), detail};
}

struct Criterion {
    std::string name;
    double limit_s;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {"kernel oracle suite", 30, kernel_oracles},
        {"kronecker correctness", 60, kronecker_correctness},
        {"solver exactness", 30, solver_exactness},
        {"computational uncertainty monotonicity", 30, variance_monotonicity},
        {"cos ODE FVM vs collocation", 10, cos_ode_figure},
        {"advection refinement trend", 600, advection_trend},
        {"wave refinement trend", 1200, wave_trend},
        {"PDE satisfaction residual", 0, pde_satisfaction},
        {"partition identity and warmstart", 0, partition_identity},
        {"shallow-water demo", 900, shallow_water},
        {"determinism", 0, determinism},
    };
    std::set<std::size_t> only;
    for (int i = 1; i < argc; ++i) only.insert(static_cast<std::size_t>(std::atoi(argv[i])));

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!only.empty() && !only.count(i + 1)) continue;
        const auto& c = criteria[i];
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::string timing = fmt(secs) + " s";
        if (c.limit_s > 0) {
            timing += " (limit " + fmt(c.limit_s) + " s)";
            if (secs >= c.limit_s) o.pass = false;
        }
        if (!o.pass) ++failed;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i + 1 << "] " << c.name << ": " << o.detail << "; " << timing
                  << std::endl;
    }
    std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
    return failed == 0 ? 0 : 1;
}
