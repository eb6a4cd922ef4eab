#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gpfvm/errors.hpp"
#include "gpfvm/kernel.hpp"
#include "gpfvm/operators.hpp"

namespace gpfvm::bench {

enum class ProblemKind { cos_ode, advection1d, wave2d, shallow_water_demo };
enum class ObservationMethod { fvm, collocation };
enum class SolverMethod { cholesky, cg, two_stage, warmstart };

inline std::string to_string(ProblemKind k) {
    switch (k) {
        case ProblemKind::cos_ode: return "cos_ode";
        case ProblemKind::advection1d: return "advection1d";
        case ProblemKind::wave2d: return "wave2d";
        case ProblemKind::shallow_water_demo: return "shallow_water_demo";
    }
    return "unknown";
}

inline std::string to_string(ObservationMethod m) { return m == ObservationMethod::fvm ? "fvm" : "collocation"; }

inline std::string to_string(SolverMethod m) {
    switch (m) {
        case SolverMethod::cholesky: return "cholesky";
        case SolverMethod::cg: return "cg";
        case SolverMethod::two_stage: return "two_stage";
        case SolverMethod::warmstart: return "warmstart";
    }
    return "unknown";
}

inline ProblemKind parse_problem_kind(const std::string& s) {
    for (auto k : {ProblemKind::cos_ode, ProblemKind::advection1d, ProblemKind::wave2d, ProblemKind::shallow_water_demo})
        if (to_string(k) == s) return k;
    throw ConfigError("unknown problem kind '" + s + "'");
}

inline ObservationMethod parse_observation_method(const std::string& s) {
    if (s == "fvm") return ObservationMethod::fvm;
    if (s == "collocation") return ObservationMethod::collocation;
    throw ConfigError("unknown observation method '" + s + "' (expected fvm or collocation)");
}

inline SolverMethod parse_solver_method(const std::string& s) {
    for (auto m : {SolverMethod::cholesky, SolverMethod::cg, SolverMethod::two_stage, SolverMethod::warmstart})
        if (to_string(m) == s) return m;
    throw ConfigError("unknown solver method '" + s + "'");
}

/// Depth profile: constant `deep` for x < shelf_start, linear ramp to
/// `shelf` at x = shelf_end, constant beyond.
struct Bathymetry {
    double deep = 0.4;
    double shelf = 0.05;
    double shelf_start = 0.5;
    double shelf_end = 0.8;

    double operator()(double x, double) const {
        if (x <= shelf_start) return deep;
        if (x >= shelf_end) return shelf;
        const double s = (x - shelf_start) / (shelf_end - shelf_start);
        return deep + s * (shelf - deep);
    }
};

/// Anisotropic Gaussian displacement of the water surface.
struct GaussianBump {
    double amplitude = 1.0;
    double cx = 0.3, cy = 0.5;
    double sx = 0.06, sy = 0.12;

    double operator()(double x, double y) const {
        const double a = (x - cx) / sx, b = (y - cy) / sy;
        return amplitude * std::exp(-0.5 * (a * a + b * b));
    }
};

/// Superposition of sine modes, periodic on [0, 1].
struct SineSeries {
    std::vector<int> modes;
    std::vector<double> amplitudes;
    std::vector<double> phases;

    double operator()(double x) const {
        double v = 0.0;
        for (std::size_t i = 0; i < modes.size(); ++i)
            v += amplitudes[i] * std::sin(2 * std::numbers::pi * modes[i] * x + phases[i]);
        return v;
    }
};

struct KernelSpec {
    std::vector<int> q;
    std::vector<double> lengthscale;
    std::vector<double> variance{1.0};  ///< one value, or one per output
};

struct SolverSpec {
    SolverMethod method = SolverMethod::cholesky;
    int budget = 300;
    double tol = 1e-6;
    bool reorthogonalize = true;
    int targeted_budget = 0;
    std::vector<std::size_t> coarse_factors;  ///< warmstart: refinement factors from coarse to fine
};

struct ProblemSpec {
    ProblemKind kind = ProblemKind::cos_ode;
    std::vector<double> lo, hi;
    std::uint64_t seed = 0;
    std::size_t ibvp_draws = 1;

    double beta = 0.4;        ///< advection speed
    double wave_speed = 1.0;
    double gravity = 9.81;
    double coriolis = 0.0;
    double drag = 0.0;
    Bathymetry bathymetry;
    GaussianBump bump;

    // Observation layouts.
    std::size_t ic_points = 0;        ///< per spatial dimension
    std::size_t bc_times = 0;
    std::size_t bc_points = 0;        ///< tangential points per edge

    // Targeted post-iterations (shallow water).
    std::vector<double> target_lo, target_hi;
    std::vector<std::size_t> target_points;

    std::vector<std::size_t> n_pde;
    ObservationMethod method = ObservationMethod::fvm;
    bool average = false;

    KernelSpec kernel;
    SolverSpec solver;

    std::size_t test_points = 50;     ///< metric grid, per dimension
    std::size_t dump_points = 20;     ///< mean_std.csv grid, per dimension

    std::size_t dim() const noexcept { return lo.size(); }
    std::size_t num_outputs() const noexcept { return kind == ProblemKind::shallow_water_demo ? 3 : 1; }

    std::vector<std::string> dim_names() const {
        switch (dim()) {
            case 1: return {"x"};
            case 2: return {"t", "x"};
            default: return {"t", "x", "y"};
        }
    }

    void validate() const {
        if (lo.size() != hi.size() || lo.empty()) throw ConfigError("problem extents lo/hi must have equal, non-zero length");
        for (std::size_t i = 0; i < lo.size(); ++i)
            if (!(hi[i] > lo[i])) throw ConfigError("problem extents must be positive");
        if (n_pde.size() != dim()) throw ConfigError("n_pde needs one entry per dimension");
        for (auto n : n_pde)
            if (n < 1) throw ConfigError("n_pde entries must be >= 1");
        if (kernel.q.size() != dim() || kernel.lengthscale.size() != dim())
            throw ConfigError("kernel q and lengthscale need one entry per dimension");
        if (kernel.variance.size() != 1 && kernel.variance.size() != num_outputs())
            throw ConfigError("kernel variance needs one entry or one per output");
        const int need = kind == ProblemKind::wave2d ? 2 : 1;
        for (int q : kernel.q)
            if (q < need)
                throw ConfigError(to_string(kind) + " needs q >= " + std::to_string(need) + " in every dimension");
        if (ibvp_draws < 1) throw ConfigError("ibvp_draws must be >= 1");
        if (test_points < 2 || dump_points < 2) throw ConfigError("test and dump grids need >= 2 points per dimension");
        if (solver.budget < 1) throw ConfigError("solver budget must be >= 1");
        if (solver.method == SolverMethod::warmstart && solver.coarse_factors.size() != dim())
            throw ConfigError("warmstart needs coarse_factors with one entry per dimension");
    }
};

inline ProblemSpec default_spec(ProblemKind kind) {
    ProblemSpec s;
    s.kind = kind;
    switch (kind) {
        case ProblemKind::cos_ode:
            s.lo = {0.0};
            s.hi = {2 * std::numbers::pi};
            s.n_pde = {8};
            s.kernel = {{2}, {1.5}, {1.0}};
            s.test_points = 200;
            s.dump_points = 100;
            break;
        case ProblemKind::advection1d:
            s.lo = {0.0, 0.0};
            s.hi = {2.0, 1.0};
            s.ic_points = 100;
            s.bc_times = 50;
            s.n_pde = {16, 16};
            s.kernel = {{1, 1}, {1.0, 0.2}, {1.0}};
            s.ibvp_draws = 10;
            s.dump_points = 50;
            break;
        case ProblemKind::wave2d:
            s.lo = {0.0, 0.0, 0.0};
            s.hi = {2.0, 1.0, 1.0};
            s.ic_points = 8;
            s.bc_times = 20;
            s.bc_points = 10;
            s.n_pde = {8, 8, 8};
            s.kernel = {{2, 2, 2}, {1.0, 0.5, 0.5}, {1.0}};
            s.ibvp_draws = 5;
            s.dump_points = 12;
            break;
        case ProblemKind::shallow_water_demo:
            s.lo = {0.0, 0.0, 0.0};
            s.hi = {1.28, 1.0, 1.0};
            s.ic_points = 12;
            s.bc_times = 20;
            s.bc_points = 12;
            s.n_pde = {64, 12, 12};
            s.kernel = {{2, 2, 2}, {0.01, 0.1, 0.15}, {1.0, 25.0, 25.0}};
            s.solver.method = SolverMethod::two_stage;
            s.solver.budget = 300;
            s.solver.targeted_budget = 100;
            s.target_lo = {0.3, 0.6, 0.3};
            s.target_hi = {0.6, 0.9, 0.7};
            s.target_points = {10, 5, 5};
            s.dump_points = 12;
            break;
    }
    return s;
}

/// One IBVP of a problem class: the spec plus its drawn initial condition.
struct Instance {
    ProblemSpec spec;
    SineSeries advection_ic;
    Eigen::Matrix2d wave_coefficients = Eigen::Matrix2d::Zero();
};

/// Two sine modes with n in {1..4}, amplitude U(0.5, 1), phase U(0, 2 pi).
inline SineSeries draw_advection_ic(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> mode(1, 4);
    std::uniform_real_distribution<double> amp(0.5, 1.0), phase(0.0, 2 * std::numbers::pi);
    SineSeries s;
    for (int i = 0; i < 2; ++i) {
        s.modes.push_back(mode(rng));
        s.amplitudes.push_back(amp(rng));
        s.phases.push_back(phase(rng));
    }
    return s;
}

/// C = [[c1, c2], [c3, c4]] with c ~ N((1, .5, .5, 0), diag(.1^2, .2^2, .2^2, .3^2)).
inline Eigen::Matrix2d draw_wave_coefficients(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    const double mean[4] = {1.0, 0.5, 0.5, 0.0};
    const double sd[4] = {0.1, 0.2, 0.2, 0.3};
    double c[4];
    for (int i = 0; i < 4; ++i) c[i] = mean[i] + sd[i] * n01(rng);
    Eigen::Matrix2d m;
    m << c[0], c[1], c[2], c[3];
    return m;
}

inline Instance make_instance(const ProblemSpec& spec, std::size_t draw = 0) {
    Instance inst{spec, {}, Eigen::Matrix2d::Zero()};
    const std::uint64_t s = spec.seed + draw;
    if (spec.kind == ProblemKind::advection1d) inst.advection_ic = draw_advection_ic(s);
    if (spec.kind == ProblemKind::wave2d) inst.wave_coefficients = draw_wave_coefficients(s);
    return inst;
}

inline double wave_solution(const Eigen::Matrix2d& c, double speed, double t, double x, double y) {
    const double pi = std::numbers::pi;
    double v = 0.0;
    for (int i = 1; i <= 2; ++i)
        for (int j = 1; j <= 2; ++j)
            v += c(i - 1, j - 1) * std::sin(i * pi * x) * std::sin(j * pi * y) *
                 std::cos(std::sqrt(double(i * i + j * j)) * pi * speed * t);
    return v;
}

/// Ground truth for problems with a closed-form solution.
inline double analytic_solution(const Instance& inst, const Point& p) {
    const auto& s = inst.spec;
    switch (s.kind) {
        case ProblemKind::cos_ode: return std::sin(p.at(0));
        case ProblemKind::advection1d: {
            double xi = std::fmod(p.at(1) - s.beta * p.at(0), 1.0);
            if (xi < 0) xi += 1.0;
            return inst.advection_ic(xi);
        }
        case ProblemKind::wave2d: return wave_solution(inst.wave_coefficients, s.wave_speed, p.at(0), p.at(1), p.at(2));
        case ProblemKind::shallow_water_demo:
            throw std::invalid_argument("shallow_water_demo has no analytic solution; use the PDE residual diagnostics");
    }
    return 0.0;
}

inline bool has_analytic_solution(ProblemKind k) { return k != ProblemKind::shallow_water_demo; }

inline std::vector<double> linspace(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = n == 1 ? a : (i + 1 == n ? b : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    return v;
}

inline std::vector<double> cell_centers(double a, double b, std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = a + (b - a) * (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    return v;
}

inline MultiOutputKernel make_kernel(const ProblemSpec& s) {
    std::vector<TensorKernel> outs;
    for (std::size_t o = 0; o < s.num_outputs(); ++o) {
        const double var = s.kernel.variance.size() == 1 ? s.kernel.variance[0] : s.kernel.variance.at(o);
        std::vector<KernelFactor> f;
        for (std::size_t i = 0; i < s.dim(); ++i)
            // The output variance is carried by the first factor.
            f.emplace_back(s.kernel.q[i], s.kernel.lengthscale[i], i == 0 ? var : 1.0);
        outs.emplace_back(std::move(f));
    }
    return MultiOutputKernel(std::move(outs));
}

/// The assembled observation model of one IBVP. Blocks are ordered
/// initial/boundary first, PDE blocks last.
struct Problem {
    Instance instance;
    MultiOutputKernel kernel;
    std::vector<ObservationBlock> blocks;
    std::size_t first_pde_block = 0;
    FactorizedScheme scheme;  ///< FVM scheme (or the cell grid collocation points sit at)

    Eigen::Index size() const {
        Eigen::Index n = 0;
        for (const auto& b : blocks) n += static_cast<Eigen::Index>(b.size());
        return n;
    }

    Eigen::Index pde_offset() const {
        Eigen::Index n = 0;
        for (std::size_t i = 0; i < first_pde_block; ++i) n += static_cast<Eigen::Index>(blocks[i].size());
        return n;
    }

    std::vector<Eigen::Index> icbc_coords() const {
        std::vector<Eigen::Index> c(static_cast<std::size_t>(pde_offset()));
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = static_cast<Eigen::Index>(i);
        return c;
    }
};

namespace detail {

inline ObservationBlock pde_block(const ProblemSpec& s, const LinearDiffOp& op, const FactorizedScheme& scheme,
                                  const SourceFunction& f) {
    if (s.method == ObservationMethod::fvm) return fvm_block(op, scheme, f, {{}, s.average});
    std::vector<std::vector<double>> axes;
    for (std::size_t i = 0; i < s.dim(); ++i) axes.push_back(cell_centers(s.lo[i], s.hi[i], s.n_pde[i]));
    return collocation_grid_block(op, axes, f);
}

inline std::vector<Point> grid_points(const std::vector<std::vector<double>>& axes) {
    std::vector<Point> pts;
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.size();
    for (std::size_t j = 0; j < n; ++j) {
        Point p(axes.size());
        std::size_t rem = j;
        for (std::size_t i = axes.size(); i-- > 0;) {
            p[i] = axes[i][rem % axes[i].size()];
            rem /= axes[i].size();
        }
        pts.push_back(std::move(p));
    }
    return pts;
}

}  // namespace detail

inline Problem build_problem(const Instance& inst) {
    const ProblemSpec& s = inst.spec;
    s.validate();
    Problem p{inst, make_kernel(s), {}, 0, FactorizedScheme::uniform(s.lo, s.hi, s.n_pde)};
    switch (s.kind) {
        case ProblemKind::cos_ode: {
            p.blocks.push_back(dirichlet_block({{s.lo[0]}, {s.hi[0]}}, {std::sin(s.lo[0]), std::sin(s.hi[0])}));
            p.first_pde_block = p.blocks.size();
            p.blocks.push_back(detail::pde_block(s, LinearDiffOp({DiffOpTerm{1.0, {1}, 0, {}}}), p.scheme,
                                                 SourceFunction::cosine()));
            break;
        }
        case ProblemKind::advection1d: {
            std::vector<Point> ic;
            std::vector<double> vals;
            for (std::size_t i = 0; i < s.ic_points; ++i) {
                const double x = s.lo[1] + (s.hi[1] - s.lo[1]) * static_cast<double>(i) / static_cast<double>(s.ic_points);
                ic.push_back({s.lo[0], x});
                vals.push_back(analytic_solution(inst, {s.lo[0], x}));
            }
            p.blocks.push_back(dirichlet_block(ic, vals, 0, BlockLabel::initial));
            p.blocks.push_back(periodic_block(linspace(s.lo[0], s.hi[0], s.bc_times), s.lo[1], s.hi[1]));
            p.first_pde_block = p.blocks.size();
            const LinearDiffOp op({DiffOpTerm{1.0, {1, 0}, 0, {}}, DiffOpTerm{s.beta, {0, 1}, 0, {}}});
            p.blocks.push_back(detail::pde_block(s, op, p.scheme, SourceFunction::zero()));
            break;
        }
        case ProblemKind::wave2d: {
            const auto xs = cell_centers(s.lo[1], s.hi[1], s.ic_points);
            const auto ys = cell_centers(s.lo[2], s.hi[2], s.ic_points);
            std::vector<Point> ic;
            std::vector<double> vals;
            for (double x : xs)
                for (double y : ys) {
                    ic.push_back({s.lo[0], x, y});
                    vals.push_back(analytic_solution(inst, ic.back()));
                }
            p.blocks.push_back(dirichlet_block(ic, vals, 0, BlockLabel::initial));
            p.blocks.push_back(point_block(LinearDiffOp({DiffOpTerm{1.0, {1, 0, 0}, 0, {}}}), ic,
                                           std::vector<double>(ic.size(), 0.0), BlockLabel::initial));
            const auto ts = linspace(s.lo[0], s.hi[0], s.bc_times);
            std::vector<Point> bc;
            for (int edge = 0; edge < 4; ++edge) {
                const bool along_y = edge < 2;  // x fixed, y varies
                const double fixed = along_y ? (edge == 0 ? s.lo[1] : s.hi[1]) : (edge == 2 ? s.lo[2] : s.hi[2]);
                const auto tang = along_y ? linspace(s.lo[2], s.hi[2], s.bc_points) : linspace(s.lo[1], s.hi[1], s.bc_points);
                for (double t : ts)
                    for (double v : tang) bc.push_back(along_y ? Point{t, fixed, v} : Point{t, v, fixed});
            }
            p.blocks.push_back(dirichlet_block(bc, std::vector<double>(bc.size(), 0.0)));
            p.first_pde_block = p.blocks.size();
            const double c2 = s.wave_speed * s.wave_speed;
            const LinearDiffOp op({DiffOpTerm{1.0, {2, 0, 0}, 0, {}}, DiffOpTerm{-c2, {0, 2, 0}, 0, {}},
                                   DiffOpTerm{-c2, {0, 0, 2}, 0, {}}});
            p.blocks.push_back(detail::pde_block(s, op, p.scheme, SourceFunction::zero()));
            break;
        }
        case ProblemKind::shallow_water_demo: {
            const auto xs = cell_centers(s.lo[1], s.hi[1], s.ic_points);
            const auto ys = cell_centers(s.lo[2], s.hi[2], s.ic_points);
            std::vector<Point> ic;
            std::vector<double> h0;
            for (double x : xs)
                for (double y : ys) {
                    ic.push_back({s.lo[0], x, y});
                    h0.push_back(s.bump(x, y));
                }
            const std::vector<double> zeros(ic.size(), 0.0);
            p.blocks.push_back(dirichlet_block(ic, h0, 0, BlockLabel::initial));
            p.blocks.push_back(dirichlet_block(ic, zeros, 1, BlockLabel::initial));
            p.blocks.push_back(dirichlet_block(ic, zeros, 2, BlockLabel::initial));
            const auto speed = [&s](double x, double y) { return std::sqrt(s.gravity * s.bathymetry(x, y)); };
            const auto ts = linspace(s.lo[0], s.hi[0], s.bc_times);
            p.blocks.push_back(radiation_block(Face::x_lo, s.lo[1], ts, linspace(s.lo[2], s.hi[2], s.bc_points), speed));
            p.blocks.push_back(radiation_block(Face::x_hi, s.hi[1], ts, linspace(s.lo[2], s.hi[2], s.bc_points), speed));
            p.blocks.push_back(radiation_block(Face::y_lo, s.lo[2], ts, linspace(s.lo[1], s.hi[1], s.bc_points), speed));
            p.blocks.push_back(radiation_block(Face::y_hi, s.hi[2], ts, linspace(s.lo[1], s.hi[1], s.bc_points), speed));
            p.first_pde_block = p.blocks.size();
            const auto depth = [&s](const Point& x) { return s.bathymetry(x[1], x[2]); };
            std::vector<DiffOpTerm> cont{{1.0, {1, 0, 0}, 0, {}}, {1.0, {0, 1, 0}, 1, depth}, {1.0, {0, 0, 1}, 2, depth}};
            std::vector<DiffOpTerm> mx{{1.0, {1, 0, 0}, 1, {}}, {s.gravity, {0, 1, 0}, 0, {}}};
            std::vector<DiffOpTerm> my{{1.0, {1, 0, 0}, 2, {}}, {s.gravity, {0, 0, 1}, 0, {}}};
            if (s.coriolis != 0.0) {
                mx.push_back({-s.coriolis, {0, 0, 0}, 2, {}});
                my.push_back({s.coriolis, {0, 0, 0}, 1, {}});
            }
            if (s.drag != 0.0) {
                mx.push_back({s.drag, {0, 0, 0}, 1, {}});
                my.push_back({s.drag, {0, 0, 0}, 2, {}});
            }
            p.blocks.push_back(detail::pde_block(s, LinearDiffOp(cont, 0), p.scheme, SourceFunction::zero()));
            p.blocks.push_back(detail::pde_block(s, LinearDiffOp(mx, 1), p.scheme, SourceFunction::zero()));
            p.blocks.push_back(detail::pde_block(s, LinearDiffOp(my, 2), p.scheme, SourceFunction::zero()));
            break;
        }
    }
    return p;
}

/// Tensor test grid: `n` points per dimension including the endpoints.
inline std::vector<std::vector<double>> test_axes(const ProblemSpec& s, std::size_t n) {
    std::vector<std::vector<double>> axes;
    for (std::size_t i = 0; i < s.dim(); ++i) axes.push_back(linspace(s.lo[i], s.hi[i], n));
    return axes;
}

}  // namespace gpfvm::bench
