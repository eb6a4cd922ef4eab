#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gpfvm/errors.hpp"
#include "gpfvm/functional.hpp"
#include "gpfvm/quadrature.hpp"

namespace gpfvm {

using Point = std::vector<double>;
using ScalarField = std::function<double(const Point&)>;

struct MultiIndex {
    std::vector<int> orders;

    MultiIndex() = default;
    MultiIndex(std::initializer_list<int> o) : orders(o) {}
    explicit MultiIndex(std::vector<int> o) : orders(std::move(o)) {}

    std::size_t dim() const noexcept { return orders.size(); }
    int total() const { return std::accumulate(orders.begin(), orders.end(), 0); }

    static MultiIndex zero(std::size_t d) { return MultiIndex(std::vector<int>(d, 0)); }
    static MultiIndex unit(std::size_t d, std::size_t axis, int order = 1) {
        std::vector<int> o(d, 0);
        o.at(axis) = order;
        return MultiIndex(std::move(o));
    }
};

/// c * D^alpha [u_output], optionally scaled by a spatially varying coefficient.
/// FVM blocks treat the coefficient as constant per volume (value at the centre).
struct DiffOpTerm {
    double coefficient = 1.0;
    MultiIndex multi_index;
    std::size_t output = 0;
    ScalarField spatial_coefficient;  ///< empty means constant 1
};

/// Linear differential operator sum_terms c * D^alpha [u_i].
struct LinearDiffOp {
    std::vector<DiffOpTerm> terms;
    std::size_t equation_index = 0;

    LinearDiffOp() = default;
    explicit LinearDiffOp(std::vector<DiffOpTerm> t, std::size_t eq = 0) : terms(std::move(t)), equation_index(eq) {
        validate();
    }

    std::size_t dim() const { return terms.empty() ? 0 : terms.front().multi_index.dim(); }

    void validate() const {
        if (terms.empty()) throw std::invalid_argument("LinearDiffOp: operator needs at least one term");
        for (const auto& t : terms) {
            if (t.multi_index.dim() != dim()) throw DimensionError("LinearDiffOp: terms disagree on dimension");
            if (!std::isfinite(t.coefficient)) throw std::invalid_argument("LinearDiffOp: non-finite coefficient");
        }
    }

    /// Identity operator u_output.
    static LinearDiffOp identity(std::size_t d, std::size_t output = 0) {
        return LinearDiffOp({DiffOpTerm{1.0, MultiIndex::zero(d), output, {}}});
    }
};

struct Interval {
    double a = 0.0;
    double b = 0.0;
    double length() const noexcept { return b - a; }
    double midpoint() const noexcept { return 0.5 * (a + b); }
    friend bool operator==(const Interval&, const Interval&) = default;
};

struct BoxVolume {
    std::vector<Interval> intervals;

    std::size_t dim() const noexcept { return intervals.size(); }
    double measure() const {
        double m = 1.0;
        for (const auto& iv : intervals) m *= iv.length();
        return m;
    }
    Point center() const {
        Point c;
        c.reserve(intervals.size());
        for (const auto& iv : intervals) c.push_back(iv.midpoint());
        return c;
    }
    std::vector<std::pair<double, double>> bounds() const {
        std::vector<std::pair<double, double>> out;
        for (const auto& iv : intervals) out.emplace_back(iv.a, iv.b);
        return out;
    }
};

/// Cartesian product of per-dimension interval grids. Volumes are enumerated
/// row-major in the grid indices (last dimension fastest); the flat index of
/// (j_1, ..., j_d) is sum_i j_i * prod_{i' > i} N_{i'}.
class FactorizedScheme {
public:
    FactorizedScheme() = default;
    explicit FactorizedScheme(std::vector<std::vector<Interval>> grids) : grids_(std::move(grids)) {
        for (const auto& g : grids_) {
            if (g.empty()) throw std::invalid_argument("FactorizedScheme: empty grid");
            for (const auto& iv : g)
                if (!(iv.a < iv.b)) throw std::invalid_argument("FactorizedScheme: interval with a >= b");
        }
    }

    /// Equal-width partition of [lo_i, hi_i] into counts_i intervals per dimension.
    static FactorizedScheme uniform(const std::vector<double>& lo, const std::vector<double>& hi,
                                    const std::vector<std::size_t>& counts) {
        if (lo.size() != hi.size() || lo.size() != counts.size())
            throw DimensionError("FactorizedScheme::uniform: argument lengths differ");
        std::vector<std::vector<Interval>> grids(lo.size());
        for (std::size_t i = 0; i < lo.size(); ++i) {
            if (counts[i] == 0) throw std::invalid_argument("FactorizedScheme::uniform: zero cells");
            if (!(lo[i] < hi[i])) throw std::invalid_argument("FactorizedScheme::uniform: empty extent");
            const double h = (hi[i] - lo[i]) / static_cast<double>(counts[i]);
            for (std::size_t j = 0; j < counts[i]; ++j) {
                const double a = lo[i] + h * static_cast<double>(j);
                const double b = j + 1 == counts[i] ? hi[i] : lo[i] + h * static_cast<double>(j + 1);
                grids[i].push_back({a, b});
            }
        }
        return FactorizedScheme(std::move(grids));
    }

    std::size_t dim() const noexcept { return grids_.size(); }
    const std::vector<std::vector<Interval>>& grids() const noexcept { return grids_; }
    const std::vector<Interval>& grid(std::size_t i) const { return grids_.at(i); }

    std::vector<std::size_t> shape() const {
        std::vector<std::size_t> s;
        for (const auto& g : grids_) s.push_back(g.size());
        return s;
    }

    std::size_t size() const {
        std::size_t n = grids_.empty() ? 0 : 1;
        for (const auto& g : grids_) n *= g.size();
        return n;
    }

    std::vector<std::size_t> unravel(std::size_t flat) const {
        std::vector<std::size_t> idx(dim());
        for (std::size_t i = dim(); i-- > 0;) {
            idx[i] = flat % grids_[i].size();
            flat /= grids_[i].size();
        }
        return idx;
    }

    std::size_t ravel(const std::vector<std::size_t>& idx) const {
        std::size_t flat = 0;
        for (std::size_t i = 0; i < dim(); ++i) flat = flat * grids_[i].size() + idx[i];
        return flat;
    }

    BoxVolume volume(std::size_t flat) const {
        const auto idx = unravel(flat);
        BoxVolume v;
        for (std::size_t i = 0; i < dim(); ++i) v.intervals.push_back(grids_[i][idx[i]]);
        return v;
    }

    std::vector<BoxVolume> enumerate_volumes() const {
        std::vector<BoxVolume> out;
        out.reserve(size());
        for (std::size_t j = 0; j < size(); ++j) out.push_back(volume(j));
        return out;
    }

private:
    std::vector<std::vector<Interval>> grids_;
};

/// Splits every interval of every grid into equal parts.
inline FactorizedScheme refine_scheme(const FactorizedScheme& scheme, const std::vector<std::size_t>& factors) {
    if (factors.size() != scheme.dim()) throw DimensionError("refine_scheme: one split count per dimension");
    std::vector<std::vector<Interval>> grids(scheme.dim());
    for (std::size_t i = 0; i < scheme.dim(); ++i) {
        if (factors[i] == 0) throw std::invalid_argument("refine_scheme: split counts must be >= 1");
        for (const auto& iv : scheme.grid(i)) {
            const double h = iv.length() / static_cast<double>(factors[i]);
            for (std::size_t k = 0; k < factors[i]; ++k) {
                const double a = iv.a + h * static_cast<double>(k);
                const double b = k + 1 == factors[i] ? iv.b : iv.a + h * static_cast<double>(k + 1);
                grids[i].push_back({a, b});
            }
        }
    }
    return FactorizedScheme(std::move(grids));
}

/// For each coarse volume, the flat indices of the fine volumes partitioning it.
/// Throws if the fine grids do not nest inside the coarse grids.
inline std::vector<std::vector<std::size_t>> partition_children(const FactorizedScheme& coarse,
                                                                const FactorizedScheme& fine, double tol = 1e-12) {
    if (coarse.dim() != fine.dim()) throw DimensionError("partition_children: dimension mismatch");
    const std::size_t d = coarse.dim();
    std::vector<std::vector<std::vector<std::size_t>>> per_dim(d);
    for (std::size_t i = 0; i < d; ++i) {
        const auto& cg = coarse.grid(i);
        const auto& fg = fine.grid(i);
        per_dim[i].resize(cg.size());
        std::vector<double> covered(cg.size(), 0.0);
        for (std::size_t f = 0; f < fg.size(); ++f) {
            bool placed = false;
            for (std::size_t c = 0; c < cg.size(); ++c) {
                const double scale = std::max(1.0, std::abs(cg[c].b) + std::abs(cg[c].a));
                if (fg[f].a >= cg[c].a - tol * scale && fg[f].b <= cg[c].b + tol * scale) {
                    per_dim[i][c].push_back(f);
                    covered[c] += fg[f].length();
                    placed = true;
                    break;
                }
            }
            if (!placed) throw std::invalid_argument("partition_children: fine interval straddles coarse cells");
        }
        for (std::size_t c = 0; c < cg.size(); ++c)
            if (std::abs(covered[c] - cg[c].length()) > 1e-9 * cg[c].length())
                throw std::invalid_argument("partition_children: fine grid does not cover coarse cell");
    }
    std::vector<std::vector<std::size_t>> out(coarse.size());
    for (std::size_t c = 0; c < coarse.size(); ++c) {
        const auto cidx = coarse.unravel(c);
        std::vector<std::size_t> counter(d, 0);
        while (true) {
            std::vector<std::size_t> fidx(d);
            for (std::size_t i = 0; i < d; ++i) fidx[i] = per_dim[i][cidx[i]][counter[i]];
            out[c].push_back(fine.ravel(fidx));
            std::size_t i = d;
            bool done = true;
            while (i-- > 0) {
                if (++counter[i] < per_dim[i][cidx[i]].size()) {
                    done = false;
                    break;
                }
                counter[i] = 0;
            }
            if (done) break;
        }
    }
    return out;
}

/// One cell of a factorized layout axis: a point (a == b, collocation) or an interval (FVM).
struct Cell1D {
    double a = 0.0;
    double b = 0.0;
    bool is_point = false;

    Functional1D functional(int order) const {
        return is_point ? Functional1D::point(a, order) : Functional1D::integral(a, b, order);
    }
};

/// Kronecker-structured description of an observation block: observation j
/// (row-major over the axes) is sum_t c_t * mask_t[j] * prod_i F(axes[i][j_i], orders_t[i]).
struct FactorizedLayout {
    struct Term {
        double coefficient = 1.0;
        std::vector<int> orders;
        std::size_t output = 0;
        Eigen::VectorXd mask;  ///< empty means all ones
    };

    std::vector<std::vector<Cell1D>> axes;
    std::vector<Term> terms;

    std::size_t dim() const noexcept { return axes.size(); }
    std::vector<std::size_t> shape() const {
        std::vector<std::size_t> s;
        for (const auto& a : axes) s.push_back(a.size());
        return s;
    }
    std::size_t size() const {
        std::size_t n = axes.empty() ? 0 : 1;
        for (const auto& a : axes) n *= a.size();
        return n;
    }
};

enum class BlockLabel { initial, boundary, pde };

inline std::string to_string(BlockLabel l) {
    switch (l) {
        case BlockLabel::initial: return "initial";
        case BlockLabel::boundary: return "boundary";
        case BlockLabel::pde: return "pde";
    }
    return "unknown";
}

/// Affine observations L[u] + eps = y, eps ~ N(noise_mean, diag(noise_var)).
struct ObservationBlock {
    std::vector<OutputFunctional> functionals;
    Eigen::VectorXd rhs;
    Eigen::VectorXd noise_mean;
    Eigen::VectorXd noise_var;
    BlockLabel label = BlockLabel::pde;
    std::optional<FactorizedLayout> layout;

    std::size_t size() const noexcept { return functionals.size(); }

    void validate() const {
        const auto n = static_cast<Eigen::Index>(functionals.size());
        if (rhs.size() != n || noise_mean.size() != n || noise_var.size() != n)
            throw DimensionError("ObservationBlock: functionals, rhs and noise lengths differ");
        if (n > 0 && noise_var.minCoeff() < 0.0) throw std::invalid_argument("ObservationBlock: negative noise variance");
        if (layout && layout->size() != functionals.size())
            throw DimensionError("ObservationBlock: layout size differs from functional count");
    }
};

/// Right-hand side of a PDE. Box integrals use `box_integral` when registered,
/// otherwise Gauss-Legendre quadrature of `value`; an empty source is zero.
struct SourceFunction {
    ScalarField value;
    std::function<double(const BoxVolume&)> box_integral;

    static SourceFunction zero() {
        return {[](const Point&) { return 0.0; }, [](const BoxVolume&) { return 0.0; }};
    }

    /// cos(x) in one dimension, with its exact antiderivative.
    static SourceFunction cosine() {
        return {[](const Point& x) { return std::cos(x.at(0)); },
                [](const BoxVolume& v) { return std::sin(v.intervals.at(0).b) - std::sin(v.intervals.at(0).a); }};
    }

    double at(const Point& x) const { return value ? value(x) : 0.0; }

    double integrate(const BoxVolume& v) const {
        if (box_integral) return box_integral(v);
        if (!value) return 0.0;
        static const BoxQuadrature rule;
        return rule.integrate_adaptive(value, v.bounds());
    }
};

struct ObservationNoise {
    double boundary_variance = 1e-10;   ///< initial and boundary observations
    double pde_variance = 1e-8;         ///< collocation; FVM multiplies by |V|
};

namespace detail {

inline double coefficient_at(const DiffOpTerm& t, const Point& x) {
    return t.coefficient * (t.spatial_coefficient ? t.spatial_coefficient(x) : 1.0);
}

inline ObservationBlock make_block(std::size_t n, BlockLabel label, double variance) {
    ObservationBlock b;
    b.functionals.reserve(n);
    b.rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    b.noise_mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    b.noise_var = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n), variance);
    b.label = label;
    return b;
}

}  // namespace detail

struct FvmOptions {
    ObservationNoise noise{};
    /// Divide functionals and rhs by |V| (volume averages instead of integrals).
    bool average = false;
};

/// One observation per volume: int_V D[u] = int_V f, reduced per dimension to
/// interval integrals of derivatives.
inline ObservationBlock fvm_block(const LinearDiffOp& op, const FactorizedScheme& scheme, const SourceFunction& source,
                                  const FvmOptions& options = {}) {
    op.validate();
    if (scheme.dim() != op.dim()) throw DimensionError("fvm_block: scheme and operator dimensions differ");
    const std::size_t n = scheme.size();
    ObservationBlock block = detail::make_block(n, BlockLabel::pde, 0.0);

    FactorizedLayout layout;
    for (const auto& g : scheme.grids()) {
        std::vector<Cell1D> cells;
        for (const auto& iv : g) cells.push_back({iv.a, iv.b, false});
        layout.axes.push_back(std::move(cells));
    }
    for (const auto& t : op.terms) {
        FactorizedLayout::Term lt{t.coefficient, t.multi_index.orders, t.output, {}};
        if (t.spatial_coefficient || options.average) lt.mask = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n));
        layout.terms.push_back(std::move(lt));
    }

    for (std::size_t j = 0; j < n; ++j) {
        const BoxVolume v = scheme.volume(j);
        const Point c = v.center();
        const double measure = v.measure();
        const double scale = options.average ? 1.0 / measure : 1.0;
        OutputFunctional f;
        for (std::size_t ti = 0; ti < op.terms.size(); ++ti) {
            const auto& t = op.terms[ti];
            const double coeff_here = t.spatial_coefficient ? t.spatial_coefficient(c) : 1.0;
            if (layout.terms[ti].mask.size() > 0) layout.terms[ti].mask[static_cast<Eigen::Index>(j)] = coeff_here * scale;
            ProductFunctional pf;
            for (std::size_t i = 0; i < v.dim(); ++i)
                pf.push_back(Functional1D::integral(v.intervals[i].a, v.intervals[i].b, t.multi_index.orders[i]));
            f.terms.push_back({t.coefficient * coeff_here * scale, t.output, std::move(pf)});
        }
        block.functionals.push_back(std::move(f));
        const auto jj = static_cast<Eigen::Index>(j);
        block.rhs[jj] = source.integrate(v) * scale;
        block.noise_var[jj] = options.noise.pde_variance * measure * scale * scale;
    }
    block.layout = std::move(layout);
    return block;
}

/// Observations of D[u](x) at arbitrary points.
inline ObservationBlock collocation_block(const LinearDiffOp& op, const std::vector<Point>& points,
                                         const SourceFunction& source, const ObservationNoise& noise = {}) {
    op.validate();
    ObservationBlock block = detail::make_block(points.size(), BlockLabel::pde, noise.pde_variance);
    for (std::size_t j = 0; j < points.size(); ++j) {
        const Point& x = points[j];
        if (x.size() != op.dim()) throw DimensionError("collocation_block: point dimension differs from operator");
        OutputFunctional f;
        for (const auto& t : op.terms) {
            ProductFunctional pf;
            for (std::size_t i = 0; i < x.size(); ++i) pf.push_back(Functional1D::point(x[i], t.multi_index.orders[i]));
            f.terms.push_back({detail::coefficient_at(t, x), t.output, std::move(pf)});
        }
        block.functionals.push_back(std::move(f));
        block.rhs[static_cast<Eigen::Index>(j)] = source.at(x);
    }
    return block;
}

/// Collocation on the tensor grid axes[0] x ... x axes[d-1] (row-major), with
/// a factorized layout so the Gram matrix keeps its Kronecker structure.
inline ObservationBlock collocation_grid_block(const LinearDiffOp& op, const std::vector<std::vector<double>>& axes,
                                              const SourceFunction& source, const ObservationNoise& noise = {}) {
    if (axes.size() != op.dim()) throw DimensionError("collocation_block: grid dimension differs from operator");
    std::vector<Point> points;
    std::size_t n = axes.empty() ? 0 : 1;
    for (const auto& a : axes) n *= a.size();
    std::vector<std::size_t> idx(axes.size(), 0);
    for (std::size_t j = 0; j < n; ++j) {
        Point p(axes.size());
        std::size_t rem = j;
        for (std::size_t i = axes.size(); i-- > 0;) {
            idx[i] = rem % axes[i].size();
            rem /= axes[i].size();
            p[i] = axes[i][idx[i]];
        }
        points.push_back(std::move(p));
    }
    ObservationBlock block = collocation_block(op, points, source, noise);
    FactorizedLayout layout;
    for (const auto& a : axes) {
        std::vector<Cell1D> cells;
        for (double x : a) cells.push_back({x, x, true});
        layout.axes.push_back(std::move(cells));
    }
    for (const auto& t : op.terms) {
        FactorizedLayout::Term lt{t.coefficient, t.multi_index.orders, t.output, {}};
        if (t.spatial_coefficient) {
            lt.mask.resize(static_cast<Eigen::Index>(n));
            for (std::size_t j = 0; j < n; ++j) lt.mask[static_cast<Eigen::Index>(j)] = t.spatial_coefficient(points[j]);
        }
        layout.terms.push_back(std::move(lt));
    }
    block.layout = std::move(layout);
    return block;
}

/// Pointwise observations of D[u](x) = value, e.g. initial conditions on a
/// time derivative.
inline ObservationBlock point_block(const LinearDiffOp& op, const std::vector<Point>& points,
                                   const std::vector<double>& values, BlockLabel label,
                                   double variance = ObservationNoise{}.boundary_variance) {
    if (points.size() != values.size()) throw DimensionError("point_block: locations and values differ in length");
    ObservationBlock block = collocation_block(op, points, SourceFunction::zero());
    block.label = label;
    block.noise_var.setConstant(variance);
    for (std::size_t j = 0; j < values.size(); ++j) block.rhs[static_cast<Eigen::Index>(j)] = values[j];
    return block;
}

/// u_output(x_j) = values_j.
inline ObservationBlock dirichlet_block(const std::vector<Point>& locations, const std::vector<double>& values,
                                        std::size_t output = 0, BlockLabel label = BlockLabel::boundary,
                                        double variance = ObservationNoise{}.boundary_variance) {
    if (locations.size() != values.size()) throw DimensionError("dirichlet_block: locations and values differ in length");
    if (locations.empty()) return detail::make_block(0, label, variance);
    return point_block(LinearDiffOp::identity(locations.front().size(), output), locations, values, label, variance);
}

/// u(t, x_lo) - u(t, x_hi) = 0 on a (t, x) domain.
inline ObservationBlock periodic_block(const std::vector<double>& times, double x_lo, double x_hi,
                                       std::size_t output = 0,
                                       double variance = ObservationNoise{}.boundary_variance) {
    ObservationBlock block = detail::make_block(times.size(), BlockLabel::boundary, variance);
    for (double t : times) {
        OutputFunctional f;
        f.terms.push_back({1.0, output, {Functional1D::point(t), Functional1D::point(x_lo)}});
        f.terms.push_back({-1.0, output, {Functional1D::point(t), Functional1D::point(x_hi)}});
        block.functionals.push_back(std::move(f));
    }
    return block;
}

/// Faces of a (t, x, y) box.
enum class Face { x_lo, x_hi, y_lo, y_hi };

/// Radiation condition dh/dt + c * dh/dn = 0 with n the outward normal:
///   x_lo: dh/dt - c dh/dx = 0     x_hi: dh/dt + c dh/dx = 0
///   y_lo: dh/dt - c dh/dy = 0     y_hi: dh/dt + c dh/dy = 0
/// Observations are laid out over times x tangential coordinates (row-major).
inline ObservationBlock radiation_block(Face face, double face_coordinate, const std::vector<double>& times,
                                        const std::vector<double>& tangential,
                                        const std::function<double(double, double)>& wave_speed,
                                        std::size_t output = 0,
                                        double variance = ObservationNoise{}.boundary_variance) {
    ObservationBlock block = detail::make_block(times.size() * tangential.size(), BlockLabel::boundary, variance);
    const bool along_x = face == Face::x_lo || face == Face::x_hi;
    const double sign = (face == Face::x_hi || face == Face::y_hi) ? 1.0 : -1.0;
    for (double t : times) {
        for (double s : tangential) {
            const double x = along_x ? face_coordinate : s;
            const double y = along_x ? s : face_coordinate;
            const double c = wave_speed(x, y);
            OutputFunctional f;
            f.terms.push_back({1.0, output, {Functional1D::point(t, 1), Functional1D::point(x), Functional1D::point(y)}});
            if (c != 0.0) {
                ProductFunctional normal{Functional1D::point(t), Functional1D::point(x, along_x ? 1 : 0),
                                         Functional1D::point(y, along_x ? 0 : 1)};
                f.terms.push_back({sign * c, output, std::move(normal)});
            }
            block.functionals.push_back(std::move(f));
        }
    }
    return block;
}

/// Applies every functional in a block to a function given through its
/// pointwise derivatives, using the quadrature rule for interval factors.
/// Intended for diagnostics and tests on smooth functions.
inline Eigen::VectorXd apply_block(const ObservationBlock& block,
                                   const std::function<double(const Point&, const std::vector<int>&, std::size_t)>& deriv) {
    static const BoxQuadrature rule;
    Eigen::VectorXd out(static_cast<Eigen::Index>(block.size()));
    for (std::size_t j = 0; j < block.size(); ++j) {
        double acc = 0.0;
        for (const auto& term : block.functionals[j].terms) {
            std::vector<std::pair<double, double>> box;
            std::vector<std::size_t> integral_dims;
            std::vector<int> orders;
            for (std::size_t i = 0; i < term.factors.size(); ++i) {
                orders.push_back(term.factors[i].order);
                if (term.factors[i].is_integral()) {
                    integral_dims.push_back(i);
                    box.emplace_back(term.factors[i].a, term.factors[i].b);
                }
            }
            auto integrand = [&](const Point& sub) {
                Point x(term.factors.size());
                std::size_t k = 0;
                for (std::size_t i = 0; i < term.factors.size(); ++i)
                    x[i] = term.factors[i].is_integral() ? sub[k++] : term.factors[i].a;
                return deriv(x, orders, term.output);
            };
            acc += term.weight * (box.empty() ? integrand({}) : rule.integrate_adaptive(integrand, box));
        }
        out[static_cast<Eigen::Index>(j)] = acc;
    }
    return out;
}

}  // namespace gpfvm
