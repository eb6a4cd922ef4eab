#pragma once

#include <cstddef>
#include <cstdio>
#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Core>

#include "gpfvm/errors.hpp"
#include "gpfvm/functional.hpp"
#include "gpfvm/kernel.hpp"
#include "gpfvm/operators.hpp"

namespace gpfvm {

/// scale * (left_mask right_mask^T) o (A_0 (x) A_1 (x) ... (x) A_{d-1}).
/// Factors may be rectangular; flat indices are row-major over the factor
/// dimensions, matching FactorizedScheme.
struct KroneckerTerm {
    double scale = 1.0;
    std::vector<Eigen::MatrixXd> factors;
    Eigen::VectorXd left_mask;   ///< empty means all ones
    Eigen::VectorXd right_mask;  ///< empty means all ones

    Eigen::Index rows() const {
        Eigen::Index n = 1;
        for (const auto& f : factors) n *= f.rows();
        return n;
    }
    Eigen::Index cols() const {
        Eigen::Index n = 1;
        for (const auto& f : factors) n *= f.cols();
        return n;
    }

    /// y = left_mask o (scale * Kron * (right_mask o x)), one mode product per factor.
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        return apply_impl(x, false);
    }

    Eigen::VectorXd apply_transpose(const Eigen::VectorXd& x) const {
        return apply_impl(x, true);
    }

    Eigen::VectorXd column(Eigen::Index j) const {
        std::vector<Eigen::Index> idx(factors.size());
        Eigen::Index rem = j;
        for (std::size_t i = factors.size(); i-- > 0;) {
            idx[i] = rem % factors[i].cols();
            rem /= factors[i].cols();
        }
        Eigen::VectorXd v = Eigen::VectorXd::Constant(1, scale * (right_mask.size() ? right_mask[j] : 1.0));
        for (std::size_t i = 0; i < factors.size(); ++i) {
            const Eigen::VectorXd c = factors[i].col(idx[i]);
            Eigen::VectorXd next(v.size() * c.size());
            for (Eigen::Index a = 0; a < v.size(); ++a) next.segment(a * c.size(), c.size()) = v[a] * c;
            v.swap(next);
        }
        if (left_mask.size()) v.array() *= left_mask.array();
        return v;
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Constant(1, 1, scale);
        for (const auto& f : factors) {
            Eigen::MatrixXd next(m.rows() * f.rows(), m.cols() * f.cols());
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                for (Eigen::Index c = 0; c < m.cols(); ++c)
                    next.block(r * f.rows(), c * f.cols(), f.rows(), f.cols()) = m(r, c) * f;
            m.swap(next);
        }
        if (left_mask.size()) m = left_mask.asDiagonal() * m;
        if (right_mask.size()) m = m * right_mask.asDiagonal();
        return m;
    }

private:
    Eigen::VectorXd apply_impl(const Eigen::VectorXd& x, bool transpose) const {
        using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
        const Eigen::VectorXd& in_mask = transpose ? left_mask : right_mask;
        const Eigen::VectorXd& out_mask = transpose ? right_mask : left_mask;
        if (x.size() != (transpose ? rows() : cols())) throw DimensionError("KroneckerTerm: vector length mismatch");

        Eigen::VectorXd cur = in_mask.size() ? Eigen::VectorXd(x.cwiseProduct(in_mask)) : x;
        std::vector<Eigen::Index> shape;
        for (const auto& f : factors) shape.push_back(transpose ? f.rows() : f.cols());
        for (std::size_t i = 0; i < factors.size(); ++i) {
            Eigen::Index outer = 1, inner = 1;
            for (std::size_t k = 0; k < i; ++k) outer *= shape[k];
            for (std::size_t k = i + 1; k < shape.size(); ++k) inner *= shape[k];
            const Eigen::Index n = shape[i];
            const Eigen::Index r = transpose ? factors[i].cols() : factors[i].rows();
            Eigen::VectorXd next(outer * r * inner);
            if (inner == 1) {
                Eigen::Map<const RowMajor> X(cur.data(), outer, n);
                Eigen::Map<RowMajor> Y(next.data(), outer, r);
                if (transpose)
                    Y.noalias() = X * factors[i];
                else
                    Y.noalias() = X * factors[i].transpose();
            } else {
                for (Eigen::Index o = 0; o < outer; ++o) {
                    Eigen::Map<const RowMajor> X(cur.data() + o * n * inner, n, inner);
                    Eigen::Map<RowMajor> Y(next.data() + o * r * inner, r, inner);
                    if (transpose)
                        Y.noalias() = factors[i].transpose() * X;
                    else
                        Y.noalias() = factors[i] * X;
                }
            }
            shape[i] = r;
            cur.swap(next);
        }
        cur *= scale;
        if (out_mask.size()) cur.array() *= out_mask.array();
        return cur;
    }
};

/// Cross-covariance between two observation blocks: dense, or a sum of
/// Kronecker terms when both blocks carry a factorized layout.
struct GramBlock {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    Eigen::MatrixXd dense_matrix;        ///< used when kronecker is empty
    std::vector<KroneckerTerm> kronecker;

    bool is_kronecker() const noexcept { return !kronecker.empty(); }
    bool is_zero() const noexcept { return !is_kronecker() && dense_matrix.size() == 0; }

    void apply_add(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> y) const {
        if (is_kronecker()) {
            const Eigen::VectorXd xx = x;
            for (const auto& t : kronecker) y += t.apply(xx);
        } else if (dense_matrix.size()) {
            y.noalias() += dense_matrix * x;
        }
    }

    void apply_transpose_add(const Eigen::Ref<const Eigen::VectorXd>& x, Eigen::Ref<Eigen::VectorXd> y) const {
        if (is_kronecker()) {
            const Eigen::VectorXd xx = x;
            for (const auto& t : kronecker) y += t.apply_transpose(xx);
        } else if (dense_matrix.size()) {
            y.noalias() += dense_matrix.transpose() * x;
        }
    }

    Eigen::VectorXd column(Eigen::Index j) const {
        if (!is_kronecker()) return dense_matrix.size() ? Eigen::VectorXd(dense_matrix.col(j)) : Eigen::VectorXd::Zero(rows);
        Eigen::VectorXd c = Eigen::VectorXd::Zero(rows);
        for (const auto& t : kronecker) c += t.column(j);
        return c;
    }

    /// Row j, i.e. column j of the transpose.
    Eigen::VectorXd row(Eigen::Index i) const {
        if (!is_kronecker()) return dense_matrix.size() ? Eigen::VectorXd(dense_matrix.row(i).transpose()) : Eigen::VectorXd::Zero(cols);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(rows);
        e[i] = 1.0;
        Eigen::VectorXd r = Eigen::VectorXd::Zero(cols);
        apply_transpose_add(e, r);
        return r;
    }

    Eigen::MatrixXd dense() const {
        if (!is_kronecker()) return dense_matrix.size() ? dense_matrix : Eigen::MatrixXd::Zero(rows, cols);
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
        for (const auto& t : kronecker) m += t.dense();
        return m;
    }
};

/// G = L k L' + Sigma assembled blockwise over observation blocks. Only the
/// upper block triangle is stored; lower blocks are realized as transposes.
class StructuredGram {
public:
    StructuredGram() = default;

    StructuredGram(std::vector<Eigen::Index> sizes, std::vector<GramBlock> upper, Eigen::VectorXd noise)
        : sizes_(std::move(sizes)), upper_(std::move(upper)), noise_(std::move(noise)) {
        offsets_.assign(sizes_.size() + 1, 0);
        for (std::size_t i = 0; i < sizes_.size(); ++i) offsets_[i + 1] = offsets_[i] + sizes_[i];
        if (upper_.size() != sizes_.size() * (sizes_.size() + 1) / 2)
            throw std::invalid_argument("StructuredGram: wrong number of upper blocks");
        if (noise_.size() != size()) throw DimensionError("StructuredGram: noise length mismatch");
    }

    /// Single dense block, zero noise.
    static StructuredGram from_dense(const Eigen::MatrixXd& m) {
        if (m.rows() != m.cols()) throw DimensionError("StructuredGram::from_dense: matrix must be square");
        return StructuredGram({m.rows()}, {GramBlock{m.rows(), m.cols(), m, {}}}, Eigen::VectorXd::Zero(m.rows()));
    }

    Eigen::Index size() const noexcept { return offsets_.empty() ? 0 : offsets_.back(); }
    std::size_t num_blocks() const noexcept { return sizes_.size(); }
    Eigen::Index block_offset(std::size_t i) const { return offsets_.at(i); }
    Eigen::Index block_size(std::size_t i) const { return sizes_.at(i); }
    const Eigen::VectorXd& noise() const noexcept { return noise_; }

    /// Upper block (i, j) with i <= j.
    const GramBlock& block(std::size_t i, std::size_t j) const {
        if (i > j) throw std::out_of_range("StructuredGram::block: request i <= j");
        return upper_.at(index(i, j));
    }

    Eigen::VectorXd matvec(const Eigen::VectorXd& x) const {
        if (x.size() != size()) throw DimensionError("StructuredGram::matvec: vector length mismatch");
        Eigen::VectorXd y = noise_.cwiseProduct(x);
        std::vector<bool> nonzero(sizes_.size());
        for (std::size_t j = 0; j < sizes_.size(); ++j)
            nonzero[j] = sizes_[j] > 0 && !segment(x, j).isZero(0.0);
        for (std::size_t i = 0; i < sizes_.size(); ++i) {
            for (std::size_t j = i; j < sizes_.size(); ++j) {
                const GramBlock& b = upper_[index(i, j)];
                if (b.is_zero()) continue;
                if (nonzero[j]) b.apply_add(segment(x, j), y.segment(offsets_[i], sizes_[i]));
                if (i != j && nonzero[i]) b.apply_transpose_add(segment(x, i), y.segment(offsets_[j], sizes_[j]));
            }
        }
        return y;
    }

    /// Column k of G without a matvec through structured blocks.
    Eigen::VectorXd column(Eigen::Index k) const {
        if (k < 0 || k >= size()) throw std::out_of_range("StructuredGram::column");
        std::size_t j = 0;
        while (offsets_[j + 1] <= k) ++j;
        const Eigen::Index local = k - offsets_[j];
        Eigen::VectorXd c = Eigen::VectorXd::Zero(size());
        for (std::size_t i = 0; i < sizes_.size(); ++i) {
            if (sizes_[i] == 0) continue;
            if (i <= j)
                c.segment(offsets_[i], sizes_[i]) = upper_[index(i, j)].column(local);
            else
                c.segment(offsets_[i], sizes_[i]) = upper_[index(j, i)].row(local);
        }
        c[k] += noise_[k];
        return c;
    }

    Eigen::MatrixXd columns(const std::vector<Eigen::Index>& ks) const {
        Eigen::MatrixXd m(size(), static_cast<Eigen::Index>(ks.size()));
        for (std::size_t c = 0; c < ks.size(); ++c) m.col(static_cast<Eigen::Index>(c)) = column(ks[c]);
        return m;
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd m(size(), size());
        for (std::size_t i = 0; i < sizes_.size(); ++i)
            for (std::size_t j = i; j < sizes_.size(); ++j) {
                if (sizes_[i] == 0 || sizes_[j] == 0) continue;
                const Eigen::MatrixXd b = upper_[index(i, j)].dense();
                m.block(offsets_[i], offsets_[j], sizes_[i], sizes_[j]) = b;
                if (i != j) m.block(offsets_[j], offsets_[i], sizes_[j], sizes_[i]) = b.transpose();
            }
        m.diagonal() += noise_;
        return m;
    }

    /// Dense realization as comma-separated rows with 17 significant digits.
    void dump_csv(const std::string& path) const {
        if (size() > 1024) throw std::invalid_argument("StructuredGram::dump_csv: only for N <= 1024");
        std::FILE* f = std::fopen(path.c_str(), "w");
        if (!f) throw std::runtime_error("StructuredGram::dump_csv: cannot open " + path);
        const Eigen::MatrixXd m = dense();
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) std::fprintf(f, c + 1 < m.cols() ? "%.17g," : "%.17g\n", m(r, c));
        std::fclose(f);
    }

private:
    std::size_t index(std::size_t i, std::size_t j) const {
        const std::size_t n = sizes_.size();
        return i * n - i * (i - 1) / 2 + (j - i);
    }

    Eigen::Ref<const Eigen::VectorXd> segment(const Eigen::VectorXd& x, std::size_t j) const {
        return x.segment(offsets_[j], sizes_[j]);
    }

    std::vector<Eigen::Index> sizes_;
    std::vector<Eigen::Index> offsets_;
    std::vector<GramBlock> upper_;
    Eigen::VectorXd noise_;
};

namespace detail {

/// Per-dimension covariance tables between layout cells, cached by
/// (output, dimension, left order, right order).
class FactorCache {
public:
    FactorCache(const MultiOutputKernel& k, const FactorizedLayout& a, const FactorizedLayout& b)
        : kernel_(k), a_(a), b_(b) {}

    const Eigen::MatrixXd& get(std::size_t output, std::size_t dim, int oa, int ob) {
        const auto key = std::make_tuple(output, dim, oa, ob);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
        const KernelFactor& kf = kernel_.output(output).factor(dim);
        const auto& ca = a_.axes[dim];
        const auto& cb = b_.axes[dim];
        Eigen::MatrixXd m(static_cast<Eigen::Index>(ca.size()), static_cast<Eigen::Index>(cb.size()));
        for (std::size_t r = 0; r < ca.size(); ++r) {
            const Functional1D fa = ca[r].functional(oa);
            for (std::size_t c = 0; c < cb.size(); ++c)
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = kf.functional_cov(fa, cb[c].functional(ob));
        }
        return cache_.emplace(key, std::move(m)).first->second;
    }

private:
    const MultiOutputKernel& kernel_;
    const FactorizedLayout& a_;
    const FactorizedLayout& b_;
    std::map<std::tuple<std::size_t, std::size_t, int, int>, Eigen::MatrixXd> cache_;
};

inline std::vector<KroneckerTerm> kronecker_terms(const MultiOutputKernel& k, const FactorizedLayout& a,
                                                  const FactorizedLayout& b) {
    if (a.dim() != k.dim() || b.dim() != k.dim()) throw DimensionError("build_gram: layout dimension mismatch");
    FactorCache cache(k, a, b);
    std::vector<KroneckerTerm> out;
    for (const auto& ta : a.terms) {
        for (const auto& tb : b.terms) {
            if (ta.output != tb.output) continue;
            KroneckerTerm term;
            term.scale = ta.coefficient * tb.coefficient;
            for (std::size_t i = 0; i < a.dim(); ++i) term.factors.push_back(cache.get(ta.output, i, ta.orders[i], tb.orders[i]));
            term.left_mask = ta.mask;
            term.right_mask = tb.mask;
            out.push_back(std::move(term));
        }
    }
    return out;
}

/// Covariance between every observation of a layout (rows, row-major) and
/// every functional in `fs` (columns), assembled per dimension.
inline Eigen::MatrixXd layout_cross_cov(const MultiOutputKernel& k, const FactorizedLayout& layout,
                                        const std::vector<OutputFunctional>& fs) {
    const auto n = static_cast<Eigen::Index>(layout.size());
    const std::size_t d = layout.dim();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(fs.size()));
    const auto shape = layout.shape();
    std::vector<Eigen::VectorXd> per_dim(d);
    Eigen::VectorXd prod(n);
    for (std::size_t m = 0; m < fs.size(); ++m) {
        for (const auto& ft : fs[m].terms) {
            if (ft.factors.size() != d) throw DimensionError("cross covariance: functional dimension mismatch");
            for (const auto& lt : layout.terms) {
                if (lt.output != ft.output) continue;
                const TensorKernel& tk = k.output(lt.output);
                for (std::size_t i = 0; i < d; ++i) {
                    per_dim[i].resize(static_cast<Eigen::Index>(shape[i]));
                    for (std::size_t c = 0; c < shape[i]; ++c)
                        per_dim[i][static_cast<Eigen::Index>(c)] =
                            tk.factor(i).functional_cov(layout.axes[i][c].functional(lt.orders[i]), ft.factors[i]);
                }
                // Row-major outer product of the per-dimension vectors.
                prod.resize(1);
                prod[0] = lt.coefficient * ft.weight;
                for (std::size_t i = 0; i < d; ++i) {
                    Eigen::VectorXd next(prod.size() * per_dim[i].size());
                    for (Eigen::Index a = 0; a < prod.size(); ++a)
                        next.segment(a * per_dim[i].size(), per_dim[i].size()) = prod[a] * per_dim[i];
                    prod.swap(next);
                }
                if (lt.mask.size()) prod.array() *= lt.mask.array();
                out.col(static_cast<Eigen::Index>(m)) += prod;
            }
        }
    }
    return out;
}

inline Eigen::MatrixXd entrywise_cross_cov(const MultiOutputKernel& k, const std::vector<OutputFunctional>& a,
                                           const std::vector<OutputFunctional>& b, bool symmetric = false) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    for (std::size_t r = 0; r < a.size(); ++r)
        for (std::size_t c = symmetric ? r : 0; c < b.size(); ++c) {
            const double v = k.functional_cov(a[r], b[c]);
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
            if (symmetric) m(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(r)) = v;
        }
    return m;
}

}  // namespace detail

struct GramOptions {
    /// Use Kronecker terms between blocks that both carry a layout.
    bool use_kronecker = true;
};

/// Cross-covariance block L_a k L_b' between two observation blocks.
inline GramBlock cross_block(const MultiOutputKernel& k, const ObservationBlock& a, const ObservationBlock& b,
                             bool same_block, const GramOptions& options = {}) {
    GramBlock g;
    g.rows = static_cast<Eigen::Index>(a.size());
    g.cols = static_cast<Eigen::Index>(b.size());
    if (g.rows == 0 || g.cols == 0) return g;
    if (options.use_kronecker && a.layout && b.layout) {
        g.kronecker = detail::kronecker_terms(k, *a.layout, *b.layout);
        if (g.kronecker.empty()) g.dense_matrix = Eigen::MatrixXd::Zero(g.rows, g.cols);
    } else if (options.use_kronecker && a.layout) {
        g.dense_matrix = detail::layout_cross_cov(k, *a.layout, b.functionals);
    } else if (options.use_kronecker && b.layout) {
        g.dense_matrix = detail::layout_cross_cov(k, *b.layout, a.functionals).transpose();
    } else {
        g.dense_matrix = detail::entrywise_cross_cov(k, a.functionals, b.functionals, same_block);
    }
    return g;
}

/// Assembles G = L k L' + Sigma over the given blocks in order.
inline StructuredGram build_gram(const MultiOutputKernel& k, const std::vector<ObservationBlock>& blocks,
                                 const GramOptions& options = {}) {
    std::vector<Eigen::Index> sizes;
    Eigen::Index total = 0;
    for (const auto& b : blocks) {
        b.validate();
        sizes.push_back(static_cast<Eigen::Index>(b.size()));
        total += sizes.back();
    }
    std::vector<GramBlock> upper;
    for (std::size_t i = 0; i < blocks.size(); ++i)
        for (std::size_t j = i; j < blocks.size(); ++j) upper.push_back(cross_block(k, blocks[i], blocks[j], i == j, options));
    Eigen::VectorXd noise(total);
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
        noise.segment(off, b.noise_var.size()) = b.noise_var;
        off += b.noise_var.size();
    }
    return StructuredGram(std::move(sizes), std::move(upper), std::move(noise));
}

/// N x M matrix of covariances between all observations (stacked in block
/// order) and the test functionals.
inline Eigen::MatrixXd cross_covariance(const MultiOutputKernel& k, const std::vector<ObservationBlock>& blocks,
                                        const std::vector<OutputFunctional>& tests) {
    Eigen::Index total = 0;
    for (const auto& b : blocks) total += static_cast<Eigen::Index>(b.size());
    Eigen::MatrixXd out(total, static_cast<Eigen::Index>(tests.size()));
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
        const auto n = static_cast<Eigen::Index>(b.size());
        if (n == 0) continue;
        out.middleRows(off, n) = b.layout ? detail::layout_cross_cov(k, *b.layout, tests)
                                          : detail::entrywise_cross_cov(k, b.functionals, tests);
        off += n;
    }
    return out;
}

/// Affine observation values L[m] for a constant prior mean m.
inline Eigen::VectorXd apply_constant(const std::vector<ObservationBlock>& blocks, double c) {
    Eigen::Index total = 0;
    for (const auto& b : blocks) total += static_cast<Eigen::Index>(b.size());
    Eigen::VectorXd out(total);
    Eigen::Index off = 0;
    for (const auto& b : blocks)
        for (const auto& f : b.functionals) out[off++] = f.apply_to_constant(c);
    return out;
}

/// Stacked y - mu over blocks.
inline Eigen::VectorXd stacked_targets(const std::vector<ObservationBlock>& blocks) {
    Eigen::Index total = 0;
    for (const auto& b : blocks) total += static_cast<Eigen::Index>(b.size());
    Eigen::VectorXd out(total);
    Eigen::Index off = 0;
    for (const auto& b : blocks) {
        const auto n = static_cast<Eigen::Index>(b.size());
        out.segment(off, n) = b.rhs - b.noise_mean;
        off += n;
    }
    return out;
}

}  // namespace gpfvm
