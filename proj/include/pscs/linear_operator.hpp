#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <utility>

#include "vector.hpp"

namespace pscs {

/* Minimal operator interface: everything the solvers need is y = op(x),
 * the dimensions, and (for preconditioning) diagonal access. */
class LinearOperator {
public:
    virtual ~LinearOperator() = default;

    virtual std::size_t rows() const = 0;
    virtual std::size_t cols() const = 0;

    // y = op * x; y is sized by the caller to rows()
    virtual void apply(const Vector& x, Vector& y) const = 0;

    virtual bool has_diagonal() const { return false; }
    virtual Vector diagonal() const {
        throw std::logic_error("diagonal() not available for this operator");
    }
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

inline Vector apply_operator(const LinearOperator& op, const Vector& x) {
    if (x.size() != op.cols())
        throw std::invalid_argument("apply_operator: dimension mismatch (" +
                                    std::to_string(x.size()) + " vs " +
                                    std::to_string(op.cols()) + ")");
    Vector y(op.rows());
    op.apply(x, y);
    return y;
}

/** ⟨Mx, x⟩ for symmetric PSD M. A negative value beyond roundoff means M is not PSD. */
inline double m_norm_sq(const LinearOperator& m, const Vector& x) {
    Vector mx = apply_operator(m, x);
    double v = dot(x, mx);
    if (v < -1e-12 * norm2_sq(x))
        throw std::runtime_error("m_norm_sq: operator is not positive semidefinite");
    return v;
}

/* Dense column-major matrix; used for the regression design matrix A. */
class DenseMatrix final : public LinearOperator {
public:
    DenseMatrix(std::size_t m, std::size_t n) : m_(m), n_(n), a_(m * n, 0.0) {}

    std::size_t rows() const override { return m_; }
    std::size_t cols() const override { return n_; }

    double& at(std::size_t i, std::size_t j) { return a_[j * m_ + i]; }
    double at(std::size_t i, std::size_t j) const { return a_[j * m_ + i]; }

    double* col(std::size_t j) { return a_.data() + j * m_; }
    const double* col(std::size_t j) const { return a_.data() + j * m_; }

    void apply(const Vector& x, Vector& y) const override {
        std::fill(y.begin(), y.end(), 0.0);
        for (std::size_t j = 0; j < n_; ++j) {
            double xj = x[j];
            if (xj == 0.0) continue;
            const double* cj = col(j);
            for (std::size_t i = 0; i < m_; ++i) y[i] += cj[i] * xj;
        }
    }

    // y = Aᵀ x
    void apply_transpose(const Vector& x, Vector& y) const {
        for (std::size_t j = 0; j < n_; ++j) {
            const double* cj = col(j);
            double s = 0.0;
            for (std::size_t i = 0; i < m_; ++i) s += cj[i] * x[i];
            y[j] = s;
        }
    }

    bool has_diagonal() const override { return m_ == n_; }
    Vector diagonal() const override {
        if (m_ != n_) throw std::logic_error("diagonal() on a rectangular matrix");
        Vector d(n_);
        for (std::size_t i = 0; i < n_; ++i) d[i] = at(i, i);
        return d;
    }

private:
    std::size_t m_, n_;
    std::vector<double> a_;
};

/* Compressed-row sparse matrix; used for graph weights and Laplacians. */
class SparseCsr final : public LinearOperator {
    std::size_t m_ = 0, n_ = 0;

public:
    SparseCsr() = default;
    SparseCsr(std::size_t m, std::size_t n) : m_(m), n_(n), ptr(m + 1, 0) {}

    std::size_t rows() const override { return m_; }
    std::size_t cols() const override { return n_; }

    void apply(const Vector& x, Vector& y) const override {
        for (std::size_t i = 0; i < m_; ++i) {
            double s = 0.0;
            for (std::size_t p = ptr[i]; p < ptr[i + 1]; ++p) s += val[p] * x[col[p]];
            y[i] = s;
        }
    }

    bool has_diagonal() const override { return m_ == n_; }
    Vector diagonal() const override {
        Vector d(m_, 0.0);
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t p = ptr[i]; p < ptr[i + 1]; ++p)
                if (col[p] == i) d[i] += val[p];
        return d;
    }

    /** Build from (row, col) -> value triplets, summing duplicates. */
    static SparseCsr from_triplets(std::size_t m, std::size_t n,
                                   const std::map<std::pair<std::size_t, std::size_t>, double>& t) {
        SparseCsr s(m, n);
        for (const auto& [rc, v] : t) s.ptr[rc.first + 1]++;
        for (std::size_t i = 0; i < m; ++i) s.ptr[i + 1] += s.ptr[i];
        s.col.resize(t.size());
        s.val.resize(t.size());
        std::vector<std::size_t> fill(m, 0);
        for (const auto& [rc, v] : t) {
            std::size_t p = s.ptr[rc.first] + fill[rc.first]++;
            s.col[p] = rc.second;
            s.val[p] = v;
        }
        return s;
    }

    std::vector<std::size_t> ptr;
    std::vector<std::size_t> col;
    std::vector<double> val;
};

inline SparseCsr csr_from_dense(const DenseMatrix& a, double drop_tol = 0.0) {
    std::map<std::pair<std::size_t, std::size_t>, double> t;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            if (std::abs(a.at(i, j)) > drop_tol) t[{i, j}] = a.at(i, j);
    return SparseCsr::from_triplets(a.rows(), a.cols(), t);
}

/** C = A + shift*I + diag(d); A square CSR. Either extra term may be empty/zero. */
inline SparseCsr csr_add_diagonal(const SparseCsr& a, double shift, const Vector& d = {}) {
    std::map<std::pair<std::size_t, std::size_t>, double> t;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t p = a.ptr[i]; p < a.ptr[i + 1]; ++p)
            t[{i, a.col[p]}] += a.val[p];
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double extra = shift + (d.empty() ? 0.0 : d[i]);
        if (extra != 0.0) t[{i, i}] += extra;
    }
    return SparseCsr::from_triplets(a.rows(), a.cols(), t);
}

class DiagonalOp final : public LinearOperator {
public:
    explicit DiagonalOp(Vector d) : d_(std::move(d)) {}

    std::size_t rows() const override { return d_.size(); }
    std::size_t cols() const override { return d_.size(); }

    void apply(const Vector& x, Vector& y) const override {
        for (std::size_t i = 0; i < d_.size(); ++i) y[i] = d_[i] * x[i];
    }

    bool has_diagonal() const override { return true; }
    Vector diagonal() const override { return d_; }

private:
    Vector d_;
};

class ScaledIdentityOp final : public LinearOperator {
public:
    ScaledIdentityOp(double c, std::size_t n) : c_(c), n_(n) {}

    std::size_t rows() const override { return n_; }
    std::size_t cols() const override { return n_; }

    void apply(const Vector& x, Vector& y) const override {
        for (std::size_t i = 0; i < n_; ++i) y[i] = c_ * x[i];
    }

    bool has_diagonal() const override { return true; }
    Vector diagonal() const override { return Vector(n_, c_); }

private:
    double c_;
    std::size_t n_;
};

/* Weighted sum of operators sharing one shape: y = Σ c_k op_k x. */
class ScaledSumOp final : public LinearOperator {
public:
    explicit ScaledSumOp(std::vector<std::pair<double, OperatorPtr>> terms)
        : terms_(std::move(terms)) {
        if (terms_.empty()) throw std::invalid_argument("ScaledSumOp: no terms");
        for (const auto& [c, op] : terms_)
            if (op->rows() != terms_[0].second->rows() || op->cols() != terms_[0].second->cols())
                throw std::invalid_argument("ScaledSumOp: shape mismatch");
    }

    std::size_t rows() const override { return terms_[0].second->rows(); }
    std::size_t cols() const override { return terms_[0].second->cols(); }

    void apply(const Vector& x, Vector& y) const override {
        std::fill(y.begin(), y.end(), 0.0);
        Vector scratch(rows());
        for (const auto& [c, op] : terms_) {
            op->apply(x, scratch);
            axpy(c, scratch, y);
        }
    }

    bool has_diagonal() const override {
        for (const auto& [c, op] : terms_)
            if (!op->has_diagonal()) return false;
        return true;
    }
    Vector diagonal() const override {
        Vector d(rows(), 0.0);
        for (const auto& [c, op] : terms_) axpy(c, op->diagonal(), d);
        return d;
    }

private:
    std::vector<std::pair<double, OperatorPtr>> terms_;
};

/* AᵀA without forming the Gram matrix. */
class GramOp final : public LinearOperator {
public:
    explicit GramOp(std::shared_ptr<const DenseMatrix> a) : a_(std::move(a)) {}

    std::size_t rows() const override { return a_->cols(); }
    std::size_t cols() const override { return a_->cols(); }

    void apply(const Vector& x, Vector& y) const override {
        Vector ax(a_->rows());
        a_->apply(x, ax);
        a_->apply_transpose(ax, y);
    }

private:
    std::shared_ptr<const DenseMatrix> a_;
};

} // namespace pscs
