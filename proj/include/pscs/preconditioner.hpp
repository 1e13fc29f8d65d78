#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>

#include "linear_operator.hpp"
#include "splitting.hpp"
#include "trace.hpp"
#include "vector.hpp"

namespace pscs {

enum class PreconKind { jacobi, sgs, richardson };

inline const char* precon_name(PreconKind k) {
    switch (k) {
    case PreconKind::jacobi: return "jacobi";
    case PreconKind::sgs: return "sgs";
    case PreconKind::richardson: return "richardson";
    }
    return "?";
}

namespace detail {

/* 𝕄 = (D+L) D⁻¹ (D+U) for the symmetric Gauss-Seidel splitting of T. */
class SgsMetricOp final : public LinearOperator {
public:
    SgsMetricOp(SparseCsr t, Vector d) : t_(std::move(t)), d_(std::move(d)) {}

    std::size_t rows() const override { return t_.rows(); }
    std::size_t cols() const override { return t_.cols(); }

    void apply(const Vector& x, Vector& y) const override {
        const std::size_t n = t_.rows();
        Vector v(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t p = t_.ptr[i]; p < t_.ptr[i + 1]; ++p)
                if (t_.col[p] >= i) s += t_.val[p] * x[t_.col[p]];
            v[i] = s / d_[i];
        }
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t p = t_.ptr[i]; p < t_.ptr[i + 1]; ++p)
                if (t_.col[p] <= i) s += t_.val[p] * v[t_.col[p]];
            y[i] = s;
        }
    }

private:
    SparseCsr t_;
    Vector d_;
};

} // namespace detail

/*
 * Splitting preconditioner 𝕄 for T = (3/(2δt))I + A. The induced subproblem
 * metric is M = 𝕄 − T, so each sweep of
 *
 *   v ← v + 𝕄⁻¹(bⁿ − T v)
 *
 * is an exact solve of the M-metric subproblem restarted at the previous
 * sweep. Jacobi (𝕄 = diag T) is accepted only when T is strictly diagonally
 * dominant; otherwise the build falls back to symmetric Gauss-Seidel, whose
 * M = L D⁻¹ Lᵀ is positive semidefinite unconditionally.
 */
struct Preconditioner {
    PreconKind kind = PreconKind::jacobi;
    bool fell_back_to_sgs = false;
    double tau = 0.0;
    Vector diag;
    SparseCsr t; // retained for the sgs sweeps
    std::size_t dim = 0;

    void apply_inverse(const Vector& r, Vector& z) const {
        switch (kind) {
        case PreconKind::jacobi:
            for (std::size_t i = 0; i < dim; ++i) z[i] = r[i] / diag[i];
            return;
        case PreconKind::richardson:
            for (std::size_t i = 0; i < dim; ++i) z[i] = tau * r[i];
            return;
        case PreconKind::sgs: {
            Vector a(dim, 0.0);
            for (std::size_t i = 0; i < dim; ++i) {
                double s = r[i];
                for (std::size_t p = t.ptr[i]; p < t.ptr[i + 1]; ++p)
                    if (t.col[p] < i) s -= t.val[p] * a[t.col[p]];
                a[i] = s / diag[i];
            }
            for (std::size_t ii = dim; ii-- > 0;) {
                double s = diag[ii] * a[ii];
                for (std::size_t p = t.ptr[ii]; p < t.ptr[ii + 1]; ++p)
                    if (t.col[p] > ii) s -= t.val[p] * z[t.col[p]];
                z[ii] = s / diag[ii];
            }
            return;
        }
        }
    }

    Vector apply_inverse(const Vector& r) const {
        Vector z(dim);
        apply_inverse(r, z);
        return z;
    }

    OperatorPtr metric_operator() const {
        switch (kind) {
        case PreconKind::jacobi: return std::make_shared<DiagonalOp>(diag);
        case PreconKind::richardson: return std::make_shared<ScaledIdentityOp>(1.0 / tau, dim);
        case PreconKind::sgs: return std::make_shared<detail::SgsMetricOp>(t, diag);
        }
        throw std::logic_error("metric_operator: unknown kind");
    }
};

inline bool strictly_diagonally_dominant(const SparseCsr& t) {
    for (std::size_t i = 0; i < t.rows(); ++i) {
        double off = 0.0, dia = 0.0;
        for (std::size_t p = t.ptr[i]; p < t.ptr[i + 1]; ++p) {
            if (t.col[p] == i)
                dia += t.val[p];
            else
                off += std::abs(t.val[p]);
        }
        if (!(std::abs(dia) > off)) return false;
    }
    return true;
}

/**
 * Build 𝕄 from the assembled T. Jacobi downgrades to sgs when T is not
 * strictly diagonally dominant (check fell_back_to_sgs and warn). Richardson
 * needs tau in (0, 1/λmax(T)] to keep M = (1/τ)I − T positive semidefinite;
 * only positivity is enforced here.
 */
inline Preconditioner build_preconditioner(const SparseCsr& t, PreconKind kind, double tau = 0.0) {
    if (t.rows() != t.cols()) throw std::invalid_argument("build_preconditioner: T must be square");
    Preconditioner pc;
    pc.dim = t.rows();
    pc.kind = kind;
    if (kind == PreconKind::richardson) {
        if (!(tau > 0.0)) throw std::invalid_argument("build_preconditioner: tau must be positive");
        pc.tau = tau;
        return pc;
    }
    if (kind == PreconKind::jacobi && !strictly_diagonally_dominant(t)) {
        pc.kind = PreconKind::sgs;
        pc.fell_back_to_sgs = true;
    }
    pc.diag = t.diagonal();
    for (double d : pc.diag)
        if (!(d > 0.0))
            throw std::invalid_argument("build_preconditioner: T needs a positive diagonal");
    pc.t = t;
    return pc;
}

struct PrecondSolveResult {
    Vector u;
    // bⁿ − T v entering the last sweep; one sweep behind the returned u
    Vector residual;
};

/**
 * k_steps sweeps of v ← v + 𝕄⁻¹(bⁿ − T v) started at v = yⁿ, where
 * bⁿ = b0 + (3/(2δt))uⁿ + gₙ and T = (3/(2δt))I + A. One sweep with the
 * Jacobi 𝕄 is exactly the M = diag(T) − T subproblem solve.
 */
inline PrecondSolveResult solve_subproblem_preconditioned(const SubproblemSpec& spec,
                                                          const SplitProblem& problem,
                                                          const Preconditioner& pc,
                                                          int k_steps,
                                                          OracleCounters& counters) {
    const auto* qt = std::get_if<QuadraticLinear>(&problem.h);
    if (!qt)
        throw std::logic_error("solve_subproblem_preconditioned: needs the quadratic structure");
    if (k_steps < 1)
        throw std::invalid_argument("solve_subproblem_preconditioned: k_steps must be >= 1");

    const std::size_t n = problem.dim;
    const double shift = 1.5 / spec.params.delta_t;

    Vector b_n = qt->b0;
    axpy(shift, spec.u_n, b_n);
    axpy(1.0, spec.fn_lin, b_n);

    PrecondSolveResult out;
    out.u = spec.y_n;
    Vector av(n), z(n);
    for (int k = 0; k < k_steps; ++k) {
        qt->a_op->apply(out.u, av);
        ++counters.t_applies;
        out.residual = b_n;
        axpy(-1.0, av, out.residual);
        axpy(-shift, out.u, out.residual);
        pc.apply_inverse(out.residual, z);
        axpy(1.0, z, out.u);
    }
    return out;
}

} // namespace pscs
