#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <stdexcept>
#include <variant>

#include "linear_operator.hpp"
#include "trace.hpp"
#include "vector.hpp"

namespace pscs {

/*
 * The driving objective is E = H + F with H convex (possibly nonsmooth) and
 * F concave with L-Lipschitz gradient f = ∇F. One outer step discretizes the
 * gradient flow with the two-step backward differentiation formula and an
 * Adams-Bashforth extrapolation of f:
 *
 *   0 ∈ (1/(2δt))(3u⁺ − 4uⁿ + uⁿ⁻¹) + ∂H(u⁺) + (1+ωₙ) f(uⁿ) − ωₙ f(uⁿ⁻¹),
 *
 * realized as the strongly convex subproblem
 *
 *   u⁺ = argmin_u  H(u) + (3/(4δt))‖u − uⁿ‖² − ⟨gₙ, u⟩ + ½‖u − yⁿ‖²_M,
 *
 * where yⁿ = uⁿ + βₙ(uⁿ − uⁿ⁻¹) and gₙ collects the history and gradient
 * terms. The two structured H's below each admit an exact solve.
 */

/* H(u) = λ‖u‖₁ + ½‖Au − b‖²; metric M = λ̂I − AᵀA with λ̂ ≥ ‖AᵀA‖₂. */
struct L1PlusQuadratic {
    std::shared_ptr<const DenseMatrix> a;
    Vector b;
    double lambda_reg = 0.0;
    double lambda_ata = 0.0;
    Vector atb; // cached Aᵀb
};

/* H(u) = ½⟨A u, u⟩ − ⟨b0, u⟩ with A symmetric positive semidefinite. */
struct QuadraticLinear {
    OperatorPtr a_op;
    Vector b0;
    // Split A = a_implicit + diag(linearized_diag) used by the pdca_e-style
    // solve that keeps only a_implicit inside the subproblem.
    OperatorPtr a_implicit;
    Vector linearized_diag;
    double pdcae_alpha = 0.0;
};

struct SplitProblem {
    std::variant<L1PlusQuadratic, QuadraticLinear> h;
    std::function<Vector(const Vector&)> grad_f;
    std::function<double(const Vector&)> energy;
    double lipschitz_l = 0.0;
    // Iterates are expected to stay in the box ‖u‖_∞ ≤ box_radius where the
    // Lipschitz constant was derived; 0 disables the monitor.
    double box_radius = 0.0;
    std::size_t dim = 0;
};

enum class StepClass { strict, marginal, invalid };

/**
 * Classify a step size against the Lipschitz constant L of f.
 *
 * strict:   δt < 1/(2L), the energy-dissipation analysis applies as-is.
 * marginal: 1/(2L) ≤ max(1, ω̂)·δt < 3/(4L); runs, but only the weaker
 *           auxiliary-decrease guarantee is available.
 * invalid:  everything beyond.
 *
 * L = 0 (affine F) places every positive step in the strict class.
 */
inline StepClass validate_step(double lipschitz_l, double delta_t, double omega_hat = 1.0) {
    if (!(delta_t > 0.0)) throw std::invalid_argument("validate_step: delta_t must be positive");
    if (lipschitz_l < 0.0) throw std::invalid_argument("validate_step: negative Lipschitz constant");
    if (omega_hat < 0.0) throw std::invalid_argument("validate_step: negative omega_hat");
    if (lipschitz_l == 0.0) return StepClass::strict;
    if (delta_t < 1.0 / (2.0 * lipschitz_l)) return StepClass::strict;
    if (std::max(1.0, omega_hat) * delta_t < 3.0 / (4.0 * lipschitz_l)) return StepClass::marginal;
    return StepClass::invalid;
}

struct StepParams {
    double delta_t = 1.0;
    double omega_n = 1.0;
    double beta_n = 0.0;
};

/* Where the extrapolated-gradient linear term is evaluated. The standard
 * form uses uⁿ; the two alternatives move the gradient or the history term
 * to the extrapolated point yⁿ. All three coincide when βₙ = 0. */
enum class SubproblemVariant { standard, grad_at_y, history_at_y };

/* Everything a backend needs for one subproblem solve. fn_lin is the
 * assembled linear term gₙ; drive = (1+ωₙ) f(uⁿ) − ωₙ f(uⁿ⁻¹) is kept for
 * diagnostics. */
struct SubproblemSpec {
    Vector u_n;
    Vector u_nm1;
    Vector y_n;
    Vector drive;
    Vector fn_lin;
    StepParams params;
};

/* f(uⁿ⁻¹) carried between steps so each assembly costs one gradient call. */
struct GradientCache {
    Vector f_prev;
    bool has_prev = false;
};

/**
 * Build the subproblem data at (uⁿ, uⁿ⁻¹). Calls the gradient oracle once
 * when the cache holds f(uⁿ⁻¹) (or uⁿ⁻¹ == uⁿ, as in the degenerate first
 * step), twice otherwise; grad_at_y always costs one extra call for f(yⁿ).
 */
inline SubproblemSpec assemble_spec(const SplitProblem& problem, const Vector& u_n,
                                    const Vector& u_nm1, const StepParams& params,
                                    GradientCache& cache, OracleCounters& counters,
                                    SubproblemVariant variant = SubproblemVariant::standard) {
    if (u_n.size() != problem.dim || u_nm1.size() != problem.dim)
        throw std::invalid_argument("assemble_spec: iterate dimension mismatch");

    SubproblemSpec spec;
    spec.params = params;
    spec.u_n = u_n;
    spec.u_nm1 = u_nm1;
    spec.y_n = combine(1.0 + params.beta_n, u_n, -params.beta_n, u_nm1);

    Vector f_curr = problem.grad_f(u_n);
    ++counters.f_evals;
    Vector f_prev;
    if (cache.has_prev) {
        f_prev = cache.f_prev;
    } else if (u_nm1 == u_n) {
        f_prev = f_curr;
    } else {
        f_prev = problem.grad_f(u_nm1);
        ++counters.f_evals;
    }

    const double w = params.omega_n;
    spec.drive = combine(1.0 + w, f_curr, -w, f_prev);

    const double inv2dt = 1.0 / (2.0 * params.delta_t);
    switch (variant) {
    case SubproblemVariant::standard:
        spec.fn_lin = combine(inv2dt, u_n, -inv2dt, u_nm1);
        axpy(-1.0, spec.drive, spec.fn_lin);
        break;
    case SubproblemVariant::grad_at_y: {
        Vector f_y = problem.grad_f(spec.y_n);
        ++counters.f_evals;
        spec.fn_lin = combine(inv2dt, spec.y_n, -inv2dt, u_nm1);
        axpy(-1.0, f_y, spec.fn_lin);
        axpy(-w, f_curr, spec.fn_lin);
        axpy(w, f_prev, spec.fn_lin);
        break;
    }
    case SubproblemVariant::history_at_y:
        spec.fn_lin = combine(inv2dt, spec.y_n, -inv2dt, u_nm1);
        axpy(-1.0, spec.drive, spec.fn_lin);
        break;
    }

    cache.f_prev = std::move(f_curr);
    cache.has_prev = true;
    return spec;
}

/**
 * Exact subproblem solve for the l1-plus-quadratic structure with metric
 * M = λ̂I − AᵀA. The quadratic parts cancel to a scaled identity, so the
 * minimizer is one soft-thresholding:
 *
 *   u⁺ = S_{λ/ρ}(c/ρ),  ρ = λ̂ + 3/(2δt),
 *   c  = Aᵀb + (3/(2δt))uⁿ + gₙ + M yⁿ.
 *
 * Costs exactly one A-apply and one Aᵀ-apply (for M yⁿ).
 */
inline Vector solve_subproblem_prox(const SubproblemSpec& spec, const SplitProblem& problem,
                                    OracleCounters& counters) {
    const auto* st = std::get_if<L1PlusQuadratic>(&problem.h);
    if (!st) throw std::logic_error("solve_subproblem_prox: needs the l1-plus-quadratic structure");

    const double dt = spec.params.delta_t;
    const double rho = st->lambda_ata + 1.5 / dt;

    Vector ay(st->a->rows());
    st->a->apply(spec.y_n, ay);
    Vector atay(st->a->cols());
    st->a->apply_transpose(ay, atay);
    counters.a_applies += 2;

    Vector c = st->atb;
    axpy(1.5 / dt, spec.u_n, c);
    axpy(1.0, spec.fn_lin, c);
    axpy(st->lambda_ata, spec.y_n, c);
    axpy(-1.0, atay, c);

    Vector u(c.size());
    for (std::size_t i = 0; i < c.size(); ++i)
        u[i] = soft_threshold(c[i], st->lambda_reg) / rho;
    return u;
}

/**
 * ∇F̂ⁿ of the surrogate at an arbitrary point,
 *   ∇F̂ⁿ(u) = (1/(2δt))(u − uⁿ⁻¹) − f(u) − ω(f(uⁿ) − f(uⁿ⁻¹)).
 * At u = uⁿ this reproduces the standard fn_lin. Test and diagnostics aid;
 * evaluates the gradient oracle up to three times.
 */
inline Vector grad_fn_hat(const SplitProblem& problem, const Vector& u, const Vector& u_n,
                          const Vector& u_nm1, double delta_t, double omega) {
    const double inv2dt = 1.0 / (2.0 * delta_t);
    Vector g = combine(inv2dt, u, -inv2dt, u_nm1);
    Vector fu = problem.grad_f(u);
    axpy(-1.0, fu, g);
    if (omega != 0.0) {
        Vector fn = problem.grad_f(u_n);
        Vector fp = problem.grad_f(u_nm1);
        axpy(-omega, fn, g);
        axpy(omega, fp, g);
    }
    return g;
}

} // namespace pscs
