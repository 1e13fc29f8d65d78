#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cg.hpp"
#include "preconditioner.hpp"
#include "schedules.hpp"
#include "splitting.hpp"
#include "trace.hpp"

namespace pscs {

/*
 * Outer iteration drivers.
 *
 * pubc_e is the full scheme: BDF2 history, Adams-Bashforth drive with weight
 * ωₙ, extrapolation yⁿ, metric M through the backend. bapdca_e is the same
 * machinery with ω pinned to 1. dca, pdca_e and bdca are the comparison
 * algorithms, each with closed-form (l1-plus-quadratic) and conjugate-
 * gradient (quadratic) subproblem paths.
 */

enum class Algorithm { dca, pdca_e, bdca, bapdca_e, pubc_e };

inline const char* algorithm_name(Algorithm a) {
    switch (a) {
    case Algorithm::dca: return "dca";
    case Algorithm::pdca_e: return "pdca_e";
    case Algorithm::bdca: return "bdca";
    case Algorithm::bapdca_e: return "bapdca_e";
    case Algorithm::pubc_e: return "pubc_e";
    }
    return "?";
}

inline Algorithm algorithm_from_name(const std::string& s) {
    if (s == "dca") return Algorithm::dca;
    if (s == "pdca_e") return Algorithm::pdca_e;
    if (s == "bdca") return Algorithm::bdca;
    if (s == "bapdca_e") return Algorithm::bapdca_e;
    if (s == "pubc_e") return Algorithm::pubc_e;
    throw std::invalid_argument("unknown algorithm '" + s + "'");
}

inline bool is_bdf_family(Algorithm a) {
    return a == Algorithm::bapdca_e || a == Algorithm::pubc_e;
}

enum class BackendKind { prox, preconditioned };

struct BackendConfig {
    BackendKind kind = BackendKind::prox;
    PreconKind precon = PreconKind::jacobi;
    int k_steps = 1;
    double richardson_tau = 0.0;
};

enum class StopKind { rel_change, grad_norm, dice_bound, composite };

struct StopRule {
    StopKind kind = StopKind::rel_change;
    double tol = 1e-5;
    double dice_target = 0.98;
    std::vector<StopRule> parts;

    static StopRule rel_change(double tol) {
        if (!(tol > 0.0)) throw std::invalid_argument("StopRule: tol must be positive");
        StopRule r;
        r.kind = StopKind::rel_change;
        r.tol = tol;
        return r;
    }
    static StopRule grad_norm(double tol) {
        if (!(tol > 0.0)) throw std::invalid_argument("StopRule: tol must be positive");
        StopRule r;
        r.kind = StopKind::grad_norm;
        r.tol = tol;
        return r;
    }
    static StopRule dice_bound(double target = 0.98) {
        if (!(target > 0.0 && target <= 1.0))
            throw std::invalid_argument("StopRule: dice target must lie in (0,1]");
        StopRule r;
        r.kind = StopKind::dice_bound;
        r.dice_target = target;
        return r;
    }
    static StopRule composite(std::vector<StopRule> parts) {
        if (parts.empty()) throw std::invalid_argument("StopRule: composite needs parts");
        StopRule r;
        r.kind = StopKind::composite;
        r.parts = std::move(parts);
        return r;
    }
};

enum class TraceLevel { light, full };

struct SolverConfig {
    Algorithm algorithm = Algorithm::pubc_e;
    double delta_t = 4.0;
    BetaSchedule beta;   // pdca_e, bapdca_e, pubc_e
    OmegaSchedule omega; // pubc_e only; bapdca_e pins ω = 1
    BackendConfig backend;
    StopRule stop = StopRule::rel_change(1e-5);
    int max_iter = 5000;
    SubproblemVariant variant = SubproblemVariant::standard;

    // dca/bdca modulus α; 0 means the problem default (λ̂ for l1-plus-quadratic)
    double dca_alpha = 0.0;

    // bdca backtracking
    double ls_t0 = 1.0;
    double ls_alpha = 1e-4;
    double ls_halving = 0.5;
    double ls_t_min = 1e-8;
    bool ls_adaptive = true;

    // conjugate-gradient subproblems (quadratic dca/pdca_e)
    double cg_tol = 1e-8;
    int cg_max_iter = 10000;

    // recording
    TraceLevel trace_level = TraceLevel::full;
    int residual_every = 0; // call residual_fn every k records; 0 = final only
    bool record_iterates = false;
    bool compute_surrogate = false;
    std::function<double(const Vector&)> dice_fn;     // segmentation quality, optional
    std::function<double(const Vector&)> residual_fn; // first-order residual, optional
};

struct IterationState {
    int n = 0;
    Vector u_curr;
    Vector u_prev;
    Vector y_prev; // y^{n-1}; empty until an extrapolating step ran
    GradientCache cache;
    BetaSchedule beta;
    OmegaSchedule omega;

    double beta_last = 0.0;
    double omega_last = 0.0;
    bool restart_last = false;
    double last_energy = detail::qnan;   // bdca: accepted line-search energy
    double last_residual = detail::qnan; // preconditioned backend: ‖bⁿ − Tv‖
    Vector last_drive;

    double ls_t_init = 1.0;
    int ls_accept_streak = 0;
};

inline IterationState make_state(const SolverConfig& config, const Vector& u0) {
    IterationState st;
    st.u_curr = u0;
    st.u_prev = u0;
    st.beta = config.beta;
    st.omega = config.omega;
    st.ls_t_init = config.ls_t0;
    return st;
}

/* Operators and constants derived once per run. */
struct RunResources {
    Preconditioner precon;
    bool has_precon = false;
    OperatorPtr dca_op;   // quadratic H: A + αI
    OperatorPtr pdcae_op; // quadratic H: A_implicit + α̂I
    double dca_alpha = 0.0;
    double pdcae_alpha = 0.0;
    OracleCounters* counters = nullptr;
    std::vector<std::string>* warnings = nullptr;
};

namespace detail {

inline void cg_warning(std::vector<std::string>& w, const char* where, int n) {
    w.push_back(std::string(where) + ": conjugate gradient hit its iteration cap at outer step " +
                std::to_string(n));
}

} // namespace detail

/** One step of the unified scheme (also bapdca_e via ω ≡ 1). */
inline void step_pubce(const SplitProblem& problem, IterationState& st, const SolverConfig& config,
                       RunResources& res) {
    bool restart_signal = false;
    if (st.beta.kind == BetaKind::fista_adaptive_restart && !st.y_prev.empty())
        restart_signal = adaptive_restart_check(st.y_prev, st.u_curr, st.u_prev);
    const double beta_n = next_beta(st.beta, restart_signal);
    st.restart_last = st.beta.last_reset;
    const double omega_n =
        config.algorithm == Algorithm::bapdca_e ? 1.0 : next_omega(st.omega);
    st.beta_last = beta_n;
    st.omega_last = omega_n;

    StepParams params{config.delta_t, omega_n, beta_n};
    SubproblemSpec spec = assemble_spec(problem, st.u_curr, st.u_prev, params, st.cache,
                                        *res.counters, config.variant);
    Vector u_next;
    if (config.backend.kind == BackendKind::prox) {
        u_next = solve_subproblem_prox(spec, problem, *res.counters);
        st.last_residual = detail::qnan;
    } else {
        auto out = solve_subproblem_preconditioned(spec, problem, res.precon,
                                                   config.backend.k_steps, *res.counters);
        u_next = std::move(out.u);
        st.last_residual = norm2(out.residual);
    }

    st.y_prev = std::move(spec.y_n);
    st.last_drive = std::move(spec.drive);
    st.u_prev = std::move(st.u_curr);
    st.u_curr = std::move(u_next);
    ++st.n;
}

namespace detail {

/* Shared DCA subproblem: argmin Φ₁(u) − ⟨∇Φ₂(uⁿ), u⟩ from the point u. */
inline Vector dca_point(const SplitProblem& problem, const Vector& u, const SolverConfig& config,
                        RunResources& res, int n) {
    if (const auto* l1 = std::get_if<L1PlusQuadratic>(&problem.h)) {
        // Φ₂ = (α/2)‖u‖² + P₂(u) − ½‖Au−b‖², ∇Φ₂ = αu − Aᵀ(Au−b) − f(u)
        Vector au(l1->a->rows());
        l1->a->apply(u, au);
        axpy(-1.0, l1->b, au);
        Vector g(problem.dim);
        l1->a->apply_transpose(au, g);
        res.counters->a_applies += 2;
        scale(-1.0, g);
        axpy(res.dca_alpha, u, g);
        Vector f = problem.grad_f(u);
        ++res.counters->f_evals;
        axpy(-1.0, f, g);
        Vector out(problem.dim);
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = soft_threshold(g[i], l1->lambda_reg) / res.dca_alpha;
        return out;
    }
    const auto& qt = std::get<QuadraticLinear>(problem.h);
    // (A + αI) u⁺ = b0 + αuⁿ − f(uⁿ)
    Vector f = problem.grad_f(u);
    ++res.counters->f_evals;
    Vector rhs = qt.b0;
    axpy(res.dca_alpha, u, rhs);
    axpy(-1.0, f, rhs);
    auto cg = conjugate_gradient(*res.dca_op, rhs, u, config.cg_tol, config.cg_max_iter);
    res.counters->cg_iterations += cg.iterations;
    res.counters->t_applies += cg.applies;
    if (!cg.converged) cg_warning(*res.warnings, "dca", n);
    return std::move(cg.x);
}

} // namespace detail

inline void step_dca(const SplitProblem& problem, IterationState& st, const SolverConfig& config,
                     RunResources& res) {
    Vector u_next = detail::dca_point(problem, st.u_curr, config, res, st.n);
    st.beta_last = 0.0;
    st.omega_last = 0.0;
    st.restart_last = false;
    st.u_prev = std::move(st.u_curr);
    st.u_curr = std::move(u_next);
    ++st.n;
}

/** Proximal DCA with extrapolation: gradient of the smooth convex part at yⁿ,
 *  concave part linearized at uⁿ, proximal weight α̂. */
inline void step_pdcae(const SplitProblem& problem, IterationState& st, const SolverConfig& config,
                       RunResources& res) {
    bool restart_signal = false;
    if (st.beta.kind == BetaKind::fista_adaptive_restart && !st.y_prev.empty())
        restart_signal = adaptive_restart_check(st.y_prev, st.u_curr, st.u_prev);
    const double beta_n = next_beta(st.beta, restart_signal);
    st.restart_last = st.beta.last_reset;
    st.beta_last = beta_n;
    st.omega_last = 0.0;

    Vector y = combine(1.0 + beta_n, st.u_curr, -beta_n, st.u_prev);
    Vector f = problem.grad_f(st.u_curr);
    ++res.counters->f_evals;

    Vector u_next;
    if (const auto* l1 = std::get_if<L1PlusQuadratic>(&problem.h)) {
        const double ahat = res.pdcae_alpha;
        Vector ay(l1->a->rows());
        l1->a->apply(y, ay);
        axpy(-1.0, l1->b, ay);
        Vector g(problem.dim);
        l1->a->apply_transpose(ay, g);
        res.counters->a_applies += 2;
        axpy(1.0, f, g);
        u_next.resize(problem.dim);
        for (std::size_t i = 0; i < u_next.size(); ++i)
            u_next[i] = soft_threshold(y[i] - g[i] / ahat, l1->lambda_reg / ahat);
    } else {
        const auto& qt = std::get<QuadraticLinear>(problem.h);
        // (A₁ + α̂I) u⁺ = α̂yⁿ − f(uⁿ) − (diag(d) yⁿ − b0), A = A₁ + diag(d)
        const double ahat = res.pdcae_alpha;
        Vector rhs = scaled(y, ahat);
        axpy(-1.0, f, rhs);
        for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] -= qt.linearized_diag[i] * y[i];
        axpy(1.0, qt.b0, rhs);
        auto cg = conjugate_gradient(*res.pdcae_op, rhs, st.u_curr, config.cg_tol,
                                     config.cg_max_iter);
        res.counters->cg_iterations += cg.iterations;
        res.counters->t_applies += cg.applies;
        if (!cg.converged) detail::cg_warning(*res.warnings, "pdca_e", st.n);
        u_next = std::move(cg.x);
    }

    st.y_prev = std::move(y);
    st.u_prev = std::move(st.u_curr);
    st.u_curr = std::move(u_next);
    ++st.n;
}

/** DCA point plus backtracking along d = v − uⁿ with the squared-step
 *  sufficient-decrease test; optionally self-adaptive trial step. */
inline void step_bdca(const SplitProblem& problem, IterationState& st, const SolverConfig& config,
                      RunResources& res) {
    Vector v = detail::dca_point(problem, st.u_curr, config, res, st.n);
    Vector d = sub(v, st.u_curr);
    const double dn2 = norm2_sq(d);

    Vector u_next;
    double e_accepted = detail::qnan;
    if (dn2 == 0.0) {
        u_next = std::move(v);
    } else {
        double e_v = problem.energy(v);
        ++res.counters->energy_evals;
        double t = config.ls_adaptive ? st.ls_t_init : config.ls_t0;
        bool first_trial = true;
        bool accepted = false;
        while (t >= config.ls_t_min) {
            Vector trial = v;
            axpy(t, d, trial);
            double e_t = problem.energy(trial);
            ++res.counters->energy_evals;
            if (e_t <= e_v - config.ls_alpha * t * t * dn2) {
                u_next = std::move(trial);
                e_accepted = e_t;
                accepted = true;
                break;
            }
            t *= config.ls_halving;
            first_trial = false;
        }
        if (!accepted) {
            u_next = std::move(v);
            e_accepted = e_v;
        }
        if (config.ls_adaptive) {
            if (accepted && first_trial) {
                if (++st.ls_accept_streak >= 2) {
                    st.ls_t_init *= 2.0;
                    st.ls_accept_streak = 0;
                }
            } else {
                st.ls_accept_streak = 0;
            }
        }
    }

    st.last_energy = e_accepted;
    st.beta_last = 0.0;
    st.omega_last = 0.0;
    st.restart_last = false;
    st.u_prev = std::move(st.u_curr);
    st.u_curr = std::move(u_next);
    ++st.n;
}

struct StopContext {
    const SplitProblem* problem = nullptr;
    const Vector* u_curr = nullptr;
    double step_norm = 0.0;
    double dice_value = detail::qnan; // filled by the caller when available
    OracleCounters* counters = nullptr;
};

struct StopDecision {
    bool stop = false;
    std::string reason;
};

/** Evaluate one stopping rule; composite joins every satisfied part's name. */
inline StopDecision check_stop(const StopRule& rule, StopContext& ctx) {
    switch (rule.kind) {
    case StopKind::rel_change: {
        double rel = ctx.step_norm / std::max(1.0, norm2(*ctx.u_curr));
        return {rel < rule.tol, "rel-change"};
    }
    case StopKind::grad_norm: {
        const auto* qt = std::get_if<QuadraticLinear>(&ctx.problem->h);
        if (!qt)
            throw std::logic_error("grad-norm stopping needs a smooth (quadratic) objective");
        Vector g = apply_operator(*qt->a_op, *ctx.u_curr);
        ++ctx.counters->t_applies;
        axpy(-1.0, qt->b0, g);
        Vector f = ctx.problem->grad_f(*ctx.u_curr);
        ++ctx.counters->f_evals;
        axpy(1.0, f, g);
        ++ctx.counters->residual_evals;
        return {norm2(g) < rule.tol, "grad-norm"};
    }
    case StopKind::dice_bound: {
        if (std::isnan(ctx.dice_value))
            throw std::invalid_argument("dice-bound stopping requires a dice function");
        return {ctx.dice_value >= rule.dice_target, "dice-bound"};
    }
    case StopKind::composite: {
        std::string reasons;
        bool stop = false;
        for (const auto& part : rule.parts) {
            StopDecision d = check_stop(part, ctx);
            if (d.stop) {
                stop = true;
                if (!reasons.empty()) reasons += "+";
                reasons += d.reason;
            }
        }
        return {stop, reasons};
    }
    }
    throw std::logic_error("check_stop: unknown rule");
}

namespace detail {

inline bool stop_uses_dice(const StopRule& r) {
    if (r.kind == StopKind::dice_bound) return true;
    for (const auto& p : r.parts)
        if (stop_uses_dice(p)) return true;
    return false;
}

struct SurrogateStash {
    bool armed = false;
    std::size_t record_index = 0;
    Vector u_plus, u_n, u_nm1, y_n, drive;
};

} // namespace detail

/**
 * Run the configured algorithm from u0 until a stop rule fires or max_iter
 * is exhausted (stop reason "Max"). The trace carries one record per outer
 * iteration; light tracing skips the energy and auxiliary columns so the
 * per-iteration oracle cost is exactly the subproblem's own.
 */
inline Trace run(const SplitProblem& problem, const SolverConfig& config, const Vector& u0) {
    if (u0.size() != problem.dim) throw std::invalid_argument("run: u0 dimension mismatch");
    if (config.max_iter < 1) throw std::invalid_argument("run: max_iter must be >= 1");

    Trace trace;
    OracleCounters counters;
    RunResources res;
    res.counters = &counters;
    res.warnings = &trace.warnings;

    const bool bdf = is_bdf_family(config.algorithm);
    const auto* l1 = std::get_if<L1PlusQuadratic>(&problem.h);
    const auto* qt = std::get_if<QuadraticLinear>(&problem.h);

    if (bdf) {
        const double omega_hat =
            config.algorithm == Algorithm::bapdca_e ? 1.0 : config.omega.omega_hat();
        StepClass cls = validate_step(problem.lipschitz_l, config.delta_t, omega_hat);
        if (cls == StepClass::invalid)
            throw std::invalid_argument("run: inadmissible step size (max(1,ω̂)·δt ≥ 3/(4L))");
        if (cls == StepClass::marginal)
            trace.warnings.push_back(
                "marginal step size: 1/(2L) ≤ max(1,ω̂)·δt < 3/(4L); only the auxiliary "
                "decrease bound applies");
        if (config.backend.kind == BackendKind::prox && !l1)
            throw std::invalid_argument("run: prox backend needs the l1-plus-quadratic structure");
        if (config.backend.kind == BackendKind::preconditioned) {
            if (!qt)
                throw std::invalid_argument("run: preconditioned backend needs the quadratic structure");
            auto csr = std::dynamic_pointer_cast<const SparseCsr>(qt->a_op);
            if (!csr)
                throw std::invalid_argument("run: preconditioned backend needs a sparse operator");
            SparseCsr t = csr_add_diagonal(*csr, 1.5 / config.delta_t);
            res.precon = build_preconditioner(t, config.backend.precon,
                                              config.backend.richardson_tau);
            res.has_precon = true;
            if (res.precon.fell_back_to_sgs)
                trace.warnings.push_back(
                    "jacobi preconditioner rejected: T is not strictly diagonally dominant; "
                    "using sgs");
        }
    } else {
        if (l1) {
            res.dca_alpha = config.dca_alpha > 0.0 ? config.dca_alpha : l1->lambda_ata;
            res.pdcae_alpha = l1->lambda_ata + problem.lipschitz_l;
        } else {
            res.dca_alpha = config.dca_alpha;
            res.pdcae_alpha = qt->pdcae_alpha;
            const std::size_t n = problem.dim;
            if (config.algorithm == Algorithm::dca || config.algorithm == Algorithm::bdca) {
                if (!(res.dca_alpha > 0.0))
                    throw std::invalid_argument("run: dca on the quadratic structure needs dca_alpha");
                res.dca_op = std::make_shared<ScaledSumOp>(
                    std::vector<std::pair<double, OperatorPtr>>{
                        {1.0, qt->a_op},
                        {1.0, std::make_shared<ScaledIdentityOp>(res.dca_alpha, n)}});
            }
            if (config.algorithm == Algorithm::pdca_e) {
                if (!(res.pdcae_alpha > 0.0))
                    throw std::invalid_argument("run: pdca_e on the quadratic structure needs pdcae_alpha");
                if (!qt->a_implicit)
                    throw std::invalid_argument("run: pdca_e needs the implicit operator split");
                res.pdcae_op = std::make_shared<ScaledSumOp>(
                    std::vector<std::pair<double, OperatorPtr>>{
                        {1.0, qt->a_implicit},
                        {1.0, std::make_shared<ScaledIdentityOp>(res.pdcae_alpha, n)}});
            }
        }
    }

    // metric application M v of the running configuration (bdf only)
    std::function<Vector(const Vector&)> m_apply;
    if (bdf) {
        if (config.backend.kind == BackendKind::prox) {
            auto a = l1->a;
            double lam = l1->lambda_ata;
            m_apply = [a, lam, &counters](const Vector& v) {
                Vector av(a->rows());
                a->apply(v, av);
                Vector atav(a->cols());
                a->apply_transpose(av, atav);
                counters.a_applies += 2;
                Vector mv = scaled(v, lam);
                axpy(-1.0, atav, mv);
                return mv;
            };
        } else {
            auto a_op = qt->a_op;
            auto m_op = res.precon.metric_operator();
            double shift = 1.5 / config.delta_t;
            m_apply = [a_op, m_op, shift, &counters](const Vector& v) {
                Vector mv = apply_operator(*m_op, v);
                Vector tv = apply_operator(*a_op, v);
                ++counters.t_applies;
                axpy(-1.0, tv, mv);
                axpy(-shift, v, mv);
                return mv;
            };
        }
    }

    const bool full = config.trace_level == TraceLevel::full;
    const bool want_surrogate = config.compute_surrogate && full && bdf;
    const bool want_dice = static_cast<bool>(config.dice_fn);
    if (detail::stop_uses_dice(config.stop) && !want_dice)
        throw std::invalid_argument("run: dice-bound stopping requires config.dice_fn");

    IterationState st = make_state(config, u0);
    detail::SurrogateStash stash;

    auto resolve_surrogate = [&](const Vector& f_u_plus) {
        const double c_scal = 1.0 / (2.0 * config.delta_t) + problem.lipschitz_l;
        Vector delta = sub(stash.u_plus, stash.u_n);
        // ξ = −(1/(2δt))(3u⁺ − 4uⁿ + uⁿ⁻¹) − M(u⁺ − yⁿ) − drive
        Vector xi(problem.dim);
        const double inv2dt = 1.0 / (2.0 * config.delta_t);
        for (std::size_t i = 0; i < xi.size(); ++i)
            xi[i] = -inv2dt * (3.0 * stash.u_plus[i] - 4.0 * stash.u_n[i] + stash.u_nm1[i]) -
                    stash.drive[i];
        Vector m_dev = m_apply(sub(stash.u_plus, stash.y_n));
        axpy(-1.0, m_dev, xi);
        // C_M Δ = ((1/(2δt)) + L)Δ + MΔ
        Vector cmd = m_apply(delta);
        axpy(c_scal, delta, cmd);
        Vector g1 = xi;
        axpy(1.0, f_u_plus, g1);
        axpy(1.0, cmd, g1);
        trace.records[stash.record_index].dist_surrogate = norm2(g1) + norm2(cmd);
        stash.armed = false;
    };

    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed_ns = [&] {
        return std::chrono::duration_cast<std::chrono::nanoseconds>(
                   std::chrono::steady_clock::now() - t_start)
            .count();
    };

    bool stopped = false;
    Vector pre_prev; // u^{n−1} copy for the surrogate stash
    for (int it = 0; it < config.max_iter; ++it) {
        if (want_surrogate) pre_prev = st.u_prev;
        Vector pre_curr;
        if (want_surrogate) pre_curr = st.u_curr;

        switch (config.algorithm) {
        case Algorithm::dca: step_dca(problem, st, config, res); break;
        case Algorithm::pdca_e: step_pdcae(problem, st, config, res); break;
        case Algorithm::bdca: step_bdca(problem, st, config, res); break;
        case Algorithm::bapdca_e:
        case Algorithm::pubc_e: step_pubce(problem, st, config, res); break;
        }
        if (!all_finite(st.u_curr))
            throw std::runtime_error("run: non-finite iterate at outer step " +
                                     std::to_string(st.n));
        if (problem.box_radius > 0.0 && norm_inf(st.u_curr) > problem.box_radius)
            throw std::runtime_error(
                "run: iterate left the box ‖u‖_∞ ≤ " + fmt_double(problem.box_radius) +
                " where the Lipschitz constant is valid, at outer step " + std::to_string(st.n));

        if (want_surrogate && stash.armed) resolve_surrogate(st.cache.f_prev);

        TraceRecord rec;
        rec.n = st.n;
        rec.beta = st.beta_last;
        rec.omega = st.omega_last;
        rec.restart = st.restart_last;
        rec.step_norm = norm2(sub(st.u_curr, st.u_prev));

        if (full) {
            if (config.algorithm == Algorithm::bdca && !std::isnan(st.last_energy)) {
                rec.energy = st.last_energy;
            } else {
                rec.energy = problem.energy(st.u_curr);
                ++counters.energy_evals;
            }
            if (bdf) {
                Vector delta = sub(st.u_curr, st.u_prev);
                double m_sq = dot(delta, m_apply(delta));
                rec.aux_a = rec.energy +
                            (1.0 / (4.0 * config.delta_t) + 0.5 * problem.lipschitz_l) *
                                norm2_sq(delta) +
                            0.5 * m_sq;
            }
        } else if (config.algorithm == Algorithm::bdca) {
            rec.energy = st.last_energy; // already paid for by the line search
        }

        if (want_dice) rec.dice = config.dice_fn(st.u_curr);
        if (config.residual_fn && config.residual_every > 0 &&
            st.n % config.residual_every == 0) {
            rec.residual = config.residual_fn(st.u_curr);
            ++counters.residual_evals;
        } else if (!std::isnan(st.last_residual)) {
            rec.residual = st.last_residual;
        }
        rec.wall_ns = elapsed_ns();

        trace.records.push_back(rec);
        if (config.record_iterates) trace.iterates.push_back(st.u_curr);

        if (want_surrogate) {
            stash.armed = true;
            stash.record_index = trace.records.size() - 1;
            stash.u_plus = st.u_curr;
            stash.u_n = std::move(pre_curr);
            stash.u_nm1 = std::move(pre_prev);
            stash.y_n = st.y_prev;
            stash.drive = st.last_drive;
        }

        StopContext ctx;
        ctx.problem = &problem;
        ctx.u_curr = &st.u_curr;
        ctx.step_norm = rec.step_norm;
        ctx.dice_value = rec.dice;
        ctx.counters = &counters;
        StopDecision dec = check_stop(config.stop, ctx);
        if (dec.stop) {
            trace.stop_reason = dec.reason;
            stopped = true;
            break;
        }
    }

    if (!stopped) {
        trace.stop_reason = "Max";
        trace.hit_max = true;
    }

    if (want_surrogate && stash.armed) {
        Vector f_final = problem.grad_f(st.u_curr);
        ++counters.f_evals;
        resolve_surrogate(f_final);
    }

    trace.iterations = st.n;
    trace.final_u = st.u_curr;
    if (!trace.records.empty() && !std::isnan(trace.records.back().energy)) {
        trace.final_energy = trace.records.back().energy;
    } else {
        trace.final_energy = problem.energy(st.u_curr);
        ++counters.energy_evals;
    }
    if (config.residual_fn) {
        trace.final_residual = config.residual_fn(st.u_curr);
        ++counters.residual_evals;
    } else if (!trace.records.empty()) {
        trace.final_residual = trace.records.back().residual;
    }
    if (want_dice && !trace.records.empty()) trace.final_dice = trace.records.back().dice;
    trace.solve_wall_ns = elapsed_ns();
    trace.total_wall_ns = trace.solve_wall_ns;
    trace.counters = counters;
    return trace;
}

} // namespace pscs
