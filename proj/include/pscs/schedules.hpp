#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vector.hpp"

namespace pscs {

/* Extrapolation-parameter schedules. β multiplies the iterate difference
 * (y^n = u^n + β_n(u^n − u^{n−1})), ω the gradient difference in the
 * Adams-Bashforth drive term. Solvers own one schedule instance per run. */

enum class BetaKind { constant, fista_fixed_restart, fista_adaptive_restart };

struct BetaSchedule {
    BetaKind kind = BetaKind::constant;
    double constant = 0.0;
    int restart_every = 0;          // N̄, fixed-restart kind only
    double beta_cap = 1.0 - 1e-12;
    bool squared_gamma = false;     // standard-FISTA recursion variant

    double gamma_prev = 1.0; // γ_{n-1}
    double gamma_curr = 1.0; // γ_n
    int since_restart = 0;
    bool last_reset = false; // whether the latest next_beta call restarted

    static BetaSchedule make_constant(double c) {
        if (c < 0.0 || c >= 1.0)
            throw std::invalid_argument("BetaSchedule: constant β must lie in [0,1)");
        BetaSchedule s;
        s.kind = BetaKind::constant;
        s.constant = c;
        return s;
    }

    static BetaSchedule fista_fixed(int restart_every, bool squared = false) {
        if (restart_every < 1)
            throw std::invalid_argument("BetaSchedule: fixed restart period must be >= 1");
        BetaSchedule s;
        s.kind = BetaKind::fista_fixed_restart;
        s.restart_every = restart_every;
        s.squared_gamma = squared;
        return s;
    }

    static BetaSchedule fista_adaptive(bool squared = false) {
        BetaSchedule s;
        s.kind = BetaKind::fista_adaptive_restart;
        s.squared_gamma = squared;
        return s;
    }
};

/** Emit β_n and advance the schedule. restart_signal comes from
 *  adaptive_restart_check (ignored by the constant kind). */
inline double next_beta(BetaSchedule& s, bool restart_signal = false) {
    if (s.kind == BetaKind::constant) {
        s.last_reset = false;
        return s.constant;
    }

    bool restart = restart_signal;
    if (s.kind == BetaKind::fista_fixed_restart && s.since_restart == s.restart_every)
        restart = true;
    if (restart) {
        s.gamma_prev = s.gamma_curr = 1.0;
        s.since_restart = 0;
    }
    s.last_reset = restart;

    double beta = (s.gamma_prev - 1.0) / s.gamma_curr;
    beta = std::clamp(beta, 0.0, s.beta_cap);

    double g = s.gamma_curr;
    double next = s.squared_gamma ? (1.0 + std::sqrt(1.0 + 4.0 * g * g)) / 2.0
                                  : (1.0 + std::sqrt(1.0 + 4.0 * g)) / 2.0;
    s.gamma_prev = s.gamma_curr;
    s.gamma_curr = next;
    s.since_restart++;
    return beta;
}

/** Restart test ⟨y^{n−1} − u^n, u^n − u^{n−1}⟩ > 0. */
inline bool adaptive_restart_check(const Vector& y_prev, const Vector& u_curr,
                                   const Vector& u_prev) {
    if (y_prev.size() != u_curr.size() || u_curr.size() != u_prev.size())
        throw std::invalid_argument("adaptive_restart_check: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < u_curr.size(); ++i)
        s += (y_prev[i] - u_curr[i]) * (u_curr[i] - u_prev[i]);
    return s > 0.0;
}

enum class OmegaKind { constant, decay };

struct OmegaSchedule {
    OmegaKind kind = OmegaKind::constant;
    double constant = 1.0;
    double omega0 = 1.0, omega_inf = 1.0, rate = 1.0;
    int step = 0;

    static OmegaSchedule make_constant(double c) {
        if (c <= 0.0) throw std::invalid_argument("OmegaSchedule: ω must be positive");
        OmegaSchedule s;
        s.kind = OmegaKind::constant;
        s.constant = c;
        return s;
    }

    static OmegaSchedule decay(double omega0, double omega_inf, double rate) {
        if (omega0 <= 0.0 || omega_inf <= 0.0 || rate <= 0.0 || rate >= 1.0)
            throw std::invalid_argument("OmegaSchedule: decay needs ω₀, ω_∞ > 0 and rate in (0,1)");
        OmegaSchedule s;
        s.kind = OmegaKind::decay;
        s.omega0 = omega0;
        s.omega_inf = omega_inf;
        s.rate = rate;
        return s;
    }

    double at(int n) const {
        if (kind == OmegaKind::constant) return constant;
        return omega_inf + (omega0 - omega_inf) * std::pow(rate, n);
    }

    /** Supremum of the emitted sequence over n > 0 (the ω̂ entering the
     *  step-size admissibility bound). */
    double omega_hat() const {
        if (kind == OmegaKind::constant) return constant;
        return omega0 >= omega_inf ? at(1) : omega_inf;
    }
};

inline double next_omega(OmegaSchedule& s) {
    double w = s.at(s.step);
    s.step++;
    return w;
}

} // namespace pscs
