#pragma once

#include <cstdint>
#include <random>

#include "linear_operator.hpp"

namespace pscs {

struct SpectralEstimate {
    double value = 0.0;        // Rayleigh-quotient estimate of λ_max
    double overestimate = 0.0; // value * (1 + tol), safe side for forming λI - op
    int iterations = 0;
    bool converged = false;
};

/** Power iteration with Rayleigh-quotient stop for symmetric PSD operators.
 *  Deterministic: the start vector comes from the given seed. */
inline SpectralEstimate estimate_spectral_norm(const LinearOperator& op, double tol = 1e-8,
                                               int max_iter = 20000, std::uint64_t seed = 12345) {
    if (op.rows() != op.cols())
        throw std::invalid_argument("estimate_spectral_norm: operator must be square");
    std::size_t n = op.cols();

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Vector v(n);
    for (double& x : v) x = u(rng);
    double nv = norm2(v);
    if (nv == 0.0) nv = 1.0;
    scale(1.0 / nv, v);

    SpectralEstimate est;
    double prev = 0.0;
    Vector w(n);
    for (int k = 0; k < max_iter; ++k) {
        op.apply(v, w);
        double lambda = dot(v, w); // ‖v‖ = 1
        est.value = lambda;
        est.iterations = k + 1;
        if (k > 0 && std::abs(lambda - prev) <= tol * std::max(std::abs(lambda), 1e-300)) {
            est.converged = true;
            break;
        }
        prev = lambda;
        double nw = norm2(w);
        if (nw == 0.0) { // op annihilates v: spectrum seen so far is 0
            est.value = 0.0;
            est.converged = true;
            break;
        }
        for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / nw;
    }
    est.overestimate = est.value * (1.0 + tol);
    return est;
}

} // namespace pscs
