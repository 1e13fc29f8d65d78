#pragma once

#include <cstdint>

#include "linear_operator.hpp"

namespace pscs {

struct CgResult {
    Vector x;
    int iterations = 0;
    bool converged = false;
    std::int64_t applies = 0; // operator applications spent
};

/** CG for SPD systems. Stops when the iterate change ‖x^{l+1} − x^l‖ drops
 *  below step_tol; on max_iter the last iterate is returned with
 *  converged = false. */
inline CgResult conjugate_gradient(const LinearOperator& a, const Vector& rhs, Vector x0,
                                   double step_tol = 1e-8, int max_iter = 10000) {
    if (rhs.size() != a.rows() || x0.size() != a.cols())
        throw std::invalid_argument("conjugate_gradient: dimension mismatch");

    CgResult res;
    res.x = std::move(x0);

    Vector r = rhs;
    Vector ax(a.rows());
    a.apply(res.x, ax);
    res.applies++;
    axpy(-1.0, ax, r);

    double rr = norm2_sq(r);
    if (rr == 0.0) {
        res.converged = true;
        return res;
    }

    Vector p = r;
    Vector ap(a.rows());
    for (int k = 0; k < max_iter; ++k) {
        a.apply(p, ap);
        res.applies++;
        double pap = dot(p, ap);
        if (pap <= 0.0)
            throw std::runtime_error("conjugate_gradient: operator is not positive definite");
        double alpha = rr / pap;
        axpy(alpha, p, res.x);
        axpy(-alpha, ap, r);
        res.iterations = k + 1;

        double step = std::abs(alpha) * norm2(p);
        if (step < step_tol) {
            res.converged = true;
            break;
        }

        double rr_next = norm2_sq(r);
        if (rr_next == 0.0) {
            res.converged = true;
            break;
        }
        double beta = rr_next / rr;
        rr = rr_next;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    }
    return res;
}

} // namespace pscs
