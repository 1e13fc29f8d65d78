#pragma once

// Reference implementations used only by the tests. These deliberately take
// the slow, obvious route (pivoted elimination, composite quadrature, finite
// differences) so they stay independent of the library code paths they check.

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include <pscs/linear_operator.hpp>
#include <pscs/vector.hpp>

namespace oracle {

/** Dense solve of a*x = b via Gaussian elimination with partial pivoting. */
inline pscs::Vector dense_solve(std::vector<std::vector<double>> a, pscs::Vector b) {
    const std::size_t n = b.size();
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
        if (a[piv][k] == 0.0) throw std::runtime_error("dense_solve: singular matrix");
        std::swap(a[k], a[piv]);
        std::swap(b[k], b[piv]);
        for (std::size_t i = k + 1; i < n; ++i) {
            double f = a[i][k] / a[k][k];
            for (std::size_t j = k; j < n; ++j) a[i][j] -= f * a[k][j];
            b[i] -= f * b[k];
        }
    }
    pscs::Vector x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
        x[i] = s / a[i][i];
    }
    return x;
}

/** Materialize an operator into a row-major dense table by probing basis vectors. */
inline std::vector<std::vector<double>> densify(const pscs::LinearOperator& op) {
    std::vector<std::vector<double>> a(op.rows(), std::vector<double>(op.cols(), 0.0));
    pscs::Vector e(op.cols(), 0.0);
    for (std::size_t j = 0; j < op.cols(); ++j) {
        e[j] = 1.0;
        pscs::Vector y = pscs::apply_operator(op, e);
        for (std::size_t i = 0; i < op.rows(); ++i) a[i][j] = y[i];
        e[j] = 0.0;
    }
    return a;
}

inline pscs::Vector dense_solve(const pscs::LinearOperator& op, const pscs::Vector& b) {
    return dense_solve(densify(op), b);
}

/** Composite Simpson quadrature of f on [a, b]. panels must be even. */
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
    if (panels % 2 != 0) ++panels;
    double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

/** Central finite difference of a scalar function. */
inline double central_diff(const std::function<double(double)>& f, double x, double h = 1e-6) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

/** Least-squares line y = c0 + c1*x; returns {c0, c1, r_squared}. */
struct LineFit {
    double intercept = 0.0, slope = 0.0, r2 = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) throw std::invalid_argument("fit_line: need at least 2 points");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    f.r2 = syy > 0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return f;
}

} // namespace oracle
