#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace pscs {

using Vector = std::vector<double>;

inline double dot(const Vector& x, const Vector& y) {
    assert(x.size() == y.size());
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

inline double norm2_sq(const Vector& x) { return dot(x, x); }

inline double norm2(const Vector& x) { return std::sqrt(norm2_sq(x)); }

inline double norm_inf(const Vector& x) {
    double m = 0.0;
    for (double v : x) m = std::max(m, std::abs(v));
    return m;
}

// y += a * x
inline void axpy(double a, const Vector& x, Vector& y) {
    assert(x.size() == y.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

inline void scale(double a, Vector& x) {
    for (double& v : x) v *= a;
}

inline Vector scaled(const Vector& x, double a) {
    Vector r(x);
    scale(a, r);
    return r;
}

// a*x + b*y
inline Vector combine(double a, const Vector& x, double b, const Vector& y) {
    assert(x.size() == y.size());
    Vector r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = a * x[i] + b * y[i];
    return r;
}

inline Vector add(const Vector& x, const Vector& y) { return combine(1.0, x, 1.0, y); }

inline Vector sub(const Vector& x, const Vector& y) { return combine(1.0, x, -1.0, y); }

inline bool all_finite(const Vector& x) {
    for (double v : x) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

inline void require_finite(const Vector& x, const char* where) {
    if (!all_finite(x))
        throw std::runtime_error(std::string("non-finite values produced in ") + where);
}

/** Soft-thresholding: sign(x) * max(|x| - t, 0). */
inline double soft_threshold(double x, double t) {
    double a = std::abs(x) - t;
    return a > 0.0 ? (x > 0.0 ? a : -a) : 0.0;
}

inline Vector soft_threshold(const Vector& x, double t) {
    Vector r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double a = std::abs(x[i]) - t;
        r[i] = a > 0.0 ? (x[i] > 0.0 ? a : -a) : 0.0;
    }
    return r;
}

} // namespace pscs
