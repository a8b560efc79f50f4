#pragma once

// Shared scalar numerics: Gaussian CDF helpers, stable quadratic roots,
// bracketed root scans, quadrature.

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

namespace meanfield {

inline constexpr double kPi = 3.14159265358979323846;

inline double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi); }

inline double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// log Phi(z), accurate far into the left tail where erfc underflows.
inline double log_norm_cdf(double z) {
    if (z > -20.0) return std::log(norm_cdf(z));
    const double z2 = z * z;
    // Asymptotic series Phi(z) ~ phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - 15/z^6)
    const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    return -0.5 * z2 - 0.5 * std::log(2.0 * kPi) - std::log(-z) + std::log(series);
}

inline double logistic(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double log_sum_exp(double a, double b) {
    const double m = std::max(a, b);
    if (!std::isfinite(m)) return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double trapezoid(const std::vector<double>& values, double dt) {
    if (values.size() < 2) return 0.0;
    double s = 0.5 * (values.front() + values.back());
    for (std::size_t i = 1; i + 1 < values.size(); ++i) s += values[i];
    return s * dt;
}

struct QuadraticRoots {
    int count = 0;  // number of distinct real roots
    double r1 = std::numeric_limits<double>::quiet_NaN();
    double r2 = std::numeric_limits<double>::quiet_NaN();
    bool double_root = false;
};

// Real roots of a*x^2 + b*x + c = 0, cancellation-safe for small |a|.
inline QuadraticRoots solve_quadratic(double a, double b, double c) {
    QuadraticRoots out;
    if (a == 0.0) {
        if (b == 0.0) return out;  // degenerate; no isolated root
        out.count = 1;
        out.r1 = -c / b;
        return out;
    }
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) return out;
    if (disc == 0.0) {
        out.count = 1;
        out.r1 = -b / (2.0 * a);
        out.double_root = true;
        return out;
    }
    const double sq = std::sqrt(disc);
    const double qq = -0.5 * (b + (b >= 0.0 ? sq : -sq));
    double ra = qq / a;
    double rb = (qq != 0.0) ? c / qq : -b / a - ra;
    if (ra > rb) std::swap(ra, rb);
    out.count = 2;
    out.r1 = ra;
    out.r2 = rb;
    return out;
}

// Bisection on a sign change; f(lo) and f(hi) must have opposite signs.
inline double bisect(const std::function<double(double)>& f, double lo, double hi,
                     double tol_abs) {
    double flo = f(lo);
    if (flo == 0.0) return lo;
    double fhi = f(hi);
    if (fhi == 0.0) return hi;
    if ((flo > 0.0) == (fhi > 0.0))
        throw std::invalid_argument("bisect: no sign change on bracket");
    while (hi - lo > tol_abs) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;  // hit representable resolution
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

// All roots of f in [lo, hi]: uniform sign scan, then bisection per change.
inline std::vector<double> scan_roots(const std::function<double(double)>& f, double lo,
                                      double hi, int n_scan, double tol_abs) {
    std::vector<double> roots;
    double xp = lo;
    double fp = f(xp);
    for (int i = 1; i <= n_scan; ++i) {
        const double x = lo + (hi - lo) * i / n_scan;
        const double fx = f(x);
        if (fp == 0.0) {
            roots.push_back(xp);
        } else if (fx != 0.0 && (fp > 0.0) != (fx > 0.0)) {
            roots.push_back(bisect(f, xp, x, tol_abs));
        }
        xp = x;
        fp = fx;
    }
    if (fp == 0.0) roots.push_back(xp);
    return roots;
}

}  // namespace meanfield
