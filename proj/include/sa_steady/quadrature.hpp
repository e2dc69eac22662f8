#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace sa_steady {

namespace detail {
template <class F>
double simpson_step(const F& f, double a, double b, double fa, double fm, double fb, double whole, double tol, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
    return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson quadrature of f on [a, b] with absolute tolerance tol.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double tol = 1e-12, int max_depth = 48) {
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    return detail::simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Adaptive Simpson on `pieces` equal subintervals; guards against integrands
/// concentrated in a small part of a long interval.
template <class F>
double adaptive_simpson_split(const F& f, double a, double b, int pieces, double tol = 1e-12) {
    const double h = (b - a) / pieces;
    double s = 0.0;
    for (int i = 0; i < pieces; ++i) s += adaptive_simpson(f, a + i * h, a + (i + 1) * h, tol / pieces);
    return s;
}

/// Eight-point Gauss-Legendre rule on [a, b].
template <class F>
double gauss_legendre8(const F& f, double a, double b) {
    static constexpr double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
    static constexpr double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    double s = 0.0;
    for (int i = 0; i < 4; ++i) s += w[i] * (f(c - h * x[i]) + f(c + h * x[i]));
    return s * h;
}

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Standard normal upper tail P(Z > x), via erfc so the tail keeps full relative precision.
inline double normal_sf(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Standard normal quantile, u in (0, 1).
inline double normal_quantile(double u) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u); }

}  // namespace sa_steady
