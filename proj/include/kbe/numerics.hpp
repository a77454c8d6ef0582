// Scalar numerics: activations, clamped logs, regularized incomplete gamma,
// chi-squared CDF / critical values, and adaptive Simpson quadrature.
#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "kbe/errors.hpp"

namespace kbe {

inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;
inline constexpr double kLogFloor = 1e-12;

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double selu(double x) {
  return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
}

inline double selu_grad(double x) {
  return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

// log with the argument floored, plus the indicator needed to keep analytic
// gradients consistent with the clamp (d/dx log(max(x, floor)) = [x > floor]/x).
inline double clamped_log(double x) { return std::log(x < kLogFloor ? kLogFloor : x); }
inline double clamped_log_grad(double x) { return x < kLogFloor ? 0.0 : 1.0 / x; }

namespace detail {

inline double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper tail Q(a, x) by Lentz continued fraction.
inline double gamma_q_contfrac(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

// P(a, x): lower regularized incomplete gamma.
inline double regularized_gamma_p(double a, double x) {
  if (a <= 0.0) throw ConfigError("regularized_gamma_p: shape must be positive");
  if (x <= 0.0) return 0.0;
  if (x < a + 1.0) return detail::gamma_p_series(a, x);
  return 1.0 - detail::gamma_q_contfrac(a, x);
}

inline double chi_squared_cdf(double x, double df) {
  if (df <= 0.0) throw ConfigError("chi_squared_cdf: df must be positive");
  if (x <= 0.0) return 0.0;
  return regularized_gamma_p(df / 2.0, x / 2.0);
}

// Upper-tail critical value, the convention printed in standard chi-squared
// tables: returns q with P(X > q) = p. Bisection on the CDF, absolute
// tolerance 1e-6.
inline double chi_squared_critical(double p, double df) {
  if (!(p > 0.0 && p < 1.0)) throw ConfigError("chi_squared_critical: p must be in (0, 1)");
  if (df <= 0.0) throw ConfigError("chi_squared_critical: df must be positive");
  double target = 1.0 - p;
  double lo = 0.0;
  double hi = df + 20.0 * std::sqrt(2.0 * df) + 20.0;
  while (chi_squared_cdf(hi, df) < target) hi *= 2.0;
  while (hi - lo > 1e-6) {
    double mid = 0.5 * (lo + hi);
    if (chi_squared_cdf(mid, df) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

namespace detail {

template <typename F>
double simpson_panel(F&& f, double a, double fa, double b, double fb, double m, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <typename F>
double adaptive_simpson_rec(F&& f, double a, double fa, double b, double fb, double m,
                            double fm, double whole, double tol, int depth) {
  double lm = 0.5 * (a + m);
  double rm = 0.5 * (m + b);
  double flm = f(lm);
  double frm = f(rm);
  double left = simpson_panel(f, a, fa, m, fm, lm, flm);
  double right = simpson_panel(f, m, fm, b, fb, rm, frm);
  double delta = left + right - whole;
  if (std::fabs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) throw ConvergenceError("adaptive_simpson: depth limit reached");
  return adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, tol / 2.0, depth - 1) +
         adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, tol / 2.0, depth - 1);
}

}  // namespace detail

template <typename F>
double adaptive_simpson(F&& f, double a, double b, double tol = 1e-10, int max_depth = 48) {
  double fa = f(a);
  double fb = f(b);
  double m = 0.5 * (a + b);
  double fm = f(m);
  double whole = detail::simpson_panel(f, a, fa, b, fb, m, fm);
  return detail::adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

}  // namespace kbe
