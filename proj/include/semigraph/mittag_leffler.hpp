#pragma once

// One-parameter Mittag-Leffler function on the negative real axis and the
// Mittag-Leffler sojourn law P(J > t) = E_beta(-(t/scale)^beta).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "semigraph/random.hpp"

namespace semigraph {

struct MLParams {
  double beta = 1.0;
  double scale = 1.0;

  void validate() const {
    if (!(beta > 0.0 && beta <= 1.0))
      throw std::invalid_argument("Mittag-Leffler beta must lie in (0, 1]");
    if (!(scale > 0.0) || !std::isfinite(scale))
      throw std::invalid_argument("Mittag-Leffler scale must be positive");
  }
};

namespace detail {

// Below this |z| the power series converges without cancellation: every term
// is bounded by |z|^n / min Gamma < 1.13 * 0.5^n.
inline constexpr double kMLSeriesLimit = 0.5;

inline double ml_series(double beta, double z) {
  double sum = 1.0;
  double power = 1.0;
  for (int n = 1; n < 400; ++n) {
    power *= z;
    const double term = power / std::tgamma(n * beta + 1.0);
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum;
}

// For 0 < beta < 1 and x > 0 the function is completely monotone:
//   E_beta(-x) = sin(beta pi)/(beta pi) * Int_0^inf exp(-(x u)^(1/beta)) / (u^2 + 2u cos(beta pi) + 1) du.
// With v = x u the exponential factor no longer depends on x, so the
// integration range is fixed and the heavy tail is resolved for any x.
// The rational factor peaks at v = -x cos(beta pi) with width x sin(beta pi)
// when beta > 1/2; those points become quadrature breakpoints.
inline double ml_integral(double beta, double x) {
  const double angle = std::numbers::pi * beta;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double inv_beta = 1.0 / beta;
  // u^2 + 2u cos + 1 written as (u + cos)^2 + sin^2: near the peak the
  // expanded form cancels to ~sin^2, and the rounding noise stalls the
  // adaptive error estimate when beta is close to 1.
  auto integrand = [=](double v) {
    const double u = v / x;
    return std::exp(-std::pow(v, inv_beta)) / ((u + c) * (u + c) + s * s);
  };
  // exp(-v^(1/beta)) < 1e-26 past v_max; the rational factor is at most 1/s^2.
  const double v_max = std::pow(60.0, beta);
  std::vector<double> cuts{0.0, v_max};
  cuts.push_back(std::min(1.0, v_max));
  if (c < 0.0) {
    const double centre = -c * x;
    const double width = s * x;
    for (double k : {-10.0, -2.0, 0.0, 2.0, 10.0}) cuts.push_back(centre + k * width);
  }
  std::sort(cuts.begin(), cuts.end());
  // Near-duplicate cuts leave sliver panels whose value is too small for a
  // relative tolerance to be met; the adaptive rule then bisects to max depth.
  const double min_gap = 1e-2 * std::min(1.0, v_max);
  std::vector<double> merged;
  for (double cut : cuts)
    if (merged.empty() || cut - merged.back() > min_gap || cut >= v_max) merged.push_back(cut);
  cuts.swap(merged);
  // v^(1/beta) is not smooth at v = 0, so the first panel uses tanh-sinh;
  // the remaining panels are smooth and Gauss-Kronrod converges quickly there.
  thread_local boost::math::quadrature::tanh_sinh<double> endpoint_rule;
  double total = 0.0;
  double prev = 0.0;
  for (double cut : cuts) {
    cut = std::clamp(cut, 0.0, v_max);
    if (cut <= prev) continue;
    if (prev == 0.0)
      total += endpoint_rule.integrate(integrand, prev, cut, 1e-13);
    else
      total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, prev, cut,
                                                                             10, 1e-12);
    prev = cut;
  }
  return s / (angle * x) * total;
}

}  // namespace detail

/// E_beta(z) = sum_n z^n / Gamma(n beta + 1) for beta in (0, 1], z <= 0.
/// Power series near the origin, the spectral integral elsewhere; exact
/// exp(z) at beta = 1.
inline double ml_function(double beta, double z) {
  if (!(beta > 0.0 && beta <= 1.0))
    throw std::invalid_argument("Mittag-Leffler beta must lie in (0, 1]");
  if (std::isnan(z)) throw std::invalid_argument("Mittag-Leffler argument is NaN");
  if (z > 0.0) throw std::domain_error("Mittag-Leffler function is only provided for z <= 0");
  if (z == 0.0) return 1.0;
  if (beta == 1.0) return std::exp(z);
  if (std::isinf(z)) return 0.0;
  if (-z <= detail::kMLSeriesLimit) return detail::ml_series(beta, z);
  return detail::ml_integral(beta, -z);
}

inline double ml_survival(const MLParams& p, double t) {
  p.validate();
  if (!(t >= 0.0)) throw std::domain_error("survival needs t >= 0");
  if (t == 0.0) return 1.0;
  if (p.beta == 1.0) return std::exp(-t / p.scale);
  return ml_function(p.beta, -std::pow(t / p.scale, p.beta));
}

/// Exact generator: J = -scale ln U (sin(beta pi)/tan(beta pi V) - cos(beta pi))^(1/beta)
/// for independent uniforms U, V. beta = 1 consumes only U.
inline double ml_sample(const MLParams& p, Rng& rng) {
  const double e = -std::log(rng.uniform());
  if (p.beta == 1.0) return p.scale * e;
  const double angle = std::numbers::pi * p.beta;
  for (;;) {
    const double v = rng.uniform();
    // sin(a)/tan(a v) - cos(a) == sin(a (1 - v)) / sin(a v), positive for a < pi.
    const double bracket = std::sin(angle * (1.0 - v)) / std::sin(angle * v);
    const double j = p.scale * e * std::pow(bracket, 1.0 / p.beta);
    if (j > 0.0 && std::isfinite(j)) return j;
  }
}

}  // namespace semigraph
