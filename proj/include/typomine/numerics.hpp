// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef TYPOMINE_NUMERICS_HPP
#define TYPOMINE_NUMERICS_HPP

#include <cmath>
#include <utility>

#include <boost/math/special_functions/beta.hpp>

#include "typomine/common.hpp"

namespace typomine {

// s(x) = 1 / (1 + exp(-x)), stable for large |x|.
inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double beta_cdf(double x, double a, double b) {
  if (x <= 0) return 0;
  if (x >= 1) return 1;
  return boost::math::ibeta(a, b, x);
}

inline double log_beta_pdf(double x, double a, double b) {
  return (a - 1) * std::log(x) + (b - 1) * std::log1p(-x) + std::lgamma(a + b) -
         std::lgamma(a) - std::lgamma(b);
}

inline double sample_beta(double a, double b, Rng& rng) {
  std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
  double x = ga(rng), y = gb(rng);
  double s = x + y;
  if (s <= 0) return 0.5;  // both underflowed; a,b astronomically small
  double v = x / s;
  // keep strictly inside (0,1) so Bernoulli/Beta densities stay finite
  const double tiny = 1e-12;
  return std::min(1.0 - tiny, std::max(tiny, v));
}

// Inverse-gamma(shape, scale): if Y ~ Gamma(shape, rate=scale) then 1/Y.
inline double sample_inverse_gamma(double shape, double scale, Rng& rng) {
  std::gamma_distribution<double> g(shape, 1.0 / scale);
  double y = g(rng);
  if (y <= 0) y = 1e-300;
  return 1.0 / y;
}

// Solve for Beta parameters (a, b) with a/(a+b) = mean exactly and
// CDF(mass_limit) = mass, by bisection on a with b = a(1-mean)/mean.
// Throws NumericError when no root exists in [1e-4, 1e6]; the constraint
// pair can be infeasible (e.g. mass_limit only twice the mean with mass 1/2
// is ruled out for every distribution by Markov's inequality).
inline std::pair<double, double> solve_noise_prior(double mean, double mass_limit, double mass) {
  if (!(0 < mean && mean < mass_limit && mass_limit < 1))
    throw ConfigError("solve_noise_prior: need 0 < mean < mass_limit < 1");
  if (!(0 < mass && mass < 1)) throw ConfigError("solve_noise_prior: mass must be in (0,1)");
  const double ratio = (1 - mean) / mean;
  auto f = [&](double a) { return beta_cdf(mass_limit, a, a * ratio) - mass; };

  const double lo_bound = 1e-4, hi_bound = 1e6;
  // scan a log grid for a sign change (f need not be monotone in a)
  const int grid = 200;
  double prev_a = lo_bound, prev_f = f(lo_bound);
  double lo = 0, hi = 0;
  bool found = false;
  for (int i = 1; i <= grid && !found; ++i) {
    double a = lo_bound * std::pow(hi_bound / lo_bound, double(i) / grid);
    double fa = f(a);
    if (prev_f == 0) { lo = hi = prev_a; found = true; break; }
    if ((prev_f < 0) != (fa < 0)) { lo = prev_a; hi = a; found = true; break; }
    prev_a = a;
    prev_f = fa;
  }
  if (!found) {
    if (std::abs(prev_f) < 1e-9) { lo = hi = prev_a; }
    else
      throw NumericError("solve_noise_prior: no Beta distribution with mean " +
                         std::to_string(mean) + " has CDF(" + std::to_string(mass_limit) +
                         ") = " + std::to_string(mass) + " (no root in [1e-4, 1e6])");
  }
  double a = 0.5 * (lo + hi);
  for (int it = 0; it < 200 && hi - lo > 1e-13 * hi; ++it) {
    a = 0.5 * (lo + hi);
    double fa = f(a);
    if (fa == 0) break;
    if ((fa < 0) == (f(lo) < 0)) lo = a;
    else hi = a;
  }
  return {a, a * ratio};
}

// Closest-feasible stand-in used for default noise hyperparameters: keeps the
// mean exact and minimizes |CDF(mass_limit) - mass| over a (golden-section on
// log a). Used where the requested pair has no exact solution.
inline std::pair<double, double> closest_noise_prior(double mean, double mass_limit, double mass) {
  try {
    return solve_noise_prior(mean, mass_limit, mass);
  } catch (const NumericError&) {
  }
  const double ratio = (1 - mean) / mean;
  auto g = [&](double la) {
    double a = std::exp(la);
    return std::abs(beta_cdf(mass_limit, a, a * ratio) - mass);
  };
  double lo = std::log(1e-4), hi = std::log(1e4);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - phi * (hi - lo), x2 = lo + phi * (hi - lo);
  double g1 = g(x1), g2 = g(x2);
  for (int it = 0; it < 300; ++it) {
    if (g1 < g2) { hi = x2; x2 = x1; g2 = g1; x1 = hi - phi * (hi - lo); g1 = g(x1); }
    else { lo = x1; x1 = x2; g1 = g2; x2 = lo + phi * (hi - lo); g2 = g(x2); }
  }
  double a = std::exp(0.5 * (lo + hi));
  return {a, a * ratio};
}

}  // namespace typomine

#endif
