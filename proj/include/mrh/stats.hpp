#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace mrh {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double inv_logit(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_beta_fn(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// log density of Gamma(shape, scale) at x; -inf outside the support.
inline double log_gamma_pdf(double x, double shape, double scale) {
  if (!(x > 0.0) || !(shape > 0.0) || !(scale > 0.0)) return kNegInf;
  return (shape - 1.0) * std::log(x) - x / scale - std::lgamma(shape) -
         shape * std::log(scale);
}

// log density of Beta(a, b) at x; -inf outside (0, 1).
inline double log_beta_pdf(double x, double a, double b) {
  if (!(x > 0.0) || !(x < 1.0)) return kNegInf;
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) -
         log_beta_fn(a, b);
}

inline double log_normal_pdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.918938533204672742;  // log sqrt(2*pi)
}

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Unbiased sample variance.
inline double variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

// Linear-interpolation quantile on an already sorted vector (R type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
  if (p <= 0.0) return sorted.front();
  if (p >= 1.0) return sorted.back();
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, p);
}

inline double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

// Standard normal quantile (Acklam's rational approximation, |err| < 1.2e-9).
inline double normal_quantile(double p) {
  if (!(p > 0.0) || !(p < 1.0)) throw std::domain_error("normal_quantile: p outside (0,1)");
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                             1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                             6.680131188771972e+01, -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                             -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                             3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > phigh) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

inline double log_binom_pmf(int k, int n, double p) {
  if (k < 0 || k > n) return kNegInf;
  if (p <= 0.0) return k == 0 ? 0.0 : kNegInf;
  if (p >= 1.0) return k == n ? 0.0 : kNegInf;
  const double lc = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                    std::lgamma(n - k + 1.0);
  return lc + k * std::log(p) + (n - k) * std::log1p(-p);
}

// Two-sided exact binomial test: the p-value sums P(X = j) over all j whose
// probability does not exceed that of the observed count (the same rule R's
// binom.test uses). Small relative slack absorbs round-off in the comparison.
inline double binom_test_two_sided(int k, int n, double p0) {
  if (n < 0 || k < 0 || k > n) {
    throw std::invalid_argument("binom_test: invalid counts");
  }
  if (n == 0) return 1.0;
  if (p0 <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (p0 >= 1.0) return k == n ? 1.0 : 0.0;
  const double log_obs = log_binom_pmf(k, n, p0);
  const double cutoff = log_obs + 1e-7;
  double pval = 0.0;
  for (int j = 0; j <= n; ++j) {
    const double lp = log_binom_pmf(j, n, p0);
    if (lp <= cutoff) pval += std::exp(lp);
  }
  return std::min(1.0, pval);
}

}  // namespace mrh
