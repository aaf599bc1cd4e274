#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrh/stats.hpp"
#include "mrh/survdata.hpp"

namespace mrh {

namespace detail {

// Gauss-Jordan inverse with partial pivoting; adequate for the small dense
// systems in this module. Returns false on a (near-)singular matrix.
inline bool invert_matrix(std::vector<std::vector<double>> a, std::vector<std::vector<double>>& out) {
  const std::size_t n = a.size();
  out.assign(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) out[i][i] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[pivot][col])) pivot = r;
    }
    if (std::fabs(a[pivot][col]) < 1e-300) return false;
    std::swap(a[pivot], a[col]);
    std::swap(out[pivot], out[col]);
    const double inv = 1.0 / a[col][col];
    for (std::size_t c = 0; c < n; ++c) {
      a[col][c] *= inv;
      out[col][c] *= inv;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      if (f == 0.0) continue;
      for (std::size_t c = 0; c < n; ++c) {
        a[r][c] -= f * a[col][c];
        out[r][c] -= f * out[col][c];
      }
    }
  }
  return true;
}

inline bool solve_linear(std::vector<std::vector<double>> a, std::vector<double> b,
                         std::vector<double>& x) {
  std::vector<std::vector<double>> inv;
  if (!invert_matrix(std::move(a), inv)) return false;
  const std::size_t n = b.size();
  x.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) x[i] += inv[i][j] * b[j];
  }
  return true;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Non-proportional-hazards Weibull model: separate (shape, rate) per stratum,
// shared proportional effects.
// ---------------------------------------------------------------------------

struct WeibullNphFit {
  std::vector<double> shape;  // kappa per stratum
  std::vector<double> rate;   // lambda per stratum
  std::vector<double> beta;
  double loglik = 0.0;
  // Covariance of (kappa_0.., lambda_0.., beta..) from the numerical Hessian.
  std::vector<std::vector<double>> covariance;

  int strata() const { return static_cast<int>(shape.size()); }
};

namespace detail {

// Packed parameter order: log kappa per stratum, log lambda per stratum, beta.
struct WeibullObjective {
  const Dataset& data;
  int strata;
  int z;

  int dim() const { return 2 * strata + z; }

  double loglik(const std::vector<double>& theta) const {
    double ll = 0.0;
    for (const auto& rec : data.records) {
      const int l = rec.stratum;
      const double kappa = std::exp(theta[static_cast<std::size_t>(l)]);
      const double lambda = std::exp(theta[static_cast<std::size_t>(strata + l)]);
      double eta = 0.0;
      for (int s = 0; s < z; ++s) eta += theta[static_cast<std::size_t>(2 * strata + s)] * rec.covariates[static_cast<std::size_t>(s)];
      const double t = std::max(rec.time, 1e-12);
      const double lt = lambda * t;
      const double pow_term = std::pow(lt, kappa);
      if (rec.event) ll += std::log(kappa) + kappa * std::log(lambda) + (kappa - 1.0) * std::log(t) + eta;
      ll -= pow_term * std::exp(eta);
    }
    return ll;
  }

  // Gradient with respect to the packed (log-scale) parameters.
  std::vector<double> gradient(const std::vector<double>& theta) const {
    std::vector<double> g(static_cast<std::size_t>(dim()), 0.0);
    for (const auto& rec : data.records) {
      const int l = rec.stratum;
      const double kappa = std::exp(theta[static_cast<std::size_t>(l)]);
      const double lambda = std::exp(theta[static_cast<std::size_t>(strata + l)]);
      double eta = 0.0;
      for (int s = 0; s < z; ++s) eta += theta[static_cast<std::size_t>(2 * strata + s)] * rec.covariates[static_cast<std::size_t>(s)];
      const double t = std::max(rec.time, 1e-12);
      const double log_lt = std::log(lambda) + std::log(t);
      const double pow_term = std::pow(lambda * t, kappa);
      const double ee = std::exp(eta);
      const double d = rec.event ? 1.0 : 0.0;
      // d/dkappa, then chain rule * kappa for the log parametrization
      g[static_cast<std::size_t>(l)] += kappa * (d * (1.0 / kappa + log_lt) - pow_term * log_lt * ee);
      // d/dlambda * lambda
      g[static_cast<std::size_t>(strata + l)] += kappa * (d - pow_term * ee);
      for (int s = 0; s < z; ++s) {
        g[static_cast<std::size_t>(2 * strata + s)] += rec.covariates[static_cast<std::size_t>(s)] * (d - pow_term * ee);
      }
    }
    return g;
  }
};

// Compact BFGS minimizer with Armijo backtracking. Returns true when the
// gradient inf-norm dropped below tol.
template <typename F, typename G>
inline bool bfgs_minimize(std::vector<double>& x, F f, G grad, double tol, int max_iter) {
  const std::size_t n = x.size();
  std::vector<std::vector<double>> hinv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) hinv[i][i] = 1.0;
  double fx = f(x);
  std::vector<double> g = grad(x);

  auto inf_norm = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double a : v) m = std::max(m, std::fabs(a));
    return m;
  };

  for (int iter = 0; iter < max_iter; ++iter) {
    if (inf_norm(g) < tol) return true;
    std::vector<double> p(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) p[i] -= hinv[i][j] * g[j];
    }
    double gp = 0.0;
    for (std::size_t i = 0; i < n; ++i) gp += g[i] * p[i];
    if (gp >= 0.0) {  // lost positive definiteness; restart from steepest descent
      for (std::size_t i = 0; i < n; ++i) {
        std::fill(hinv[i].begin(), hinv[i].end(), 0.0);
        hinv[i][i] = 1.0;
        p[i] = -g[i];
      }
      gp = 0.0;
      for (std::size_t i = 0; i < n; ++i) gp += g[i] * p[i];
    }
    double step = 1.0;
    std::vector<double> xn(n);
    double fn = 0.0;
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls) {
      for (std::size_t i = 0; i < n; ++i) xn[i] = x[i] + step * p[i];
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + 1e-4 * step * gp) {
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok) return inf_norm(g) < tol * 10.0;  // stalled line search
    std::vector<double> gn = grad(xn);
    std::vector<double> s(n), y(n);
    double sy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = xn[i] - x[i];
      y[i] = gn[i] - g[i];
      sy += s[i] * y[i];
    }
    x = xn;
    fx = fn;
    g = gn;
    if (sy > 1e-12) {  // BFGS inverse update
      std::vector<double> hy(n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) hy[i] += hinv[i][j] * y[j];
      }
      double yhy = 0.0;
      for (std::size_t i = 0; i < n; ++i) yhy += y[i] * hy[i];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          hinv[i][j] += ((sy + yhy) / (sy * sy)) * s[i] * s[j] -
                        (hy[i] * s[j] + s[i] * hy[j]) / sy;
        }
      }
    }
  }
  return inf_norm(grad(x)) < tol;
}

}  // namespace detail

// Joint MLE of the stated likelihood over (kappa_l, lambda_l, beta) by BFGS
// on log-transformed positive parameters, from 5 deterministic multi-starts
// (perturbed exponential-fit initializers); the best optimum wins.
inline WeibullNphFit fit_weibull_nph(const Dataset& data) {
  data.validate();
  const int strata = data.stratum_count;
  const int z = data.covariate_count();
  for (int l = 0; l < strata; ++l) {
    if (data.events_in(l) < 2) {
      throw std::invalid_argument("fit_weibull_nph: stratum " + std::to_string(l) + " has fewer than 2 events");
    }
  }
  detail::WeibullObjective obj{data, strata, z};

  // Exponential initializer: kappa = 1, lambda = events / exposure.
  std::vector<double> base(static_cast<std::size_t>(obj.dim()), 0.0);
  for (int l = 0; l < strata; ++l) {
    double events = 0.0, expo = 0.0;
    for (const auto& rec : data.records) {
      if (rec.stratum != l) continue;
      events += rec.event ? 1.0 : 0.0;
      expo += rec.time;
    }
    base[static_cast<std::size_t>(l)] = 0.0;  // log kappa
    base[static_cast<std::size_t>(strata + l)] = std::log(std::max(events, 0.5) / std::max(expo, 1e-12));
  }

  const double kappa_perturb[5] = {1.0, 0.7, 1.4, 1.0, 1.0};
  const double rate_perturb[5] = {1.0, 1.0, 1.0, 2.0, 0.5};
  auto neg = [&](const std::vector<double>& x) { return -obj.loglik(x); };
  auto ngrad = [&](const std::vector<double>& x) {
    std::vector<double> g = obj.gradient(x);
    for (double& v : g) v = -v;
    return g;
  };
  auto inf_norm = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double a : v) m = std::max(m, std::fabs(a));
    return m;
  };
  // Newton polish on the packed parameters: the BFGS line search stalls once
  // objective differences sink into round-off, well before the gradient gate.
  auto polish = [&](std::vector<double>& theta) {
    const int dim = obj.dim();
    for (int iter = 0; iter < 25; ++iter) {
      std::vector<double> g = ngrad(theta);
      if (inf_norm(g) < 1e-9) break;
      std::vector<std::vector<double>> hess(static_cast<std::size_t>(dim),
                                            std::vector<double>(static_cast<std::size_t>(dim), 0.0));
      for (int j = 0; j < dim; ++j) {
        const double h = 1e-6 * std::max(1.0, std::fabs(theta[static_cast<std::size_t>(j)]));
        std::vector<double> hi = theta, lo = theta;
        hi[static_cast<std::size_t>(j)] += h;
        lo[static_cast<std::size_t>(j)] -= h;
        const std::vector<double> gh = ngrad(hi), gl = ngrad(lo);
        for (int i = 0; i < dim; ++i) {
          hess[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +=
              (gh[static_cast<std::size_t>(i)] - gl[static_cast<std::size_t>(i)]) / (2.0 * h);
        }
      }
      std::vector<double> step;
      if (!detail::solve_linear(hess, g, step)) break;
      double scale = 1.0;
      bool improved = false;
      for (int ls = 0; ls < 30; ++ls) {
        std::vector<double> cand = theta;
        for (int i = 0; i < dim; ++i) cand[static_cast<std::size_t>(i)] -= scale * step[static_cast<std::size_t>(i)];
        if (inf_norm(ngrad(cand)) < inf_norm(g)) {
          theta = cand;
          improved = true;
          break;
        }
        scale *= 0.5;
      }
      if (!improved) break;
    }
  };

  std::vector<double> best;
  double best_ll = -std::numeric_limits<double>::infinity();
  std::vector<double> last_attempt;
  for (int s = 0; s < 5; ++s) {
    std::vector<double> theta = base;
    for (int l = 0; l < strata; ++l) {
      theta[static_cast<std::size_t>(l)] += std::log(kappa_perturb[s]);
      theta[static_cast<std::size_t>(strata + l)] += std::log(rate_perturb[s]);
    }
    detail::bfgs_minimize(theta, neg, ngrad, 1e-8, 500);
    polish(theta);
    last_attempt = theta;
    if (inf_norm(ngrad(theta)) > 1e-6) continue;  // gradient gate at the optimum
    const double ll = obj.loglik(theta);
    if (ll > best_ll) {
      best_ll = ll;
      best = theta;
    }
  }
  if (best.empty()) {
    std::string msg = "fit_weibull_nph: optimizer did not converge; best iterate:";
    for (double v : last_attempt) msg += " " + std::to_string(v);
    throw std::runtime_error(msg);
  }

  WeibullNphFit fit;
  for (int l = 0; l < strata; ++l) {
    fit.shape.push_back(std::exp(best[static_cast<std::size_t>(l)]));
    fit.rate.push_back(std::exp(best[static_cast<std::size_t>(strata + l)]));
  }
  for (int s = 0; s < z; ++s) fit.beta.push_back(best[static_cast<std::size_t>(2 * strata + s)]);
  fit.loglik = best_ll;

  // Observed information in the natural parametrization by central finite
  // differences of the analytic gradient; covariance is its inverse.
  const int dim = obj.dim();
  auto grad_natural = [&](const std::vector<double>& phi) {
    std::vector<double> theta(static_cast<std::size_t>(dim));
    for (int l = 0; l < strata; ++l) {
      theta[static_cast<std::size_t>(l)] = std::log(phi[static_cast<std::size_t>(l)]);
      theta[static_cast<std::size_t>(strata + l)] = std::log(phi[static_cast<std::size_t>(strata + l)]);
    }
    for (int s = 0; s < z; ++s) theta[static_cast<std::size_t>(2 * strata + s)] = phi[static_cast<std::size_t>(2 * strata + s)];
    std::vector<double> g = obj.gradient(theta);
    // d/dphi = (d/dtheta) / phi for the log-parametrized coordinates
    for (int l = 0; l < 2 * strata; ++l) g[static_cast<std::size_t>(l)] /= phi[static_cast<std::size_t>(l)];
    return g;
  };
  std::vector<double> phi(static_cast<std::size_t>(dim));
  for (int l = 0; l < strata; ++l) {
    phi[static_cast<std::size_t>(l)] = fit.shape[static_cast<std::size_t>(l)];
    phi[static_cast<std::size_t>(strata + l)] = fit.rate[static_cast<std::size_t>(l)];
  }
  for (int s = 0; s < z; ++s) phi[static_cast<std::size_t>(2 * strata + s)] = fit.beta[static_cast<std::size_t>(s)];
  std::vector<std::vector<double>> hess(static_cast<std::size_t>(dim), std::vector<double>(static_cast<std::size_t>(dim), 0.0));
  for (int j = 0; j < dim; ++j) {
    const double h = 1e-5 * std::max(1.0, std::fabs(phi[static_cast<std::size_t>(j)]));
    std::vector<double> hi = phi, lo = phi;
    hi[static_cast<std::size_t>(j)] += h;
    lo[static_cast<std::size_t>(j)] -= h;
    const std::vector<double> gh = grad_natural(hi);
    const std::vector<double> gl = grad_natural(lo);
    for (int i = 0; i < dim; ++i) {
      hess[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] -= (gh[static_cast<std::size_t>(i)] - gl[static_cast<std::size_t>(i)]) / (2.0 * h);
    }
  }
  for (int i = 0; i < dim; ++i) {  // symmetrize
    for (int j = i + 1; j < dim; ++j) {
      const double v = 0.5 * (hess[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] + hess[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)]);
      hess[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v;
      hess[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = v;
    }
  }
  if (!detail::invert_matrix(hess, fit.covariance)) {
    fit.covariance.assign(static_cast<std::size_t>(dim), std::vector<double>(static_cast<std::size_t>(dim), 0.0));
  }
  return fit;
}

// Time-varying log hazard ratio of stratum l1 over l0 under the Weibull fit:
// log( k1 l1 (l1 t)^{k1-1} / (k0 l0 (l0 t)^{k0-1}) ). Constant in t exactly
// when the shapes agree.
inline double weibull_log_hr(const WeibullNphFit& fit, double t, int l0 = 0, int l1 = 1) {
  if (!(t > 0.0)) throw std::domain_error("weibull_log_hr: t must be positive");
  auto log_hazard = [&](int l) {
    const double kappa = fit.shape[static_cast<std::size_t>(l)];
    const double lambda = fit.rate[static_cast<std::size_t>(l)];
    return std::log(kappa) + kappa * std::log(lambda) + (kappa - 1.0) * std::log(t);
  };
  return log_hazard(l1) - log_hazard(l0);
}

// ---------------------------------------------------------------------------
// Adjusted piecewise-exponential models with bin merging and AIC selection.
// ---------------------------------------------------------------------------

enum class PeBinning { equal, quantile };

struct PeFit {
  PeBinning strategy = PeBinning::equal;
  int j_selected = 0;  // candidate bin count that won the AIC selection
  std::vector<std::vector<double>> boundaries;  // per stratum, starting at 0, after merging
  std::vector<std::vector<double>> rates;       // per stratum per retained bin
  std::vector<std::vector<double>> event_counts;
  std::vector<double> beta;
  std::vector<std::vector<double>> beta_cov;
  double loglik = 0.0;
  double aic = std::numeric_limits<double>::infinity();

  // Positive observed information for one rate: sum(delta) / rate^2.
  double fisher_info(int l, int bin) const {
    const double rate = rates[static_cast<std::size_t>(l)][static_cast<std::size_t>(bin)];
    return event_counts[static_cast<std::size_t>(l)][static_cast<std::size_t>(bin)] / (rate * rate);
  }

  int bin_of(int l, double t) const {
    const auto& b = boundaries[static_cast<std::size_t>(l)];
    if (!(t >= 0.0)) throw std::domain_error("PeFit: negative time");
    if (t > b.back()) throw std::domain_error("PeFit: time beyond the last boundary");
    if (t <= b[1]) return 1;
    const auto it = std::lower_bound(b.begin(), b.end(), t);
    return static_cast<int>(it - b.begin());
  }
};

namespace detail {

struct PeCandidate {
  std::vector<std::vector<double>> boundaries;
  std::vector<std::vector<double>> rates;
  std::vector<std::vector<double>> events;
  std::vector<double> beta;
  std::vector<std::vector<double>> beta_cov;
  double loglik = 0.0;
  int total_bins = 0;
};

// Fits one candidate binning by alternating the closed-form occurrence/
// exposure rate update with Newton steps on beta until the joint
// log-likelihood stabilizes.
inline bool fit_pe_candidate(const Dataset& data, std::vector<std::vector<double>> boundaries,
                             PeCandidate& out) {
  const int strata = data.stratum_count;
  const int z = data.covariate_count();
  const std::size_t n = data.records.size();

  // Merge zero-failure bins into the left neighbour (the leftmost bin merges
  // rightward) until every retained bin has an observed failure.
  for (int l = 0; l < strata; ++l) {
    auto& b = boundaries[static_cast<std::size_t>(l)];
    while (true) {
      const int bins = static_cast<int>(b.size()) - 1;
      if (bins < 1) return false;
      std::vector<double> events(static_cast<std::size_t>(bins), 0.0);
      for (const auto& rec : data.records) {
        if (rec.stratum != l || !rec.event) continue;
        int bin = 1;
        while (bin < bins && rec.time > b[static_cast<std::size_t>(bin)]) ++bin;
        events[static_cast<std::size_t>(bin - 1)] += 1.0;
      }
      int zero_bin = -1;
      for (int j = 0; j < bins; ++j) {
        if (events[static_cast<std::size_t>(j)] == 0.0) {
          zero_bin = j;
          break;
        }
      }
      if (zero_bin < 0) break;
      if (bins == 1) return false;  // a stratum with no failures is unfittable
      // Dropping the left edge of the zero bin merges it leftward; for the
      // leftmost bin this drops its right edge, merging rightward.
      b.erase(b.begin() + (zero_bin == 0 ? 1 : zero_bin));
    }
  }

  // Per-subject exposures and failure bins under the merged boundaries.
  std::vector<int> fail_bin(n, -1);
  std::vector<std::vector<double>> omega(n);
  std::vector<std::vector<double>> events_per_bin(static_cast<std::size_t>(strata));
  int total_bins = 0;
  for (int l = 0; l < strata; ++l) {
    events_per_bin[static_cast<std::size_t>(l)].assign(boundaries[static_cast<std::size_t>(l)].size() - 1, 0.0);
    total_bins += static_cast<int>(boundaries[static_cast<std::size_t>(l)].size()) - 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& rec = data.records[i];
    const auto& b = boundaries[static_cast<std::size_t>(rec.stratum)];
    const int bins = static_cast<int>(b.size()) - 1;
    omega[i].assign(static_cast<std::size_t>(bins), 0.0);
    for (int j = 0; j < bins; ++j) {
      const double lo = b[static_cast<std::size_t>(j)], hi = b[static_cast<std::size_t>(j + 1)];
      omega[i][static_cast<std::size_t>(j)] = std::max(0.0, std::min(rec.time, hi) - lo);
    }
    if (rec.event) {
      int bin = 1;
      while (bin < bins && rec.time > b[static_cast<std::size_t>(bin)]) ++bin;
      fail_bin[i] = bin - 1;
      events_per_bin[static_cast<std::size_t>(rec.stratum)][static_cast<std::size_t>(bin - 1)] += 1.0;
    }
  }

  std::vector<double> beta(static_cast<std::size_t>(z), 0.0);
  std::vector<std::vector<double>> rates(static_cast<std::size_t>(strata));
  std::vector<double> exp_eta(n, 1.0);

  auto loglik_of = [&]() {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& rec = data.records[i];
      const auto& lam = rates[static_cast<std::size_t>(rec.stratum)];
      double cum = 0.0;
      for (std::size_t j = 0; j < lam.size(); ++j) cum += omega[i][j] * lam[j];
      double eta = 0.0;
      for (int s = 0; s < z; ++s) eta += beta[static_cast<std::size_t>(s)] * rec.covariates[static_cast<std::size_t>(s)];
      if (rec.event) ll += std::log(lam[static_cast<std::size_t>(fail_bin[i])]) + eta;
      ll -= cum * exp_eta[i];
    }
    return ll;
  };

  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 500; ++iter) {
    // Closed-form rate profile given beta.
    for (int l = 0; l < strata; ++l) {
      const std::size_t bins = boundaries[static_cast<std::size_t>(l)].size() - 1;
      rates[static_cast<std::size_t>(l)].assign(bins, 0.0);
    }
    std::vector<std::vector<double>> denom(static_cast<std::size_t>(strata));
    for (int l = 0; l < strata; ++l) denom[static_cast<std::size_t>(l)].assign(rates[static_cast<std::size_t>(l)].size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& rec = data.records[i];
      auto& dn = denom[static_cast<std::size_t>(rec.stratum)];
      for (std::size_t j = 0; j < dn.size(); ++j) dn[j] += omega[i][j] * exp_eta[i];
    }
    for (int l = 0; l < strata; ++l) {
      for (std::size_t j = 0; j < rates[static_cast<std::size_t>(l)].size(); ++j) {
        rates[static_cast<std::size_t>(l)][j] =
            events_per_bin[static_cast<std::size_t>(l)][j] / denom[static_cast<std::size_t>(l)][j];
      }
    }

    // One Newton step on beta under the current rates.
    if (z > 0) {
      std::vector<double> grad(static_cast<std::size_t>(z), 0.0);
      std::vector<std::vector<double>> hess(static_cast<std::size_t>(z), std::vector<double>(static_cast<std::size_t>(z), 0.0));
      for (std::size_t i = 0; i < n; ++i) {
        const auto& rec = data.records[i];
        const auto& lam = rates[static_cast<std::size_t>(rec.stratum)];
        double cum = 0.0;
        for (std::size_t j = 0; j < lam.size(); ++j) cum += omega[i][j] * lam[j];
        const double mu = cum * exp_eta[i];
        const double d = rec.event ? 1.0 : 0.0;
        for (int s = 0; s < z; ++s) {
          grad[static_cast<std::size_t>(s)] += rec.covariates[static_cast<std::size_t>(s)] * (d - mu);
          for (int t = 0; t < z; ++t) {
            hess[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)] +=
                rec.covariates[static_cast<std::size_t>(s)] * rec.covariates[static_cast<std::size_t>(t)] * mu;
          }
        }
      }
      std::vector<double> step;
      if (solve_linear(hess, grad, step)) {
        for (int s = 0; s < z; ++s) beta[static_cast<std::size_t>(s)] += step[static_cast<std::size_t>(s)];
        for (std::size_t i = 0; i < n; ++i) {
          const auto& rec = data.records[i];
          double eta = 0.0;
          for (int s = 0; s < z; ++s) eta += beta[static_cast<std::size_t>(s)] * rec.covariates[static_cast<std::size_t>(s)];
          exp_eta[i] = std::exp(eta);
        }
      }
    }

    const double ll = loglik_of();
    if (std::fabs(ll - prev_ll) < 1e-8) {
      prev_ll = ll;
      break;
    }
    prev_ll = ll;
  }

  out.boundaries = std::move(boundaries);
  out.rates = std::move(rates);
  out.events = std::move(events_per_bin);
  out.beta = beta;
  out.loglik = prev_ll;
  out.total_bins = 0;
  for (const auto& b : out.boundaries) out.total_bins += static_cast<int>(b.size()) - 1;

  if (z > 0) {
    // Observed information for beta at the optimum.
    std::vector<std::vector<double>> hess(static_cast<std::size_t>(z), std::vector<double>(static_cast<std::size_t>(z), 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      const auto& rec = data.records[i];
      const auto& lam = out.rates[static_cast<std::size_t>(rec.stratum)];
      double cum = 0.0;
      for (std::size_t j = 0; j < lam.size(); ++j) cum += omega[i][j] * lam[j];
      const double mu = cum * exp_eta[i];
      for (int s = 0; s < z; ++s) {
        for (int t = 0; t < z; ++t) {
          hess[static_cast<std::size_t>(s)][static_cast<std::size_t>(t)] +=
              rec.covariates[static_cast<std::size_t>(s)] * rec.covariates[static_cast<std::size_t>(t)] * mu;
        }
      }
    }
    if (!invert_matrix(hess, out.beta_cov)) {
      out.beta_cov.assign(static_cast<std::size_t>(z), std::vector<double>(static_cast<std::size_t>(z), 0.0));
    }
  }
  return true;
}

}  // namespace detail

// Fits the adjusted PE model: for each candidate bin count j in 2..j_max the
// time axis is partitioned evenly (equal) or by per-stratum quantiles of the
// observed times (quantile), zero-failure bins are merged leftward, and the
// candidate minimizing AIC = -2 logL + 2 (#rates + z) wins; ties go to the
// smallest j.
inline PeFit fit_pe(const Dataset& data, PeBinning strategy, int j_max) {
  data.validate();
  if (j_max < 2) throw std::invalid_argument("fit_pe: j_max must be >= 2");
  const int strata = data.stratum_count;
  for (int l = 0; l < strata; ++l) {
    if (data.events_in(l) == 0) {
      throw std::invalid_argument("fit_pe: stratum " + std::to_string(l) +
                                  " has no observed failures and cannot be fitted");
    }
  }

  double t_max = 0.0;
  std::vector<std::vector<double>> times(static_cast<std::size_t>(strata));
  for (const auto& rec : data.records) {
    t_max = std::max(t_max, rec.time);
    times[static_cast<std::size_t>(rec.stratum)].push_back(rec.time);
  }
  for (auto& v : times) std::sort(v.begin(), v.end());

  PeFit best;
  best.strategy = strategy;
  for (int j = 2; j <= j_max; ++j) {
    std::vector<std::vector<double>> boundaries(static_cast<std::size_t>(strata));
    for (int l = 0; l < strata; ++l) {
      auto& b = boundaries[static_cast<std::size_t>(l)];
      if (strategy == PeBinning::equal) {
        for (int i = 0; i <= j; ++i) b.push_back(t_max * static_cast<double>(i) / static_cast<double>(j));
      } else {
        b.push_back(0.0);
        const auto& ts = times[static_cast<std::size_t>(l)];
        for (int i = 1; i < j; ++i) {
          b.push_back(quantile_sorted(ts, static_cast<double>(i) / static_cast<double>(j)));
        }
        b.push_back(ts.back());
      }
      // Drop duplicate edges (ties in the quantiles).
      b.erase(std::unique(b.begin(), b.end()), b.end());
      if (b.size() < 2 || !(b.back() > 0.0)) {
        b.clear();
      }
    }
    bool usable = true;
    for (const auto& b : boundaries) usable = usable && !b.empty();
    if (!usable) continue;

    detail::PeCandidate cand;
    if (!detail::fit_pe_candidate(data, std::move(boundaries), cand)) continue;
    const int z = data.covariate_count();
    const double aic = -2.0 * cand.loglik + 2.0 * (cand.total_bins + z);
    if (aic < best.aic) {
      best.aic = aic;
      best.j_selected = j;
      best.boundaries = cand.boundaries;
      best.rates = cand.rates;
      best.event_counts = cand.events;
      best.beta = cand.beta;
      best.beta_cov = cand.beta_cov;
      best.loglik = cand.loglik;
    }
  }
  if (best.j_selected == 0) throw std::runtime_error("fit_pe: no candidate binning could be fitted");
  return best;
}

// Per-bin log hazard ratio of stratum l1 over l0, each looked up in its own
// (possibly differently merged) bins.
inline double pe_log_hr(const PeFit& fit, double t, int l0 = 0, int l1 = 1) {
  if (static_cast<int>(fit.rates.size()) <= std::max(l0, l1)) {
    throw std::invalid_argument("pe_log_hr: stratum out of range");
  }
  const int b0 = fit.bin_of(l0, t);
  const int b1 = fit.bin_of(l1, t);
  return std::log(fit.rates[static_cast<std::size_t>(l1)][static_cast<std::size_t>(b1 - 1)]) -
         std::log(fit.rates[static_cast<std::size_t>(l0)][static_cast<std::size_t>(b0 - 1)]);
}

}  // namespace mrh
