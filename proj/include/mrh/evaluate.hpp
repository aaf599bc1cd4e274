#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "mrh/classic.hpp"
#include "mrh/sampler.hpp"
#include "mrh/stats.hpp"
#include "mrh/survdata.hpp"
#include "mrh/tree.hpp"

namespace mrh {

struct CredibleEntry {
  double median = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

struct IcBlock {
  double neg2loglik = 0.0;  // at the point estimate
  int p_count = 0;          // free parameters, pruned splits excluded
  double p_d = 0.0;
  double dic = 0.0;
  double bic = 0.0;
  double aic = 0.0;
  bool has_dic = false;
};

struct GewekeResult {
  double z = 0.0;
  bool constant = false;
};

namespace detail {

inline CredibleEntry summarize_sample(std::vector<double> v, double level) {
  std::sort(v.begin(), v.end());
  CredibleEntry e;
  e.median = quantile_sorted(v, 0.5);
  e.lo = quantile_sorted(v, (1.0 - level) / 2.0);
  e.hi = quantile_sorted(v, 1.0 - (1.0 - level) / 2.0);
  return e;
}

inline std::size_t total_draws(const std::vector<Chain>& chains) {
  std::size_t n = 0;
  for (const auto& c : chains) n += c.size();
  return n;
}

}  // namespace detail

// Per-bin time-varying effect log(d_{j,l1} / d_{j,l0}), summarized over the
// pooled posterior draws by median and central credible interval. This is
// read directly off the joint posterior of the hazard increments.
inline std::vector<CredibleEntry> log_hr_bins(const std::vector<Chain>& chains, int l0, int l1,
                                              double level = 0.95) {
  if (chains.empty() || detail::total_draws(chains) == 0) {
    throw std::invalid_argument("log_hr_bins: no draws");
  }
  const int bins = chains.front().grid.bins();
  std::vector<std::vector<double>> per_bin(static_cast<std::size_t>(bins));
  for (auto& v : per_bin) v.reserve(detail::total_draws(chains));
  for (const auto& chain : chains) {
    for (std::size_t i = 0; i < chain.size(); ++i) {
      const std::vector<double> d0 = increments(chain.tree_at(i, l0));
      const std::vector<double> d1 = increments(chain.tree_at(i, l1));
      for (int b = 0; b < bins; ++b) {
        per_bin[static_cast<std::size_t>(b)].push_back(
            std::log(d1[static_cast<std::size_t>(b)]) - std::log(d0[static_cast<std::size_t>(b)]));
      }
    }
  }
  std::vector<CredibleEntry> out;
  out.reserve(per_bin.size());
  for (auto& v : per_bin) out.push_back(detail::summarize_sample(std::move(v), level));
  return out;
}

// Posterior predictive failure probability 1 - exp(-H_l(t) e^{x'beta}),
// returned as the draw-indexed sample across all chains.
inline std::vector<double> predictive_failure_prob(const std::vector<Chain>& chains,
                                                   const std::vector<double>& x, int stratum,
                                                   double t) {
  if (chains.empty()) throw std::invalid_argument("predictive_failure_prob: no chains");
  const TimeGrid& grid = chains.front().grid;
  if (t > grid.horizon()) throw std::domain_error("predictive_failure_prob: t beyond the grid horizon");
  std::vector<double> out;
  out.reserve(detail::total_draws(chains));
  for (const auto& chain : chains) {
    for (std::size_t i = 0; i < chain.size(); ++i) {
      const MrhTree tree = chain.tree_at(i, stratum);
      double eta = 0.0;
      for (std::size_t s = 0; s < x.size(); ++s) {
        eta += chain.draws[i][static_cast<std::size_t>(chain.layout.beta_col(static_cast<int>(s)))] * x[s];
      }
      out.push_back(-std::expm1(-cumulative_at(t, tree, grid) * std::exp(eta)));
    }
  }
  return out;
}

// GOF(t): mean absolute difference between the indicator {failure occurs
// after t} and the model probability of surviving past t, over subjects not
// censored before t. surv_prob holds P_i(failure > t) aligned with
// data.records. Always in [0, 1]; an empty risk set is signaled distinctly.
inline double gof(double t, const std::vector<double>& surv_prob, const Dataset& data) {
  if (surv_prob.size() != data.records.size()) {
    throw std::invalid_argument("gof: probability vector does not match the dataset");
  }
  double total = 0.0;
  std::size_t n_t = 0;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    if (!rec.event && rec.time < t) continue;  // censored before t: excluded
    const double p = surv_prob[i];
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("gof: probability outside [0,1]");
    const double indicator = rec.time > t ? 1.0 : 0.0;
    total += std::fabs(indicator - p);
    ++n_t;
  }
  if (n_t == 0) throw std::domain_error("gof: no subjects at risk at the requested time");
  return total / static_cast<double>(n_t);
}

// Survival probabilities P(failure > t) per subject under each model family,
// at a fixed parameter value.
inline std::vector<double> survival_probs(const ModelState& state, const Dataset& data, double t) {
  std::vector<double> out(data.records.size());
  std::vector<double> cum(static_cast<std::size_t>(data.stratum_count));
  for (int l = 0; l < data.stratum_count; ++l) {
    cum[static_cast<std::size_t>(l)] = cumulative_at(std::min(t, data.grid.horizon()),
                                                     state.trees[static_cast<std::size_t>(l)], data.grid);
  }
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    double eta = 0.0;
    for (std::size_t s = 0; s < rec.covariates.size(); ++s) eta += state.beta[s] * rec.covariates[s];
    out[i] = std::exp(-cum[static_cast<std::size_t>(rec.stratum)] * std::exp(eta));
  }
  return out;
}

inline std::vector<double> survival_probs_weibull(const WeibullNphFit& fit, const Dataset& data,
                                                  double t) {
  std::vector<double> out(data.records.size());
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    double eta = 0.0;
    for (std::size_t s = 0; s < rec.covariates.size(); ++s) eta += fit.beta[s] * rec.covariates[s];
    const double h = std::pow(fit.rate[static_cast<std::size_t>(rec.stratum)] * t,
                              fit.shape[static_cast<std::size_t>(rec.stratum)]);
    out[i] = std::exp(-h * std::exp(eta));
  }
  return out;
}

inline std::vector<double> survival_probs_pe(const PeFit& fit, const Dataset& data, double t) {
  std::vector<double> out(data.records.size());
  std::vector<double> cum(fit.rates.size());
  for (std::size_t l = 0; l < fit.rates.size(); ++l) {
    const auto& b = fit.boundaries[l];
    double h = 0.0;
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
      h += fit.rates[l][j] * std::max(0.0, std::min(t, b[j + 1]) - b[j]);
    }
    // Past the last boundary the final rate is extended.
    if (t > b.back()) h += fit.rates[l].back() * (t - b.back());
    cum[l] = h;
  }
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    double eta = 0.0;
    for (std::size_t s = 0; s < rec.covariates.size(); ++s) eta += fit.beta[s] * rec.covariates[s];
    out[i] = std::exp(-cum[static_cast<std::size_t>(rec.stratum)] * std::exp(eta));
  }
  return out;
}

// Parameterwise posterior medians assembled back into a ModelState (the
// point-estimate convention for the Bayesian information criteria).
inline ModelState posterior_median_state(const std::vector<Chain>& chains) {
  if (chains.empty() || detail::total_draws(chains) == 0) {
    throw std::invalid_argument("posterior_median_state: no draws");
  }
  const ChainLayout& lay = chains.front().layout;
  auto pooled_median = [&](int col) {
    std::vector<double> v;
    v.reserve(detail::total_draws(chains));
    for (const auto& chain : chains) {
      for (std::size_t i = 0; i < chain.size(); ++i) v.push_back(chain.draws[i][static_cast<std::size_t>(col)]);
    }
    return median(std::move(v));
  };

  ModelState state;
  for (int l = 0; l < lay.stratum_count; ++l) {
    HyperParams hp;
    hp.a = std::max(1, static_cast<int>(std::lround(pooled_median(lay.a_col(l)))));
    hp.lambda = pooled_median(lay.lambda_col(l));
    hp.k = pooled_median(lay.k_col(l));
    if (lay.gamma_sampled) {
      hp.gamma.resize(static_cast<std::size_t>(lay.splits()));
      for (int idx = 0; idx < lay.splits(); ++idx) {
        hp.gamma[static_cast<std::size_t>(idx)] = pooled_median(lay.gamma_col(l, idx));
      }
    }
    MrhTree tree(lay.depth, pooled_median(lay.h_col(l)), hp);
    tree.set_pruned_mask(chains.front().prune_masks[static_cast<std::size_t>(l)]);
    for (int idx = 0; idx < lay.splits(); ++idx) {
      if (!tree.pruned(idx)) {
        tree.set_split(idx, std::clamp(pooled_median(lay.r_col(l, idx)), 1e-12, 1.0 - 1e-12));
      }
    }
    state.trees.push_back(std::move(tree));
  }
  for (int s = 0; s < lay.covariate_count; ++s) state.beta.push_back(pooled_median(lay.beta_col(s)));
  return state;
}

inline int free_parameter_count(const std::vector<Chain>& chains) {
  const ChainLayout& lay = chains.front().layout;
  int p = lay.covariate_count;
  for (int l = 0; l < lay.stratum_count; ++l) {
    int unpruned = 0;
    for (char m : chains.front().prune_masks[static_cast<std::size_t>(l)]) unpruned += m ? 0 : 1;
    p += 1 + unpruned;  // H plus the free splits
    p += lay.a_sampled ? 1 : 0;
    p += lay.lambda_sampled ? 1 : 0;
    p += lay.k_sampled ? 1 : 0;
    p += lay.gamma_sampled ? unpruned : 0;
  }
  return p;
}

// Information criteria for a Bayesian fit: -2logL evaluated at the
// parameterwise posterior median, p_D = mean(-2logL) - (-2logL at median),
// DIC = mean(-2logL) + p_D, BIC/AIC with p = count of free parameters
// (pruned splits excluded).
inline IcBlock information_criteria(const std::vector<Chain>& chains, const Dataset& data) {
  if (chains.empty() || detail::total_draws(chains) == 0) {
    throw std::invalid_argument("information_criteria: missing log-likelihood trace");
  }
  double mean_neg2 = 0.0;
  std::size_t count = 0;
  for (const auto& chain : chains) {
    for (std::size_t i = 0; i < chain.size(); ++i) {
      mean_neg2 += -2.0 * chain.loglik_at(i);
      ++count;
    }
  }
  mean_neg2 /= static_cast<double>(count);

  const ModelState median_state = posterior_median_state(chains);
  IcBlock ic;
  ic.neg2loglik = -2.0 * log_likelihood(median_state, data);
  ic.p_count = free_parameter_count(chains);
  ic.p_d = mean_neg2 - ic.neg2loglik;
  ic.dic = mean_neg2 + ic.p_d;
  ic.has_dic = true;
  const double n = static_cast<double>(data.size());
  ic.bic = ic.neg2loglik + ic.p_count * std::log(n);
  ic.aic = ic.neg2loglik + 2.0 * ic.p_count;
  return ic;
}

inline IcBlock information_criteria_mle(double loglik, int p_count, int n) {
  IcBlock ic;
  ic.neg2loglik = -2.0 * loglik;
  ic.p_count = p_count;
  ic.has_dic = false;
  ic.bic = ic.neg2loglik + p_count * std::log(static_cast<double>(n));
  ic.aic = ic.neg2loglik + 2.0 * p_count;
  return ic;
}

namespace detail {

// Spectral density at frequency zero via a Bartlett lag window with
// bandwidth sqrt(n); nonnegative by construction of the window.
inline double spectral_density_zero(std::span<const double> v) {
  const std::size_t n = v.size();
  const double m = mean(v);
  const std::size_t max_lag = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (v[t] - m) * (v[t + lag] - m);
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  double s0 = c0;
  for (std::size_t k = 1; k <= max_lag && k < n; ++k) {
    s0 += 2.0 * (1.0 - static_cast<double>(k) / static_cast<double>(max_lag + 1)) * autocov(k);
  }
  return s0 > 0.0 ? s0 : c0;
}

}  // namespace detail

// Geweke convergence diagnostic: difference of the means of the first
// window_a and last window_b fractions of the chain over a spectral-density
// standard error. A zero-variance chain is flagged constant with z = 0.
inline GewekeResult geweke(std::span<const double> chain, double window_a = 0.1,
                           double window_b = 0.5) {
  const std::size_t n = chain.size();
  if (n < 100) throw std::invalid_argument("geweke: chain shorter than 100");
  if (!(window_a > 0.0) || !(window_b > 0.0) || window_a + window_b > 1.0) {
    throw std::invalid_argument("geweke: invalid window fractions");
  }
  const auto [mn, mx] = std::minmax_element(chain.begin(), chain.end());
  if (*mn == *mx) return {0.0, true};  // literally constant parameter
  const std::size_t na = static_cast<std::size_t>(window_a * static_cast<double>(n));
  const std::size_t nb = static_cast<std::size_t>(window_b * static_cast<double>(n));
  const auto seg_a = chain.subspan(0, na);
  const auto seg_b = chain.subspan(n - nb, nb);
  const double s_a = detail::spectral_density_zero(seg_a);
  const double s_b = detail::spectral_density_zero(seg_b);
  const double var = s_a / static_cast<double>(na) + s_b / static_cast<double>(nb);
  if (!(var > 0.0)) return {0.0, true};
  return {(mean(seg_a) - mean(seg_b)) / std::sqrt(var), false};
}

// Gelman-Rubin potential scale reduction factor for one parameter across
// chains of equal retained length. The split-chain variant halves each chain
// first. A single chain is an error (use geweke instead).
inline double gelman_rubin(const std::vector<std::vector<double>>& chains, bool split = false) {
  if (chains.size() < 2 && !split) {
    throw std::invalid_argument("gelman_rubin: needs >= 2 chains; use geweke for a single chain");
  }
  std::vector<std::vector<double>> use;
  if (split) {
    for (const auto& c : chains) {
      const std::size_t half = c.size() / 2;
      use.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
      use.emplace_back(c.begin() + static_cast<std::ptrdiff_t>(half), c.end());
    }
  } else {
    use = chains;
  }
  const std::size_t m = use.size();
  const std::size_t n = use.front().size();
  for (const auto& c : use) {
    if (c.size() != n) throw std::invalid_argument("gelman_rubin: chains must have equal length");
  }
  if (n < 2) throw std::invalid_argument("gelman_rubin: chains too short");

  std::vector<double> means(m);
  double w = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    means[j] = mean(use[j]);
    w += variance(use[j]);
  }
  w /= static_cast<double>(m);
  const double b_over_n = variance(means);
  if (!(w > 0.0)) return 1.0;  // all chains constant
  const double nn = static_cast<double>(n);
  const double var_plus = (nn - 1.0) / nn * w + b_over_n;
  return std::sqrt((var_plus + b_over_n / static_cast<double>(m)) / w);
}

// Centered moving average over bins; the optional smoother for per-bin
// log-HR output (window 1 = identity).
inline std::vector<double> moving_average(const std::vector<double>& v, int window) {
  if (window <= 1) return v;
  std::vector<double> out(v.size());
  const int half = window / 2;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(i) - half);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(v.size()) - 1,
                                                       static_cast<std::ptrdiff_t>(i) + half);
    double s = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) s += v[static_cast<std::size_t>(k)];
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// FitSummary: the shared summary schema for MRH, PE and Weibull fits.
// ---------------------------------------------------------------------------

struct HazardRow {
  int stratum = 0;
  int bin = 0;
  double t_lo = 0.0, t_hi = 0.0;
  double estimate = 0.0, lo = 0.0, hi = 0.0;
};

struct LogHrRow {
  int stratum_base = 0, stratum_alt = 1;
  int bin = 0;
  double t_lo = 0.0, t_hi = 0.0;
  double estimate = 0.0, lo = 0.0, hi = 0.0;
  double smoothed = 0.0;
};

struct BetaRow {
  std::string name;
  double estimate = 0.0, lo = 0.0, hi = 0.0;
};

struct GofRow {
  double t = 0.0;
  double value = 0.0;
};

struct DiagnosticRow {
  std::string param;
  double geweke_z = 0.0;  // max |z| across chains
  double rhat = std::numeric_limits<double>::quiet_NaN();
  bool constant = false;
};

struct FitSummary {
  std::string model;
  std::string dataset_hash;
  int n = 0;
  int stratum_count = 0;
  double horizon = 0.0;
  double ci_level = 0.95;
  IcBlock ic;
  std::vector<HazardRow> hazard;
  std::vector<LogHrRow> log_hr;
  std::vector<BetaRow> beta;
  std::vector<GofRow> gof;
  std::vector<DiagnosticRow> diagnostics;
};

namespace detail {

inline std::vector<double> gof_grid(double horizon, int points = 9) {
  std::vector<double> ts;
  for (int i = 1; i <= points; ++i) ts.push_back(horizon * static_cast<double>(i) / 10.0);
  return ts;
}

template <typename ProbFn>
inline void fill_gof(FitSummary& summary, const Dataset& data, ProbFn probs) {
  for (double t : gof_grid(data.grid.horizon())) {
    try {
      summary.gof.push_back({t, gof(t, probs(t), data)});
    } catch (const std::domain_error&) {
      // empty risk set at this t; skip the row
    }
  }
}

}  // namespace detail

inline FitSummary summarize_mrh(const std::vector<Chain>& chains, const Dataset& data,
                                const std::string& model_name, double level = 0.95,
                                int smooth_window = 1) {
  if (chains.empty()) throw std::invalid_argument("summarize_mrh: no chains");
  FitSummary summary;
  summary.model = model_name;
  summary.n = data.size();
  summary.stratum_count = data.stratum_count;
  summary.horizon = data.grid.horizon();
  summary.ci_level = level;

  const ChainLayout& lay = chains.front().layout;
  const TimeGrid& grid = chains.front().grid;
  const int bins = grid.bins();

  // Per-bin hazard rates d_j / w_j per stratum.
  for (int l = 0; l < lay.stratum_count; ++l) {
    std::vector<std::vector<double>> per_bin(static_cast<std::size_t>(bins));
    for (const auto& chain : chains) {
      for (std::size_t i = 0; i < chain.size(); ++i) {
        const std::vector<double> d = increments(chain.tree_at(i, l));
        for (int b = 0; b < bins; ++b) {
          per_bin[static_cast<std::size_t>(b)].push_back(d[static_cast<std::size_t>(b)] / grid.width(b + 1));
        }
      }
    }
    for (int b = 0; b < bins; ++b) {
      const CredibleEntry e = detail::summarize_sample(std::move(per_bin[static_cast<std::size_t>(b)]), level);
      summary.hazard.push_back({l, b + 1, grid.lower(b + 1), grid.upper(b + 1), e.median, e.lo, e.hi});
    }
  }

  for (int l = 0; l + 1 < lay.stratum_count; ++l) {
    const std::vector<CredibleEntry> rows = log_hr_bins(chains, l, l + 1, level);
    std::vector<double> medians;
    for (const auto& e : rows) medians.push_back(e.median);
    const std::vector<double> smoothed = moving_average(medians, smooth_window);
    for (int b = 0; b < bins; ++b) {
      summary.log_hr.push_back({l, l + 1, b + 1, grid.lower(b + 1), grid.upper(b + 1),
                                rows[static_cast<std::size_t>(b)].median,
                                rows[static_cast<std::size_t>(b)].lo,
                                rows[static_cast<std::size_t>(b)].hi,
                                smoothed[static_cast<std::size_t>(b)]});
    }
  }

  for (int s = 0; s < lay.covariate_count; ++s) {
    std::vector<double> v;
    for (const auto& chain : chains) {
      for (std::size_t i = 0; i < chain.size(); ++i) v.push_back(chain.draws[i][static_cast<std::size_t>(lay.beta_col(s))]);
    }
    const CredibleEntry e = detail::summarize_sample(std::move(v), level);
    summary.beta.push_back({data.covariate_names[static_cast<std::size_t>(s)], e.median, e.lo, e.hi});
  }

  summary.ic = information_criteria(chains, data);

  const ModelState median_state = posterior_median_state(chains);
  detail::fill_gof(summary, data, [&](double t) { return survival_probs(median_state, data, t); });

  // Convergence diagnostics per recorded parameter (iteration column
  // excluded; the log-likelihood trace is diagnosed as well).
  for (int col = 1; col < lay.columns(); ++col) {
    DiagnosticRow row;
    row.param = lay.names[static_cast<std::size_t>(col)];
    double zmax = 0.0;
    bool all_const = true;
    bool any_tested = false;
    std::vector<std::vector<double>> per_chain;
    for (const auto& chain : chains) {
      std::vector<double> v = chain.column(col);
      if (v.size() >= 100) {
        any_tested = true;
        const GewekeResult g = geweke(v);
        if (!g.constant) {
          all_const = false;
          zmax = std::max(zmax, std::fabs(g.z));
        }
      }
      per_chain.push_back(std::move(v));
    }
    row.constant = any_tested && all_const;
    row.geweke_z = zmax;
    if (chains.size() >= 2 && per_chain.front().size() >= 2) {
      row.rhat = gelman_rubin(per_chain);
    }
    summary.diagnostics.push_back(std::move(row));
  }
  return summary;
}

inline FitSummary summarize_weibull(const WeibullNphFit& fit, const Dataset& data,
                                    const std::string& model_name = "WeibullNPH",
                                    double level = 0.95) {
  FitSummary summary;
  summary.model = model_name;
  summary.n = data.size();
  summary.stratum_count = data.stratum_count;
  summary.horizon = data.grid.horizon();
  summary.ci_level = level;
  const double zl = normal_quantile(1.0 - (1.0 - level) / 2.0);
  const TimeGrid& grid = data.grid;
  const int strata = fit.strata();

  auto cov = [&](int i, int j) {
    if (fit.covariance.empty()) return 0.0;
    return fit.covariance[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  };

  for (int l = 0; l < strata; ++l) {
    const double kappa = fit.shape[static_cast<std::size_t>(l)];
    const double lambda = fit.rate[static_cast<std::size_t>(l)];
    for (int b = 1; b <= grid.bins(); ++b) {
      const double t = 0.5 * (grid.lower(b) + grid.upper(b));
      const double log_h = std::log(kappa) + kappa * std::log(lambda) + (kappa - 1.0) * std::log(t);
      // Delta method on log h over (kappa, lambda).
      const double gk = 1.0 / kappa + std::log(lambda * t);
      const double gl_ = kappa / lambda;
      const double var = gk * gk * cov(l, l) + gl_ * gl_ * cov(strata + l, strata + l) +
                         2.0 * gk * gl_ * cov(l, strata + l);
      const double half = zl * std::sqrt(std::max(0.0, var));
      summary.hazard.push_back({l, b, grid.lower(b), grid.upper(b), std::exp(log_h),
                                std::exp(log_h - half), std::exp(log_h + half)});
    }
  }

  for (int l = 0; l + 1 < strata; ++l) {
    for (int b = 1; b <= grid.bins(); ++b) {
      const double t = 0.5 * (grid.lower(b) + grid.upper(b));
      const double est = weibull_log_hr(fit, t, l, l + 1);
      const double g0k = -(1.0 / fit.shape[static_cast<std::size_t>(l)] + std::log(fit.rate[static_cast<std::size_t>(l)] * t));
      const double g0l = -fit.shape[static_cast<std::size_t>(l)] / fit.rate[static_cast<std::size_t>(l)];
      const double g1k = 1.0 / fit.shape[static_cast<std::size_t>(l + 1)] + std::log(fit.rate[static_cast<std::size_t>(l + 1)] * t);
      const double g1l = fit.shape[static_cast<std::size_t>(l + 1)] / fit.rate[static_cast<std::size_t>(l + 1)];
      const int idx[4] = {l, strata + l, l + 1, strata + l + 1};
      const double grads[4] = {g0k, g0l, g1k, g1l};
      double var = 0.0;
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) var += grads[i] * grads[j] * cov(idx[i], idx[j]);
      }
      const double half = zl * std::sqrt(std::max(0.0, var));
      summary.log_hr.push_back({l, l + 1, b, grid.lower(b), grid.upper(b), est, est - half, est + half, est});
    }
  }

  for (std::size_t s = 0; s < fit.beta.size(); ++s) {
    const int i = 2 * strata + static_cast<int>(s);
    const double se = std::sqrt(std::max(0.0, cov(i, i)));
    summary.beta.push_back({data.covariate_names[s], fit.beta[s], fit.beta[s] - zl * se,
                            fit.beta[s] + zl * se});
  }

  summary.ic = information_criteria_mle(fit.loglik, 2 * strata + static_cast<int>(fit.beta.size()),
                                        data.size());
  detail::fill_gof(summary, data, [&](double t) { return survival_probs_weibull(fit, data, t); });
  return summary;
}

inline FitSummary summarize_pe(const PeFit& fit, const Dataset& data,
                               const std::string& model_name, double level = 0.95) {
  FitSummary summary;
  summary.model = model_name;
  summary.n = data.size();
  summary.stratum_count = data.stratum_count;
  summary.horizon = data.grid.horizon();
  summary.ci_level = level;
  const double zl = normal_quantile(1.0 - (1.0 - level) / 2.0);

  int total_bins = 0;
  for (std::size_t l = 0; l < fit.rates.size(); ++l) {
    const auto& b = fit.boundaries[l];
    for (std::size_t j = 0; j + 1 < b.size(); ++j) {
      const double rate = fit.rates[l][j];
      const double deaths = fit.event_counts[l][j];
      const double half = zl / std::sqrt(std::max(1.0, deaths));  // on the log scale
      summary.hazard.push_back({static_cast<int>(l), static_cast<int>(j) + 1, b[j], b[j + 1],
                                rate, rate * std::exp(-half), rate * std::exp(half)});
      ++total_bins;
    }
  }

  if (fit.rates.size() >= 2) {
    // Union of the two strata's boundaries inside the common support.
    const auto& b0 = fit.boundaries[0];
    const auto& b1 = fit.boundaries[1];
    std::vector<double> edges;
    const double end = std::min(b0.back(), b1.back());
    for (double e : b0) {
      if (e <= end) edges.push_back(e);
    }
    for (double e : b1) {
      if (e <= end) edges.push_back(e);
    }
    if (edges.empty() || edges.back() < end) edges.push_back(end);
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    int bin = 1;
    for (std::size_t i = 0; i + 1 < edges.size(); ++i, ++bin) {
      const double mid = 0.5 * (edges[i] + edges[i + 1]);
      const double est = pe_log_hr(fit, mid);
      const int j0 = fit.bin_of(0, mid) - 1;
      const int j1 = fit.bin_of(1, mid) - 1;
      const double var = 1.0 / std::max(1.0, fit.event_counts[0][static_cast<std::size_t>(j0)]) +
                         1.0 / std::max(1.0, fit.event_counts[1][static_cast<std::size_t>(j1)]);
      const double half = zl * std::sqrt(var);
      summary.log_hr.push_back({0, 1, bin, edges[i], edges[i + 1], est, est - half, est + half, est});
    }
  }

  for (std::size_t s = 0; s < fit.beta.size(); ++s) {
    const double se = fit.beta_cov.empty()
                          ? 0.0
                          : std::sqrt(std::max(0.0, fit.beta_cov[s][s]));
    summary.beta.push_back({data.covariate_names[s], fit.beta[s], fit.beta[s] - zl * se,
                            fit.beta[s] + zl * se});
  }

  summary.ic = information_criteria_mle(fit.loglik, total_bins + static_cast<int>(fit.beta.size()),
                                        data.size());
  detail::fill_gof(summary, data, [&](double t) { return survival_probs_pe(fit, data, t); });
  return summary;
}

}  // namespace mrh
