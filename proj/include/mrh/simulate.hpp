#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "mrh/rng.hpp"
#include "mrh/survdata.hpp"

namespace mrh {

// True hazard of one stratum: piecewise-constant (right edges + rates, with
// an implicit left edge at 0) or Weibull with H(t) = (rate * t)^shape.
struct HazardSpec {
  enum class Kind { piecewise_constant, weibull };

  Kind kind = Kind::piecewise_constant;
  std::vector<double> edges;  // piecewise right edges, strictly increasing
  std::vector<double> rates;  // piecewise rates, one per segment
  double weibull_shape = 1.0;
  double weibull_rate = 1.0;

  static HazardSpec constant(double rate, double upto) {
    return piecewise({upto}, {rate});
  }

  static HazardSpec piecewise(std::vector<double> right_edges, std::vector<double> seg_rates) {
    HazardSpec s;
    s.kind = Kind::piecewise_constant;
    s.edges = std::move(right_edges);
    s.rates = std::move(seg_rates);
    s.validate();
    return s;
  }

  static HazardSpec weibull(double shape, double rate) {
    HazardSpec s;
    s.kind = Kind::weibull;
    s.weibull_shape = shape;
    s.weibull_rate = rate;
    s.validate();
    return s;
  }

  void validate() const {
    if (kind == Kind::weibull) {
      if (!(weibull_shape > 0.0) || !(weibull_rate > 0.0)) {
        throw std::invalid_argument("HazardSpec: Weibull parameters must be positive");
      }
      return;
    }
    if (edges.empty() || edges.size() != rates.size()) {
      throw std::invalid_argument("HazardSpec: need one rate per segment");
    }
    double prev = 0.0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (!(edges[i] > prev)) throw std::invalid_argument("HazardSpec: edges must be strictly increasing");
      if (!(rates[i] > 0.0)) throw std::invalid_argument("HazardSpec: rates must be strictly positive");
      prev = edges[i];
    }
  }

  double cumulative(double t) const {
    if (t <= 0.0) return 0.0;
    if (kind == Kind::weibull) return std::pow(weibull_rate * t, weibull_shape);
    double h = 0.0, prev = 0.0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (t <= edges[i]) return h + rates[i] * (t - prev);
      h += rates[i] * (edges[i] - prev);
      prev = edges[i];
    }
    return h;  // constant past the last edge
  }

  // Smallest t with cumulative(t) >= e. A piecewise spec has finite total
  // mass; targets beyond it return +inf (the caller censors at the last
  // edge, the documented tail rule).
  double inverse_cumulative(double e) const {
    if (e <= 0.0) return 0.0;
    if (kind == Kind::weibull) return std::pow(e, 1.0 / weibull_shape) / weibull_rate;
    double acc = 0.0, prev = 0.0;
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const double seg = rates[i] * (edges[i] - prev);
      if (e <= acc + seg) return prev + (e - acc) / rates[i];
      acc += seg;
      prev = edges[i];
    }
    return std::numeric_limits<double>::infinity();
  }

  double last_edge() const {
    return kind == Kind::weibull ? std::numeric_limits<double>::infinity() : edges.back();
  }
};

struct CovariateSpec {
  enum class Kind { binary, normal };
  Kind kind = Kind::binary;
  double p = 0.5;     // binary success probability
  double mean = 0.0;  // normal moments
  double sd = 1.0;
  std::string name;

  static CovariateSpec binary(double prob, std::string nm = "") {
    CovariateSpec c;
    c.kind = Kind::binary;
    c.p = prob;
    c.name = std::move(nm);
    return c;
  }
  static CovariateSpec normal(double mean, double sd, std::string nm = "") {
    CovariateSpec c;
    c.kind = Kind::normal;
    c.mean = mean;
    c.sd = sd;
    c.name = std::move(nm);
    return c;
  }
};

struct SimConfig {
  std::vector<int> n_per_stratum;
  std::vector<double> beta;  // proportional effects, one per covariate
  std::vector<CovariateSpec> covariates;
  double c_admin = std::numeric_limits<double>::infinity();  // administrative censoring time
  double c_rate = 0.0;  // independent exponential censoring rate (0 = none)
  std::uint64_t seed = 0;
  int grid_m = 4;
  double horizon = 0.0;  // grid horizon of the emitted Dataset; 0 = max observed time

  void validate() const {
    if (n_per_stratum.empty()) throw std::invalid_argument("SimConfig: needs at least one stratum");
    for (int n : n_per_stratum) {
      if (n < 1) throw std::invalid_argument("SimConfig: n per stratum must be >= 1");
    }
    if (beta.size() != covariates.size()) {
      throw std::invalid_argument("SimConfig: beta length must match the covariate generators");
    }
    if (!(c_admin > 0.0)) throw std::invalid_argument("SimConfig: c_admin must be positive");
    if (c_rate < 0.0) throw std::invalid_argument("SimConfig: c_rate must be nonnegative");
    for (const auto& c : covariates) {
      if (c.kind == CovariateSpec::Kind::binary && (c.p < 0.0 || c.p > 1.0)) {
        throw std::invalid_argument("SimConfig: binary probability outside [0,1]");
      }
      if (c.kind == CovariateSpec::Kind::normal && !(c.sd >= 0.0)) {
        throw std::invalid_argument("SimConfig: normal sd must be nonnegative");
      }
    }
  }
};

// Event times by inversion of the cumulative baseline hazard: with U uniform,
// T solves H_base(T) = -log(U) * exp(-x'beta), so S(T)^{exp(x'beta)} = U.
// Censoring is min(administrative, exponential). Deterministic under seed.
inline Dataset simulate(const std::vector<HazardSpec>& hazards, const SimConfig& cfg) {
  cfg.validate();
  if (hazards.size() != cfg.n_per_stratum.size()) {
    throw std::invalid_argument("simulate: one hazard spec per stratum required");
  }
  for (const auto& h : hazards) h.validate();

  Rng rng(splitmix64(cfg.seed + 0x51f0e9b3a12cull));
  Dataset ds;
  const int strata = static_cast<int>(hazards.size());
  for (int l = 0; l < strata; ++l) ds.stratum_labels.push_back(std::to_string(l));
  ds.stratum_count = strata;
  for (std::size_t s = 0; s < cfg.covariates.size(); ++s) {
    ds.covariate_names.push_back(cfg.covariates[s].name.empty()
                                     ? "x" + std::to_string(s)
                                     : cfg.covariates[s].name);
  }

  for (int l = 0; l < strata; ++l) {
    for (int i = 0; i < cfg.n_per_stratum[l]; ++i) {
      SubjectRecord rec;
      rec.stratum = l;
      double eta = 0.0;
      for (std::size_t s = 0; s < cfg.covariates.size(); ++s) {
        const auto& c = cfg.covariates[s];
        const double x = (c.kind == CovariateSpec::Kind::binary)
                             ? (rng.bernoulli(c.p) ? 1.0 : 0.0)
                             : rng.normal(c.mean, c.sd);
        rec.covariates.push_back(x);
        eta += cfg.beta[s] * x;
      }
      const double target = -std::log(rng.uniform_pos()) * std::exp(-eta);
      const double t_event = hazards[l].inverse_cumulative(target);
      double censor = cfg.c_admin;
      if (cfg.c_rate > 0.0) censor = std::min(censor, rng.exponential(cfg.c_rate));
      if (std::isinf(t_event)) {
        // Finite total hazard exhausted: censor at the last edge.
        rec.time = std::min(censor, hazards[l].last_edge());
        rec.event = false;
      } else {
        rec.time = std::min(t_event, censor);
        rec.event = t_event <= censor;
      }
      ds.records.push_back(std::move(rec));
    }
  }

  detail::apply_horizon(ds.records, cfg.grid_m, cfg.horizon, ds.grid, nullptr);
  ds.validate();
  return ds;
}

// Nelson-Aalen step estimate of the cumulative hazard for one stratum:
// cumulative sum of (events at t) / (at-risk at t) over ordered event times.
// Returns (time, H(time)) steps at the distinct event times.
inline std::vector<std::pair<double, double>> nelson_aalen(const Dataset& ds, int stratum) {
  std::vector<std::pair<double, bool>> obs;  // (time, event)
  for (const auto& r : ds.records) {
    if (r.stratum == stratum) obs.emplace_back(r.time, r.event);
  }
  if (obs.empty()) throw std::invalid_argument("nelson_aalen: stratum has no records");
  std::sort(obs.begin(), obs.end());

  std::vector<std::pair<double, double>> steps;
  double h = 0.0;
  std::size_t i = 0;
  std::size_t at_risk = obs.size();
  while (i < obs.size()) {
    const double t = obs[i].first;
    std::size_t deaths = 0, leaving = 0;
    while (i < obs.size() && obs[i].first == t) {
      deaths += obs[i].second ? 1 : 0;
      ++leaving;
      ++i;
    }
    if (deaths > 0) {
      h += static_cast<double>(deaths) / static_cast<double>(at_risk);
      steps.emplace_back(t, h);
    }
    at_risk -= leaving;
  }
  return steps;
}

inline double nelson_aalen_at(const std::vector<std::pair<double, double>>& steps, double t) {
  double h = 0.0;
  for (const auto& [time, value] : steps) {
    if (time > t) break;
    h = value;
  }
  return h;
}

}  // namespace mrh
