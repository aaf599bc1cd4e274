#include <catch_amalgamated.hpp>

#include <cmath>

#include "mrh/classic.hpp"
#include "mrh/simulate.hpp"

using namespace mrh;

namespace {

double weibull_loglik_direct(const Dataset& ds, double kappa, double lambda) {
  double ll = 0.0;
  for (const auto& rec : ds.records) {
    const double t = std::max(rec.time, 1e-12);
    if (rec.event) ll += std::log(kappa) + kappa * std::log(lambda) + (kappa - 1.0) * std::log(t);
    ll -= std::pow(lambda * t, kappa);
  }
  return ll;
}

}  // namespace

TEST_CASE("Weibull MLE recovers exponential truth", "[classic]") {
  SimConfig cfg;
  cfg.n_per_stratum = {5000};
  cfg.seed = 42;
  cfg.grid_m = 2;
  cfg.horizon = 50.0;
  cfg.c_admin = 50.0;
  const Dataset ds = simulate({HazardSpec::weibull(1.0, 0.5)}, cfg);
  const WeibullNphFit fit = fit_weibull_nph(ds);
  CHECK(fit.shape[0] == Catch::Approx(1.0).margin(0.1));
  CHECK(fit.rate[0] == Catch::Approx(0.5).margin(0.05));
}

TEST_CASE("Weibull covariance is symmetric with nonnegative diagonal", "[classic]") {
  SimConfig cfg;
  cfg.n_per_stratum = {1200, 1200};
  cfg.beta = {0.4};
  cfg.covariates = {CovariateSpec::binary(0.5, "tx")};
  cfg.seed = 142;
  cfg.grid_m = 2;
  cfg.horizon = 20.0;
  cfg.c_admin = 20.0;
  const Dataset ds = simulate({HazardSpec::weibull(1.1, 0.5), HazardSpec::weibull(0.9, 0.7)}, cfg);
  const WeibullNphFit fit = fit_weibull_nph(ds);
  const std::size_t dim = fit.covariance.size();
  REQUIRE(dim == 5);  // 2 shapes + 2 rates + 1 beta
  for (std::size_t i = 0; i < dim; ++i) {
    REQUIRE(fit.covariance[i][i] >= 0.0);
    for (std::size_t j = 0; j < dim; ++j) {
      REQUIRE(fit.covariance[i][j] == Catch::Approx(fit.covariance[j][i]).margin(1e-12));
    }
  }
}

TEST_CASE("identically simulated strata give a flat log-HR near zero", "[classic]") {
  SimConfig cfg;
  cfg.n_per_stratum = {4000, 4000};
  cfg.seed = 43;
  cfg.grid_m = 2;
  cfg.horizon = 30.0;
  cfg.c_admin = 30.0;
  const Dataset ds = simulate({HazardSpec::weibull(1.2, 0.6), HazardSpec::weibull(1.2, 0.6)}, cfg);
  const WeibullNphFit fit = fit_weibull_nph(ds);
  for (double t : {0.5, 1.0, 2.0, 4.0, 8.0}) {
    CHECK(std::fabs(weibull_log_hr(fit, t)) < 0.1);
  }
}

TEST_CASE("tiny one-stratum optimum matches a dense grid search", "[classic]") {
  SimConfig cfg;
  cfg.n_per_stratum = {40};
  cfg.seed = 44;
  cfg.grid_m = 1;
  cfg.horizon = 20.0;
  cfg.c_admin = 20.0;
  const Dataset ds = simulate({HazardSpec::weibull(1.4, 0.7)}, cfg);
  const WeibullNphFit fit = fit_weibull_nph(ds);

  double best_ll = -1e300, best_kappa = 0.0, best_lambda = 0.0;
  for (int i = 1; i <= 300; ++i) {
    for (int j = 1; j <= 300; ++j) {
      const double kappa = 0.2 + 2.8 * i / 300.0;
      const double lambda = 0.05 + 2.0 * j / 300.0;
      const double ll = weibull_loglik_direct(ds, kappa, lambda);
      if (ll > best_ll) {
        best_ll = ll;
        best_kappa = kappa;
        best_lambda = lambda;
      }
    }
  }
  CHECK(fit.shape[0] == Catch::Approx(best_kappa).margin(3.0 / 300.0 + 1e-9));
  CHECK(fit.rate[0] == Catch::Approx(best_lambda).margin(2.1 / 300.0 + 1e-9));
  CHECK(fit.loglik >= best_ll - 1e-6);

  // Finite-difference gradient check at the optimum (in log parameters).
  const double eps = 1e-5;
  for (int dim = 0; dim < 2; ++dim) {
    auto eval = [&](double delta) {
      const double kappa = dim == 0 ? fit.shape[0] * std::exp(delta) : fit.shape[0];
      const double lambda = dim == 1 ? fit.rate[0] * std::exp(delta) : fit.rate[0];
      return weibull_loglik_direct(ds, kappa, lambda);
    };
    const double grad = (eval(eps) - eval(-eps)) / (2.0 * eps);
    CHECK(std::fabs(grad) < 1e-4);
  }
}

TEST_CASE("weibull_log_hr formula matches the definitional hazard ratio", "[classic]") {
  WeibullNphFit fit;
  fit.shape = {0.8, 1.7};
  fit.rate = {0.4, 0.9};
  Rng rng(45);
  for (int rep = 0; rep < 200; ++rep) {
    const double t = 0.01 + rng.uniform() * 10.0;
    auto hazard = [&](int l) {
      const double k = fit.shape[static_cast<std::size_t>(l)];
      const double lam = fit.rate[static_cast<std::size_t>(l)];
      return k * lam * std::pow(lam * t, k - 1.0);
    };
    REQUIRE(weibull_log_hr(fit, t) == Catch::Approx(std::log(hazard(1) / hazard(0))).epsilon(1e-12));
  }

  // Proportional reduction when the shapes agree.
  WeibullNphFit prop;
  prop.shape = {1.5, 1.5};
  prop.rate = {0.5, 0.8};
  const double expected = 1.5 * std::log(0.8 / 0.5);
  for (double t : {0.1, 1.0, 7.0}) {
    CHECK(weibull_log_hr(prop, t) == Catch::Approx(expected).epsilon(1e-12));
  }

  // Direct substitution: kappa = (1, 2), lambda = (1, 1), t = 1 -> log 2.
  WeibullNphFit sub;
  sub.shape = {1.0, 2.0};
  sub.rate = {1.0, 1.0};
  CHECK(weibull_log_hr(sub, 1.0) == Catch::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(weibull_log_hr(sub, 0.0), std::domain_error);
}

TEST_CASE("fit_weibull_nph preconditions", "[classic]") {
  Dataset ds;
  ds.stratum_count = 1;
  ds.stratum_labels = {"0"};
  ds.grid = TimeGrid(1, 3.0);
  ds.records = {{1.0, true, 0, {}}, {2.0, false, 0, {}}};
  REQUIRE_THROWS_WITH(fit_weibull_nph(ds), Catch::Matchers::ContainsSubstring("fewer than 2 events"));
}

TEST_CASE("Weibull nests the exponential submodel", "[classic]") {
  SimConfig cfg;
  cfg.n_per_stratum = {800};
  cfg.seed = 46;
  cfg.grid_m = 2;
  cfg.horizon = 10.0;
  cfg.c_admin = 10.0;
  const Dataset ds = simulate({HazardSpec::weibull(0.9, 0.6)}, cfg);
  const WeibullNphFit fit = fit_weibull_nph(ds);

  // Exponential MLE: rate = events / total time, shape fixed at 1.
  double events = 0.0, total = 0.0;
  for (const auto& rec : ds.records) {
    events += rec.event ? 1.0 : 0.0;
    total += rec.time;
  }
  const double exp_ll = weibull_loglik_direct(ds, 1.0, events / total);
  CHECK(fit.loglik >= exp_ll - 1e-8);
}

TEST_CASE("PE single bin with beta = 0 is the occurrence/exposure rate", "[classic]") {
  // Two initial bins with all failures early: the empty right bin merges
  // left, leaving one bin whose MLE is total events / total exposure.
  Dataset ds;
  ds.stratum_count = 1;
  ds.stratum_labels = {"0"};
  ds.grid = TimeGrid(2, 10.0);
  ds.records = {{1.0, true, 0, {}}, {2.0, true, 0, {}}, {3.0, false, 0, {}}, {10.0, false, 0, {}}};
  const PeFit fit = fit_pe(ds, PeBinning::equal, 2);
  REQUIRE(fit.rates[0].size() == 1);
  const double expected = 2.0 / (1.0 + 2.0 + 3.0 + 10.0);
  CHECK(fit.rates[0][0] == Catch::Approx(expected).epsilon(1e-9));
  CHECK(fit.boundaries[0] == std::vector<double>{0.0, 10.0});
}

TEST_CASE("PE merging leaves no zero-failure bin and preserves totals", "[classic]") {
  SimConfig cfg;
  cfg.n_per_stratum = {300, 300};
  cfg.beta = {0.4};
  cfg.covariates = {CovariateSpec::binary(0.5, "tx")};
  cfg.seed = 47;
  cfg.grid_m = 3;
  cfg.horizon = 6.0;
  cfg.c_admin = 6.0;
  const Dataset ds = simulate({HazardSpec::piecewise({1.0, 100.0}, {1.2, 0.05}),
                               HazardSpec::piecewise({1.0, 100.0}, {0.8, 0.1})},
                              cfg);
  for (const PeBinning strategy : {PeBinning::equal, PeBinning::quantile}) {
    const PeFit fit = fit_pe(ds, strategy, 16);
    for (int l = 0; l < 2; ++l) {
      double events = 0.0;
      for (double e : fit.event_counts[static_cast<std::size_t>(l)]) {
        REQUIRE(e >= 1.0);  // merging termination
        events += e;
      }
      CHECK(events == Catch::Approx(static_cast<double>(ds.events_in(l))));
      // Bin count never exceeds the selected candidate.
      CHECK(static_cast<int>(fit.rates[static_cast<std::size_t>(l)].size()) <= fit.j_selected);
    }
  }
}

TEST_CASE("PE closed-form Fisher information matches finite differences", "[classic]") {
  SimConfig cfg;
  cfg.n_per_stratum = {800};
  cfg.seed = 48;
  cfg.grid_m = 2;
  cfg.horizon = 5.0;
  cfg.c_admin = 5.0;
  const Dataset ds = simulate({HazardSpec::constant(0.6, 100.0)}, cfg);
  const PeFit fit = fit_pe(ds, PeBinning::equal, 4);

  // Observed information for each rate by central differences of the PE
  // log-likelihood, at the MLE, other parameters held fixed.
  const auto& b = fit.boundaries[0];
  auto loglik = [&](const std::vector<double>& rates) {
    double ll = 0.0;
    for (const auto& rec : ds.records) {
      double cum = 0.0;
      int bin = -1;
      for (std::size_t j = 0; j + 1 < b.size(); ++j) {
        cum += rates[j] * std::max(0.0, std::min(rec.time, b[j + 1]) - b[j]);
        if (rec.event && rec.time > b[j] - 1e-300 && bin < 0 && rec.time <= b[j + 1]) {
          bin = static_cast<int>(j);
        }
      }
      if (rec.event && rec.time == 0.0) bin = 0;
      if (rec.event) ll += std::log(rates[static_cast<std::size_t>(bin)]);
      ll -= cum;
    }
    return ll;
  };
  for (std::size_t j = 0; j < fit.rates[0].size(); ++j) {
    const double h = 1e-4 * fit.rates[0][j];
    std::vector<double> hi = fit.rates[0], lo = fit.rates[0];
    hi[j] += h;
    lo[j] -= h;
    const double second = (loglik(hi) - 2.0 * loglik(fit.rates[0]) + loglik(lo)) / (h * h);
    const double observed_info = -second;
    REQUIRE(fit.fisher_info(0, static_cast<int>(j)) ==
            Catch::Approx(observed_info).epsilon(1e-4));
  }
}

TEST_CASE("AIC prefers few bins on constant-hazard data", "[classic]") {
  int small = 0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    SimConfig cfg;
    cfg.n_per_stratum = {2000};
    cfg.seed = 1000 + static_cast<std::uint64_t>(rep);
    cfg.grid_m = 2;
    cfg.horizon = 6.0;
    cfg.c_admin = 6.0;
    const Dataset ds = simulate({HazardSpec::constant(0.5, 100.0)}, cfg);
    const PeFit fit = fit_pe(ds, PeBinning::equal, 10);
    small += fit.j_selected <= 3 ? 1 : 0;
  }
  CHECK(small >= 16);  // >= 80% of replicates
}

TEST_CASE("PE recovers a 4-step hazard within 15 percent per bin", "[classic]") {
  const std::vector<double> rates = {0.5, 1.0, 0.7, 0.3};
  SimConfig cfg;
  cfg.n_per_stratum = {5000};
  cfg.seed = 49;
  cfg.grid_m = 2;
  cfg.horizon = 4.0;
  cfg.c_admin = 4.0;
  const Dataset ds = simulate({HazardSpec::piecewise({1.0, 2.0, 3.0, 4.0}, rates)}, cfg);
  const PeFit fit = fit_pe(ds, PeBinning::equal, 8);
  REQUIRE(fit.j_selected == 4);
  REQUIRE(fit.rates[0].size() == 4);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(fit.rates[0][j] == Catch::Approx(rates[j]).epsilon(0.15));
  }
}

TEST_CASE("pe_log_hr uses each stratum's own bins", "[classic]") {
  PeFit fit;
  fit.boundaries = {{0.0, 1.0, 2.0}, {0.0, 2.0}};
  fit.rates = {{1.0, 2.0}, {2.0}};
  fit.event_counts = {{3.0, 4.0}, {5.0}};
  CHECK(pe_log_hr(fit, 0.5) == Catch::Approx(std::log(2.0)));
  CHECK(pe_log_hr(fit, 1.5) == Catch::Approx(0.0));
  CHECK_THROWS_AS(pe_log_hr(fit, 2.5), std::domain_error);

  // Identical strata: zero everywhere.
  PeFit same;
  same.boundaries = {{0.0, 1.0, 2.0}, {0.0, 1.0, 2.0}};
  same.rates = {{0.7, 0.4}, {0.7, 0.4}};
  for (double t : {0.2, 0.9, 1.7}) CHECK(pe_log_hr(same, t) == 0.0);
}

TEST_CASE("pe_log_hr equals the stored step-function ratio on random fits", "[classic]") {
  SimConfig cfg;
  cfg.n_per_stratum = {600, 600};
  cfg.seed = 50;
  cfg.grid_m = 2;
  cfg.horizon = 4.0;
  cfg.c_admin = 4.0;
  const Dataset ds = simulate({HazardSpec::piecewise({2.0, 100.0}, {0.4, 0.9}),
                               HazardSpec::piecewise({1.0, 100.0}, {0.9, 0.5})},
                              cfg);
  const PeFit fit = fit_pe(ds, PeBinning::quantile, 6);
  Rng rng(51);
  const double t_end = std::min(fit.boundaries[0].back(), fit.boundaries[1].back());
  for (int rep = 0; rep < 100; ++rep) {
    const double t = rng.uniform() * t_end;
    auto step_rate = [&](int l) {
      const auto& b = fit.boundaries[static_cast<std::size_t>(l)];
      std::size_t j = 0;
      while (j + 2 < b.size() && t > b[j + 1]) ++j;
      return fit.rates[static_cast<std::size_t>(l)][j];
    };
    REQUIRE(pe_log_hr(fit, t) == Catch::Approx(std::log(step_rate(1) / step_rate(0))).epsilon(1e-12));
  }
}

TEST_CASE("fit_pe rejects an event-free stratum", "[classic]") {
  Dataset ds;
  ds.stratum_count = 2;
  ds.stratum_labels = {"0", "1"};
  ds.grid = TimeGrid(1, 4.0);
  ds.records = {{1.0, true, 0, {}}, {2.0, false, 1, {}}, {3.0, false, 1, {}}};
  REQUIRE_THROWS_WITH(fit_pe(ds, PeBinning::equal, 4),
                      Catch::Matchers::ContainsSubstring("no observed failures"));
  REQUIRE_THROWS_AS(fit_pe(ds, PeBinning::equal, 1), std::invalid_argument);
}

TEST_CASE("PE recovers a proportional effect alongside the rates", "[classic]") {
  SimConfig cfg;
  cfg.n_per_stratum = {3000};
  cfg.beta = {0.6};
  cfg.covariates = {CovariateSpec::binary(0.5, "tx")};
  cfg.seed = 52;
  cfg.grid_m = 2;
  cfg.horizon = 4.0;
  cfg.c_admin = 4.0;
  const Dataset ds = simulate({HazardSpec::constant(0.5, 100.0)}, cfg);
  const PeFit fit = fit_pe(ds, PeBinning::equal, 6);
  REQUIRE(fit.beta.size() == 1);
  CHECK(fit.beta[0] == Catch::Approx(0.6).margin(0.12));
}
