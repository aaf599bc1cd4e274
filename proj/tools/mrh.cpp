// Batch command-line surface for the survival-inference engine: data
// simulation, MRH / piecewise-exponential / Weibull fits, model comparison
// and chain diagnostics, each wrapped in a reproducible run directory.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mrh/classic.hpp"
#include "mrh/evaluate.hpp"
#include "mrh/prune.hpp"
#include "mrh/sampler.hpp"
#include "mrh/serialize.hpp"
#include "mrh/simulate.hpp"
#include "mrh/survdata.hpp"

namespace fs = std::filesystem;
using mrh::json;

namespace {

constexpr const char* kVersion = "0.1.0";

// Exit codes: 0 success, 2 config-invalid, 3 io-error, 4 fit-error.
enum ExitCode { kOk = 0, kConfigInvalid = 2, kIoError = 3, kFitError = 4 };

std::vector<double> parse_doubles(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    double v;
    if (!mrh::detail::parse_number(tok, v)) {
      throw std::invalid_argument("cannot parse number '" + tok + "'");
    }
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, sep)) out.push_back(tok);
  return out;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw mrh::IoError("cannot create output directory " + dir + ": " + ec.message());
}

struct SchemaFlags {
  std::string time_col = "time";
  std::string event_col = "event";
  std::string stratum_col = "stratum";
  std::vector<std::string> covariate_cols;  // empty = auto

  mrh::CsvSchema schema() const {
    mrh::CsvSchema s;
    s.time = time_col;
    s.event = event_col;
    s.stratum = stratum_col;
    for (const auto& c : covariate_cols) {
      // "name", "name:categorical" or "name:categorical:reference"
      const std::vector<std::string> parts = split_on(c, ':');
      mrh::ColumnSpec spec;
      spec.column = parts[0];
      if (parts.size() > 1 && parts[1] == "categorical") spec.categorical = true;
      if (parts.size() > 2) spec.reference = parts[2];
      s.covariates.push_back(std::move(spec));
    }
    return s;
  }

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--time-col", time_col, "Name of the time column");
    cmd->add_option("--event-col", event_col, "Name of the 0/1 event column");
    cmd->add_option("--stratum-col", stratum_col, "Name of the stratum column");
    cmd->add_option("--covariate", covariate_cols,
                    "Covariate column (repeatable); 'name[:categorical[:ref]]'. Default: all remaining columns");
  }
};

json dataset_block(const std::string& path, const mrh::Dataset& ds) {
  json j;
  j["path"] = path;
  j["hash"] = mrh::file_hash(path);
  j["n"] = ds.size();
  j["strata"] = ds.stratum_count;
  j["stratum_labels"] = ds.stratum_labels;
  j["covariates"] = ds.covariate_names;
  return j;
}

void warn_lines(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string out;
  std::string rates;     // per stratum ';', per segment ','
  std::string edges;
  std::string weibull;   // per stratum ';', "shape,rate"
  std::string n = "100";
  std::string beta;
  std::string covariates;  // "binary:0.5;normal:0,1"
  double c_admin = std::numeric_limits<double>::infinity();
  double c_rate = 0.0;
  std::uint64_t seed = 1;
  int grid_m = 4;
  double horizon = 0.0;
};

int cmd_simulate(const SimulateArgs& a) {
  mrh::SimConfig cfg;
  cfg.seed = a.seed;
  cfg.c_admin = a.c_admin;
  cfg.c_rate = a.c_rate;
  cfg.grid_m = a.grid_m;
  cfg.horizon = a.horizon;
  for (double n : parse_doubles(a.n)) cfg.n_per_stratum.push_back(static_cast<int>(n));
  if (!a.beta.empty()) cfg.beta = parse_doubles(a.beta);
  if (!a.covariates.empty()) {
    int index = 0;
    for (const auto& spec : split_on(a.covariates, ';')) {
      const std::vector<std::string> parts = split_on(spec, ':');
      if (parts.size() != 2) throw std::invalid_argument("covariate spec must be kind:params, got '" + spec + "'");
      const std::vector<double> params = parse_doubles(parts[1]);
      const std::string name = "x" + std::to_string(index++);
      if (parts[0] == "binary" && params.size() == 1) {
        cfg.covariates.push_back(mrh::CovariateSpec::binary(params[0], name));
      } else if (parts[0] == "normal" && params.size() == 2) {
        cfg.covariates.push_back(mrh::CovariateSpec::normal(params[0], params[1], name));
      } else {
        throw std::invalid_argument("unknown covariate spec '" + spec + "'");
      }
    }
  }

  std::vector<mrh::HazardSpec> hazards;
  if (!a.weibull.empty()) {
    for (const auto& spec : split_on(a.weibull, ';')) {
      const std::vector<double> params = parse_doubles(spec);
      if (params.size() != 2) throw std::invalid_argument("weibull spec needs shape,rate");
      hazards.push_back(mrh::HazardSpec::weibull(params[0], params[1]));
    }
  } else {
    if (a.rates.empty() || a.edges.empty()) {
      throw std::invalid_argument("simulate needs --rates and --edges (or --weibull)");
    }
    const std::vector<std::string> rates_per = split_on(a.rates, ';');
    const std::vector<std::string> edges_per = split_on(a.edges, ';');
    if (rates_per.size() != edges_per.size()) {
      throw std::invalid_argument("--rates and --edges must list the same number of strata");
    }
    for (std::size_t l = 0; l < rates_per.size(); ++l) {
      hazards.push_back(mrh::HazardSpec::piecewise(parse_doubles(edges_per[l]), parse_doubles(rates_per[l])));
    }
  }
  if (hazards.size() != cfg.n_per_stratum.size()) {
    throw std::invalid_argument("need one hazard spec per stratum");
  }

  const mrh::Dataset ds = mrh::simulate(hazards, cfg);
  ensure_dir(a.out);
  const std::string data_path = a.out + "/data.csv";
  mrh::save_csv(ds, data_path);

  json manifest;
  manifest["command"] = "simulate";
  manifest["version"] = kVersion;
  manifest["config"] = {{"seed", a.seed},       {"n", a.n},           {"rates", a.rates},
                        {"edges", a.edges},     {"weibull", a.weibull}, {"beta", a.beta},
                        {"covariates", a.covariates}, {"c_admin", a.c_admin}, {"c_rate", a.c_rate},
                        {"grid_m", a.grid_m},   {"horizon", a.horizon}};
  manifest["dataset"] = dataset_block(data_path, ds);
  mrh::write_json(manifest, a.out + "/manifest.json");
  std::cout << "wrote " << data_path << " (" << ds.size() << " records, " << ds.stratum_count
            << " strata)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// fit-mrh
// ---------------------------------------------------------------------------

struct FitMrhArgs {
  std::string data;
  std::string out;
  SchemaFlags schema;
  int grid_m = 6;
  double horizon = 0.0;
  int prune_levels = 0;
  double prune_alpha = 0.05;
  bool prune_count_null = false;
  int chains = 5;
  long burnin = 50000;
  long retain = 150000;
  long thin = 10;
  std::uint64_t seed = 1;
  double k = 0.5;
  int a = 10;
  double lambda = 0.0;  // <= 0: empirical-Bayes centering
  double sigma_beta = 10.0;
  double mu_a = 10.0, mu_lambda = 0.0, mu_k = 0.5, gamma_u = 1.0, gamma_w = 1.0;
  bool sample_a = false, sample_lambda = false, sample_k = false, sample_gamma = false;
  bool ph_mode = false;
  bool permuted_scan = false;
  std::string format = "csv";
  int workers = 0;
  double ci_level = 0.95;
  int smooth_window = 1;
};

int cmd_fit_mrh(const FitMrhArgs& a) {
  std::vector<std::string> warnings;
  mrh::Dataset ds = mrh::load_csv(a.data, a.schema.schema(), a.grid_m, a.horizon, &warnings);
  warn_lines(warnings);
  const std::string dataset_hash = mrh::file_hash(a.data);
  if (a.ph_mode) ds = mrh::pool_strata(ds);

  mrh::PruneConfig pcfg;
  pcfg.alpha = a.prune_alpha;
  pcfg.levels_from_bottom = std::min(a.prune_levels, ds.grid.depth());
  pcfg.use_exposure_null = !a.prune_count_null;
  std::vector<std::vector<char>> masks;
  for (int l = 0; l < ds.stratum_count; ++l) {
    std::vector<std::string> prune_warnings;
    masks.push_back(mrh::prune(ds, l, ds.grid, pcfg, &prune_warnings));
    warn_lines(prune_warnings);
  }

  mrh::ChainConfig cfg;
  cfg.n_chains = a.chains;
  cfg.burn_in = a.burnin;
  cfg.n_retained = a.retain;
  cfg.thin = a.thin;
  cfg.seed = a.seed;
  cfg.a_mode = a.sample_a ? mrh::ParamMode::sampled : mrh::ParamMode::fixed;
  cfg.lambda_mode = a.sample_lambda ? mrh::ParamMode::sampled : mrh::ParamMode::fixed;
  cfg.k_mode = a.sample_k ? mrh::ParamMode::sampled : mrh::ParamMode::fixed;
  cfg.gamma_mode = a.sample_gamma ? mrh::ParamMode::sampled : mrh::ParamMode::fixed;
  cfg.permuted_scan = a.permuted_scan;
  cfg.workers = a.workers;

  mrh::HyperParams hyper;
  hyper.a = a.a;
  hyper.lambda = a.lambda;
  hyper.k = a.k;
  hyper.mu_a = a.mu_a;
  hyper.mu_lambda = a.mu_lambda;
  hyper.mu_k = a.mu_k;
  hyper.u = a.gamma_u;
  hyper.w = a.gamma_w;

  const std::vector<mrh::Chain> chains = mrh::run(ds, masks, cfg, hyper, a.sigma_beta);

  const std::string model_name = a.ph_mode ? "PHMRH" : "NPMRH-" + std::to_string(a.prune_levels);
  mrh::FitSummary summary = mrh::summarize_mrh(chains, ds, model_name, a.ci_level, a.smooth_window);
  summary.dataset_hash = dataset_hash;

  ensure_dir(a.out);
  json chain_block = json::array();
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const std::string file = "draws_chain" + std::to_string(c) + (a.format == "jsonl" ? ".jsonl" : ".csv");
    if (a.format == "jsonl") {
      mrh::write_draws_jsonl(chains[c], a.out + "/" + file);
    } else {
      mrh::write_draws_csv(chains[c], a.out + "/" + file);
    }
    json acc = json::object();
    for (const auto& [name, rate] : chains[c].acceptance) acc[name] = rate;
    chain_block.push_back({{"index", c}, {"seed", chains[c].seed}, {"file", file}, {"acceptance", acc}});
  }
  mrh::write_summary_json(summary, a.out + "/summary.json");
  mrh::write_summary_tables(summary, a.out);

  json manifest;
  manifest["command"] = "fit-mrh";
  manifest["version"] = kVersion;
  manifest["model"] = model_name;
  manifest["config"] = mrh::chain_config_to_json(cfg);
  manifest["config"]["grid_m"] = ds.grid.depth();
  manifest["config"]["horizon"] = ds.grid.horizon();
  manifest["config"]["prune_levels"] = a.prune_levels;
  manifest["config"]["prune_alpha"] = a.prune_alpha;
  manifest["config"]["k"] = a.k;
  manifest["config"]["a"] = a.a;
  manifest["config"]["lambda"] = a.lambda;
  manifest["config"]["sigma_beta"] = a.sigma_beta;
  manifest["config"]["ph_mode"] = a.ph_mode;
  manifest["config"]["format"] = a.format;
  manifest["config"]["ci_level"] = a.ci_level;
  manifest["config"]["smooth_window"] = a.smooth_window;
  manifest["config_hash"] = chains.front().config_hash;
  manifest["dataset"] = dataset_block(a.data, ds);
  manifest["prune"] = json::object();
  manifest["prune"]["masks"] = mrh::masks_to_json(masks);
  json spans = json::array();
  for (const auto& mask : masks) {
    json per = json::array();
    for (const auto& [lo, hi] : mrh::effective_bins(mask, ds.grid.depth())) per.push_back({lo, hi});
    spans.push_back(std::move(per));
  }
  manifest["prune"]["effective_bins"] = std::move(spans);
  manifest["chains"] = std::move(chain_block);
  mrh::write_json(manifest, a.out + "/manifest.json");

  double worst_rhat = 0.0;
  for (const auto& d : summary.diagnostics) {
    if (!std::isnan(d.rhat)) worst_rhat = std::max(worst_rhat, d.rhat);
  }
  if (worst_rhat > 1.1) {
    std::cerr << "warning: convergence suspect, max Gelman-Rubin Rhat = " << worst_rhat
              << " (threshold 1.1); inspect diagnostics.csv before using this fit\n";
  }
  std::cout << "wrote " << a.out << " (" << model_name << ", " << chains.size() << " chains x "
            << chains.front().size() << " draws)\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// fit-pe / fit-weibull
// ---------------------------------------------------------------------------

struct FitPeArgs {
  std::string data;
  std::string out;
  SchemaFlags schema;
  int grid_m = 6;
  double horizon = 0.0;
  std::string binning = "equal";
  int j_max = 20;
  double ci_level = 0.95;
};

int cmd_fit_pe(const FitPeArgs& a) {
  std::vector<std::string> warnings;
  const mrh::Dataset ds = mrh::load_csv(a.data, a.schema.schema(), a.grid_m, a.horizon, &warnings);
  warn_lines(warnings);
  if (a.binning != "equal" && a.binning != "quantile") {
    throw std::invalid_argument("--binning must be equal or quantile");
  }
  const mrh::PeBinning strategy = a.binning == "equal" ? mrh::PeBinning::equal : mrh::PeBinning::quantile;
  const mrh::PeFit fit = mrh::fit_pe(ds, strategy, a.j_max);
  mrh::FitSummary summary = mrh::summarize_pe(fit, ds, "PE-" + a.binning, a.ci_level);
  summary.dataset_hash = mrh::file_hash(a.data);

  ensure_dir(a.out);
  mrh::write_summary_json(summary, a.out + "/summary.json");
  mrh::write_summary_tables(summary, a.out);
  json manifest;
  manifest["command"] = "fit-pe";
  manifest["version"] = kVersion;
  manifest["model"] = summary.model;
  manifest["config"] = {{"binning", a.binning}, {"j_max", a.j_max}, {"grid_m", a.grid_m},
                        {"horizon", a.horizon}, {"ci_level", a.ci_level}};
  manifest["selected_j"] = fit.j_selected;
  json bounds = json::array();
  for (const auto& b : fit.boundaries) bounds.push_back(b);
  manifest["boundaries"] = std::move(bounds);
  manifest["dataset"] = dataset_block(a.data, ds);
  mrh::write_json(manifest, a.out + "/manifest.json");
  std::cout << "wrote " << a.out << " (" << summary.model << ", j=" << fit.j_selected
            << ", AIC=" << fit.aic << ")\n";
  return kOk;
}

struct FitWeibullArgs {
  std::string data;
  std::string out;
  SchemaFlags schema;
  int grid_m = 6;
  double horizon = 0.0;
  double ci_level = 0.95;
};

int cmd_fit_weibull(const FitWeibullArgs& a) {
  std::vector<std::string> warnings;
  const mrh::Dataset ds = mrh::load_csv(a.data, a.schema.schema(), a.grid_m, a.horizon, &warnings);
  warn_lines(warnings);
  const mrh::WeibullNphFit fit = mrh::fit_weibull_nph(ds);
  mrh::FitSummary summary = mrh::summarize_weibull(fit, ds, "WeibullNPH", a.ci_level);
  summary.dataset_hash = mrh::file_hash(a.data);

  ensure_dir(a.out);
  mrh::write_summary_json(summary, a.out + "/summary.json");
  mrh::write_summary_tables(summary, a.out);
  json manifest;
  manifest["command"] = "fit-weibull";
  manifest["version"] = kVersion;
  manifest["model"] = "WeibullNPH";
  manifest["config"] = {{"grid_m", a.grid_m}, {"horizon", a.horizon}, {"ci_level", a.ci_level}};
  manifest["shape"] = fit.shape;
  manifest["rate"] = fit.rate;
  manifest["beta"] = fit.beta;
  manifest["loglik"] = fit.loglik;
  manifest["dataset"] = dataset_block(a.data, ds);
  mrh::write_json(manifest, a.out + "/manifest.json");
  std::cout << "wrote " << a.out << " (WeibullNPH, loglik=" << fit.loglik << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareArgs {
  std::vector<std::string> fits;
  std::string out;
};

int cmd_compare(const CompareArgs& a) {
  if (a.fits.size() < 2) throw std::invalid_argument("compare needs at least two --fits summaries");
  std::vector<mrh::FitSummary> summaries;
  for (const auto& path : a.fits) summaries.push_back(mrh::read_summary_json(path));
  for (std::size_t i = 1; i < summaries.size(); ++i) {
    if (summaries[i].dataset_hash != summaries[0].dataset_hash) {
      throw std::invalid_argument("dataset-hash mismatch between '" + a.fits[0] + "' and '" +
                                  a.fits[i] + "'; fits must come from the same dataset");
    }
  }

  // Union of GOF grid points across fits.
  std::vector<double> ts;
  for (const auto& s : summaries) {
    for (const auto& g : s.gof) ts.push_back(g.t);
  }
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  std::ostringstream table;
  table << "model,neg2loglik,p,dic,bic,aic";
  for (double t : ts) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "gof@%g", t);
    table << "," << buf;
  }
  table << "\n";
  for (const auto& s : summaries) {
    table << s.model << "," << mrh::detail::format_double(s.ic.neg2loglik) << "," << s.ic.p_count << ",";
    if (s.ic.has_dic) table << mrh::detail::format_double(s.ic.dic);
    table << "," << mrh::detail::format_double(s.ic.bic) << "," << mrh::detail::format_double(s.ic.aic);
    for (double t : ts) {
      table << ",";
      for (const auto& g : s.gof) {
        if (g.t == t) {
          table << mrh::detail::format_double(g.value);
          break;
        }
      }
    }
    table << "\n";
  }
  std::cout << table.str();
  if (!a.out.empty()) {
    ensure_dir(a.out);
    std::ofstream f(a.out + "/compare.csv");
    if (!f) throw mrh::IoError("cannot open " + a.out + "/compare.csv");
    f << table.str();
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// diagnose
// ---------------------------------------------------------------------------

struct DiagnoseArgs {
  std::string fit_dir;
  double rhat_threshold = 1.1;
};

int cmd_diagnose(const DiagnoseArgs& a) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(a.fit_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("draws_chain", 0) == 0 && entry.path().extension() == ".csv") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw mrh::IoError("no draws_chain*.csv files in " + a.fit_dir);

  std::vector<std::vector<std::vector<double>>> chains;  // chain -> column -> draws
  std::vector<std::string> names;
  for (const auto& f : files) {
    auto [cols, rows] = mrh::read_draws_csv(f);
    if (names.empty()) names = cols;
    if (cols != names) throw std::invalid_argument("diagnose: draw files disagree on columns");
    std::vector<std::vector<double>> by_col(cols.size());
    for (const auto& row : rows) {
      for (std::size_t c = 0; c < row.size(); ++c) by_col[c].push_back(row[c]);
    }
    chains.push_back(std::move(by_col));
  }

  std::ofstream out(a.fit_dir + "/diagnostics.csv");
  if (!out) throw mrh::IoError("cannot open " + a.fit_dir + "/diagnostics.csv");
  out << "param,geweke_z_max,rhat,constant\n";
  int flagged = 0;
  for (std::size_t c = 1; c < names.size(); ++c) {  // skip the iteration column
    double zmax = 0.0;
    bool all_const = true;
    bool any_tested = false;
    std::vector<std::vector<double>> per_chain;
    for (const auto& chain : chains) {
      const auto& v = chain[c];
      if (v.size() >= 100) {
        any_tested = true;
        const mrh::GewekeResult g = mrh::geweke(v);
        if (!g.constant) {
          all_const = false;
          zmax = std::max(zmax, std::fabs(g.z));
        }
      }
      per_chain.push_back(v);
    }
    all_const = any_tested && all_const;
    double rhat = std::numeric_limits<double>::quiet_NaN();
    if (chains.size() >= 2 && per_chain.front().size() >= 2) rhat = mrh::gelman_rubin(per_chain);
    out << names[c] << "," << mrh::detail::format_double(zmax) << ",";
    if (!std::isnan(rhat)) out << mrh::detail::format_double(rhat);
    out << "," << (all_const ? 1 : 0) << "\n";
    if (!std::isnan(rhat) && rhat > a.rhat_threshold) {
      ++flagged;
      std::cerr << "warning: " << names[c] << " Rhat = " << rhat << "\n";
    }
  }
  std::cout << "wrote " << a.fit_dir << "/diagnostics.csv (" << chains.size() << " chains, "
            << (names.size() - 1) << " parameters, " << flagged << " above Rhat threshold)\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mrh: multi-resolution hazard survival inference"};
  app.set_version_flag("--version", std::string("mrh ") + kVersion);
  app.set_config("--config", "", "Key=value config file; command-line flags take precedence");
  app.require_subcommand(1);

  SimulateArgs sim;
  CLI::App* c_sim = app.add_subcommand("simulate", "Generate a synthetic survival dataset");
  c_sim->add_option("--out", sim.out, "Output directory")->required();
  c_sim->add_option("--seed", sim.seed, "RNG seed");
  c_sim->add_option("--n", sim.n, "Subjects per stratum, comma separated");
  c_sim->add_option("--rates", sim.rates, "Piecewise rates per stratum: 'r1,r2;r1,r2'");
  c_sim->add_option("--edges", sim.edges, "Piecewise right edges per stratum: 'e1,e2;e1,e2'");
  c_sim->add_option("--weibull", sim.weibull, "Weibull 'shape,rate' per stratum, ';' separated");
  c_sim->add_option("--beta", sim.beta, "True proportional effects, comma separated");
  c_sim->add_option("--covariates", sim.covariates, "Generators: 'binary:0.5;normal:0,1'");
  c_sim->add_option("--c-admin", sim.c_admin, "Administrative censoring time");
  c_sim->add_option("--c-rate", sim.c_rate, "Exponential censoring rate");
  c_sim->add_option("--grid-m", sim.grid_m, "Tree depth M of the emitted grid");
  c_sim->add_option("--horizon", sim.horizon, "Grid horizon (0 = max observed time)");

  FitMrhArgs fm;
  CLI::App* c_fm = app.add_subcommand("fit-mrh", "Fit the multi-resolution hazard model");
  c_fm->add_option("--data", fm.data, "Input CSV")->required();
  c_fm->add_option("--out", fm.out, "Output directory")->required();
  fm.schema.add_flags(c_fm);
  c_fm->add_option("--grid-m", fm.grid_m, "Tree depth M (J = 2^M bins)");
  c_fm->add_option("--horizon", fm.horizon, "Study horizon t_J (0 = max observed time)");
  c_fm->add_option("--prune-levels", fm.prune_levels, "Bottom tree levels subjected to pruning (0 = none)");
  c_fm->add_option("--prune-alpha", fm.prune_alpha, "Pruning test size");
  c_fm->add_flag("--prune-count-null", fm.prune_count_null, "Use p0 = 0.5 instead of the exposure-weighted null");
  c_fm->add_option("--chains", fm.chains, "Number of MCMC chains");
  c_fm->add_option("--burnin", fm.burnin, "Burn-in sweeps per chain");
  c_fm->add_option("--retain", fm.retain, "Retained thinned draws per chain");
  c_fm->add_option("--thin", fm.thin, "Thinning interval");
  c_fm->add_option("--seed", fm.seed, "Master RNG seed");
  c_fm->add_option("--k", fm.k, "Smoothness parameter k of the split priors");
  c_fm->add_option("--a", fm.a, "Gamma shape a of the prior on H");
  c_fm->add_option("--lambda", fm.lambda, "Gamma scale of the prior on H (<= 0: center on the Nelson-Aalen total)");
  c_fm->add_option("--sigma-beta", fm.sigma_beta, "Prior sd of each beta");
  c_fm->add_option("--mu-a", fm.mu_a, "Zero-truncated Poisson mean of the hyperprior on a");
  c_fm->add_option("--mu-lambda", fm.mu_lambda, "Exponential hyperprior mean for lambda (<= 0: empirical)");
  c_fm->add_option("--mu-k", fm.mu_k, "Exponential hyperprior mean for k");
  c_fm->add_option("--gamma-u", fm.gamma_u, "Beta(u,w) hyperprior u for gamma");
  c_fm->add_option("--gamma-w", fm.gamma_w, "Beta(u,w) hyperprior w for gamma");
  c_fm->add_flag("--sample-a", fm.sample_a, "Sample a under its hyperprior");
  c_fm->add_flag("--sample-lambda", fm.sample_lambda, "Sample lambda under its hyperprior");
  c_fm->add_flag("--sample-k", fm.sample_k, "Sample k under its hyperprior");
  c_fm->add_flag("--sample-gamma", fm.sample_gamma, "Sample each gamma under its Beta(u,w) hyperprior");
  c_fm->add_flag("--ph-mode", fm.ph_mode, "Proportional-hazards mode: one baseline tree, stratum as a beta covariate");
  c_fm->add_flag("--permuted-scan", fm.permuted_scan, "Permute stratum/covariate update order each sweep");
  c_fm->add_option("--format", fm.format, "Draw file format: csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  c_fm->add_option("--workers", fm.workers, "Chain-level worker threads (0 = auto)");
  c_fm->add_option("--ci-level", fm.ci_level, "Central credible interval level");
  c_fm->add_option("--smooth-window", fm.smooth_window, "Moving-average window for the smoothed log-HR column");

  FitPeArgs fp;
  CLI::App* c_fp = app.add_subcommand("fit-pe", "Fit the adjusted piecewise-exponential model");
  c_fp->add_option("--data", fp.data, "Input CSV")->required();
  c_fp->add_option("--out", fp.out, "Output directory")->required();
  fp.schema.add_flags(c_fp);
  c_fp->add_option("--grid-m", fp.grid_m, "Grid depth used for reporting");
  c_fp->add_option("--horizon", fp.horizon, "Study horizon (0 = max observed time)");
  c_fp->add_option("--binning", fp.binning, "equal or quantile")->check(CLI::IsMember({"equal", "quantile"}));
  c_fp->add_option("--j-max", fp.j_max, "Largest candidate bin count");
  c_fp->add_option("--ci-level", fp.ci_level, "Confidence interval level");

  FitWeibullArgs fw;
  CLI::App* c_fw = app.add_subcommand("fit-weibull", "Fit the non-proportional-hazards Weibull model");
  c_fw->add_option("--data", fw.data, "Input CSV")->required();
  c_fw->add_option("--out", fw.out, "Output directory")->required();
  fw.schema.add_flags(c_fw);
  c_fw->add_option("--grid-m", fw.grid_m, "Grid depth used for reporting");
  c_fw->add_option("--horizon", fw.horizon, "Study horizon (0 = max observed time)");
  c_fw->add_option("--ci-level", fw.ci_level, "Confidence interval level");

  CompareArgs cm;
  CLI::App* c_cm = app.add_subcommand("compare", "Merge fit summaries into a comparison table");
  c_cm->add_option("--fits", cm.fits, "summary.json paths (>= 2)")->required();
  c_cm->add_option("--out", cm.out, "Directory for compare.csv (optional)");

  DiagnoseArgs dg;
  CLI::App* c_dg = app.add_subcommand("diagnose", "Convergence diagnostics for a fit directory");
  c_dg->add_option("--fit", dg.fit_dir, "fit-mrh output directory")->required();
  c_dg->add_option("--rhat-threshold", dg.rhat_threshold, "Warn above this Rhat");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: config-invalid: " << e.what() << "\n";
    return kConfigInvalid;
  }

  try {
    if (c_sim->parsed()) return cmd_simulate(sim);
    if (c_fm->parsed()) return cmd_fit_mrh(fm);
    if (c_fp->parsed()) return cmd_fit_pe(fp);
    if (c_fw->parsed()) return cmd_fit_weibull(fw);
    if (c_cm->parsed()) return cmd_compare(cm);
    if (c_dg->parsed()) return cmd_diagnose(dg);
  } catch (const mrh::IoError& e) {
    std::cerr << "error: io-error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: config-invalid: " << e.what() << "\n";
    return kConfigInvalid;
  } catch (const std::domain_error& e) {
    std::cerr << "error: config-invalid: " << e.what() << "\n";
    return kConfigInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: fit-error: " << e.what() << "\n";
    return kFitError;
  }
  return kOk;
}
