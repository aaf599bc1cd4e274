#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mrh/evaluate.hpp"
#include "mrh/sampler.hpp"
#include "mrh/survdata.hpp"

namespace mrh {

using json = nlohmann::json;

inline std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("file_hash: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a_hex(ss.str());
}

// ---------------------------------------------------------------------------
// Draw files: CSV (header + one row per retained draw) or JSON lines.
// ---------------------------------------------------------------------------

inline void write_draws_csv(const Chain& chain, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_draws_csv: cannot open " + path);
  const auto& names = chain.layout.names;
  for (std::size_t c = 0; c < names.size(); ++c) out << (c ? "," : "") << names[c];
  out << "\n";
  for (const auto& row : chain.draws) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << (c ? "," : "") << detail::format_double(row[c]);
    }
    out << "\n";
  }
  if (!out) throw IoError("write_draws_csv: write failed for " + path);
}

inline void write_draws_jsonl(const Chain& chain, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_draws_jsonl: cannot open " + path);
  const auto& names = chain.layout.names;
  for (const auto& row : chain.draws) {
    json obj = json::object();
    for (std::size_t c = 0; c < row.size(); ++c) obj[names[c]] = row[c];
    out << obj.dump() << "\n";
  }
  if (!out) throw IoError("write_draws_jsonl: write failed for " + path);
}

// Reads a draws CSV back into (column names, rows); the layout itself comes
// from the run manifest.
inline std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_draws_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_draws_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError("read_draws_csv: empty file " + path);
  const std::vector<std::string> names = detail::split_csv_line(line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != names.size()) throw std::runtime_error("read_draws_csv: ragged row in " + path);
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      double v;
      if (!detail::parse_number(fields[c], v)) {
        throw std::runtime_error("read_draws_csv: non-numeric value '" + fields[c] + "' in " + path);
      }
      row[c] = v;
    }
    rows.push_back(std::move(row));
  }
  return {names, rows};
}

// ---------------------------------------------------------------------------
// FitSummary JSON + CSV tables.
// ---------------------------------------------------------------------------

inline json to_json(const IcBlock& ic) {
  json j;
  j["neg2loglik"] = ic.neg2loglik;
  j["p_count"] = ic.p_count;
  j["bic"] = ic.bic;
  j["aic"] = ic.aic;
  if (ic.has_dic) {
    j["p_d"] = ic.p_d;
    j["dic"] = ic.dic;
  } else {
    j["p_d"] = nullptr;
    j["dic"] = nullptr;
  }
  return j;
}

inline IcBlock ic_from_json(const json& j) {
  IcBlock ic;
  ic.neg2loglik = j.at("neg2loglik").get<double>();
  ic.p_count = j.at("p_count").get<int>();
  ic.bic = j.at("bic").get<double>();
  ic.aic = j.at("aic").get<double>();
  ic.has_dic = !j.at("dic").is_null();
  if (ic.has_dic) {
    ic.dic = j.at("dic").get<double>();
    ic.p_d = j.at("p_d").get<double>();
  }
  return ic;
}

inline json to_json(const FitSummary& s) {
  json j;
  j["model"] = s.model;
  j["dataset_hash"] = s.dataset_hash;
  j["n"] = s.n;
  j["stratum_count"] = s.stratum_count;
  j["horizon"] = s.horizon;
  j["ci_level"] = s.ci_level;
  j["ic"] = to_json(s.ic);
  j["hazard"] = json::array();
  for (const auto& r : s.hazard) {
    j["hazard"].push_back({{"stratum", r.stratum},
                           {"bin", r.bin},
                           {"t_lo", r.t_lo},
                           {"t_hi", r.t_hi},
                           {"estimate", r.estimate},
                           {"lo", r.lo},
                           {"hi", r.hi}});
  }
  j["log_hr"] = json::array();
  for (const auto& r : s.log_hr) {
    j["log_hr"].push_back({{"stratum_base", r.stratum_base},
                           {"stratum_alt", r.stratum_alt},
                           {"bin", r.bin},
                           {"t_lo", r.t_lo},
                           {"t_hi", r.t_hi},
                           {"estimate", r.estimate},
                           {"lo", r.lo},
                           {"hi", r.hi},
                           {"smoothed", r.smoothed}});
  }
  j["beta"] = json::array();
  for (const auto& r : s.beta) {
    j["beta"].push_back({{"name", r.name}, {"estimate", r.estimate}, {"lo", r.lo}, {"hi", r.hi}});
  }
  j["gof"] = json::array();
  for (const auto& r : s.gof) j["gof"].push_back({{"t", r.t}, {"value", r.value}});
  j["diagnostics"] = json::array();
  for (const auto& r : s.diagnostics) {
    json d = {{"param", r.param}, {"geweke_z", r.geweke_z}, {"constant", r.constant}};
    if (std::isnan(r.rhat)) {
      d["rhat"] = nullptr;
    } else {
      d["rhat"] = r.rhat;
    }
    j["diagnostics"].push_back(std::move(d));
  }
  return j;
}

inline FitSummary summary_from_json(const json& j) {
  FitSummary s;
  s.model = j.at("model").get<std::string>();
  s.dataset_hash = j.at("dataset_hash").get<std::string>();
  s.n = j.at("n").get<int>();
  s.stratum_count = j.at("stratum_count").get<int>();
  s.horizon = j.at("horizon").get<double>();
  s.ci_level = j.at("ci_level").get<double>();
  s.ic = ic_from_json(j.at("ic"));
  for (const auto& r : j.at("hazard")) {
    s.hazard.push_back({r.at("stratum").get<int>(), r.at("bin").get<int>(), r.at("t_lo").get<double>(),
                        r.at("t_hi").get<double>(), r.at("estimate").get<double>(),
                        r.at("lo").get<double>(), r.at("hi").get<double>()});
  }
  for (const auto& r : j.at("log_hr")) {
    s.log_hr.push_back({r.at("stratum_base").get<int>(), r.at("stratum_alt").get<int>(),
                        r.at("bin").get<int>(), r.at("t_lo").get<double>(), r.at("t_hi").get<double>(),
                        r.at("estimate").get<double>(), r.at("lo").get<double>(),
                        r.at("hi").get<double>(), r.at("smoothed").get<double>()});
  }
  for (const auto& r : j.at("beta")) {
    s.beta.push_back({r.at("name").get<std::string>(), r.at("estimate").get<double>(),
                      r.at("lo").get<double>(), r.at("hi").get<double>()});
  }
  for (const auto& r : j.at("gof")) s.gof.push_back({r.at("t").get<double>(), r.at("value").get<double>()});
  for (const auto& r : j.at("diagnostics")) {
    DiagnosticRow d;
    d.param = r.at("param").get<std::string>();
    d.geweke_z = r.at("geweke_z").get<double>();
    d.constant = r.at("constant").get<bool>();
    d.rhat = r.at("rhat").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                    : r.at("rhat").get<double>();
    s.diagnostics.push_back(std::move(d));
  }
  return s;
}

inline void write_summary_json(const FitSummary& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_summary_json: cannot open " + path);
  out << to_json(s).dump(2) << "\n";
  if (!out) throw IoError("write_summary_json: write failed for " + path);
}

inline FitSummary read_summary_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_summary_json: cannot open " + path);
  json j;
  in >> j;
  return summary_from_json(j);
}

// Flat CSV tables next to the JSON: one row per bin for hazard/log-HR, one
// per covariate for beta, one per model for the IC block.
inline void write_summary_tables(const FitSummary& s, const std::string& dir) {
  {
    std::ofstream out(dir + "/hazard.csv");
    if (!out) throw IoError("write_summary_tables: cannot open " + dir + "/hazard.csv");
    out << "stratum,bin,t_lo,t_hi,estimate,lo,hi\n";
    for (const auto& r : s.hazard) {
      out << r.stratum << "," << r.bin << "," << detail::format_double(r.t_lo) << ","
          << detail::format_double(r.t_hi) << "," << detail::format_double(r.estimate) << ","
          << detail::format_double(r.lo) << "," << detail::format_double(r.hi) << "\n";
    }
  }
  {
    std::ofstream out(dir + "/log_hr.csv");
    out << "stratum_base,stratum_alt,bin,t_lo,t_hi,estimate,lo,hi,smoothed\n";
    for (const auto& r : s.log_hr) {
      out << r.stratum_base << "," << r.stratum_alt << "," << r.bin << ","
          << detail::format_double(r.t_lo) << "," << detail::format_double(r.t_hi) << ","
          << detail::format_double(r.estimate) << "," << detail::format_double(r.lo) << ","
          << detail::format_double(r.hi) << "," << detail::format_double(r.smoothed) << "\n";
    }
  }
  {
    std::ofstream out(dir + "/beta.csv");
    out << "name,estimate,lo,hi\n";
    for (const auto& r : s.beta) {
      out << r.name << "," << detail::format_double(r.estimate) << ","
          << detail::format_double(r.lo) << "," << detail::format_double(r.hi) << "\n";
    }
  }
  {
    std::ofstream out(dir + "/ic.csv");
    out << "model,neg2loglik,p_count,p_d,dic,bic,aic\n";
    out << s.model << "," << detail::format_double(s.ic.neg2loglik) << "," << s.ic.p_count << ",";
    if (s.ic.has_dic) {
      out << detail::format_double(s.ic.p_d) << "," << detail::format_double(s.ic.dic);
    } else {
      out << ",";
    }
    out << "," << detail::format_double(s.ic.bic) << "," << detail::format_double(s.ic.aic) << "\n";
  }
  {
    std::ofstream out(dir + "/gof.csv");
    out << "t,value\n";
    for (const auto& r : s.gof) {
      out << detail::format_double(r.t) << "," << detail::format_double(r.value) << "\n";
    }
  }
  if (!s.diagnostics.empty()) {
    std::ofstream out(dir + "/diagnostics.csv");
    out << "param,geweke_z_max,rhat,constant\n";
    for (const auto& r : s.diagnostics) {
      out << r.param << "," << detail::format_double(r.geweke_z) << ",";
      if (!std::isnan(r.rhat)) out << detail::format_double(r.rhat);
      out << "," << (r.constant ? 1 : 0) << "\n";
    }
  }
}

// ---------------------------------------------------------------------------
// Run manifest: everything needed to reproduce a run byte for byte.
// ---------------------------------------------------------------------------

inline json chain_config_to_json(const ChainConfig& cfg) {
  json j;
  j["n_chains"] = cfg.n_chains;
  j["burn_in"] = cfg.burn_in;
  j["n_retained"] = cfg.n_retained;
  j["thin"] = cfg.thin;
  j["seed"] = cfg.seed;
  j["a_mode"] = cfg.a_mode == ParamMode::sampled ? "sampled" : "fixed";
  j["lambda_mode"] = cfg.lambda_mode == ParamMode::sampled ? "sampled" : "fixed";
  j["k_mode"] = cfg.k_mode == ParamMode::sampled ? "sampled" : "fixed";
  j["gamma_mode"] = cfg.gamma_mode == ParamMode::sampled ? "sampled" : "fixed";
  j["adapt"] = cfg.adapt;
  j["permuted_scan"] = cfg.permuted_scan;
  j["scales"] = {{"split", cfg.scales.split},
                 {"beta", cfg.scales.beta},
                 {"lambda_log", cfg.scales.lambda_log},
                 {"k_log", cfg.scales.k_log},
                 {"gamma_logit", cfg.scales.gamma_logit}};
  return j;
}

inline json masks_to_json(const std::vector<std::vector<char>>& masks) {
  json arr = json::array();
  for (const auto& mask : masks) {
    json m = json::array();
    for (char c : mask) m.push_back(c ? 1 : 0);
    arr.push_back(std::move(m));
  }
  return arr;
}

inline std::vector<std::vector<char>> masks_from_json(const json& arr) {
  std::vector<std::vector<char>> masks;
  for (const auto& m : arr) {
    std::vector<char> mask;
    for (const auto& v : m) mask.push_back(v.get<int>() ? 1 : 0);
    masks.push_back(std::move(mask));
  }
  return masks;
}

inline void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_json: cannot open " + path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write_json: write failed for " + path);
}

inline json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_json: cannot open " + path);
  json j;
  in >> j;
  return j;
}

}  // namespace mrh
