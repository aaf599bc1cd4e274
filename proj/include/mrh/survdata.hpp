#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrh {

// File/IO failures, kept distinct from validation and fit errors so the CLI
// can map them onto its exit codes.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One right-censored observation.
struct SubjectRecord {
  double time = 0.0;
  bool event = false;  // true = failure observed, false = right-censored
  int stratum = 0;
  std::vector<double> covariates;
};

// Dyadic time grid: J = 2^M bins over [0, t_J] with strictly increasing
// boundaries. Bins are left-open/right-closed, (t_{j-1}, t_j]; a failure
// exactly on a boundary belongs to the earlier bin.
class TimeGrid {
 public:
  TimeGrid() : TimeGrid(0, 1.0) {}

  // Equal-width bins on [0, horizon].
  TimeGrid(int depth, double horizon) : m_(depth) {
    if (depth < 0 || depth > 20) throw std::invalid_argument("TimeGrid: depth out of range");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
      throw std::invalid_argument("TimeGrid: horizon must be positive and finite");
    }
    const int j = 1 << depth;
    b_.resize(j + 1);
    for (int i = 0; i <= j; ++i) {
      b_[i] = horizon * static_cast<double>(i) / static_cast<double>(j);
    }
    b_[0] = 0.0;
    b_[j] = horizon;
  }

  TimeGrid(int depth, std::vector<double> boundaries) : m_(depth), b_(std::move(boundaries)) {
    if (depth < 0) throw std::invalid_argument("TimeGrid: negative depth");
    const std::size_t j = std::size_t{1} << depth;
    if (b_.size() != j + 1) throw std::invalid_argument("TimeGrid: need 2^M + 1 boundaries");
    if (b_[0] != 0.0) throw std::invalid_argument("TimeGrid: boundaries must start at 0");
    for (std::size_t i = 1; i < b_.size(); ++i) {
      if (!(b_[i] > b_[i - 1]) || !std::isfinite(b_[i])) {
        throw std::invalid_argument("TimeGrid: boundaries must be strictly increasing");
      }
    }
  }

  int depth() const { return m_; }
  int bins() const { return 1 << m_; }
  double horizon() const { return b_.back(); }
  double lower(int j) const { return b_[j - 1]; }  // 1-based bin index
  double upper(int j) const { return b_[j]; }
  double width(int j) const { return b_[j] - b_[j - 1]; }
  const std::vector<double>& boundaries() const { return b_; }

  bool operator==(const TimeGrid&) const = default;

 private:
  int m_;
  std::vector<double> b_;
};

// Bin containing time t: j with t in (t_{j-1}, t_j]. t = 0 maps to bin 1 and
// times past the horizon clamp to the last bin.
inline int bin_index(double t, const TimeGrid& grid) {
  if (!(t >= 0.0)) throw std::domain_error("bin_index: negative time");
  if (t <= grid.lower(1)) return 1;
  if (t >= grid.horizon()) return grid.bins();
  const auto& b = grid.boundaries();
  const auto it = std::lower_bound(b.begin(), b.end(), t);
  return static_cast<int>(it - b.begin());
}

// Time at risk inside each bin: full width while the subject survives past
// the bin, the partial residence for the bin containing T, zero afterwards.
// Components sum to min(T, t_J).
inline std::vector<double> exposure(const SubjectRecord& rec, const TimeGrid& grid) {
  if (!(rec.time >= 0.0)) throw std::domain_error("exposure: negative time");
  std::vector<double> w(grid.bins(), 0.0);
  for (int j = 1; j <= grid.bins(); ++j) {
    if (rec.time > grid.upper(j)) {
      w[j - 1] = grid.width(j);
    } else if (rec.time > grid.lower(j)) {
      w[j - 1] = rec.time - grid.lower(j);
      break;
    } else {
      break;
    }
  }
  return w;
}

struct Dataset {
  std::vector<SubjectRecord> records;
  int stratum_count = 0;
  std::vector<std::string> covariate_names;
  std::vector<std::string> stratum_labels;
  TimeGrid grid;

  int covariate_count() const { return static_cast<int>(covariate_names.size()); }
  int size() const { return static_cast<int>(records.size()); }

  int events_in(int stratum) const {
    int n = 0;
    for (const auto& r : records) n += (r.stratum == stratum && r.event) ? 1 : 0;
    return n;
  }

  void validate() const {
    if (stratum_count < 1) throw std::invalid_argument("Dataset: no strata");
    if (static_cast<int>(stratum_labels.size()) != stratum_count) {
      throw std::invalid_argument("Dataset: stratum label count mismatch");
    }
    std::vector<int> per_stratum(stratum_count, 0);
    const std::size_t z = covariate_names.size();
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& r = records[i];
      if (!std::isfinite(r.time) || r.time < 0.0) {
        throw std::invalid_argument("Dataset: record " + std::to_string(i) + " has invalid time");
      }
      if (r.time > grid.horizon()) {
        throw std::invalid_argument("Dataset: record " + std::to_string(i) + " exceeds the grid horizon");
      }
      if (r.stratum < 0 || r.stratum >= stratum_count) {
        throw std::invalid_argument("Dataset: record " + std::to_string(i) + " has stratum out of range");
      }
      if (r.covariates.size() != z) {
        throw std::invalid_argument("Dataset: record " + std::to_string(i) + " has wrong covariate count");
      }
      for (double x : r.covariates) {
        if (!std::isfinite(x)) {
          throw std::invalid_argument("Dataset: record " + std::to_string(i) + " has non-finite covariate");
        }
      }
      ++per_stratum[r.stratum];
    }
    for (int l = 0; l < stratum_count; ++l) {
      if (per_stratum[l] == 0) {
        throw std::invalid_argument("Dataset: stratum " + stratum_labels[l] + " is empty");
      }
    }
  }

  bool operator==(const Dataset& other) const {
    if (stratum_count != other.stratum_count || covariate_names != other.covariate_names ||
        stratum_labels != other.stratum_labels || !(grid == other.grid) ||
        records.size() != other.records.size()) {
      return false;
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& a = records[i];
      const auto& b = other.records[i];
      if (a.time != b.time || a.event != b.event || a.stratum != b.stratum ||
          a.covariates != b.covariates) {
        return false;
      }
    }
    return true;
  }
};

struct ColumnSpec {
  std::string column;
  bool categorical = false;
  std::string reference;  // reference level for categorical expansion
};

struct CsvSchema {
  std::string time = "time";
  std::string event = "event";
  std::string stratum = "stratum";
  // Empty = every remaining column is a covariate, numeric when all values
  // parse as numbers and categorical otherwise.
  std::vector<ColumnSpec> covariates;
};

namespace detail {

inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

inline bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size() && std::isfinite(out);
}

// Finalizes horizon handling shared by load_csv and the simulator: builds the
// grid over [0, horizon] (taking the max observed time when horizon == 0) and
// converts observations past t_J to censored-at-t_J.
inline void apply_horizon(std::vector<SubjectRecord>& records, int grid_m, double horizon,
                          TimeGrid& grid, std::vector<std::string>* warnings) {
  double t_max = 0.0;
  for (const auto& r : records) t_max = std::max(t_max, r.time);
  if (horizon <= 0.0) horizon = t_max;
  if (!(horizon > 0.0)) {
    throw std::invalid_argument("apply_horizon: all observation times are zero; give an explicit horizon");
  }
  grid = TimeGrid(grid_m, horizon);
  int clamped = 0;
  for (auto& r : records) {
    if (r.time > horizon) {
      r.time = horizon;
      r.event = false;
      ++clamped;
    }
  }
  if (clamped > 0 && warnings) {
    warnings->push_back(std::to_string(clamped) +
                        " record(s) past the horizon treated as censored at t_J");
  }
}

}  // namespace detail

// Reads a comma-delimited file with a header row into a validated Dataset.
// Categorical covariates are expanded to indicator columns against their
// reference level; stratum labels (integer or string) map onto 0..L-1.
inline Dataset load_csv(const std::string& path, const CsvSchema& schema = {}, int grid_m = 6,
                        double horizon = 0.0, std::vector<std::string>* warnings = nullptr) {
  std::ifstream in(path);
  if (!in) throw IoError("load_csv: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) throw IoError("load_csv: empty file " + path);
  const std::vector<std::string> header = detail::split_csv_line(line);

  auto column_of = [&](const std::string& name) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (header[c] == name) return static_cast<int>(c);
    }
    throw std::invalid_argument("load_csv: missing column '" + name + "'");
  };

  const int time_col = column_of(schema.time);
  const int event_col = column_of(schema.event);
  const int stratum_col = column_of(schema.stratum);

  std::vector<ColumnSpec> covs = schema.covariates;
  if (covs.empty()) {
    for (std::size_t c = 0; c < header.size(); ++c) {
      const int ci = static_cast<int>(c);
      if (ci == time_col || ci == event_col || ci == stratum_col) continue;
      covs.push_back({header[c], false, ""});
    }
  }
  std::vector<int> cov_cols;
  for (const auto& spec : covs) cov_cols.push_back(column_of(spec.column));

  std::vector<std::vector<std::string>> rows;
  int row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw std::invalid_argument("load_csv: row " + std::to_string(row_number) +
                                  " has " + std::to_string(fields.size()) + " fields, expected " +
                                  std::to_string(header.size()));
    }
    rows.push_back(std::move(fields));
  }
  if (rows.empty()) throw std::invalid_argument("load_csv: no data rows in " + path);

  // Decide numeric vs categorical for auto-mapped covariates.
  std::vector<bool> is_categorical(covs.size());
  for (std::size_t k = 0; k < covs.size(); ++k) {
    if (schema.covariates.empty()) {
      bool all_numeric = true;
      for (const auto& r : rows) {
        double tmp;
        if (!detail::parse_number(r[cov_cols[k]], tmp)) {
          all_numeric = false;
          break;
        }
      }
      is_categorical[k] = !all_numeric;
    } else {
      is_categorical[k] = covs[k].categorical;
    }
  }

  // Level discovery for categorical columns (sorted for determinism).
  std::vector<std::vector<std::string>> levels(covs.size());
  std::vector<std::string> references(covs.size());
  for (std::size_t k = 0; k < covs.size(); ++k) {
    if (!is_categorical[k]) continue;
    std::set<std::string> seen;
    for (const auto& r : rows) seen.insert(r[cov_cols[k]]);
    references[k] = covs[k].reference.empty() ? *seen.begin() : covs[k].reference;
    if (!seen.count(references[k])) {
      throw std::invalid_argument("load_csv: reference level '" + references[k] +
                                  "' not present in column '" + covs[k].column + "'");
    }
    for (const auto& lv : seen) {
      if (lv != references[k]) levels[k].push_back(lv);
    }
  }

  Dataset ds;
  for (std::size_t k = 0; k < covs.size(); ++k) {
    if (is_categorical[k]) {
      for (const auto& lv : levels[k]) ds.covariate_names.push_back(covs[k].column + "=" + lv);
    } else {
      ds.covariate_names.push_back(covs[k].column);
    }
  }

  // Stratum label mapping: sorted unique labels -> 0..L-1, except when the
  // labels are exactly the integers 0..L-1, which keep their numeric order.
  std::set<std::string> label_set;
  for (const auto& r : rows) {
    const std::string lbl = r[stratum_col];
    if (lbl.empty()) {
      throw std::invalid_argument("load_csv: unknown stratum label (empty) in data");
    }
    label_set.insert(lbl);
  }
  std::vector<std::string> labels(label_set.begin(), label_set.end());
  {
    std::vector<long> as_int;
    bool all_int = true;
    for (const auto& l : labels) {
      char* end = nullptr;
      long v = std::strtol(l.c_str(), &end, 10);
      if (end != l.c_str() + l.size()) {
        all_int = false;
        break;
      }
      as_int.push_back(v);
    }
    if (all_int) {
      std::sort(as_int.begin(), as_int.end());
      labels.clear();
      for (long v : as_int) labels.push_back(std::to_string(v));
    }
  }
  std::map<std::string, int> label_index;
  for (std::size_t i = 0; i < labels.size(); ++i) label_index[labels[i]] = static_cast<int>(i);
  ds.stratum_labels = labels;
  ds.stratum_count = static_cast<int>(labels.size());

  for (std::size_t r = 0; r < rows.size(); ++r) {
    const int rn = static_cast<int>(r) + 2;  // 1-based file row, after header
    const auto& fields = rows[r];
    SubjectRecord rec;
    if (!detail::parse_number(fields[time_col], rec.time)) {
      throw std::invalid_argument("load_csv: row " + std::to_string(rn) + ": non-numeric time '" +
                                  fields[time_col] + "'");
    }
    if (rec.time < 0.0) {
      throw std::invalid_argument("load_csv: row " + std::to_string(rn) + ": negative time");
    }
    const std::string& ev = fields[event_col];
    if (ev == "0") {
      rec.event = false;
    } else if (ev == "1") {
      rec.event = true;
    } else {
      throw std::invalid_argument("load_csv: row " + std::to_string(rn) + ": event must be 0 or 1, got '" + ev + "'");
    }
    rec.stratum = label_index.at(fields[stratum_col]);
    for (std::size_t k = 0; k < covs.size(); ++k) {
      const std::string& v = fields[cov_cols[k]];
      if (is_categorical[k]) {
        for (const auto& lv : levels[k]) rec.covariates.push_back(v == lv ? 1.0 : 0.0);
      } else {
        double x;
        if (!detail::parse_number(v, x)) {
          throw std::invalid_argument("load_csv: row " + std::to_string(rn) +
                                      ": non-numeric value '" + v + "' in column '" + covs[k].column + "'");
        }
        rec.covariates.push_back(x);
      }
    }
    if (rec.time == 0.0 && rec.event && warnings) {
      warnings->push_back("row " + std::to_string(rn) + ": failure at time 0 mapped to bin 1");
    }
    ds.records.push_back(std::move(rec));
  }

  detail::apply_horizon(ds.records, grid_m, horizon, ds.grid, warnings);
  ds.validate();
  return ds;
}

// Collapses all strata into one, turning the stratum label into indicator
// covariates against the first label (the proportional-hazards treatment
// coding: a single baseline tree with the group effect in beta).
inline Dataset pool_strata(const Dataset& ds) {
  Dataset out;
  out.grid = ds.grid;
  out.stratum_count = 1;
  out.stratum_labels = {"0"};
  for (int l = 1; l < ds.stratum_count; ++l) {
    out.covariate_names.push_back("stratum=" + ds.stratum_labels[static_cast<std::size_t>(l)]);
  }
  for (const auto& name : ds.covariate_names) out.covariate_names.push_back(name);
  for (const auto& rec : ds.records) {
    SubjectRecord r;
    r.time = rec.time;
    r.event = rec.event;
    r.stratum = 0;
    for (int l = 1; l < ds.stratum_count; ++l) r.covariates.push_back(rec.stratum == l ? 1.0 : 0.0);
    for (double x : rec.covariates) r.covariates.push_back(x);
    out.records.push_back(std::move(r));
  }
  out.validate();
  return out;
}

inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_csv: cannot open " + path);
  out << "time,event,stratum";
  for (const auto& name : ds.covariate_names) out << "," << name;
  out << "\n";
  for (const auto& r : ds.records) {
    out << detail::format_double(r.time) << "," << (r.event ? 1 : 0) << ","
        << ds.stratum_labels[r.stratum];
    for (double x : r.covariates) out << "," << detail::format_double(x);
    out << "\n";
  }
  if (!out) throw IoError("save_csv: write failed for " + path);
}

}  // namespace mrh
