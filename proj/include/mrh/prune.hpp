#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mrh/stats.hpp"
#include "mrh/survdata.hpp"
#include "mrh/tree.hpp"

namespace mrh {

struct PruneConfig {
  double alpha = 0.05;        // per-split type I error
  int levels_from_bottom = 0; // number of lowest tree levels subjected to testing
  bool use_exposure_null = true;

  void validate(int depth) const {
    if (!(alpha > 0.0) || !(alpha < 1.0)) throw std::invalid_argument("PruneConfig: alpha outside (0,1)");
    if (levels_from_bottom < 0 || levels_from_bottom > depth) {
      throw std::invalid_argument("PruneConfig: levels_from_bottom outside 0..M");
    }
  }
};

// Data-driven pre-processing: for each split in the bottom levels, test
// H0: R(m,p) = 0.5 by an exact two-sided binomial test on the failure counts
// of the two child time spans. Under a constant hazard across the parent
// span, failures split binomially with probability proportional to exposure,
// which gives the null p0 = E_L / (E_L + E_R) (or 0.5 when the exposure
// weighting is disabled). Splits whose p-value reaches alpha are fused.
// Runs once, before sampling; splits above the tested levels are never
// pruned. Returns the breadth-first pruned mask.
inline std::vector<char> prune(const Dataset& data, int stratum, const TimeGrid& grid,
                               const PruneConfig& cfg,
                               std::vector<std::string>* warnings = nullptr) {
  const int depth = grid.depth();
  cfg.validate(depth);
  const int j = grid.bins();

  // Per-bin failure counts and exposures for the stratum.
  std::vector<double> events(j, 0.0), expo(j, 0.0);
  int seen = 0;
  for (const auto& rec : data.records) {
    if (rec.stratum != stratum) continue;
    ++seen;
    if (rec.event) events[bin_index(rec.time, grid) - 1] += 1.0;
    const std::vector<double> w = exposure(rec, grid);
    for (int b = 0; b < j; ++b) expo[b] += w[b];
  }
  if (seen == 0) throw std::invalid_argument("prune: stratum has no records");

  std::vector<char> mask(MrhTree::split_count_for(depth), 0);
  const int first_level = depth - cfg.levels_from_bottom + 1;
  for (int m = first_level; m <= depth; ++m) {
    const int span = 1 << (depth - m);  // leaves per child of a level-m split
    for (int p = 0; p < (1 << (m - 1)); ++p) {
      const int lo = 2 * p * span;  // first leaf (0-based) of the left child
      double n_left = 0.0, n_right = 0.0, e_left = 0.0, e_right = 0.0;
      for (int b = lo; b < lo + span; ++b) {
        n_left += events[b];
        e_left += expo[b];
      }
      for (int b = lo + span; b < lo + 2 * span; ++b) {
        n_right += events[b];
        e_right += expo[b];
      }
      const int idx = MrhTree::split_index(m, p);
      if (e_left + e_right <= 0.0) {
        mask[idx] = 1;
        if (warnings) {
          warnings->push_back("split (" + std::to_string(m) + "," + std::to_string(p) +
                              "): no exposure in either child; pruned on degenerate data");
        }
        continue;
      }
      const double p0 = cfg.use_exposure_null ? e_left / (e_left + e_right) : 0.5;
      const int n = static_cast<int>(n_left + n_right + 0.5);
      const int k = static_cast<int>(n_left + 0.5);
      const double pval = binom_test_two_sided(k, n, p0);
      if (pval >= cfg.alpha) mask[idx] = 1;
    }
  }
  return mask;
}

// Fused bin spans implied by a pruned mask: adjacent leaves merge exactly
// when the split separating them is pruned, so the span count is always
// J - (#pruned splits). Returns 1-based inclusive (first, last) leaf spans.
inline std::vector<std::pair<int, int>> effective_bins(const std::vector<char>& mask, int depth) {
  if (static_cast<int>(mask.size()) != MrhTree::split_count_for(depth)) {
    throw std::invalid_argument("effective_bins: mask size does not match depth");
  }
  const int j = 1 << depth;
  std::vector<std::pair<int, int>> spans;
  int start = 1;
  for (int b = 1; b < j; ++b) {
    // The split separating leaves b and b+1 sits at level M - e where e is
    // the number of trailing zero bits of the boundary index.
    int e = 0;
    while (((b >> e) & 1) == 0) ++e;
    const int m = depth - e;
    const int p = b >> (e + 1);
    if (!mask[MrhTree::split_index(m, p)]) {
      spans.emplace_back(start, b);
      start = b + 1;
    }
  }
  spans.emplace_back(start, j);
  return spans;
}

}  // namespace mrh
