#include <catch_amalgamated.hpp>

#include "mrh/prune.hpp"
#include "mrh/simulate.hpp"

using namespace mrh;

namespace {

// A one-stratum dataset placing n_left failures in (0, 2] and n_right in
// (2, 4], with matching exposure patterns, on an M = 1 grid.
Dataset two_span_dataset(int n_left, int n_right) {
  Dataset ds;
  ds.stratum_count = 1;
  ds.stratum_labels = {"0"};
  ds.grid = TimeGrid(1, 4.0);
  for (int i = 0; i < n_left; ++i) ds.records.push_back({1.0, true, 0, {}});
  for (int i = 0; i < n_right; ++i) ds.records.push_back({3.0, true, 0, {}});
  ds.validate();
  return ds;
}

int count_pruned(const std::vector<char>& mask) {
  int n = 0;
  for (char c : mask) n += c ? 1 : 0;
  return n;
}

}  // namespace

TEST_CASE("balanced counts under an equal-exposure null are fused", "[prune]") {
  // Pure survival data cannot realize exactly equal child exposures (the
  // left span accrues at least as much per subject), so the equal-exposure
  // case is the p0 = 0.5 null.
  const Dataset ds = two_span_dataset(50, 50);
  PruneConfig cfg;
  cfg.levels_from_bottom = 1;
  cfg.use_exposure_null = false;
  const std::vector<char> mask = prune(ds, 0, ds.grid, cfg);
  REQUIRE(mask.size() == 1);
  CHECK(mask[0] == 1);
}

TEST_CASE("extreme imbalance is never fused", "[prune]") {
  const Dataset ds = two_span_dataset(100, 0);
  PruneConfig cfg;
  cfg.alpha = 0.05;
  cfg.levels_from_bottom = 1;
  cfg.use_exposure_null = false;
  const std::vector<char> mask = prune(ds, 0, ds.grid, cfg);
  CHECK(mask[0] == 0);
}

TEST_CASE("splits above the tested levels are never pruned", "[prune]") {
  SimConfig cfg;
  cfg.n_per_stratum = {400};
  cfg.seed = 5;
  cfg.grid_m = 3;
  cfg.horizon = 4.0;
  cfg.c_admin = 4.0;
  const Dataset ds = simulate({HazardSpec::constant(0.4, 100.0)}, cfg);
  PruneConfig pc;
  pc.levels_from_bottom = 2;  // levels 2 and 3 tested, level 1 untouched
  const std::vector<char> mask = prune(ds, 0, ds.grid, pc);
  CHECK(mask[MrhTree::split_index(1, 0)] == 0);
}

TEST_CASE("no exposure in either child prunes with a warning", "[prune]") {
  // All observations end by t = 2, so the right half of the top split of the
  // right subtree never accrues exposure.
  Dataset ds;
  ds.stratum_count = 1;
  ds.stratum_labels = {"0"};
  ds.grid = TimeGrid(2, 8.0);
  ds.records = {{1.0, true, 0, {}}, {2.0, false, 0, {}}, {1.5, true, 0, {}}};
  ds.validate();
  PruneConfig cfg;
  cfg.levels_from_bottom = 2;
  std::vector<std::string> warnings;
  const std::vector<char> mask = prune(ds, 0, ds.grid, cfg, &warnings);
  CHECK(mask[MrhTree::split_index(2, 1)] == 1);  // spans (4, 8]: empty
  REQUIRE_FALSE(warnings.empty());
  CHECK(warnings[0].find("degenerate") != std::string::npos);
}

TEST_CASE("pruning is idempotent and monotone in alpha", "[prune]") {
  SimConfig cfg;
  cfg.n_per_stratum = {500};
  cfg.seed = 11;
  cfg.grid_m = 4;
  cfg.horizon = 4.0;
  cfg.c_admin = 4.0;
  const Dataset ds = simulate({HazardSpec::piecewise({2.0, 100.0}, {0.3, 0.9})}, cfg);

  PruneConfig pc;
  pc.levels_from_bottom = 4;
  const std::vector<char> mask1 = prune(ds, 0, ds.grid, pc);
  const std::vector<char> mask2 = prune(ds, 0, ds.grid, pc);
  CHECK(mask1 == mask2);  // pure function of (data, config)

  int prev = count_pruned(mask1);
  for (double alpha : {0.10, 0.20, 0.40}) {
    PruneConfig pc2 = pc;
    pc2.alpha = alpha;
    const int now = count_pruned(prune(ds, 0, ds.grid, pc2));
    CHECK(now <= prev);  // raising alpha never increases fusions
    prev = now;
  }
}

TEST_CASE("constant-hazard null fuses most tested splits", "[prune]") {
  // Exact binomial test is conservative, so the non-rejection rate should be
  // at least 1 - alpha up to discreteness.
  double fused_fraction = 0.0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    SimConfig cfg;
    cfg.n_per_stratum = {2000};
    cfg.seed = 1000 + static_cast<std::uint64_t>(rep);
    cfg.grid_m = 4;
    cfg.horizon = 4.0;
    cfg.c_admin = 4.0;
    const Dataset ds = simulate({HazardSpec::constant(0.5, 100.0)}, cfg);
    PruneConfig pc;
    pc.alpha = 0.05;
    pc.levels_from_bottom = 4;
    const std::vector<char> mask = prune(ds, 0, ds.grid, pc);
    fused_fraction += static_cast<double>(count_pruned(mask)) / static_cast<double>(mask.size());
  }
  fused_fraction /= reps;
  CHECK(fused_fraction >= 0.85);
}

TEST_CASE("a level-1 hazard step of ratio 3 is essentially never fused", "[prune]") {
  int unfused = 0;
  const int reps = 20;
  for (int rep = 0; rep < reps; ++rep) {
    SimConfig cfg;
    cfg.n_per_stratum = {2000};
    cfg.seed = 9000 + static_cast<std::uint64_t>(rep);
    cfg.grid_m = 4;
    cfg.horizon = 4.0;
    cfg.c_admin = 4.0;
    const Dataset ds = simulate({HazardSpec::piecewise({2.0, 100.0}, {0.3, 0.9})}, cfg);
    PruneConfig pc;
    pc.alpha = 0.05;
    pc.levels_from_bottom = 4;
    const std::vector<char> mask = prune(ds, 0, ds.grid, pc);
    unfused += mask[MrhTree::split_index(1, 0)] ? 0 : 1;
  }
  CHECK(unfused >= 19);
}

TEST_CASE("effective_bins structural cases", "[prune]") {
  const int depth = 3;
  const int n_splits = MrhTree::split_count_for(depth);

  std::vector<char> none(n_splits, 0);
  CHECK(effective_bins(none, depth).size() == 8);

  std::vector<char> all(n_splits, 1);
  const auto one = effective_bins(all, depth);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == std::pair<int, int>{1, 8});

  std::vector<char> bottom(n_splits, 0);
  for (int p = 0; p < 4; ++p) bottom[MrhTree::split_index(3, p)] = 1;
  const auto spans = effective_bins(bottom, depth);
  REQUIRE(spans.size() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(spans[static_cast<std::size_t>(i)] == std::pair<int, int>{2 * i + 1, 2 * i + 2});
  }
}

TEST_CASE("effective bin count strictly decreases as splits are pruned", "[prune]") {
  const int depth = 4;
  std::vector<char> mask(MrhTree::split_count_for(depth), 0);
  std::size_t prev = effective_bins(mask, depth).size();
  Rng rng(8);
  std::vector<int> order(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) order[i] = static_cast<int>(i);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
  }
  for (int idx : order) {
    mask[static_cast<std::size_t>(idx)] = 1;
    const std::size_t now = effective_bins(mask, depth).size();
    REQUIRE(now == prev - 1);
    prev = now;
  }
}
