#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mrh/stats.hpp"
#include "mrh/survdata.hpp"

namespace mrh {

// Hyperparameters of the MRH prior for one stratum tree. H carries a
// Gamma(a, lambda) prior in the shape/scale convention (prior mean a*lambda);
// each split R_{m,p} carries Beta(2*gamma*k^m*a, 2*(1-gamma)*k^m*a).
// k = 0.5 makes the hazard increments a priori uncorrelated, k > 0.5
// positively correlated (smoother), k < 0.5 negatively correlated.
struct HyperParams {
  int a = 10;
  double lambda = 1.0;
  double k = 0.5;
  std::vector<double> gamma;  // per split, breadth-first; empty = all 0.5

  // Fixed value vs. sampled under the hyperprior, per field.
  bool a_fixed = true;
  bool lambda_fixed = true;
  bool k_fixed = true;
  bool gamma_fixed = true;

  // Hyperprior settings: zero-truncated Poisson mean for a, exponential
  // means for lambda and k, Beta(u, w) on each gamma.
  double mu_a = 10.0;
  double mu_lambda = 1.0;
  double mu_k = 0.5;
  double u = 1.0;
  double w = 1.0;

  double gamma_at(int split) const {
    return gamma.empty() ? 0.5 : gamma[static_cast<std::size_t>(split)];
  }

  void validate() const {
    if (a < 1) throw std::invalid_argument("HyperParams: a must be a positive integer");
    if (!(lambda > 0.0)) throw std::invalid_argument("HyperParams: lambda must be positive");
    if (!(k > 0.0)) throw std::invalid_argument("HyperParams: k must be positive");
    if (!(mu_a > 0.0) || !(mu_lambda > 0.0) || !(mu_k > 0.0)) {
      throw std::invalid_argument("HyperParams: hyperprior means must be positive");
    }
    if (!(u > 0.0) || !(w > 0.0)) throw std::invalid_argument("HyperParams: u, w must be positive");
    for (double g : gamma) {
      if (!(g > 0.0) || !(g < 1.0)) throw std::invalid_argument("HyperParams: gamma outside (0,1)");
    }
  }
};

// Tree parametrization of one stratum's hazard over a dyadic grid: the total
// cumulative hazard H and split parameters R(m,p) = H_{m,2p} / H_{m-1,p} for
// m = 1..M, p = 0..2^{m-1}-1, stored breadth-first. A pruned split is frozen
// at exactly 0.5 and cannot be assigned through set_split.
class MrhTree {
 public:
  MrhTree() = default;

  MrhTree(int depth, double total_hazard, HyperParams hyper = {})
      : m_(depth), h_(total_hazard), hyper_(std::move(hyper)) {
    if (depth < 0 || depth > 20) throw std::invalid_argument("MrhTree: depth out of range");
    if (!(total_hazard > 0.0)) throw std::invalid_argument("MrhTree: H must be positive");
    const int n = split_count_for(depth);
    splits_.assign(n, 0.5);
    pruned_.assign(n, 0);
    hyper_.validate();
  }

  static int split_count_for(int depth) { return (1 << depth) - 1; }
  static int split_index(int m, int p) { return (1 << (m - 1)) - 1 + p; }

  // Inverse of split_index: (level m, position p) of a breadth-first index.
  static std::pair<int, int> split_level(int index) {
    int m = 1;
    while (split_index(m + 1, 0) <= index) ++m;
    return {m, index - split_index(m, 0)};
  }

  int depth() const { return m_; }
  int leaf_count() const { return 1 << m_; }
  int split_count() const { return static_cast<int>(splits_.size()); }

  double total() const { return h_; }
  void set_total(double h) {
    if (!(h > 0.0)) throw std::invalid_argument("MrhTree: H must be positive");
    h_ = h;
  }

  double split(int index) const { return splits_[static_cast<std::size_t>(index)]; }
  double split(int m, int p) const { return splits_[static_cast<std::size_t>(split_index(m, p))]; }

  void set_split(int index, double r) {
    if (pruned_[static_cast<std::size_t>(index)]) {
      throw std::logic_error("MrhTree: cannot assign a pruned split");
    }
    if (!(r > 0.0) || !(r < 1.0)) throw std::invalid_argument("MrhTree: split outside (0,1)");
    splits_[static_cast<std::size_t>(index)] = r;
  }
  void set_split(int m, int p, double r) { set_split(split_index(m, p), r); }

  bool pruned(int index) const { return pruned_[static_cast<std::size_t>(index)] != 0; }
  bool pruned(int m, int p) const { return pruned(split_index(m, p)); }

  const std::vector<char>& pruned_mask() const { return pruned_; }

  void set_pruned_mask(const std::vector<char>& mask) {
    if (mask.size() != pruned_.size()) throw std::invalid_argument("MrhTree: mask size mismatch");
    pruned_ = mask;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) splits_[i] = 0.5;
    }
  }

  const HyperParams& hyper() const { return hyper_; }
  HyperParams& hyper() { return hyper_; }

  const std::vector<double>& splits() const { return splits_; }

 private:
  int m_ = 0;
  double h_ = 1.0;
  std::vector<double> splits_;
  std::vector<char> pruned_;
  HyperParams hyper_;
};

// Hazard increments d_j = H * prod_m s_m(j), where s_m(j) is R(m,p) when bin
// j descends through the left child at level m and 1-R(m,p) otherwise.
// By construction sum_j d_j = H up to floating tolerance.
inline std::vector<double> increments(const MrhTree& tree) {
  const int depth = tree.depth();
  const int j = tree.leaf_count();
  std::vector<double> d(j);
  for (int leaf = 0; leaf < j; ++leaf) {
    double v = tree.total();
    for (int m = 1; m <= depth; ++m) {
      const int shift = depth - m;
      const int p = leaf >> (shift + 1);
      const double r = tree.split(m, p);
      v *= ((leaf >> shift) & 1) ? (1.0 - r) : r;
    }
    d[leaf] = v;
  }
  return d;
}

// Increments of the unit-total tree: the path products without the H factor.
// sum_j unit_increments(tree)[j] ~ 1, and H(t)/H == F(t) is built from these
// so that F never depends on H, bit for bit.
inline std::vector<double> unit_increments(const MrhTree& tree) {
  const int depth = tree.depth();
  const int j = tree.leaf_count();
  std::vector<double> u(j);
  for (int leaf = 0; leaf < j; ++leaf) {
    double v = 1.0;
    for (int m = 1; m <= depth; ++m) {
      const int shift = depth - m;
      const int p = leaf >> (shift + 1);
      const double r = tree.split(m, p);
      v *= ((leaf >> shift) & 1) ? (1.0 - r) : r;
    }
    u[leaf] = v;
  }
  return u;
}

// F(t) = H(min(t, t_J)) / H(t_J), computed from the splits alone; invariant
// to any update of the total H.
inline double normalized_cumulative_at(double t, const MrhTree& tree, const TimeGrid& grid) {
  if (!(t >= 0.0)) throw std::domain_error("normalized_cumulative_at: negative time");
  if (tree.leaf_count() != grid.bins()) {
    throw std::invalid_argument("normalized_cumulative_at: tree and grid disagree on bin count");
  }
  if (t >= grid.horizon()) return 1.0;
  if (t == 0.0) return 0.0;
  const std::vector<double> u = unit_increments(tree);
  const int j = bin_index(t, grid);
  double f = 0.0;
  for (int i = 1; i < j; ++i) f += u[i - 1];
  f += u[j - 1] * (t - grid.lower(j)) / grid.width(j);
  return f;
}

// Cumulative hazard H(t) with linear interpolation inside bins (constant
// hazard within a bin); equals H for any t at or past the horizon.
inline double cumulative_at(double t, const MrhTree& tree, const TimeGrid& grid) {
  if (!(t >= 0.0)) throw std::domain_error("cumulative_at: negative time");
  if (tree.leaf_count() != grid.bins()) {
    throw std::invalid_argument("cumulative_at: tree and grid disagree on bin count");
  }
  if (t >= grid.horizon()) return tree.total();
  if (t == 0.0) return 0.0;
  const std::vector<double> d = increments(tree);
  const int j = bin_index(t, grid);
  double h = 0.0;
  for (int i = 1; i < j; ++i) h += d[i - 1];
  h += d[j - 1] * (t - grid.lower(j)) / grid.width(j);
  return h;
}

// Piecewise-constant hazard rate d_j / width_j; undefined at or past t_J.
inline double hazard_at(double t, const MrhTree& tree, const TimeGrid& grid) {
  if (!(t >= 0.0)) throw std::domain_error("hazard_at: negative time");
  if (t >= grid.horizon()) throw std::domain_error("hazard_at: time at or past the grid horizon");
  if (tree.leaf_count() != grid.bins()) {
    throw std::invalid_argument("hazard_at: tree and grid disagree on bin count");
  }
  const std::vector<double> d = increments(tree);
  const int j = bin_index(t, grid);
  return d[j - 1] / grid.width(j);
}

// Log prior density: log Gamma(H; a, lambda) plus the Beta log densities of
// the unpruned splits. Returns -inf (not an exception) for states off the
// support, e.g. a split at 0 or 1.
inline double log_prior(const MrhTree& tree) {
  const HyperParams& hp = tree.hyper();
  double lp = log_gamma_pdf(tree.total(), static_cast<double>(hp.a), hp.lambda);
  for (int idx = 0; idx < tree.split_count(); ++idx) {
    if (tree.pruned(idx)) continue;
    const auto [m, p] = MrhTree::split_level(idx);
    (void)p;
    const double g = hp.gamma_at(idx);
    const double km = std::pow(hp.k, m);
    const double shape1 = 2.0 * g * km * hp.a;
    const double shape2 = 2.0 * (1.0 - g) * km * hp.a;
    lp += log_beta_pdf(tree.split(idx), shape1, shape2);
  }
  return lp;
}

}  // namespace mrh
