#pragma once

#include <algorithm>
#include <cstdint>
#include <random>

namespace mrh {

// SplitMix64 finalizer; used to whiten seeds and derive per-chain streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream for worker `index` under a master seed. Two calls with different
// indices give streams that never collide in practice, so parallel chains
// stay reproducible no matter how many threads execute them.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(master ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// Thin wrapper over mt19937_64 bundling the draws the samplers need.
// Distributions are constructed per call: no hidden state survives between
// draws, so a given seed always yields the same sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::mt19937_64& engine() { return engine_; }

  double uniform() {
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }

  // Uniform on (0, 1]; safe under log().
  double uniform_pos() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }

  double gamma(double shape, double scale) {
    return std::gamma_distribution<double>(shape, scale)(engine_);
  }

  double exponential(double rate) {
    return std::exponential_distribution<double>(rate)(engine_);
  }

  // Beta draw via two gammas, clamped strictly inside (0,1) so split
  // parameters sampled from bathtub-shaped priors stay valid.
  double beta(double a, double b) {
    const double x = gamma(a, 1.0);
    const double y = gamma(b, 1.0);
    const double r = (x + y > 0.0) ? x / (x + y) : 0.5;
    const double eps = 1e-12;
    return std::clamp(r, eps, 1.0 - eps);
  }

  bool bernoulli(double p) { return uniform() < p; }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mrh
