#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>

namespace whd {

/// Seeded generator with platform-independent output. The engine
/// (mt19937_64) is fully specified by the standard; the distribution
/// transforms below are spelled out because std:: distributions are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Independent stream derived from this generator's seed and a stream id.
  static Rng stream(std::uint64_t seed, std::uint64_t id) { return Rng(splitmix(seed ^ splitmix(id + 1))); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double mean, double sd) { return mean + sd * normal(); }

  double lognormal(double median, double sigma) { return median * std::exp(sigma * normal()); }

  /// Knuth's multiplication method; fine for the small rates used here.
  int poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda > 200.0) return static_cast<int>(std::lround(std::max(0.0, normal(lambda, std::sqrt(lambda)))));
    const double limit = std::exp(-lambda);
    int k = 0;
    double prod = uniform();
    while (prod > limit) {
      ++k;
      prod *= uniform();
    }
    return k;
  }

  std::size_t weighted_index(std::span<const double> weights) {
    double sum = 0.0;
    for (double w : weights) sum += w;
    if (!(sum > 0.0)) throw std::invalid_argument("weights must have positive sum");
    double x = uniform() * sum;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (x < weights[i]) return i;
      x -= weights[i];
    }
    return weights.size() - 1;
  }

 private:
  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace whd
