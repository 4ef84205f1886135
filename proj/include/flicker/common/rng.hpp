#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

namespace flicker {

// Seeded random stream. Substreams are derived from a base seed plus a list of
// tags (episode index, agent id, ...), so every consumer owns an independent,
// reproducible stream and nothing is ever seeded from the clock.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  static Rng derive(std::uint64_t base, std::initializer_list<std::uint64_t> tags);
  static std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

  // Uniform on [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  // Uniform integer on the closed range [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  std::mt19937_64& engine() { return engine_; }

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

 private:
  std::mt19937_64 engine_;
};

}  // namespace flicker
