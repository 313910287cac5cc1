#pragma once

#include <cstdint>
#include <random>

namespace ctphys {

/// Seeded random stream that counts what it hands out, so tests can assert
/// exactly how many draws a training iteration consumed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() {
    ++normal_draws_;
    return normal_(engine_);
  }

  /// Uniform on [0, 1).
  double uniform() {
    ++uniform_draws_;
    return uniform_(engine_);
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    ++uniform_draws_;
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(engine_);
  }

  /// Derives an independent child stream; consumes one raw draw.
  Rng split() { return Rng(engine_() ^ 0x9e3779b97f4a7c15ULL); }

  std::uint64_t normal_draws() const { return normal_draws_; }
  std::uint64_t uniform_draws() const { return uniform_draws_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
  std::uint64_t normal_draws_ = 0;
  std::uint64_t uniform_draws_ = 0;
};

}  // namespace ctphys
