#pragma once

#include "ctphys/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace ctphys {

/// Noise-level constants shared by the schedule and the consistency
/// parameterization. Defaults are the improved-CT settings.
struct ScheduleConstants {
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double rho = 7.0;
  double sigma_data = 0.5;
  double p_mean = -1.1;
  double p_std = 2.0;
  int s0 = 10;
  int s1 = 15;
};

/// t_i = (eps^(1/rho) + (i-1)/(N-1) (T^(1/rho) - eps^(1/rho)))^rho, i = 1..N,
/// with both endpoints pinned exactly.
std::vector<double> karras_grid(double sigma_min, double sigma_max, double rho, int steps);

/// Ascending noise-level grid t_1 = eps < ... < t_N = T.
class NoiseSchedule {
 public:
  NoiseSchedule(double sigma_min, double sigma_max, double rho, int steps);

  int steps() const { return static_cast<int>(grid_.size()); }
  double sigma_min() const { return grid_.front(); }
  double sigma_max() const { return grid_.back(); }
  double rho() const { return rho_; }
  /// 1-based, matching t_1..t_N.
  double t(std::size_t i) const { return grid_.at(i - 1); }
  const std::vector<double>& grid() const { return grid_; }

 private:
  double rho_;
  std::vector<double> grid_;
};

/// Doubling discretization curriculum: N(k) = min(s0 2^floor(k/K'), s1) + 1.
class Curriculum {
 public:
  Curriculum(int s0, int s1, std::int64_t total_iterations);

  int steps_at(std::int64_t k) const;
  std::int64_t plateau_width() const { return plateau_; }
  std::int64_t total_iterations() const { return total_; }
  int s0() const { return s0_; }
  int s1() const { return s1_; }

 private:
  int s0_;
  int s1_;
  std::int64_t total_;
  std::int64_t plateau_;
};

/// Discretized log-normal proposal over interval indices n = 1..N-1:
/// p(n) ~ erf((ln t_{n+1} - P_mean)/(sqrt2 P_std)) - erf((ln t_n - P_mean)/(sqrt2 P_std)).
class NoiseIndexDistribution {
 public:
  NoiseIndexDistribution(const NoiseSchedule& schedule, double p_mean, double p_std);

  /// weights()[n - 1] is p(n).
  const std::vector<double>& weights() const { return weights_; }
  /// Draws n in {1..N-1} with exactly one uniform draw.
  std::size_t sample(Rng& rng) const;

 private:
  std::vector<double> weights_;
  std::vector<double> cdf_;
};

/// lambda(t_n) = 1 / (t_{n+1} - t_n).
double loss_weight(const NoiseSchedule& schedule, std::size_t n);

}  // namespace ctphys
