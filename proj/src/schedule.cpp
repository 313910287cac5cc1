#include "ctphys/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ctphys {

std::vector<double> karras_grid(double sigma_min, double sigma_max, double rho, int steps) {
  if (!(sigma_min > 0.0) || !(sigma_min < sigma_max)) {
    throw std::invalid_argument("karras_grid: need 0 < sigma_min < sigma_max");
  }
  if (!(rho >= 1.0)) throw std::invalid_argument("karras_grid: rho must be >= 1");
  if (steps < 2) throw std::invalid_argument("karras_grid: need at least 2 steps");

  const double lo = std::pow(sigma_min, 1.0 / rho);
  const double hi = std::pow(sigma_max, 1.0 / rho);
  std::vector<double> grid(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) {
    const double frac = static_cast<double>(i) / static_cast<double>(steps - 1);
    grid[static_cast<std::size_t>(i)] = std::pow(lo + frac * (hi - lo), rho);
  }
  grid.front() = sigma_min;
  grid.back() = sigma_max;
  return grid;
}

NoiseSchedule::NoiseSchedule(double sigma_min, double sigma_max, double rho, int steps)
    : rho_(rho), grid_(karras_grid(sigma_min, sigma_max, rho, steps)) {}

Curriculum::Curriculum(int s0, int s1, std::int64_t total_iterations)
    : s0_(s0), s1_(s1), total_(total_iterations) {
  if (s0 < 1 || s1 < s0) throw std::invalid_argument("curriculum: need 1 <= s0 <= s1");
  if (total_iterations < 1) throw std::invalid_argument("curriculum: need K >= 1");
  const double doublings = std::log2(static_cast<double>(s1) / static_cast<double>(s0)) + 1.0;
  plateau_ = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::floor(static_cast<double>(total_iterations) / doublings)));
}

int Curriculum::steps_at(std::int64_t k) const {
  if (k < 0 || k >= total_) {
    throw std::out_of_range("curriculum: iteration " + std::to_string(k) + " outside [0, " +
                            std::to_string(total_) + ")");
  }
  const std::int64_t level = k / plateau_;
  // s0 * 2^level saturates at s1 long before the shift could overflow
  const std::int64_t scaled = level >= 31 ? s1_ : std::min<std::int64_t>(
                                                      static_cast<std::int64_t>(s0_) << level, s1_);
  return static_cast<int>(scaled) + 1;
}

NoiseIndexDistribution::NoiseIndexDistribution(const NoiseSchedule& schedule, double p_mean,
                                               double p_std) {
  if (!(p_std > 0.0)) throw std::invalid_argument("noise index distribution: P_std must be > 0");
  const auto& grid = schedule.grid();
  const double denom = std::sqrt(2.0) * p_std;
  weights_.resize(grid.size() - 1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double hi = std::erf((std::log(grid[i + 1]) - p_mean) / denom);
    const double lo = std::erf((std::log(grid[i]) - p_mean) / denom);
    weights_[i] = hi - lo;
    total += weights_[i];
  }
  cdf_.resize(weights_.size());
  double running = 0.0;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    weights_[i] /= total;
    running += weights_[i];
    cdf_[i] = running;
  }
  cdf_.back() = 1.0;
}

std::size_t NoiseIndexDistribution::sample(Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  const auto idx = static_cast<std::size_t>(std::distance(cdf_.begin(), it));
  return std::min(idx, cdf_.size() - 1) + 1;
}

double loss_weight(const NoiseSchedule& schedule, std::size_t n) {
  if (n < 1 || n >= static_cast<std::size_t>(schedule.steps())) {
    throw std::out_of_range("loss_weight: index " + std::to_string(n) + " outside [1, N-1]");
  }
  return 1.0 / (schedule.t(n + 1) - schedule.t(n));
}

}  // namespace ctphys
