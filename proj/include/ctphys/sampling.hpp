#pragma once

#include "ctphys/constraints.hpp"
#include "ctphys/model.hpp"
#include "ctphys/rng.hpp"

#include <cstdint>
#include <span>
#include <string>

namespace ctphys {

struct SampleSet {
  Matrix points;  // n x 2
  std::string checkpoint_id;
  int steps = 1;
  std::uint64_t seed = 0;
};

/// x = f_theta(T z, T), z ~ N(0, I).
SampleSet one_step_sample(const ModelParameters& params, std::size_t n, Rng& rng);

/// One-step sample, then for each tau (strictly decreasing, T > tau >= eps):
/// x <- f_theta(x + sqrt(tau^2 - eps^2) z', tau). An empty list reduces to
/// one_step_sample on the same stream.
SampleSet multistep_sample(const ModelParameters& params, std::span<const double> times,
                           std::size_t n, Rng& rng);

struct MetricsReport {
  double mean_abs_residual = 0.0;
  double p95_abs_residual = 0.0;
  double mean_distance_to_curve = 0.0;
  /// Mean over components of the occupied fraction of 36 arc-parameter bins.
  double bin_coverage = 0.0;
  /// Occupied fraction per component.
  std::vector<double> component_coverage;
  double chamfer = 0.0;
  std::size_t n_samples = 0;
};

constexpr int kCoverageBins = 36;

/// Symmetric mean nearest-neighbour distance: (mean_a min_b + mean_b min_a) / 2.
double chamfer_distance(const Matrix& a, const Matrix& b);

/// Fraction of occupied curve-parameter bins per component.
std::vector<double> bin_coverage(const Matrix& samples, const CurveIndex& index,
                                 int bins = kCoverageBins);

/// Throws std::invalid_argument on an empty sample set. `reference` may be
/// empty, in which case chamfer is reported as 0.
MetricsReport evaluate(const Matrix& samples, ManifoldKind manifold, const Matrix& reference);

/// Picks the intermediate time minimizing mean |R| of two-step samples.
double search_two_step_time(const ModelParameters& params, ManifoldKind manifold,
                            std::span<const double> candidates, std::size_t n,
                            std::uint64_t seed);

/// Worker count for evaluation: hardware concurrency capped by CT_PHYSICS_THREADS.
unsigned evaluation_threads();

}  // namespace ctphys
