#include "ctphys/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <thread>
#include <vector>

namespace ctphys {

namespace {

Matrix gaussian(std::size_t n, Rng& rng) {
  Matrix z(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    z(r, 0) = rng.normal();
    z(r, 1) = rng.normal();
  }
  return z;
}

// Runs body(begin, end) over [0, n) split across evaluation_threads().
template <typename Body>
void parallel_rows(std::size_t n, Body body) {
  const std::size_t workers = std::min<std::size_t>(evaluation_threads(), std::max<std::size_t>(n / 256, 1));
  if (workers <= 1) {
    body(std::size_t{0}, n);
    return;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin < end) pool.emplace_back([=] { body(begin, end); });
  }
}

double mean_nearest(const Matrix& from, const Matrix& to) {
  std::vector<double> nearest(static_cast<std::size_t>(from.rows()));
  parallel_rows(nearest.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < to.rows(); ++j) {
        const double dx = from(r, 0) - to(j, 0);
        const double dy = from(r, 1) - to(j, 1);
        best = std::min(best, dx * dx + dy * dy);
      }
      nearest[i] = std::sqrt(best);
    }
  });
  double sum = 0.0;
  for (double d : nearest) sum += d;
  return sum / static_cast<double>(nearest.size());
}

}  // namespace

unsigned evaluation_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("CT_PHYSICS_THREADS")) {
    const long v = std::strtol(cap, nullptr, 10);
    if (v >= 1) n = std::min(n, static_cast<unsigned>(v));
  }
  return n;
}

SampleSet one_step_sample(const ModelParameters& params, std::size_t n, Rng& rng) {
  return multistep_sample(params, {}, n, rng);
}

SampleSet multistep_sample(const ModelParameters& params, std::span<const double> times,
                           std::size_t n, Rng& rng) {
  const double eps = params.noise.sigma_min;
  const double T = params.noise.sigma_max;
  double prev = T;
  for (double tau : times) {
    if (!(tau < prev) || tau < eps) {
      throw std::invalid_argument("multistep_sample: times must decrease strictly within [eps, T)");
    }
    prev = tau;
  }

  SampleSet out{.steps = static_cast<int>(times.size()) + 1};
  out.points = consistency_eval(params, T * gaussian(n, rng), T);
  for (double tau : times) {
    const Matrix z = gaussian(n, rng);
    const Matrix noised = out.points + std::sqrt((tau - eps) * (tau + eps)) * z;
    out.points = consistency_eval(params, noised, tau);
  }
  return out;
}

double chamfer_distance(const Matrix& a, const Matrix& b) {
  if (a.rows() == 0 || b.rows() == 0) throw std::invalid_argument("chamfer: empty point set");
  return 0.5 * (mean_nearest(a, b) + mean_nearest(b, a));
}

std::vector<double> bin_coverage(const Matrix& samples, const CurveIndex& index, int bins) {
  const std::size_t components = index.polylines().size();
  std::vector<std::vector<char>> hit(components, std::vector<char>(static_cast<std::size_t>(bins), 0));
  const auto res = static_cast<std::size_t>(index.resolution());
  for (Eigen::Index r = 0; r < samples.rows(); ++r) {
    const NearestVertex v = index.nearest(samples(r, 0), samples(r, 1));
    hit[v.component][v.vertex * static_cast<std::size_t>(bins) / res] = 1;
  }
  std::vector<double> coverage;
  for (const auto& h : hit) {
    coverage.push_back(static_cast<double>(std::count(h.begin(), h.end(), 1)) / bins);
  }
  return coverage;
}

MetricsReport evaluate(const Matrix& samples, ManifoldKind manifold, const Matrix& reference) {
  if (samples.rows() == 0) throw std::invalid_argument("evaluate: empty sample set");
  const CurveIndex index(manifold, 2048);
  const auto n = static_cast<std::size_t>(samples.rows());

  std::vector<double> abs_res(n);
  std::vector<double> dist(n);
  parallel_rows(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      abs_res[i] = std::abs(residual(manifold, samples(r, 0), samples(r, 1)));
      dist[i] = index.distance(samples(r, 0), samples(r, 1));
    }
  });

  MetricsReport report;
  report.n_samples = n;
  for (std::size_t i = 0; i < n; ++i) {
    report.mean_abs_residual += abs_res[i];
    report.mean_distance_to_curve += dist[i];
  }
  report.mean_abs_residual /= static_cast<double>(n);
  report.mean_distance_to_curve /= static_cast<double>(n);

  // nearest-rank 95th percentile
  std::vector<double> sorted = abs_res;
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1), sorted.end());
  report.p95_abs_residual = sorted[rank - 1];

  report.component_coverage = bin_coverage(samples, index);
  double total = 0.0;
  for (double c : report.component_coverage) total += c;
  report.bin_coverage = total / static_cast<double>(report.component_coverage.size());

  report.chamfer = reference.rows() > 0 ? chamfer_distance(samples, reference) : 0.0;
  return report;
}

double search_two_step_time(const ModelParameters& params, ManifoldKind manifold,
                            std::span<const double> candidates, std::size_t n,
                            std::uint64_t seed) {
  if (candidates.empty()) throw std::invalid_argument("search_two_step_time: no candidates");
  double best_tau = candidates.front();
  double best = std::numeric_limits<double>::infinity();
  for (double tau : candidates) {
    Rng rng(seed);
    const double times[] = {tau};
    const SampleSet s = multistep_sample(params, times, n, rng);
    double total = 0.0;
    for (Eigen::Index r = 0; r < s.points.rows(); ++r) {
      total += std::abs(residual(manifold, s.points(r, 0), s.points(r, 1)));
    }
    const double mean = total / static_cast<double>(s.points.rows());
    if (mean < best) {
      best = mean;
      best_tau = tau;
    }
  }
  return best_tau;
}

}  // namespace ctphys
