#include "ctphys/sampling.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>

using namespace ctphys;

namespace {

ModelParameters small_model(std::uint64_t seed) {
  ArchitectureSpec arch;
  arch.hidden_layers = 2;
  arch.width = 16;
  arch.embedding.dim = 8;
  Rng rng(seed);
  return init_parameters(arch, NoiseRange{}, rng);
}

Matrix exact_samples(ManifoldKind kind, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_manifold(kind, n, rng).points;
}

}  // namespace

TEST(OneStep, ZeroNoiseMapsToASingleFixedPoint) {
  const ModelParameters p = small_model(1);
  const Matrix out = consistency_eval(p, Matrix::Zero(6, 2), 80.0);
  for (Eigen::Index r = 1; r < 6; ++r) EXPECT_EQ(out.row(r), out.row(0));

  ad::Tape tape;
  const auto bound = bind_parameters(tape, p);
  const std::vector<double> t = {80.0};
  const auto F = mlp_forward(tape, p, bound, tape.constant(Matrix::Zero(1, 2)),
                             tape.constant(embed_time(p.arch.embedding, p.frequencies, p.noise, t)));
  tape.forward(p.leaves);
  const double c_out = boundary_coefficients(80.0, 0.002, 0.5).out;
  EXPECT_TRUE(out.row(0).isApprox(c_out * tape.value(F).row(0), 1e-14));
}

TEST(OneStep, FixedSeedIsIdentical) {
  const ModelParameters p = small_model(2);
  Rng a(7), b(7);
  const SampleSet sa = one_step_sample(p, 500, a);
  const SampleSet sb = one_step_sample(p, 500, b);
  EXPECT_EQ(sa.points, sb.points);
  EXPECT_EQ(sa.points.rows(), 500);
  EXPECT_EQ(sa.steps, 1);
  EXPECT_TRUE(sa.points.allFinite());
}

TEST(OneStep, UsesNoiseScaledBySigmaMax) {
  const ModelParameters p = small_model(3);
  Rng a(8), b(8);
  const SampleSet s = one_step_sample(p, 10, a);
  Matrix z(10, 2);
  for (Eigen::Index r = 0; r < 10; ++r) {
    z(r, 0) = b.normal();
    z(r, 1) = b.normal();
  }
  EXPECT_EQ(s.points, consistency_eval(p, 80.0 * z, 80.0));
}

TEST(Multistep, EmptyTimeListEqualsOneStep) {
  const ModelParameters p = small_model(4);
  Rng a(9), b(9);
  EXPECT_EQ(multistep_sample(p, {}, 300, a).points, one_step_sample(p, 300, b).points);
}

TEST(Multistep, FinalStepAtSigmaMinIsTheIdentity) {
  const ModelParameters p = small_model(5);
  Rng a(10), b(10);
  const double times[] = {0.002};
  const SampleSet two = multistep_sample(p, times, 300, a);
  EXPECT_EQ(two.steps, 2);
  EXPECT_EQ(two.points, one_step_sample(p, 300, b).points);
}

TEST(Multistep, SecondStepMatchesHandComposition) {
  const ModelParameters p = small_model(6);
  Rng a(11), b(11);
  const double times[] = {0.8};
  const SampleSet two = multistep_sample(p, times, 50, a);
  const Matrix first = one_step_sample(p, 50, b).points;
  Matrix z(50, 2);
  for (Eigen::Index r = 0; r < 50; ++r) {
    z(r, 0) = b.normal();
    z(r, 1) = b.normal();
  }
  const Matrix want = consistency_eval(p, first + std::sqrt((0.8 - 0.002) * (0.8 + 0.002)) * z, 0.8);
  EXPECT_EQ(two.points, want);
}

TEST(Multistep, NonMonotoneTimesRejected) {
  const ModelParameters p = small_model(7);
  Rng rng(12);
  const double rising[] = {0.5, 0.8};
  const double at_max[] = {80.0};
  const double below_min[] = {0.001};
  EXPECT_THROW(multistep_sample(p, rising, 4, rng), std::invalid_argument);
  EXPECT_THROW(multistep_sample(p, at_max, 4, rng), std::invalid_argument);
  EXPECT_THROW(multistep_sample(p, below_min, 4, rng), std::invalid_argument);
  const double ok[] = {5.0, 0.8, 0.1};
  EXPECT_EQ(multistep_sample(p, ok, 4, rng).steps, 4);
}

TEST(Evaluate, ExactSamplesScorePerfectly) {
  for (auto kind : {ManifoldKind::circle, ManifoldKind::ellipse, ManifoldKind::double_ellipse,
                    ManifoldKind::saddle}) {
    const Matrix s = exact_samples(kind, 10000, 13);
    const MetricsReport m = evaluate(s, kind, exact_samples(kind, 2000, 14));
    EXPECT_LT(m.mean_abs_residual, 1e-12) << to_string(kind);
    EXPECT_LT(m.p95_abs_residual, 1e-12);
    EXPECT_GE(m.bin_coverage, 0.999) << to_string(kind);
    EXPECT_LT(m.mean_distance_to_curve, 0.01);
    EXPECT_EQ(m.n_samples, 10000u);
    EXPECT_EQ(m.component_coverage.size(), kind == ManifoldKind::double_ellipse ? 2u : 1u);
  }
}

TEST(Evaluate, SinglePointOccupiesOneBin) {
  const Matrix s = Matrix::Constant(100, 2, 0.0).rowwise() + (Matrix(1, 2) << 0.6, 0.8).finished().row(0);
  const MetricsReport m = evaluate(s, ManifoldKind::circle, Matrix());
  EXPECT_DOUBLE_EQ(m.bin_coverage, 1.0 / 36.0);
  EXPECT_EQ(m.chamfer, 0.0);
}

TEST(Evaluate, CoverageAveragesComponents) {
  // all samples on the first ellipse: that component full, the other empty
  Matrix s(3600, 2);
  for (int i = 0; i < 3600; ++i) {
    const double th = 2 * M_PI * (i + 0.5) / 3600;
    s(i, 0) = 2.0 * std::cos(th);
    s(i, 1) = 0.5 * std::sin(th);
  }
  const MetricsReport m = evaluate(s, ManifoldKind::double_ellipse, Matrix());
  EXPECT_DOUBLE_EQ(m.component_coverage[0], 1.0);
  EXPECT_DOUBLE_EQ(m.component_coverage[1], 0.0);
  EXPECT_DOUBLE_EQ(m.bin_coverage, 0.5);
}

TEST(Evaluate, PercentileIsNearestRank) {
  Matrix s(20, 2);
  std::vector<double> res;
  for (int i = 0; i < 20; ++i) {
    const double r = 1.0 + 0.01 * (i + 1);  // residual r^2 - 1
    s(i, 0) = r;
    s(i, 1) = 0.0;
    res.push_back(std::abs(r * r - 1.0));
  }
  const MetricsReport m = evaluate(s, ManifoldKind::circle, Matrix());
  std::sort(res.begin(), res.end());
  EXPECT_DOUBLE_EQ(m.p95_abs_residual, res[18]);  // ceil(0.95 * 20) = 19th smallest
  EXPECT_NEAR(m.mean_abs_residual, std::accumulate(res.begin(), res.end(), 0.0) / 20.0, 1e-15);
}

TEST(Evaluate, PermutationInvariant) {
  const ModelParameters p = small_model(15);
  Rng rng(16);
  const Matrix s = one_step_sample(p, 1000, rng).points;
  Matrix shuffled = s;
  for (Eigen::Index i = 999; i > 0; --i) shuffled.row(i).swap(shuffled.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(i) + 1))));
  const Matrix ref = exact_samples(ManifoldKind::circle, 500, 17);
  const MetricsReport a = evaluate(s, ManifoldKind::circle, ref);
  const MetricsReport b = evaluate(shuffled, ManifoldKind::circle, ref);
  EXPECT_NEAR(a.mean_abs_residual, b.mean_abs_residual, 1e-14);
  EXPECT_EQ(a.p95_abs_residual, b.p95_abs_residual);
  EXPECT_NEAR(a.mean_distance_to_curve, b.mean_distance_to_curve, 1e-14);
  EXPECT_EQ(a.bin_coverage, b.bin_coverage);
  EXPECT_NEAR(a.chamfer, b.chamfer, 1e-14);
}

TEST(Evaluate, EmptySampleSetRejected) {
  EXPECT_THROW(evaluate(Matrix(0, 2), ManifoldKind::circle, Matrix()), std::invalid_argument);
}

TEST(Chamfer, IdentityAndSymmetry) {
  const Matrix a = exact_samples(ManifoldKind::saddle, 400, 18);
  const Matrix b = exact_samples(ManifoldKind::ellipse, 300, 19);
  EXPECT_EQ(chamfer_distance(a, a), 0.0);
  EXPECT_EQ(chamfer_distance(a, b), chamfer_distance(b, a));
  EXPECT_GT(chamfer_distance(a, b), 0.0);
}

TEST(Chamfer, MatchesBruteForce) {
  const Matrix a = (Matrix(2, 2) << 0, 0, 1, 0).finished();
  const Matrix b = (Matrix(3, 2) << 0, 1, 1, 1, 3, 0).finished();
  // a->b: 1, 1; b->a: 1, 1, 2
  EXPECT_DOUBLE_EQ(chamfer_distance(a, b), 0.5 * (1.0 + 4.0 / 3.0));
}

TEST(TwoStepSearch, ReturnsTheBestCandidate) {
  const ModelParameters p = small_model(20);
  const std::vector<double> candidates = {0.2, 0.8, 2.0};
  const double best = search_two_step_time(p, ManifoldKind::circle, candidates, 256, 3);
  EXPECT_NE(std::find(candidates.begin(), candidates.end(), best), candidates.end());
  double best_mean = 1e300, chosen_mean = 0.0;
  for (double tau : candidates) {
    Rng rng(3);
    const double times[] = {tau};
    const double m = evaluate(multistep_sample(p, times, 256, rng).points, ManifoldKind::circle,
                              Matrix()).mean_abs_residual;
    best_mean = std::min(best_mean, m);
    if (tau == best) chosen_mean = m;
  }
  EXPECT_NEAR(chosen_mean, best_mean, 1e-12);
}

TEST(Threads, EnvironmentCapsWorkers) {
  ::setenv("CT_PHYSICS_THREADS", "1", 1);
  EXPECT_EQ(evaluation_threads(), 1u);
  const Matrix s = exact_samples(ManifoldKind::circle, 3000, 21);
  const MetricsReport single = evaluate(s, ManifoldKind::circle, s);
  ::unsetenv("CT_PHYSICS_THREADS");
  EXPECT_GE(evaluation_threads(), 1u);
  const MetricsReport many = evaluate(s, ManifoldKind::circle, s);
  EXPECT_EQ(single.mean_abs_residual, many.mean_abs_residual);
  EXPECT_EQ(single.mean_distance_to_curve, many.mean_distance_to_curve);
}
