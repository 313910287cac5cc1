#pragma once

#include "ctphys/autodiff.hpp"
#include "ctphys/constraints.hpp"
#include "ctphys/model.hpp"
#include "ctphys/rng.hpp"
#include "ctphys/schedule.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctphys {

// ---------------------------------------------------------------------------
// Losses

/// iCT pseudo-Huber constant, 0.00054 sqrt(dim).
double pseudo_huber_constant(int data_dim);

/// Per-row sqrt(||a - b||^2 + c^2) - c, as a B x 1 node.
ad::NodeId pseudo_huber(ad::Tape& tape, ad::NodeId a, ad::NodeId b, double c);

/// Noise shared by both CT branches for one iteration: one Gaussian 2-vector
/// and one interval index per sample.
struct NoiseDraw {
  Matrix z;                       // B x 2
  std::vector<std::size_t> n;     // 1-based interval index per sample
};

NoiseDraw draw_ct_noise(std::size_t batch, const NoiseIndexDistribution& distribution, Rng& rng);

/// Batch mean of lambda(t_n) d(f_theta(x0 + t_{n+1} z, t_{n+1}), sg f_theta(x0 + t_n z, t_n)).
ad::NodeId ct_loss(ad::Tape& tape, const ModelParameters& params, const BoundParameters& bound,
                   const Matrix& x0, const NoiseDraw& noise, const NoiseSchedule& schedule);

/// Batch mean of R(f_theta(x0 + T z, T))^2.
ad::NodeId residual_loss(ad::Tape& tape, const ModelParameters& params,
                         const BoundParameters& bound, const Matrix& x0, const Matrix& z,
                         double sigma_max, ManifoldKind manifold);

struct Stage2Loss {
  ad::NodeId ct;
  ad::NodeId residual;
  ad::NodeId total;
};

/// ct + w_R * residual. With w_R = 0 the residual term is not recorded and
/// total is the ct node itself.
Stage2Loss total_loss_stage2(ad::Tape& tape, const ModelParameters& params,
                             const BoundParameters& bound, const Matrix& x0,
                             const NoiseDraw& noise, const Matrix& residual_z,
                             const NoiseSchedule& schedule, ManifoldKind manifold,
                             double residual_weight);

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { adam, radam };
enum class DecayRule { none, halve_every_1000, times_0_9_every_1000 };

std::string to_string(OptimizerKind k);
std::string to_string(DecayRule r);
OptimizerKind parse_optimizer(const std::string& name);
DecayRule parse_decay(const std::string& name);

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double floor = 1e-8;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step = 0;
};

OptimizerState make_optimizer(OptimizerKind kind, std::span<const Matrix> params);

/// Bias-corrected Adam: p -= lr m_hat / (sqrt(v_hat) + floor).
void adam_step(OptimizerState& state, std::span<Matrix> params, const ad::GradientSet& grads,
               double lr);

/// Rectified Adam. Momentum-only update while rho_t <= 4.
void radam_step(OptimizerState& state, std::span<Matrix> params, const ad::GradientSet& grads,
                double lr);

/// Dispatches on state.kind.
void optimizer_step(OptimizerState& state, std::span<Matrix> params,
                    const ad::GradientSet& grads, double lr);

/// RAdam's rho_t for beta2 at step t (1-based).
double radam_rho(double beta2, std::int64_t t);

double lr_at(DecayRule rule, double base, std::int64_t iteration);

// ---------------------------------------------------------------------------
// Configuration and driver

enum class CurriculumMode { restart, freeze };
enum class ResidualNoise { shared, independent };

struct StageConfig {
  std::int64_t epochs = 1000;
  std::int64_t batch_size = 128;
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr = 5e-5;
  DecayRule decay = DecayRule::none;
  double residual_weight = 0.0;
};

struct TrainConfig {
  std::string name = "circle";
  ManifoldKind manifold = ManifoldKind::circle;
  ArchitectureSpec arch;
  ScheduleConstants schedule;
  StageConfig stage1;
  StageConfig stage2{.residual_weight = 1.0};
  std::int64_t dataset_size = 10000;
  std::uint64_t seed = 0;
  CurveSampling curve_sampling = CurveSampling::parameter;
  CurriculumMode stage2_curriculum = CurriculumMode::restart;
  ResidualNoise residual_noise = ResidualNoise::shared;
  /// 0 disables weight averaging.
  double ema_decay = 0.0;
  /// Intermediate time for the two-step sampler.
  double two_step_tau = 0.8;
};

/// Throws std::invalid_argument naming the first offending field.
void validate(const TrainConfig& config);

NoiseRange noise_range(const ScheduleConstants& constants);

/// Scales both stages' epochs by `fraction` (rounded up, at least 1 if nonzero).
TrainConfig scaled_budget(const TrainConfig& config, double fraction);

std::int64_t iterations_per_epoch(std::int64_t dataset_size, std::int64_t batch_size);

struct RecordRow {
  std::int64_t iteration;
  int steps;
  double ct_loss;
  double residual_loss;
  double lr;
};

struct TrainRecord {
  std::vector<RecordRow> rows;
  double wall_seconds = 0.0;
};

/// Raised when a loss or gradient turns non-finite; training stops at once.
class NumericAbort : public std::runtime_error {
 public:
  NumericAbort(std::int64_t iteration, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

/// Per-iteration probe: draw counts on the noise stream since the previous
/// iteration, for auditing the one-z-one-n discipline.
struct IterationProbe {
  std::int64_t iteration;
  std::size_t batch_size;
  std::uint64_t normal_draws;
  std::uint64_t uniform_draws;
};

struct TrainHooks {
  std::function<void(const IterationProbe&)> on_iteration;
};

struct StageResult {
  ModelParameters params;
  TrainRecord record;
  std::int64_t iterations = 0;
};

Dataset make_dataset(const TrainConfig& config);

ModelParameters initial_parameters(const TrainConfig& config);

/// Consistency training only.
StageResult train_stage1(const TrainConfig& config, const Dataset& data,
                         const TrainHooks& hooks = {});

/// Physics-informed fine-tuning from `warm` with fresh optimizer moments.
StageResult train_stage2(const TrainConfig& config, const Dataset& data,
                         const ModelParameters& warm, const TrainHooks& hooks = {});

/// Stage 2 from a fresh initialization, skipping the warm-up.
StageResult train_ablation_stage2_only(const TrainConfig& config, const Dataset& data,
                                       const TrainHooks& hooks = {});

}  // namespace ctphys
