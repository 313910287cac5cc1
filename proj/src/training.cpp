#include "ctphys/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>

namespace ctphys {

namespace {

// splitmix64 finalizer; keeps the per-purpose streams of one seed independent.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

enum Salt : std::uint64_t { kData = 1, kInit = 2, kStage1 = 3, kStage2 = 5, kAblation = 7 };

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw std::invalid_argument(field + ": " + why);
}

void validate_stage(const StageConfig& s, const std::string& prefix) {
  require(s.epochs >= 0, prefix + ".epochs", "must be >= 0");
  require(s.batch_size > 0, prefix + ".batch_size", "must be > 0");
  require(s.lr > 0.0 && std::isfinite(s.lr), prefix + ".lr", "must be > 0");
  require(s.residual_weight >= 0.0 && std::isfinite(s.residual_weight),
          prefix + ".residual_weight", "must be >= 0");
}

struct StageSetup {
  const StageConfig& stage;
  std::uint64_t salt;
  bool freeze_curriculum;
};

StageResult run_stage(const TrainConfig& config, const StageSetup& setup, const Dataset& data,
                      ModelParameters params, const TrainHooks& hooks) {
  const auto start = std::chrono::steady_clock::now();
  const StageConfig& stage = setup.stage;
  const std::int64_t n_data = data.points.rows();
  const std::int64_t per_epoch = iterations_per_epoch(n_data, stage.batch_size);
  const std::int64_t total = stage.epochs * per_epoch;

  StageResult result;
  result.record.rows.reserve(static_cast<std::size_t>(total));

  Rng shuffle_rng(derive_seed(config.seed, setup.salt));
  Rng noise_rng(derive_seed(config.seed, setup.salt + 100));

  const auto& sc = config.schedule;
  OptimizerState opt = make_optimizer(stage.optimizer, params.leaves);
  std::optional<Curriculum> curriculum;
  if (total > 0) curriculum.emplace(sc.s0, sc.s1, total);

  std::vector<Matrix> ema;
  if (config.ema_decay > 0.0) ema = params.leaves;

  std::vector<std::int64_t> order(static_cast<std::size_t>(n_data));
  std::iota(order.begin(), order.end(), 0);

  std::optional<NoiseSchedule> schedule;
  std::optional<NoiseIndexDistribution> distribution;

  std::int64_t k = 0;
  for (std::int64_t epoch = 0; epoch < stage.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }
    for (std::int64_t offset = 0; offset < n_data; offset += stage.batch_size, ++k) {
      const int steps = setup.freeze_curriculum ? sc.s1 + 1 : curriculum->steps_at(k);
      if (!schedule || schedule->steps() != steps) {
        schedule.emplace(sc.sigma_min, sc.sigma_max, sc.rho, steps);
        distribution.emplace(*schedule, sc.p_mean, sc.p_std);
      }

      const std::int64_t batch = std::min(stage.batch_size, n_data - offset);
      Matrix x0(batch, 2);
      for (std::int64_t r = 0; r < batch; ++r) {
        x0.row(r) = data.points.row(order[static_cast<std::size_t>(offset + r)]);
      }

      const auto normals_before = noise_rng.normal_draws();
      const auto uniforms_before = noise_rng.uniform_draws();
      const NoiseDraw noise = draw_ct_noise(static_cast<std::size_t>(batch), *distribution, noise_rng);
      Matrix residual_z;
      if (stage.residual_weight > 0.0 && config.residual_noise == ResidualNoise::independent) {
        residual_z.resize(batch, 2);
        for (Eigen::Index j = 0; j < residual_z.size(); ++j) residual_z.data()[j] = noise_rng.normal();
      } else {
        residual_z = noise.z;
      }

      ad::Tape tape;
      const auto bound = bind_parameters(tape, params);
      const Stage2Loss loss = total_loss_stage2(tape, params, bound, x0, noise, residual_z,
                                                *schedule, config.manifold, stage.residual_weight);
      try {
        tape.forward(params.leaves);
      } catch (const ad::NonFiniteError& e) {
        throw NumericAbort(k, e.what());
      }
      const double ct_value = tape.scalar(loss.ct);
      const double res_value = stage.residual_weight > 0.0 ? tape.scalar(loss.residual) : 0.0;
      const ad::GradientSet grads = tape.backward(loss.total);
      if (!grads.all_finite()) throw NumericAbort(k, "non-finite gradient");

      const double lr = lr_at(stage.decay, stage.lr, k);
      optimizer_step(opt, params.leaves, grads, lr);
      if (!ema.empty()) {
        for (std::size_t s = 0; s < ema.size(); ++s) {
          ema[s] = config.ema_decay * ema[s] + (1.0 - config.ema_decay) * params.leaves[s];
        }
      }

      result.record.rows.push_back({k, steps, ct_value, res_value, lr});
      if (hooks.on_iteration) {
        hooks.on_iteration({k, static_cast<std::size_t>(batch),
                            noise_rng.normal_draws() - normals_before,
                            noise_rng.uniform_draws() - uniforms_before});
      }
    }
  }

  if (!ema.empty()) params.leaves = std::move(ema);
  result.params = std::move(params);
  result.iterations = k;
  result.record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace

void validate(const TrainConfig& config) {
  const auto& sc = config.schedule;
  require(sc.sigma_min > 0.0 && sc.sigma_min < sc.sigma_max, "schedule.sigma_min",
          "need 0 < sigma_min < sigma_max");
  require(sc.rho >= 1.0, "schedule.rho", "must be >= 1");
  require(sc.sigma_data > 0.0, "schedule.sigma_data", "must be > 0");
  require(sc.p_std > 0.0, "schedule.p_std", "must be > 0");
  require(sc.s0 >= 1, "schedule.s0", "must be >= 1");
  require(sc.s1 >= sc.s0, "schedule.s1", "must be >= s0");
  require(config.arch.hidden_layers >= 1, "model.hidden_layers", "must be >= 1");
  require(config.arch.width >= 1, "model.width", "must be >= 1");
  require(config.arch.embedding.dim >= 2 && config.arch.embedding.dim % 2 == 0,
          "model.embedding.dim", "must be even and >= 2");
  require(config.arch.embedding.scale > 0.0, "model.embedding.scale", "must be > 0");
  require(config.arch.embedding.max_period > 1.0, "model.embedding.max_period", "must be > 1");
  validate_stage(config.stage1, "stage1");
  validate_stage(config.stage2, "stage2");
  require(config.stage1.residual_weight == 0.0, "stage1.residual_weight",
          "stage 1 carries no residual term");
  require(config.dataset_size >= 1, "dataset_size", "must be >= 1");
  require(config.ema_decay >= 0.0 && config.ema_decay < 1.0, "ema_decay", "must be in [0, 1)");
  require(config.two_step_tau >= sc.sigma_min && config.two_step_tau < sc.sigma_max,
          "two_step_tau", "must lie in [sigma_min, sigma_max)");
}

NoiseRange noise_range(const ScheduleConstants& constants) {
  return {constants.sigma_min, constants.sigma_max, constants.sigma_data};
}

TrainConfig scaled_budget(const TrainConfig& config, double fraction) {
  if (!(fraction > 0.0)) throw std::invalid_argument("budget fraction must be > 0");
  TrainConfig scaled = config;
  for (StageConfig* s : {&scaled.stage1, &scaled.stage2}) {
    s->epochs = static_cast<std::int64_t>(std::ceil(static_cast<double>(s->epochs) * fraction));
  }
  return scaled;
}

std::int64_t iterations_per_epoch(std::int64_t dataset_size, std::int64_t batch_size) {
  return (dataset_size + batch_size - 1) / batch_size;
}

Dataset make_dataset(const TrainConfig& config) {
  Rng rng(derive_seed(config.seed, kData));
  Dataset data = sample_manifold(config.manifold, static_cast<std::size_t>(config.dataset_size),
                                 rng, config.curve_sampling);
  data.seed = config.seed;
  return data;
}

ModelParameters initial_parameters(const TrainConfig& config) {
  Rng rng(derive_seed(config.seed, kInit));
  return init_parameters(config.arch, noise_range(config.schedule), rng);
}

StageResult train_stage1(const TrainConfig& config, const Dataset& data, const TrainHooks& hooks) {
  validate(config);
  return run_stage(config, {config.stage1, kStage1, false}, data, initial_parameters(config), hooks);
}

StageResult train_stage2(const TrainConfig& config, const Dataset& data,
                         const ModelParameters& warm, const TrainHooks& hooks) {
  validate(config);
  ModelParameters start = warm;
  start.arch = config.arch;
  start.noise = noise_range(config.schedule);
  validate_shapes(start);
  if (warm.arch.embedding.kind != config.arch.embedding.kind ||
      warm.arch.activation != config.arch.activation ||
      warm.arch.skip_connections != config.arch.skip_connections ||
      warm.arch.input_scaling != config.arch.input_scaling) {
    throw std::invalid_argument("warm checkpoint architecture does not match the config");
  }
  return run_stage(config,
                   {config.stage2, kStage2, config.stage2_curriculum == CurriculumMode::freeze},
                   data, std::move(start), hooks);
}

StageResult train_ablation_stage2_only(const TrainConfig& config, const Dataset& data,
                                       const TrainHooks& hooks) {
  validate(config);
  return run_stage(config,
                   {config.stage2, kAblation, config.stage2_curriculum == CurriculumMode::freeze},
                   data, initial_parameters(config), hooks);
}

}  // namespace ctphys
