#include "ctphys/pipeline.hpp"

#include <chrono>
#include <ostream>

namespace ctphys {

namespace {

void log_line(const RunOptions& opts, const std::string& line) {
  if (opts.log) *opts.log << line << std::endl;
}

std::string brief(const MetricsReport& m) {
  return "mean|R|=" + io::format_double(m.mean_abs_residual) +
         " p95|R|=" + io::format_double(m.p95_abs_residual) +
         " dist=" + io::format_double(m.mean_distance_to_curve) +
         " coverage=" + io::format_double(m.bin_coverage);
}

StageSummary finish_stage(const TrainConfig& config, const Dataset& data, StageResult result,
                          const std::string& stage, const fs::path& out_dir,
                          const std::string& suffix, const RunOptions& opts) {
  StageSummary s{.checkpoint = make_checkpoint(config, result, stage), .one_step = {},
                 .record = std::move(result.record)};
  io::save_checkpoint(out_dir / (stage + ".ckpt"), s.checkpoint);
  io::write_record(out_dir / ("record_" + stage + ".csv"), s.record);
  SampleSet samples = sample_checkpoint(s.checkpoint, opts.n_samples, 1, opts.sample_seed);
  samples.checkpoint_id = (out_dir / (stage + ".ckpt")).string();
  io::write_samples_csv(out_dir / ("samples_" + stage + ".csv"), samples);
  s.one_step = evaluate(samples.points, config.manifold, data.points);
  io::write_metrics(out_dir / ("metrics" + suffix + ".csv"), s.one_step);
  io::render_figure(out_dir / ("figure" + suffix + ".svg"), samples.points, config.manifold,
                    config.name + " " + stage);
  log_line(opts, "[" + config.name + "] " + stage + " done in " +
                     io::format_double(s.record.wall_seconds) + "s: " + brief(s.one_step));
  return s;
}

}  // namespace

io::Checkpoint make_checkpoint(const TrainConfig& config, const StageResult& result,
                               const std::string& stage) {
  return io::Checkpoint{.params = result.params,
                        .schedule = config.schedule,
                        .manifold = config.manifold,
                        .stage = stage,
                        .iterations = result.iterations,
                        .seed = config.seed,
                        .two_step_tau = config.two_step_tau};
}

SampleSet sample_checkpoint(const io::Checkpoint& ckpt, std::size_t n, int steps,
                            std::uint64_t seed) {
  if (steps != 1 && steps != 2) throw std::invalid_argument("steps must be 1 or 2");
  Rng rng(seed);
  std::vector<double> times;
  if (steps == 2) times.push_back(ckpt.two_step_tau);
  SampleSet s = multistep_sample(ckpt.params, times, n, rng);
  s.seed = seed;
  return s;
}

TrainOutputs run_train(const TrainConfig& config, const fs::path& out_dir, const RunOptions& opts) {
  validate(config);
  io::write_text(out_dir / "config.json", io::config_to_json(config));
  const Dataset data = make_dataset(config);

  log_line(opts, "[" + config.name + "] stage1: " + std::to_string(config.stage1.epochs) +
                     " epochs x " +
                     std::to_string(iterations_per_epoch(config.dataset_size, config.stage1.batch_size)) +
                     " iterations");
  TrainOutputs out;
  StageResult s1 = train_stage1(config, data);
  const ModelParameters warm = s1.params;
  out.stage1 = finish_stage(config, data, std::move(s1), "stage1", out_dir, "_stage1", opts);

  log_line(opts, "[" + config.name + "] stage2: " + std::to_string(config.stage2.epochs) +
                     " epochs x " +
                     std::to_string(iterations_per_epoch(config.dataset_size, config.stage2.batch_size)) +
                     " iterations");
  out.stage2 = finish_stage(config, data, train_stage2(config, data, warm), "stage2", out_dir, "",
                            opts);
  return out;
}

StageSummary run_ablation(const TrainConfig& config, const fs::path& out_dir,
                          const RunOptions& opts) {
  validate(config);
  const Dataset data = make_dataset(config);
  log_line(opts, "[" + config.name + "] stage-2-only ablation");
  return finish_stage(config, data, train_ablation_stage2_only(config, data), "ablation", out_dir,
                      "_ablation", opts);
}

std::string summary_csv(const std::vector<ReproRow>& rows) {
  std::string text =
      "name,stage,mean_abs_residual,p95_abs_residual,mean_distance_to_curve,bin_coverage,"
      "min_component_coverage,chamfer,n_samples,seconds\n";
  for (const auto& row : rows) {
    for (const auto* stage : {&row.stage1, &row.stage2}) {
      double min_cov = 1.0;
      for (double c : stage->component_coverage) min_cov = std::min(min_cov, c);
      text += row.name + ',' + (stage == &row.stage1 ? "stage1" : "stage2") + ',' +
              io::format_double(stage->mean_abs_residual) + ',' +
              io::format_double(stage->p95_abs_residual) + ',' +
              io::format_double(stage->mean_distance_to_curve) + ',' +
              io::format_double(stage->bin_coverage) + ',' + io::format_double(min_cov) + ',' +
              io::format_double(stage->chamfer) + ',' + std::to_string(stage->n_samples) + ',' +
              io::format_double(row.seconds) + '\n';
    }
  }
  return text;
}

std::vector<ReproRow> run_repro(const std::vector<TrainConfig>& configs, const fs::path& out_dir,
                                const RunOptions& opts) {
  std::vector<ReproRow> rows;
  for (const auto& config : configs) {
    const auto start = std::chrono::steady_clock::now();
    const TrainOutputs out = run_train(config, out_dir / config.name, opts);
    rows.push_back({config.name, out.stage1.one_step, out.stage2.one_step,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()});
    io::write_text(out_dir / "summary.csv", summary_csv(rows));
  }
  return rows;
}

}  // namespace ctphys
