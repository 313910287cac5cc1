#pragma once

#include "ctphys/io.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ctphys {

namespace fs = std::filesystem;

struct RunOptions {
  std::size_t n_samples = 4096;
  std::uint64_t sample_seed = 7;
  /// Log sink for progress lines; null silences them.
  std::ostream* log = nullptr;
};

struct StageSummary {
  io::Checkpoint checkpoint;
  MetricsReport one_step;
  TrainRecord record;
};

struct TrainOutputs {
  StageSummary stage1;
  StageSummary stage2;
};

io::Checkpoint make_checkpoint(const TrainConfig& config, const StageResult& result,
                               const std::string& stage);

/// Samples with 1 or 2 model evaluations; two steps use the checkpoint's tau.
SampleSet sample_checkpoint(const io::Checkpoint& ckpt, std::size_t n, int steps,
                            std::uint64_t seed);

/// Stage 1 then stage 2. Writes stage{1,2}.ckpt, record_stage{1,2}.csv,
/// samples_stage{1,2}.csv, metrics_stage1.csv, metrics.csv, figure_stage1.svg,
/// figure.svg and the resolved config.json under `out_dir`.
TrainOutputs run_train(const TrainConfig& config, const fs::path& out_dir, const RunOptions& opts);

/// Stage 2 from scratch. Writes ablation.ckpt, record_ablation.csv,
/// samples_ablation.csv, metrics_ablation.csv and figure_ablation.svg.
StageSummary run_ablation(const TrainConfig& config, const fs::path& out_dir,
                          const RunOptions& opts);

struct ReproRow {
  std::string name;
  MetricsReport stage1;
  MetricsReport stage2;
  double seconds = 0.0;
};

/// Trains every config into out_dir/<name>/ and writes out_dir/summary.csv.
std::vector<ReproRow> run_repro(const std::vector<TrainConfig>& configs, const fs::path& out_dir,
                                const RunOptions& opts);

std::string summary_csv(const std::vector<ReproRow>& rows);

}  // namespace ctphys
