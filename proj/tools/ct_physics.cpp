// Command-line driver: train, sample, eval, figure, ablate, repro.

#include "ctphys/pipeline.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>

namespace {

using namespace ctphys;

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitIo = 4;

struct Common {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double epoch_fraction = 1.0;
  std::size_t n = 4096;
};

TrainConfig resolve_config(const Common& c) {
  const io::LoadedConfig loaded = io::load_config(c.config);
  for (const auto& line : loaded.defaults_filled) std::cerr << "default: " << line << "\n";
  TrainConfig config = loaded.config;
  if (c.seed_set) config.seed = c.seed;
  if (c.epoch_fraction != 1.0) config = scaled_budget(config, c.epoch_fraction);
  return config;
}

std::vector<TrainConfig> load_presets(const std::string& dir, const Common& c) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw io::ConfigError("", "no *.json configs in " + dir);
  std::vector<TrainConfig> configs;
  for (const auto& f : files) {
    Common one = c;
    one.config = f.string();
    configs.push_back(resolve_config(one));
  }
  return configs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage physics-constrained consistency training on 2-D curves"};
  app.require_subcommand(1);

  Common common;
  const auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { common.seed = s; common.seed_set = true; },
        "override the seed");
  };

  auto* train = app.add_subcommand("train", "stage 1 + stage 2, then sample, evaluate and plot");
  train->add_option("--config", common.config, "run config (JSON)")->required()->check(CLI::ExistingFile);
  train->add_option("--out", common.out, "output directory")->required();
  train->add_option("--epoch-fraction", common.epoch_fraction, "scale both stages' epochs")
      ->check(CLI::PositiveNumber);
  train->add_option("--n", common.n, "samples drawn for evaluation");
  add_seed(train);

  auto* ablate = app.add_subcommand("ablate", "stage 2 from scratch, without the warm-up");
  ablate->add_option("--config", common.config, "run config (JSON)")->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", common.out, "output directory")->required();
  ablate->add_option("--epoch-fraction", common.epoch_fraction, "scale epochs")->check(CLI::PositiveNumber);
  ablate->add_option("--n", common.n, "samples drawn for evaluation");
  add_seed(ablate);

  std::string presets_dir = "configs";
  auto* repro = app.add_subcommand("repro", "train every preset and write summary.csv");
  repro->add_option("--configs", presets_dir, "directory of preset configs")->check(CLI::ExistingDirectory);
  repro->add_option("--out", common.out, "output directory")->required();
  repro->add_option("--epoch-fraction", common.epoch_fraction, "scale epochs")->check(CLI::PositiveNumber);
  repro->add_option("--n", common.n, "samples drawn for evaluation");
  add_seed(repro);

  std::string checkpoint_path, samples_path, reference_path, manifold_name;
  int steps = 1;
  double tau = 0.0;
  auto* sample = app.add_subcommand("sample", "draw samples from a checkpoint");
  sample->add_option("--checkpoint", checkpoint_path)->required();
  sample->add_option("--n", common.n, "number of samples");
  sample->add_option("--steps", steps, "model evaluations per sample")->check(CLI::IsMember({1, 2}));
  sample->add_option("--tau", tau, "intermediate time for --steps 2 (default: from checkpoint)");
  sample->add_option("--out", common.out, "samples CSV")->required();
  add_seed(sample);

  auto* eval = app.add_subcommand("eval", "metrics for a sample CSV");
  eval->add_option("--samples", samples_path)->required();
  eval->add_option("--checkpoint", checkpoint_path, "take the manifold from this checkpoint");
  eval->add_option("--manifold", manifold_name, "circle | ellipse | double_ellipse | saddle");
  eval->add_option("--reference", reference_path, "reference CSV (default: 10^4 fresh curve samples)");
  eval->add_option("--out", common.out, "metrics CSV");
  add_seed(eval);

  auto* figure = app.add_subcommand("figure", "SVG scatter of samples over the reference curve");
  figure->add_option("--samples", samples_path)->required();
  figure->add_option("--manifold", manifold_name)->required();
  figure->add_option("--out", common.out, "SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kExitConfig;
  }

  RunOptions opts{.n_samples = common.n, .log = &std::cerr};
  try {
    if (*train) {
      run_train(resolve_config(common), common.out, opts);
    } else if (*ablate) {
      run_ablation(resolve_config(common), common.out, opts);
    } else if (*repro) {
      const auto rows = run_repro(load_presets(presets_dir, common), common.out, opts);
      std::cout << summary_csv(rows);
    } else if (*sample) {
      io::Checkpoint ckpt = io::load_checkpoint(checkpoint_path);
      if (tau > 0.0) ckpt.two_step_tau = tau;
      SampleSet s = sample_checkpoint(ckpt, common.n, steps, common.seed_set ? common.seed : 7);
      s.checkpoint_id = checkpoint_path;
      io::write_samples_csv(common.out, s);
    } else if (*eval) {
      ManifoldKind kind;
      if (!checkpoint_path.empty()) {
        kind = io::load_checkpoint(checkpoint_path).manifold;
      } else if (!manifold_name.empty()) {
        kind = parse_manifold(manifold_name);
      } else {
        throw io::ConfigError("--manifold", "eval needs --manifold or --checkpoint");
      }
      const Matrix samples = io::read_samples_csv(samples_path);
      Matrix reference;
      if (!reference_path.empty()) {
        reference = io::read_samples_csv(reference_path);
      } else {
        Rng rng(common.seed_set ? common.seed : 0);
        reference = sample_manifold(kind, 10000, rng).points;
      }
      const MetricsReport report = evaluate(samples, kind, reference);
      std::cout << io::format_metrics(report);
      if (!common.out.empty()) io::write_metrics(common.out, report);
    } else if (*figure) {
      io::render_figure(common.out, io::read_samples_csv(samples_path), parse_manifold(manifold_name));
    }
  } catch (const io::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericAbort& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const io::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const io::CheckpointError& e) {
    std::cerr << "checkpoint error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return 0;
}
