// End-to-end acceptance run: one PASS/FAIL line per criterion.
//
// Trained checkpoints are cached under --cache (keyed on the resolved config),
// so only the first run pays for training. --fresh discards the cache.

#include "ctphys/pipeline.hpp"
#include "support/random_tape.hpp"

#include <CLI11.hpp>

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>

#ifndef CT_PHYSICS_BIN
#error "CT_PHYSICS_BIN must point at the ct_physics executable"
#endif

using namespace ctphys;
using ad::NodeId;
using ad::Tape;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [FAILED]");
    pass = pass && ok;
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.size() == 0 ||
          std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_command(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

ModelParameters width8_model(std::uint64_t seed) {
  ArchitectureSpec arch;
  arch.hidden_layers = 2;
  arch.width = 8;
  arch.embedding.dim = 8;
  Rng rng(seed);
  ModelParameters p = init_parameters(arch, NoiseRange{}, rng);
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    Matrix& b = p.leaves[2 * l + 1];
    for (Eigen::Index k = 0; k < b.size(); ++k) b.data()[k] = 0.1 * rng.normal();
  }
  return p;
}

// ---------------------------------------------------------------------------
// Cached training

struct Options {
  fs::path cache;
  fs::path configs;
  double circle_fraction = 1.0;
  double repro_fraction = 0.1;
  bool fresh = false;
};

struct TrainedRun {
  io::Checkpoint stage1;
  io::Checkpoint stage2;
  fs::path dir;
  double seconds = 0.0;
};

bool cache_valid(const fs::path& dir, const std::string& config_json, const std::vector<std::string>& files) {
  if (!fs::exists(dir / "seconds.txt") || !fs::exists(dir / "config.json")) return false;
  if (io::read_text(dir / "config.json") != config_json) return false;
  return std::all_of(files.begin(), files.end(), [&](const std::string& f) { return fs::exists(dir / f); });
}

double read_seconds(const fs::path& dir) { return std::stod(io::read_text(dir / "seconds.txt")); }

TrainedRun trained(const TrainConfig& config, const fs::path& dir, bool fresh) {
  const std::string key = io::config_to_json(config);
  TrainedRun run{.dir = dir};
  if (fresh || !cache_valid(dir, key, {"stage1.ckpt", "stage2.ckpt"})) {
    fs::remove(dir / "seconds.txt");
    const auto start = Clock::now();
    run_train(config, dir, RunOptions{.log = &std::cerr});
    io::write_text(dir / "seconds.txt", io::format_double(seconds_since(start)) + "\n");
  } else {
    std::cerr << "[" << config.name << "] cached in " << dir.string() << "\n";
  }
  run.stage1 = io::load_checkpoint(dir / "stage1.ckpt");
  run.stage2 = io::load_checkpoint(dir / "stage2.ckpt");
  run.seconds = read_seconds(dir);
  return run;
}

io::Checkpoint ablation(const TrainConfig& config, const fs::path& dir, bool fresh) {
  const std::string key = io::config_to_json(config);
  if (fresh || !cache_valid(dir, key, {"ablation.ckpt", "figure_ablation.svg"})) {
    fs::remove(dir / "seconds.txt");
    io::write_text(dir / "config.json", key);
    const auto start = Clock::now();
    run_ablation(config, dir, RunOptions{.log = &std::cerr});
    io::write_text(dir / "seconds.txt", io::format_double(seconds_since(start)) + "\n");
  } else {
    std::cerr << "[" << config.name << "] ablation cached in " << dir.string() << "\n";
  }
  return io::load_checkpoint(dir / "ablation.ckpt");
}

MetricsReport one_step_metrics(const io::Checkpoint& ckpt, int steps = 1) {
  const SampleSet s = sample_checkpoint(ckpt, 4096, steps, 7);
  Rng rng(0);
  return evaluate(s.points, ckpt.manifold, sample_manifold(ckpt.manifold, 10000, rng).points);
}

std::string brief(const MetricsReport& m) {
  double min_cov = 1.0;
  for (double c : m.component_coverage) min_cov = std::min(min_cov, c);
  return "mean|R| " + num(m.mean_abs_residual) + ", p95 " + num(m.p95_abs_residual) + ", dist " +
         num(m.mean_distance_to_curve) + ", coverage " + num(m.bin_coverage) + " (min component " +
         num(min_cov) + ")";
}

class Context {
 public:
  explicit Context(Options opts) : opts_(std::move(opts)) {}

  const Options& options() const { return opts_; }

  TrainConfig preset(const std::string& name, double fraction) const {
    TrainConfig c = io::load_config(opts_.configs / (name + ".json")).config;
    return fraction == 1.0 ? c : scaled_budget(c, fraction);
  }

  const TrainedRun& circle() {
    if (!circle_) {
      circle_ = trained(preset("circle", opts_.circle_fraction), opts_.cache / "circle", opts_.fresh);
    }
    return *circle_;
  }

  const MetricsReport& circle_stage1() {
    if (!circle1_) circle1_ = one_step_metrics(circle().stage1);
    return *circle1_;
  }

  const MetricsReport& circle_stage2() {
    if (!circle2_) circle2_ = one_step_metrics(circle().stage2);
    return *circle2_;
  }

 private:
  Options opts_;
  std::optional<TrainedRun> circle_;
  std::optional<MetricsReport> circle1_, circle2_;
};

// ---------------------------------------------------------------------------
// Criteria

Verdict gradient_suite(Context&) {
  Verdict v;
  const auto start = Clock::now();

  double worst_tape = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    worst_tape = std::max(worst_tape, ad::finite_diff_check(test_support::RandomGraph{seed},
                                                            test_support::random_graph_point(seed), 1e-5));
  }
  v.require(worst_tape < 1e-5, "100 random tapes max rel err " + num(worst_tape) + " < 1e-5");

  const ModelParameters p = width8_model(3);
  Rng rng(4);
  const Matrix x0 = sample_manifold(ManifoldKind::circle, 12, rng).points;
  Matrix z(12, 2);
  for (Eigen::Index k = 0; k < z.size(); ++k) z.data()[k] = rng.normal();
  std::vector<double> times;
  for (int i = 0; i < 12; ++i) times.push_back(0.002 * std::pow(40000.0, i / 11.0));

  const double forward_err = ad::finite_diff_check(
      [&](Tape& t) {
        const auto b = bind_parameters(t, p);
        return t.mean(t.sin(consistency_forward(t, p, b, t.constant(x0 + z), times)));
      },
      p.leaves, 1e-5);
  v.require(forward_err < 1e-4, "consistency_forward " + num(forward_err));

  // finite differences run with the teacher frozen at its base-point value
  const NoiseSchedule schedule(0.002, 80.0, 7.0, 16);
  const NoiseIndexDistribution dist(schedule, -1.1, 2.0);
  const NoiseDraw noise = draw_ct_noise(12, dist, rng);
  std::vector<double> t_cur, t_next;
  Matrix x_cur(12, 2), x_next(12, 2), weight(12, 1);
  for (Eigen::Index r = 0; r < 12; ++r) {
    const std::size_t n = noise.n[static_cast<std::size_t>(r)];
    t_cur.push_back(schedule.t(n));
    t_next.push_back(schedule.t(n + 1));
    x_cur.row(r) = x0.row(r) + schedule.t(n) * noise.z.row(r);
    x_next.row(r) = x0.row(r) + schedule.t(n + 1) * noise.z.row(r);
    weight(r, 0) = loss_weight(schedule, n);
  }
  const Matrix teacher = consistency_eval(p, x_cur, t_cur);
  const auto frozen = [&](Tape& t) {
    const auto b = bind_parameters(t, p);
    const NodeId student = consistency_forward(t, p, b, t.constant(x_next), t_next);
    return t.mean(t.scale_rows(pseudo_huber(t, student, t.constant(teacher), pseudo_huber_constant(2)),
                               t.constant(weight)));
  };
  Tape tape;
  const NodeId loss = ct_loss(tape, p, bind_parameters(tape, p), x0, noise, schedule);
  tape.forward(p.leaves);
  const ad::GradientSet analytic = tape.backward(loss);
  Tape check;
  const NodeId oracle_out = frozen(check);
  check.forward(p.leaves);
  const ad::GradientSet oracle = check.backward(oracle_out);
  double mismatch = 0.0;
  for (std::size_t s = 0; s < p.leaves.size(); ++s) {
    mismatch = std::max(mismatch, (analytic[s] - oracle[s]).cwiseAbs().maxCoeff() /
                                      (oracle[s].cwiseAbs().maxCoeff() + 1e-12));
  }
  const double ct_err = std::max(ad::finite_diff_check(frozen, p.leaves, 1e-5), mismatch);
  v.require(ct_err < 1e-4, "ct_loss " + num(ct_err));

  double res_err = 0.0;
  for (auto kind : {ManifoldKind::circle, ManifoldKind::ellipse, ManifoldKind::double_ellipse,
                    ManifoldKind::saddle}) {
    const Matrix xk = sample_manifold(kind, 12, rng).points;
    res_err = std::max(res_err, ad::finite_diff_check(
                                    [&](Tape& t) {
                                      return residual_loss(t, p, bind_parameters(t, p), xk, z, 80.0, kind);
                                    },
                                    p.leaves, 1e-5));
  }
  v.require(res_err < 1e-4, "residual_loss " + num(res_err));

  const double secs = seconds_since(start);
  v.require(secs < 60.0, "runtime " + num(secs) + " s < 60 s");
  return v;
}

Verdict structural_exactness(Context& ctx) {
  Verdict v;
  double boundary = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ArchitectureSpec arch;
    arch.hidden_layers = 1 + static_cast<int>(seed % 4);
    arch.width = 16;
    arch.activation = seed % 2 ? Activation::relu : Activation::sigmoid;
    arch.embedding.kind = seed % 3 ? EmbeddingKind::fourier : EmbeddingKind::sinusoidal;
    arch.embedding.dim = 8;
    Rng rng(1000 + seed);
    ModelParameters p = init_parameters(arch, NoiseRange{}, rng);
    for (auto& leaf : p.leaves) {
      for (Eigen::Index k = 0; k < leaf.size(); ++k) leaf.data()[k] += rng.normal();
    }
    Matrix x(64, 2);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = 10.0 * rng.normal();
    boundary = std::max(boundary, (consistency_eval(p, x, 0.002) - x).cwiseAbs().maxCoeff());
  }
  v.require(boundary == 0.0, "boundary identity max |f(x, eps) - x| = " + num(boundary));

  bool endpoints = true;
  for (int n : {2, 3, 11, 16, 257, 513}) {
    const auto g = karras_grid(0.002, 80.0, 7.0, n);
    endpoints = endpoints && g.front() == 0.002 && g.back() == 80.0;
  }
  v.require(endpoints, "Karras endpoints exact");

  bool cap = true;
  for (const char* name : {"circle", "ellipse", "double_ellipse", "saddle"}) {
    const TrainConfig c = ctx.preset(name, 1.0);
    for (const StageConfig* s : {&c.stage1, &c.stage2}) {
      const std::int64_t K = s->epochs * iterations_per_epoch(c.dataset_size, s->batch_size);
      cap = cap && Curriculum(c.schedule.s0, c.schedule.s1, K).steps_at(K - 1) == c.schedule.s1 + 1;
    }
  }
  v.require(cap, "curriculum reaches s1 + 1 for every preset stage");

  double weight_sum_err = 0.0;
  for (int n = 11; n <= 513; ++n) {
    const NoiseIndexDistribution d(NoiseSchedule(0.002, 80.0, 7.0, n), -1.1, 2.0);
    double sum = 0.0;
    for (double w : d.weights()) sum += w;
    weight_sum_err = std::max(weight_sum_err, std::abs(sum - 1.0));
  }
  v.require(weight_sum_err <= 1e-12, "noise-index weights sum to 1 within " + num(weight_sum_err));

  const double c = pseudo_huber_constant(2);
  Tape tape;
  const Matrix a = (Matrix(1, 2) << 0.3, -0.4).finished();
  const Matrix delta = (Matrix(1, 2) << 0.6, 0.8).finished() * (c / 100.0);
  const NodeId d = pseudo_huber(tape, tape.constant(a + delta), tape.constant(a), c);
  tape.forward({});
  const double quad = delta.squaredNorm() / (2.0 * c);
  const double rel = std::abs(tape.value(d)(0, 0) - quad) / quad;
  v.require(rel < 0.01, "pseudo-Huber quadratic limit rel err " + num(rel));
  return v;
}

Verdict probes(Context&) {
  Verdict v;
  ArchitectureSpec arch;
  arch.hidden_layers = 2;
  arch.width = 16;
  arch.embedding.dim = 8;
  Rng rng(21);
  const ModelParameters p = init_parameters(arch, NoiseRange{}, rng);
  const Matrix x0 = sample_manifold(ManifoldKind::circle, 32, rng).points;
  const NoiseSchedule schedule(0.002, 80.0, 7.0, 16);
  const NoiseIndexDistribution dist(schedule, -1.1, 2.0);
  const NoiseDraw noise = draw_ct_noise(32, dist, rng);
  std::vector<double> t_cur, t_next;
  Matrix x_cur(32, 2), x_next(32, 2);
  for (Eigen::Index r = 0; r < 32; ++r) {
    const std::size_t n = noise.n[static_cast<std::size_t>(r)];
    t_cur.push_back(schedule.t(n));
    t_next.push_back(schedule.t(n + 1));
    x_cur.row(r) = x0.row(r) + schedule.t(n) * noise.z.row(r);
    x_next.row(r) = x0.row(r) + schedule.t(n + 1) * noise.z.row(r);
  }
  const std::size_t probe_slot = p.leaves.size();
  std::vector<Matrix> leaves = p.leaves;
  leaves.push_back((Matrix(1, 2) << 0.3, -0.2).finished());
  Tape tape;
  const auto bound = bind_parameters(tape, p);
  const NodeId probe = tape.parameter(probe_slot, 1, 2);
  const NodeId student = consistency_forward(tape, p, bound, tape.constant(x_next), t_next);
  const NodeId teacher = tape.stop_gradient(
      tape.add_row(consistency_forward(tape, p, bound, tape.constant(x_cur), t_cur), probe));
  const NodeId loss = tape.mean(pseudo_huber(tape, student, teacher, pseudo_huber_constant(2)));
  tape.forward(leaves);
  const ad::GradientSet g = tape.backward(loss);
  v.require(g[probe_slot].isZero(0.0) && g[0].cwiseAbs().maxCoeff() > 0.0,
            "teacher-only parameter gradient exactly zero");

  TrainConfig c;
  c.name = "probe";
  c.arch = arch;
  c.dataset_size = 200;
  c.stage1 = {.epochs = 3, .batch_size = 64, .optimizer = OptimizerKind::adam, .lr = 1e-3};
  c.stage2 = {.epochs = 3, .batch_size = 64, .optimizer = OptimizerKind::adam, .lr = 1e-3,
              .residual_weight = 1.0};
  const Dataset data = make_dataset(c);
  std::size_t iterations = 0, violations = 0;
  const TrainHooks hooks{.on_iteration = [&](const IterationProbe& it) {
    ++iterations;
    if (it.normal_draws != 2 * it.batch_size || it.uniform_draws != it.batch_size) ++violations;
  }};
  const StageResult s1 = train_stage1(c, data, hooks);
  train_stage2(c, data, s1.params, hooks);
  v.require(violations == 0 && iterations == 24,
            "one z and one n per sample in " + std::to_string(iterations) + " stage-1/2 iterations, " +
                std::to_string(violations) + " violations");
  return v;
}

Verdict circle_end_to_end(Context& ctx) {
  Verdict v;
  const MetricsReport& m = ctx.circle_stage2();
  v.detail = "stage 2, 4096 one-step samples: " + brief(m);
  v.require(m.mean_abs_residual <= 0.05, "mean|R| <= 0.05");
  v.require(m.p95_abs_residual <= 0.15, "p95|R| <= 0.15");
  v.require(m.bin_coverage >= 0.9, "coverage >= 0.9");
  v.require(true, "training " + num(ctx.circle().seconds) + " s (" +
                      num(100.0 * ctx.options().circle_fraction) + "% budget)");
  return v;
}

Verdict other_curves(Context& ctx) {
  Verdict v;
  const double fraction = ctx.options().repro_fraction;
  const fs::path dir = ctx.options().cache / "repro";
  std::vector<ReproRow> rows;
  double total = 0.0;
  for (const char* name : {"ellipse", "double_ellipse", "saddle"}) {
    const TrainedRun run = trained(ctx.preset(name, fraction), dir / name, ctx.options().fresh);
    const MetricsReport s1 = one_step_metrics(run.stage1);
    const MetricsReport s2 = one_step_metrics(run.stage2);
    rows.push_back({name, s1, s2, run.seconds});
    total += run.seconds;
    double min_cov = 1.0;
    for (double c : s2.component_coverage) min_cov = std::min(min_cov, c);
    v.require(s2.mean_distance_to_curve <= 0.1 && min_cov >= 0.8,
              std::string(name) + ": " + brief(s2));
  }
  io::write_text(dir / "summary.csv", summary_csv(rows));
  v.require(total <= 3600.0, "runtime " + num(total) + " s <= 3600 s at " + num(100.0 * fraction) +
                                 "% budget");
  return v;
}

Verdict stage2_improves(Context& ctx) {
  Verdict v;
  const double before = ctx.circle_stage1().mean_abs_residual;
  const double after = ctx.circle_stage2().mean_abs_residual;
  v.require(after < before, "mean|R| stage 1 " + num(before) + " -> stage 2 " + num(after));
  return v;
}

Verdict ablation_loses_coverage(Context& ctx) {
  Verdict v;
  const TrainedRun& two_stage = ctx.circle();
  const fs::path dir = ctx.options().cache / "circle_ablation";
  const io::Checkpoint abl =
      ablation(ctx.preset("circle", ctx.options().circle_fraction), dir, ctx.options().fresh);
  const MetricsReport m = one_step_metrics(abl);
  const double two = ctx.circle_stage2().bin_coverage;
  v.require(m.bin_coverage < two, "stage-2-only coverage " + num(m.bin_coverage) +
                                      " < two-stage " + num(two) + " (mean|R| " +
                                      num(m.mean_abs_residual) + ")");
  const fs::path fig_a = two_stage.dir / "figure.svg";
  const fs::path fig_b = dir / "figure_ablation.svg";
  v.require(fs::exists(fig_a) && fs::exists(fig_b), "figures " + fig_a.string() + ", " + fig_b.string());
  return v;
}

Verdict two_step(Context& ctx) {
  Verdict v;
  const double one = ctx.circle_stage2().mean_abs_residual;
  const MetricsReport two = one_step_metrics(ctx.circle().stage2, 2);
  v.require(two.mean_abs_residual <= one + 0.01,
            "two-step (tau " + num(ctx.circle().stage2.two_step_tau) + ") mean|R| " +
                num(two.mean_abs_residual) + " <= one-step " + num(one) + " + 0.01");
  return v;
}

Verdict reproducibility(Context& ctx) {
  Verdict v;
  const fs::path dir = ctx.options().cache / "repro_check";
  fs::remove_all(dir);
  fs::create_directories(dir);
  io::write_text(dir / "tiny.json", R"({
  "name": "tiny", "manifold": "circle", "dataset_size": 512, "seed": 11,
  "model": { "hidden_layers": 2, "width": 32, "activation": "sigmoid",
             "embedding": { "kind": "fourier", "dim": 16 } },
  "schedule": { "s1": 15 },
  "stage1": { "epochs": 3, "batch_size": 128, "optimizer": "adam", "lr": 1e-3 },
  "stage2": { "epochs": 3, "batch_size": 128, "optimizer": "adam", "lr": 1e-3 }
})");
  const std::string bin = CT_PHYSICS_BIN;
  bool commands_ok = true;
  for (const char* run : {"a", "b"}) {
    const fs::path out = dir / run;
    commands_ok = commands_ok &&
                  run_command(bin + " train --config " + (dir / "tiny.json").string() + " --out " +
                              out.string() + " --n 512") == 0 &&
                  run_command(bin + " sample --checkpoint " + (out / "stage2.ckpt").string() +
                              " --n 4096 --steps 1 --seed 7 --out " + (out / "samples.csv").string()) == 0 &&
                  run_command(bin + " eval --samples " + (out / "samples.csv").string() + " --checkpoint " +
                              (out / "stage2.ckpt").string() + " --out " + (out / "metrics.csv").string()) == 0;
  }
  v.require(commands_ok, "train -> sample -> eval exit 0 twice");
  if (commands_ok) {
    const auto same = [&](const std::string& f) {
      const std::string a = slurp(dir / "a" / f);
      return !a.empty() && a == slurp(dir / "b" / f);
    };
    v.require(same("samples.csv") && same("metrics.csv") && same("stage2.ckpt"),
              "sample CSVs, metrics and checkpoints byte-identical");
  }

  const io::Checkpoint& original = ctx.circle().stage2;
  const fs::path copy = dir / "roundtrip.ckpt";
  io::save_checkpoint(copy, original);
  const io::Checkpoint back = io::load_checkpoint(copy);
  bool exact = back.params.leaves.size() == original.params.leaves.size() &&
               bitwise_equal(back.params.frequencies, original.params.frequencies);
  for (std::size_t i = 0; exact && i < original.params.leaves.size(); ++i) {
    exact = bitwise_equal(back.params.leaves[i], original.params.leaves[i]);
  }
  exact = exact && slurp(copy) == slurp(ctx.circle().dir / "stage2.ckpt");
  v.require(exact, "circle checkpoint round-trips bit-exactly");
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ct-physics acceptance run"};
  Options opts;
  opts.cache = CT_PHYSICS_ACCEPTANCE_CACHE;
  opts.configs = CT_PHYSICS_CONFIG_DIR;
  std::vector<int> only;
  app.add_option("--cache", opts.cache, "directory for cached training runs");
  app.add_option("--configs", opts.configs, "preset config directory")->check(CLI::ExistingDirectory);
  app.add_option("--circle-fraction", opts.circle_fraction, "circle epoch budget fraction")
      ->check(CLI::Range(0.2, 1.0));
  app.add_option("--repro-fraction", opts.repro_fraction, "ellipse/double ellipse/saddle budget fraction")
      ->check(CLI::Range(0.1, 1.0));
  app.add_option("--only", only, "criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_flag("--fresh", opts.fresh, "ignore cached runs");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(opts.cache);

  const std::vector<std::pair<std::string, std::function<Verdict(Context&)>>> criteria = {
      {"gradient suite", gradient_suite},
      {"structural exactness", structural_exactness},
      {"stop-gradient and rng probes", probes},
      {"circle end-to-end", circle_end_to_end},
      {"ellipse, double ellipse, saddle end-to-end", other_curves},
      {"stage-2 improvement", stage2_improves},
      {"stage-2-only ablation", ablation_loses_coverage},
      {"two-step sampler", two_step},
      {"reproducibility", reproducibility},
  };

  Context ctx(opts);
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::cout << (v.pass ? "PASS" : "FAIL") << "  " << id << " " << criteria[i].first << ": " << v.detail
              << std::endl;
    failed += v.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
