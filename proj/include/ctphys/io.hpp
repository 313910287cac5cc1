#pragma once

#include "ctphys/constraints.hpp"
#include "ctphys/model.hpp"
#include "ctphys/sampling.hpp"
#include "ctphys/training.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctphys::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run configuration

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& what)
      : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct LoadedConfig {
  TrainConfig config;
  /// "key = value" for every optional field that fell back to its default.
  std::vector<std::string> defaults_filled;
};

/// Parses and validates a JSON run config. Unknown keys, missing required keys,
/// wrong types and out-of-range values raise ConfigError naming the key.
LoadedConfig parse_config(const std::string& text);
LoadedConfig load_config(const fs::path& path);

/// Serializes every field, so parse_config(config_to_json(c)) == c.
std::string config_to_json(const TrainConfig& config);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  int version = kCheckpointVersion;
  ModelParameters params;
  ScheduleConstants schedule;
  ManifoldKind manifold = ManifoldKind::circle;
  std::string stage;
  std::int64_t iterations = 0;
  std::uint64_t seed = 0;
  double two_step_tau = 0.8;
};

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { io, corrupt, version, shape };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Doubles are stored as 16-digit hex of their IEEE-754 bits.
std::string encode_hex(const Matrix& m);
Matrix decode_hex(const std::string& hex, Eigen::Index rows, Eigen::Index cols);

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const fs::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const fs::path& path);

// ---------------------------------------------------------------------------
// CSV and figures

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shortest-round-trip-safe decimal ("%.17g").
std::string format_double(double v);

void write_samples_csv(const fs::path& path, const SampleSet& samples);
Matrix read_samples_csv(const fs::path& path);

inline const std::vector<std::string> kMetricKeys = {
    "mean_abs_residual", "p95_abs_residual", "mean_distance_to_curve",
    "bin_coverage",      "chamfer",          "n_samples"};

/// "key = value" lines.
std::string format_metrics(const MetricsReport& report);
/// Header row plus one value row.
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& report);
void write_metrics(const fs::path& path, const MetricsReport& report);

void write_record(const fs::path& path, const TrainRecord& record);

/// Dashed black reference curve(s), red sample dots, view = bounding box + 10%.
std::string render_svg(const Matrix& samples, ManifoldKind manifold, const std::string& title = "");
void render_figure(const fs::path& path, const Matrix& samples, ManifoldKind manifold,
                   const std::string& title = "");

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

}  // namespace ctphys::io
