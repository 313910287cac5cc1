#pragma once

#include "ctphys/autodiff.hpp"
#include "ctphys/rng.hpp"

#include <span>
#include <string>
#include <vector>

namespace ctphys {

using ad::Matrix;

enum class Activation { sigmoid, relu };
enum class EmbeddingKind { fourier, sinusoidal };

struct EmbeddingSpec {
  EmbeddingKind kind = EmbeddingKind::fourier;
  int dim = 64;
  /// Fourier: std of the random frequencies. Sinusoidal: multiplier on the
  /// log-time before the positional encoding.
  double scale = 1.0;
  /// Sinusoidal only.
  double max_period = 10000.0;
};

struct ArchitectureSpec {
  int hidden_layers = 4;
  int width = 128;
  Activation activation = Activation::sigmoid;
  EmbeddingSpec embedding;
  /// Residual connection every two hidden layers.
  bool skip_connections = false;
  /// Feed c_in(t) x = x / sqrt(t^2 + sigma_data^2) to the network.
  bool input_scaling = true;
};

/// Noise range the parameterization is defined on.
struct NoiseRange {
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double sigma_data = 0.5;
};

/// F_theta weights plus the fixed embedding data. Trainable leaves are laid out
/// [W0, b0, W1, b1, ...]; W_l is (in x out), b_l is (1 x out).
struct ModelParameters {
  ArchitectureSpec arch;
  NoiseRange noise;
  std::vector<Matrix> leaves;
  /// 1 x dim/2 Fourier frequencies. Empty for sinusoidal embeddings. Never trained.
  Matrix frequencies;

  std::size_t layer_count() const { return leaves.size() / 2; }
  const Matrix& weight(std::size_t layer) const { return leaves[2 * layer]; }
  const Matrix& bias(std::size_t layer) const { return leaves[2 * layer + 1]; }
};

std::string to_string(Activation a);
std::string to_string(EmbeddingKind k);

/// Input width of the first layer: 2 coordinates plus the time embedding.
int input_dim(const ArchitectureSpec& arch);

/// Throws std::invalid_argument if the leaves do not chain 2+emb -> ... -> 2.
void validate_shapes(const ModelParameters& params);

/// Embedding of tau = ln(t)/4 as interleaved (sin, cos) pairs.
Matrix embed_time(const EmbeddingSpec& spec, const Matrix& frequencies, const NoiseRange& range,
                  std::span<const double> t);

struct BoundaryCoefficients {
  double skip;
  double out;
};

/// c_skip(t) = sd^2 / ((t - eps)^2 + sd^2), c_out(t) = sd (t - eps) / sqrt(sd^2 + t^2).
BoundaryCoefficients boundary_coefficients(double t, double sigma_min, double sigma_data);

double input_scale(double t, double sigma_data);

/// Parameter leaves recorded once on a tape and shared by every forward pass
/// built on it.
struct BoundParameters {
  std::vector<ad::NodeId> leaves;
};

BoundParameters bind_parameters(ad::Tape& tape, const ModelParameters& params);

/// F_theta on a batch: rows of `x` (B x 2) concatenated with `t_emb` (B x dim).
ad::NodeId mlp_forward(ad::Tape& tape, const ModelParameters& params, const BoundParameters& bound,
                       ad::NodeId x, ad::NodeId t_emb);

/// f_theta(x, t) = c_skip(t) x + c_out(t) F_theta(c_in(t) x, emb(t)), one t per row.
ad::NodeId consistency_forward(ad::Tape& tape, const ModelParameters& params,
                               const BoundParameters& bound, ad::NodeId x,
                               std::span<const double> t);

/// Plain batched evaluation of f_theta without gradients.
Matrix consistency_eval(const ModelParameters& params, const Matrix& x, std::span<const double> t);
Matrix consistency_eval(const ModelParameters& params, const Matrix& x, double t);

/// Kaiming fan-in normal weights for ReLU, Xavier uniform for sigmoid; zero
/// biases; Fourier frequencies from N(0, scale^2).
ModelParameters init_parameters(const ArchitectureSpec& arch, const NoiseRange& range, Rng& rng);

/// Zero-valued parameters of the right shapes (frequencies left as given).
ModelParameters zero_parameters(const ArchitectureSpec& arch, const NoiseRange& range);

}  // namespace ctphys
