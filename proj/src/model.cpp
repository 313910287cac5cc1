#include "ctphys/model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ctphys {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "sigmoid"; }

std::string to_string(EmbeddingKind k) {
  return k == EmbeddingKind::sinusoidal ? "sinusoidal" : "fourier";
}

int input_dim(const ArchitectureSpec& arch) { return 2 + arch.embedding.dim; }

void validate_shapes(const ModelParameters& params) {
  const auto& arch = params.arch;
  if (arch.hidden_layers < 1 || arch.width < 1) {
    throw std::invalid_argument("architecture needs at least one hidden layer of positive width");
  }
  if (arch.embedding.dim < 2 || arch.embedding.dim % 2 != 0) {
    throw std::invalid_argument("embedding dimension must be even and >= 2");
  }
  const std::size_t layers = static_cast<std::size_t>(arch.hidden_layers) + 1;
  if (params.leaves.size() != 2 * layers) {
    throw std::invalid_argument("expected " + std::to_string(2 * layers) + " parameter arrays, got " +
                                std::to_string(params.leaves.size()));
  }
  Eigen::Index fan_in = input_dim(arch);
  for (std::size_t l = 0; l < layers; ++l) {
    const Eigen::Index fan_out = l + 1 == layers ? 2 : arch.width;
    const Matrix& w = params.weight(l);
    const Matrix& b = params.bias(l);
    if (w.rows() != fan_in || w.cols() != fan_out || b.rows() != 1 || b.cols() != fan_out) {
      throw std::invalid_argument("layer " + std::to_string(l) + ": expected weight " +
                                  std::to_string(fan_in) + "x" + std::to_string(fan_out) +
                                  " and bias 1x" + std::to_string(fan_out) + ", got " +
                                  std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                                  " and " + std::to_string(b.rows()) + "x" +
                                  std::to_string(b.cols()));
    }
    fan_in = fan_out;
  }
  if (arch.embedding.kind == EmbeddingKind::fourier &&
      (params.frequencies.rows() != 1 || params.frequencies.cols() != arch.embedding.dim / 2)) {
    throw std::invalid_argument("fourier frequency matrix must be 1x" +
                                std::to_string(arch.embedding.dim / 2));
  }
}

Matrix embed_time(const EmbeddingSpec& spec, const Matrix& frequencies, const NoiseRange& range,
                  std::span<const double> t) {
  if (spec.dim < 2 || spec.dim % 2 != 0) {
    throw std::invalid_argument("embedding dimension must be even and >= 2");
  }
  const Eigen::Index half = spec.dim / 2;
  if (spec.kind == EmbeddingKind::fourier && frequencies.cols() != half) {
    throw std::invalid_argument("fourier frequency count does not match embedding dimension");
  }
  Matrix out(static_cast<Eigen::Index>(t.size()), spec.dim);
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (!(t[r] >= range.sigma_min && t[r] <= range.sigma_max)) {
      throw std::invalid_argument("embed_time: t = " + std::to_string(t[r]) +
                                  " outside [sigma_min, sigma_max]");
    }
    const double tau = std::log(t[r]) / 4.0;
    const auto row = static_cast<Eigen::Index>(r);
    for (Eigen::Index i = 0; i < half; ++i) {
      double arg;
      if (spec.kind == EmbeddingKind::fourier) {
        arg = 2.0 * std::numbers::pi * frequencies(0, i) * tau;
      } else {
        const double freq = std::exp(-std::log(spec.max_period) * static_cast<double>(i) /
                                     static_cast<double>(half));
        arg = spec.scale * tau * freq;
      }
      out(row, 2 * i) = std::sin(arg);
      out(row, 2 * i + 1) = std::cos(arg);
    }
  }
  return out;
}

BoundaryCoefficients boundary_coefficients(double t, double sigma_min, double sigma_data) {
  const double sd2 = sigma_data * sigma_data;
  const double shifted = t - sigma_min;
  return {sd2 / (shifted * shifted + sd2), sigma_data * shifted / std::sqrt(sd2 + t * t)};
}

double input_scale(double t, double sigma_data) {
  return 1.0 / std::sqrt(t * t + sigma_data * sigma_data);
}

BoundParameters bind_parameters(ad::Tape& tape, const ModelParameters& params) {
  BoundParameters bound;
  bound.leaves.reserve(params.leaves.size());
  for (std::size_t s = 0; s < params.leaves.size(); ++s) {
    bound.leaves.push_back(tape.parameter(s, params.leaves[s].rows(), params.leaves[s].cols()));
  }
  return bound;
}

ad::NodeId mlp_forward(ad::Tape& tape, const ModelParameters& params, const BoundParameters& bound,
                       ad::NodeId x, ad::NodeId t_emb) {
  const auto& arch = params.arch;
  const std::size_t layers = params.layer_count();
  if (bound.leaves.size() != params.leaves.size()) {
    throw std::invalid_argument("mlp_forward: bound leaves do not match parameters");
  }
  const auto activate = [&](ad::NodeId h) {
    return arch.activation == Activation::relu ? tape.relu(h) : tape.sigmoid(h);
  };

  ad::NodeId h = tape.concat_cols(x, t_emb);
  ad::NodeId carried = h;
  for (std::size_t l = 0; l < layers; ++l) {
    const ad::NodeId pre = tape.add_row(tape.matmul(h, bound.leaves[2 * l]), bound.leaves[2 * l + 1]);
    if (l + 1 == layers) return pre;  // linear output layer
    h = activate(pre);
    if (arch.skip_connections) {
      if (l >= 2 && l % 2 == 0) {
        h = tape.add(h, carried);
        carried = h;
      } else if (l == 0) {
        carried = h;
      }
    }
  }
  return h;  // unreachable: layers >= 1
}

ad::NodeId consistency_forward(ad::Tape& tape, const ModelParameters& params,
                               const BoundParameters& bound, ad::NodeId x,
                               std::span<const double> t) {
  const auto rows = static_cast<Eigen::Index>(t.size());
  if (tape.rows(x) != rows || tape.cols(x) != 2) {
    throw ad::ShapeError(x.index, "consistency_forward expects a " + std::to_string(rows) +
                                      "x2 batch");
  }
  Matrix skip(rows, 1), out(rows, 1), in(rows, 1);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto c = boundary_coefficients(t[static_cast<std::size_t>(r)], params.noise.sigma_min,
                                         params.noise.sigma_data);
    skip(r, 0) = c.skip;
    out(r, 0) = c.out;
    in(r, 0) = input_scale(t[static_cast<std::size_t>(r)], params.noise.sigma_data);
  }
  const ad::NodeId emb = tape.constant(
      embed_time(params.arch.embedding, params.frequencies, params.noise, t));
  const ad::NodeId net_in = params.arch.input_scaling ? tape.scale_rows(x, tape.constant(in)) : x;
  const ad::NodeId net = mlp_forward(tape, params, bound, net_in, emb);
  return tape.add(tape.scale_rows(x, tape.constant(skip)),
                  tape.scale_rows(net, tape.constant(out)));
}

Matrix consistency_eval(const ModelParameters& params, const Matrix& x, std::span<const double> t) {
  ad::Tape tape;
  const auto bound = bind_parameters(tape, params);
  const auto out = consistency_forward(tape, params, bound, tape.constant(x), t);
  tape.forward(params.leaves);
  return tape.value(out);
}

Matrix consistency_eval(const ModelParameters& params, const Matrix& x, double t) {
  const std::vector<double> ts(static_cast<std::size_t>(x.rows()), t);
  return consistency_eval(params, x, ts);
}

ModelParameters zero_parameters(const ArchitectureSpec& arch, const NoiseRange& range) {
  ModelParameters p{.arch = arch, .noise = range};
  Eigen::Index fan_in = input_dim(arch);
  const int layers = arch.hidden_layers + 1;
  for (int l = 0; l < layers; ++l) {
    const Eigen::Index fan_out = l + 1 == layers ? 2 : arch.width;
    p.leaves.push_back(Matrix::Zero(fan_in, fan_out));
    p.leaves.push_back(Matrix::Zero(1, fan_out));
    fan_in = fan_out;
  }
  if (arch.embedding.kind == EmbeddingKind::fourier) {
    p.frequencies = Matrix::Zero(1, arch.embedding.dim / 2);
  }
  return p;
}

ModelParameters init_parameters(const ArchitectureSpec& arch, const NoiseRange& range, Rng& rng) {
  ModelParameters p = zero_parameters(arch, range);
  validate_shapes(p);
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    Matrix& w = p.leaves[2 * l];
    const double fan_in = static_cast<double>(w.rows());
    const double fan_out = static_cast<double>(w.cols());
    if (arch.activation == Activation::relu) {
      const double std = std::sqrt(2.0 / fan_in);
      for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = std * rng.normal();
    } else {
      const double limit = std::sqrt(6.0 / (fan_in + fan_out));
      for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = limit * (2.0 * rng.uniform() - 1.0);
    }
  }
  if (arch.embedding.kind == EmbeddingKind::fourier) {
    for (Eigen::Index i = 0; i < p.frequencies.cols(); ++i) {
      p.frequencies(0, i) = arch.embedding.scale * rng.normal();
    }
  }
  return p;
}

}  // namespace ctphys
