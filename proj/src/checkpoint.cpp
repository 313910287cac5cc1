#include "ctphys/io.hpp"

#include <json.hpp>

#include <bit>
#include <cstdio>

namespace ctphys::io {

using nlohmann::json;

std::string encode_hex(const Matrix& m) {
  std::string out;
  out.reserve(static_cast<std::size_t>(m.size()) * 16);
  char buf[17];
  // row-major so the text reads like the matrix
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%016llx",
                    static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(m(r, c))));
      out.append(buf, 16);
    }
  }
  return out;
}

Matrix decode_hex(const std::string& hex, Eigen::Index rows, Eigen::Index cols) {
  if (rows < 0 || cols < 0 || hex.size() != static_cast<std::size_t>(rows * cols) * 16) {
    throw CheckpointError(CheckpointError::Kind::corrupt, "hex payload length does not match " +
                                                              std::to_string(rows) + "x" +
                                                              std::to_string(cols));
  }
  Matrix m(rows, cols);
  std::size_t pos = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c, pos += 16) {
      std::uint64_t bits = 0;
      for (std::size_t k = 0; k < 16; ++k) {
        const char ch = hex[pos + k];
        int digit;
        if (ch >= '0' && ch <= '9') digit = ch - '0';
        else if (ch >= 'a' && ch <= 'f') digit = ch - 'a' + 10;
        else if (ch >= 'A' && ch <= 'F') digit = ch - 'A' + 10;
        else throw CheckpointError(CheckpointError::Kind::corrupt, "invalid hex digit in payload");
        bits = (bits << 4) | static_cast<std::uint64_t>(digit);
      }
      m(r, c) = std::bit_cast<double>(bits);
    }
  }
  return m;
}

namespace {

json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"hex", encode_hex(m)}};
}

Matrix matrix_from(const json& j) {
  return decode_hex(j.at("hex").get<std::string>(), j.at("rows").get<Eigen::Index>(),
                    j.at("cols").get<Eigen::Index>());
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const auto& p = ckpt.params;
  const auto& s = ckpt.schedule;
  json layers = json::array();
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    layers.push_back({{"weight", matrix_json(p.weight(l))}, {"bias", matrix_json(p.bias(l))}});
  }
  json j = {
      {"format", "ct-physics-checkpoint"},
      {"version", ckpt.version},
      {"manifold", to_string(ckpt.manifold)},
      {"stage", ckpt.stage},
      {"iterations", ckpt.iterations},
      {"seed", ckpt.seed},
      {"two_step_tau", ckpt.two_step_tau},
      {"architecture",
       {{"hidden_layers", p.arch.hidden_layers},
        {"width", p.arch.width},
        {"activation", to_string(p.arch.activation)},
        {"skip_connections", p.arch.skip_connections},
        {"input_scaling", p.arch.input_scaling},
        {"embedding",
         {{"kind", to_string(p.arch.embedding.kind)},
          {"dim", p.arch.embedding.dim},
          {"scale", encode_hex(Matrix::Constant(1, 1, p.arch.embedding.scale))},
          {"max_period", encode_hex(Matrix::Constant(1, 1, p.arch.embedding.max_period))}}}}},
      {"schedule",
       {{"sigma_min", s.sigma_min},
        {"sigma_max", s.sigma_max},
        {"rho", s.rho},
        {"sigma_data", s.sigma_data},
        {"p_mean", s.p_mean},
        {"p_std", s.p_std},
        {"s0", s.s0},
        {"s1", s.s1}}},
      {"noise_range", matrix_json((Matrix(1, 3) << p.noise.sigma_min, p.noise.sigma_max,
                                   p.noise.sigma_data).finished())},
      {"frequencies", matrix_json(p.frequencies)},
      {"layers", layers},
  };
  return j.dump(1) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  using Kind = CheckpointError::Kind;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CheckpointError(Kind::corrupt, std::string("checkpoint is not valid JSON: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    if (j.at("format").get<std::string>() != "ct-physics-checkpoint") {
      throw CheckpointError(Kind::corrupt, "not a ct-physics checkpoint");
    }
    ckpt.version = j.at("version").get<int>();
    if (ckpt.version != kCheckpointVersion) {
      throw CheckpointError(Kind::version, "checkpoint version " + std::to_string(ckpt.version) +
                                               ", expected " + std::to_string(kCheckpointVersion));
    }
    ckpt.manifold = parse_manifold(j.at("manifold").get<std::string>());
    ckpt.stage = j.at("stage").get<std::string>();
    ckpt.iterations = j.at("iterations").get<std::int64_t>();
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ckpt.two_step_tau = j.at("two_step_tau").get<double>();

    const json& a = j.at("architecture");
    auto& arch = ckpt.params.arch;
    arch.hidden_layers = a.at("hidden_layers").get<int>();
    arch.width = a.at("width").get<int>();
    const auto act = a.at("activation").get<std::string>();
    if (act != "relu" && act != "sigmoid") throw CheckpointError(Kind::corrupt, "bad activation");
    arch.activation = act == "relu" ? Activation::relu : Activation::sigmoid;
    arch.skip_connections = a.at("skip_connections").get<bool>();
    arch.input_scaling = a.at("input_scaling").get<bool>();
    const json& e = a.at("embedding");
    const auto kind = e.at("kind").get<std::string>();
    if (kind != "fourier" && kind != "sinusoidal") throw CheckpointError(Kind::corrupt, "bad embedding");
    arch.embedding.kind = kind == "fourier" ? EmbeddingKind::fourier : EmbeddingKind::sinusoidal;
    arch.embedding.dim = e.at("dim").get<int>();
    arch.embedding.scale = decode_hex(e.at("scale").get<std::string>(), 1, 1)(0, 0);
    arch.embedding.max_period = decode_hex(e.at("max_period").get<std::string>(), 1, 1)(0, 0);

    const json& s = j.at("schedule");
    ckpt.schedule.sigma_min = s.at("sigma_min").get<double>();
    ckpt.schedule.sigma_max = s.at("sigma_max").get<double>();
    ckpt.schedule.rho = s.at("rho").get<double>();
    ckpt.schedule.sigma_data = s.at("sigma_data").get<double>();
    ckpt.schedule.p_mean = s.at("p_mean").get<double>();
    ckpt.schedule.p_std = s.at("p_std").get<double>();
    ckpt.schedule.s0 = s.at("s0").get<int>();
    ckpt.schedule.s1 = s.at("s1").get<int>();

    const Matrix range = matrix_from(j.at("noise_range"));
    if (range.size() != 3) throw CheckpointError(Kind::corrupt, "noise_range must hold 3 values");
    ckpt.params.noise = {range(0, 0), range(0, 1), range(0, 2)};
    ckpt.params.frequencies = matrix_from(j.at("frequencies"));
    for (const json& layer : j.at("layers")) {
      ckpt.params.leaves.push_back(matrix_from(layer.at("weight")));
      ckpt.params.leaves.push_back(matrix_from(layer.at("bias")));
    }
  } catch (const json::exception& e) {
    throw CheckpointError(Kind::corrupt, std::string("checkpoint field error: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(Kind::corrupt, e.what());
  }

  try {
    validate_shapes(ckpt.params);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(Kind::shape, e.what());
  }
  return ckpt;
}

void save_checkpoint(const fs::path& path, const Checkpoint& ckpt) {
  write_text(path, checkpoint_to_json(ckpt));
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const IoError& e) {
    throw CheckpointError(CheckpointError::Kind::io, e.what());
  }
  return checkpoint_from_json(text);
}

}  // namespace ctphys::io
