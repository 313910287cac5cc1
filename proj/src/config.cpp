#include "ctphys/io.hpp"

#include <json.hpp>

#include <set>

namespace ctphys::io {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be rejected as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path, std::vector<std::string>& defaults)
      : obj_(obj), path_(std::move(path)), defaults_(defaults) {
    if (!obj_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string key(const std::string& name) const { return path_.empty() ? name : path_ + "." + name; }

  bool has(const std::string& name) const { return obj_.contains(name); }

  const json& child(const std::string& name) {
    seen_.insert(name);
    if (!obj_.contains(name)) throw ConfigError(key(name), "missing required key");
    return obj_.at(name);
  }

  template <typename T>
  T required(const std::string& name) {
    return convert<T>(name, child(name));
  }

  template <typename T>
  T optional(const std::string& name, T fallback, const std::string& shown) {
    seen_.insert(name);
    if (!obj_.contains(name)) {
      defaults_.push_back(key(name) + " = " + shown);
      return fallback;
    }
    return convert<T>(name, obj_.at(name));
  }

  void reject_unknown() const {
    for (const auto& [k, v] : obj_.items()) {
      if (!seen_.count(k)) throw ConfigError(key(k), "unknown key");
    }
  }

 private:
  template <typename T>
  T convert(const std::string& name, const json& v) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(key(name), "expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(key(name), "expected an integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(key(name), "expected a number");
    } else {
      if (!v.is_string()) throw ConfigError(key(name), "expected a string");
    }
    return v.get<T>();
  }

  const json& obj_;
  std::string path_;
  std::vector<std::string>& defaults_;
  std::set<std::string> seen_;
};

template <typename F>
auto parse_enum(const std::string& key, F parse, const std::string& value) {
  try {
    return parse(value);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(key, e.what());
  }
}

Activation parse_activation(const std::string& s) {
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

EmbeddingKind parse_embedding(const std::string& s) {
  if (s == "fourier") return EmbeddingKind::fourier;
  if (s == "sinusoidal") return EmbeddingKind::sinusoidal;
  throw std::invalid_argument("unknown embedding kind '" + s + "'");
}

StageConfig read_stage(ObjectReader& r, bool allow_residual) {
  StageConfig s;
  s.epochs = r.required<std::int64_t>("epochs");
  s.batch_size = r.required<std::int64_t>("batch_size");
  s.optimizer = parse_enum(r.key("optimizer"), parse_optimizer, r.required<std::string>("optimizer"));
  s.lr = r.required<double>("lr");
  s.decay = parse_enum(r.key("decay"), parse_decay, r.optional<std::string>("decay", "none", "none"));
  if (allow_residual) s.residual_weight = r.optional<double>("residual_weight", 1.0, "1");
  return s;
}

std::string fmt(double v) { return format_double(v); }

}  // namespace

LoadedConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("malformed config: ") + e.what());
  }

  LoadedConfig out;
  auto& d = out.defaults_filled;
  TrainConfig& c = out.config;
  const TrainConfig base;

  ObjectReader root(doc, "", d);
  c.name = root.optional<std::string>("name", "run", "run");
  c.manifold = parse_enum("manifold", parse_manifold, root.required<std::string>("manifold"));
  c.dataset_size = root.optional<std::int64_t>("dataset_size", base.dataset_size, "10000");
  c.seed = root.optional<std::uint64_t>("seed", 0, "0");
  c.curve_sampling = parse_enum("curve_sampling", [](const std::string& s) {
    if (s == "parameter") return CurveSampling::parameter;
    if (s == "arc_length") return CurveSampling::arc_length;
    throw std::invalid_argument("expected 'parameter' or 'arc_length'");
  }, root.optional<std::string>("curve_sampling", "parameter", "parameter"));
  c.stage2_curriculum = parse_enum("stage2_curriculum", [](const std::string& s) {
    if (s == "restart") return CurriculumMode::restart;
    if (s == "freeze") return CurriculumMode::freeze;
    throw std::invalid_argument("expected 'restart' or 'freeze'");
  }, root.optional<std::string>("stage2_curriculum", "restart", "restart"));
  c.residual_noise = parse_enum("residual_noise", [](const std::string& s) {
    if (s == "shared") return ResidualNoise::shared;
    if (s == "independent") return ResidualNoise::independent;
    throw std::invalid_argument("expected 'shared' or 'independent'");
  }, root.optional<std::string>("residual_noise", "shared", "shared"));
  c.ema_decay = root.optional<double>("ema_decay", 0.0, "0");
  c.two_step_tau = root.optional<double>("two_step_tau", base.two_step_tau, fmt(base.two_step_tau));

  {
    ObjectReader m(root.child("model"), "model", d);
    c.arch.hidden_layers = m.required<int>("hidden_layers");
    c.arch.width = m.required<int>("width");
    c.arch.activation = parse_enum("model.activation", parse_activation, m.required<std::string>("activation"));
    c.arch.skip_connections = m.optional<bool>("skip_connections", false, "false");
    c.arch.input_scaling = m.optional<bool>("input_scaling", true, "true");
    ObjectReader e(m.child("embedding"), "model.embedding", d);
    c.arch.embedding.kind = parse_enum("model.embedding.kind", parse_embedding, e.required<std::string>("kind"));
    c.arch.embedding.dim = e.optional<int>("dim", 64, "64");
    const double scale_default = c.arch.embedding.kind == EmbeddingKind::sinusoidal ? 1000.0 : 1.0;
    c.arch.embedding.scale = e.optional<double>("scale", scale_default, fmt(scale_default));
    c.arch.embedding.max_period = e.optional<double>("max_period", 10000.0, "10000");
    e.reject_unknown();
    m.reject_unknown();
  }
  {
    ObjectReader s(root.child("schedule"), "schedule", d);
    const ScheduleConstants def;
    c.schedule.sigma_min = s.optional<double>("sigma_min", def.sigma_min, fmt(def.sigma_min));
    c.schedule.sigma_max = s.optional<double>("sigma_max", def.sigma_max, fmt(def.sigma_max));
    c.schedule.rho = s.optional<double>("rho", def.rho, fmt(def.rho));
    c.schedule.sigma_data = s.optional<double>("sigma_data", def.sigma_data, fmt(def.sigma_data));
    c.schedule.p_mean = s.optional<double>("p_mean", def.p_mean, fmt(def.p_mean));
    c.schedule.p_std = s.optional<double>("p_std", def.p_std, fmt(def.p_std));
    c.schedule.s0 = s.optional<int>("s0", def.s0, std::to_string(def.s0));
    c.schedule.s1 = s.required<int>("s1");
    s.reject_unknown();
  }
  {
    ObjectReader s1(root.child("stage1"), "stage1", d);
    c.stage1 = read_stage(s1, false);
    s1.reject_unknown();
    ObjectReader s2(root.child("stage2"), "stage2", d);
    c.stage2 = read_stage(s2, true);
    s2.reject_unknown();
  }
  root.reject_unknown();

  try {
    validate(c);
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    throw ConfigError(msg.substr(0, colon), colon == std::string::npos ? msg : msg.substr(colon + 2));
  }
  return out;
}

LoadedConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const IoError& e) {
    throw ConfigError("", e.what());
  }
  return parse_config(text);
}

std::string config_to_json(const TrainConfig& c) {
  const auto stage = [](const StageConfig& s, bool residual) {
    json j = {{"epochs", s.epochs},
              {"batch_size", s.batch_size},
              {"optimizer", to_string(s.optimizer)},
              {"lr", s.lr},
              {"decay", to_string(s.decay)}};
    if (residual) j["residual_weight"] = s.residual_weight;
    return j;
  };
  json j = {
      {"name", c.name},
      {"manifold", to_string(c.manifold)},
      {"dataset_size", c.dataset_size},
      {"seed", c.seed},
      {"curve_sampling", c.curve_sampling == CurveSampling::arc_length ? "arc_length" : "parameter"},
      {"stage2_curriculum", c.stage2_curriculum == CurriculumMode::freeze ? "freeze" : "restart"},
      {"residual_noise", c.residual_noise == ResidualNoise::independent ? "independent" : "shared"},
      {"ema_decay", c.ema_decay},
      {"two_step_tau", c.two_step_tau},
      {"model",
       {{"hidden_layers", c.arch.hidden_layers},
        {"width", c.arch.width},
        {"activation", to_string(c.arch.activation)},
        {"skip_connections", c.arch.skip_connections},
        {"input_scaling", c.arch.input_scaling},
        {"embedding",
         {{"kind", to_string(c.arch.embedding.kind)},
          {"dim", c.arch.embedding.dim},
          {"scale", c.arch.embedding.scale},
          {"max_period", c.arch.embedding.max_period}}}}},
      {"schedule",
       {{"sigma_min", c.schedule.sigma_min},
        {"sigma_max", c.schedule.sigma_max},
        {"rho", c.schedule.rho},
        {"sigma_data", c.schedule.sigma_data},
        {"p_mean", c.schedule.p_mean},
        {"p_std", c.schedule.p_std},
        {"s0", c.schedule.s0},
        {"s1", c.schedule.s1}}},
      {"stage1", stage(c.stage1, false)},
      {"stage2", stage(c.stage2, true)},
  };
  return j.dump(2) + "\n";
}

}  // namespace ctphys::io
