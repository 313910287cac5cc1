#include "ctphys/training.hpp"

#include <cmath>

namespace ctphys {

std::string to_string(OptimizerKind k) { return k == OptimizerKind::radam ? "radam" : "adam"; }

std::string to_string(DecayRule r) {
  switch (r) {
    case DecayRule::none: return "none";
    case DecayRule::halve_every_1000: return "halve_every_1000";
    case DecayRule::times_0_9_every_1000: return "times_0.9_every_1000";
  }
  return "none";
}

OptimizerKind parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "radam") return OptimizerKind::radam;
  throw std::invalid_argument("unknown optimizer '" + name + "'");
}

DecayRule parse_decay(const std::string& name) {
  for (auto r : {DecayRule::none, DecayRule::halve_every_1000, DecayRule::times_0_9_every_1000}) {
    if (to_string(r) == name) return r;
  }
  throw std::invalid_argument("unknown decay rule '" + name + "'");
}

OptimizerState make_optimizer(OptimizerKind kind, std::span<const Matrix> params) {
  OptimizerState state{.kind = kind};
  for (const auto& p : params) {
    state.m.push_back(Matrix::Zero(p.rows(), p.cols()));
    state.v.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
  return state;
}

namespace {

void check_congruent(const OptimizerState& state, std::span<Matrix> params,
                     const ad::GradientSet& grads) {
  if (params.size() != state.m.size() || grads.size() != params.size()) {
    throw std::invalid_argument("optimizer: parameter/gradient count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols() ||
        state.m[i].rows() != params[i].rows() || state.m[i].cols() != params[i].cols()) {
      throw std::invalid_argument("optimizer: shape mismatch at leaf " + std::to_string(i));
    }
  }
}

void update_moments(OptimizerState& state, const ad::GradientSet& grads) {
  for (std::size_t i = 0; i < state.m.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i].cwiseAbs2();
  }
}

}  // namespace

void adam_step(OptimizerState& state, std::span<Matrix> params, const ad::GradientSet& grads,
               double lr) {
  check_congruent(state, params, grads);
  ++state.step;
  update_moments(state, grads);
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].array() -= lr * (state.m[i].array() / bc1) /
                         ((state.v[i].array() / bc2).sqrt() + state.floor);
  }
}

double radam_rho(double beta2, std::int64_t t) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double b2t = std::pow(beta2, static_cast<double>(t));
  return rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
}

void radam_step(OptimizerState& state, std::span<Matrix> params, const ad::GradientSet& grads,
                double lr) {
  check_congruent(state, params, grads);
  ++state.step;
  update_moments(state, grads);
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(state.beta1, t);
  const double bc2 = 1.0 - std::pow(state.beta2, t);
  const double rho_inf = 2.0 / (1.0 - state.beta2) - 1.0;
  const double rho_t = radam_rho(state.beta2, state.step);
  if (rho_t > 4.0) {
    const double rect = std::sqrt((rho_t - 4.0) * (rho_t - 2.0) * rho_inf /
                                  ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i].array() -= lr * rect * (state.m[i].array() / bc1) /
                           ((state.v[i].array() / bc2).sqrt() + state.floor);
    }
  } else {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i] -= lr * (state.m[i] / bc1);
    }
  }
}

void optimizer_step(OptimizerState& state, std::span<Matrix> params,
                    const ad::GradientSet& grads, double lr) {
  if (state.kind == OptimizerKind::radam) {
    radam_step(state, params, grads, lr);
  } else {
    adam_step(state, params, grads, lr);
  }
}

double lr_at(DecayRule rule, double base, std::int64_t iteration) {
  if (iteration < 0) throw std::invalid_argument("lr_at: negative iteration");
  const double periods = static_cast<double>(iteration / 1000);
  switch (rule) {
    case DecayRule::none: return base;
    case DecayRule::halve_every_1000: return base * std::pow(0.5, periods);
    case DecayRule::times_0_9_every_1000: return base * std::pow(0.9, periods);
  }
  return base;
}

}  // namespace ctphys
