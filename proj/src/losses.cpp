#include "ctphys/training.hpp"

#include <cmath>

namespace ctphys {

double pseudo_huber_constant(int data_dim) { return 0.00054 * std::sqrt(static_cast<double>(data_dim)); }

ad::NodeId pseudo_huber(ad::Tape& tape, ad::NodeId a, ad::NodeId b, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("pseudo_huber: c must be > 0");
  const auto sq = tape.row_sum(tape.square(tape.subtract(a, b)));
  return tape.shift(tape.sqrt(tape.shift(sq, c * c)), -c);
}

NoiseDraw draw_ct_noise(std::size_t batch, const NoiseIndexDistribution& distribution, Rng& rng) {
  NoiseDraw draw{.z = Matrix(static_cast<Eigen::Index>(batch), 2), .n = {}};
  draw.n.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    draw.z(row, 0) = rng.normal();
    draw.z(row, 1) = rng.normal();
    draw.n.push_back(distribution.sample(rng));
  }
  return draw;
}

ad::NodeId ct_loss(ad::Tape& tape, const ModelParameters& params, const BoundParameters& bound,
                   const Matrix& x0, const NoiseDraw& noise, const NoiseSchedule& schedule) {
  const auto rows = x0.rows();
  if (noise.z.rows() != rows || static_cast<Eigen::Index>(noise.n.size()) != rows) {
    throw std::invalid_argument("ct_loss: noise draw does not match the batch");
  }
  std::vector<double> t_next(static_cast<std::size_t>(rows));
  std::vector<double> t_cur(static_cast<std::size_t>(rows));
  Matrix weight(rows, 1);
  Matrix x_next(rows, 2);
  Matrix x_cur(rows, 2);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const std::size_t n = noise.n[static_cast<std::size_t>(r)];
    const auto ri = static_cast<std::size_t>(r);
    t_cur[ri] = schedule.t(n);
    t_next[ri] = schedule.t(n + 1);
    weight(r, 0) = loss_weight(schedule, n);
    x_next.row(r) = x0.row(r) + t_next[ri] * noise.z.row(r);
    x_cur.row(r) = x0.row(r) + t_cur[ri] * noise.z.row(r);
  }
  const auto student = consistency_forward(tape, params, bound, tape.constant(std::move(x_next)), t_next);
  const auto teacher = tape.stop_gradient(
      consistency_forward(tape, params, bound, tape.constant(std::move(x_cur)), t_cur));
  const auto d = pseudo_huber(tape, student, teacher, pseudo_huber_constant(2));
  return tape.mean(tape.scale_rows(d, tape.constant(std::move(weight))));
}

ad::NodeId residual_loss(ad::Tape& tape, const ModelParameters& params,
                         const BoundParameters& bound, const Matrix& x0, const Matrix& z,
                         double sigma_max, ManifoldKind manifold) {
  if (z.rows() != x0.rows() || z.cols() != 2 || x0.cols() != 2) {
    throw std::invalid_argument("residual_loss: noise does not match the batch");
  }
  const std::vector<double> t(static_cast<std::size_t>(x0.rows()), sigma_max);
  const Matrix x_t = x0 + sigma_max * z;
  const auto pred = consistency_forward(tape, params, bound, tape.constant(x_t), t);
  return tape.mean(tape.square(residual(tape, manifold, pred)));
}

Stage2Loss total_loss_stage2(ad::Tape& tape, const ModelParameters& params,
                             const BoundParameters& bound, const Matrix& x0,
                             const NoiseDraw& noise, const Matrix& residual_z,
                             const NoiseSchedule& schedule, ManifoldKind manifold,
                             double residual_weight) {
  if (residual_weight < 0.0) throw std::invalid_argument("residual weight must be >= 0");
  const auto ct = ct_loss(tape, params, bound, x0, noise, schedule);
  if (residual_weight == 0.0) return {ct, ct, ct};
  const auto res =
      residual_loss(tape, params, bound, x0, residual_z, schedule.sigma_max(), manifold);
  return {ct, res, tape.add(ct, tape.scale(res, residual_weight))};
}

}  // namespace ctphys
