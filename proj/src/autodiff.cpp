#include "ctphys/autodiff.hpp"

#include <cmath>
#include <utility>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace ctphys::ad {

const char* op_name(Op op) {
  switch (op) {
    case Op::constant: return "constant";
    case Op::parameter: return "parameter";
    case Op::add: return "add";
    case Op::subtract: return "subtract";
    case Op::multiply: return "multiply";
    case Op::matmul: return "matmul";
    case Op::add_row: return "add_row";
    case Op::scale: return "scale";
    case Op::shift: return "shift";
    case Op::scale_rows: return "scale_rows";
    case Op::sigmoid: return "sigmoid";
    case Op::relu: return "relu";
    case Op::sin: return "sin";
    case Op::cos: return "cos";
    case Op::square: return "square";
    case Op::sqrt: return "sqrt";
    case Op::sum: return "sum";
    case Op::mean: return "mean";
    case Op::row_sum: return "row_sum";
    case Op::concat_cols: return "concat_cols";
    case Op::column: return "column";
    case Op::stop_gradient: return "stop_gradient";
  }
  return "unknown";
}

bool GradientSet::all_finite() const {
  for (const auto& g : grads) {
    if (!g.allFinite()) return false;
  }
  return true;
}

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename E>
void accumulate(Matrix& target, const Eigen::MatrixBase<E>& delta) {
  if (target.size() == 0) {
    target = delta;
  } else {
    target.noalias() += delta;
  }
}

template <typename E>
void accumulate(Matrix& target, const Eigen::ArrayBase<E>& delta) {
  accumulate(target, delta.matrix());
}

void accumulate(Matrix& target, Matrix&& delta) {
  if (target.size() == 0) {
    target = std::move(delta);
  } else {
    target += delta;
  }
}

// Keeps batch-sized tape buffers out of mmap.
void keep_large_buffers_on_heap() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    return true;
  }();
  (void)once;
#endif
}

std::string shape_str(Eigen::Index r, Eigen::Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

const Tape::Node& Tape::checked(NodeId id) const {
  if (id.index >= nodes_.size()) {
    throw ShapeError(nodes_.size(), "reference to unknown node " + std::to_string(id.index));
  }
  return nodes_[id.index];
}

NodeId Tape::push(Node node) {
  evaluated_ = false;
  switch (node.op) {
    case Op::constant:
    case Op::parameter:
      break;
    case Op::add:
    case Op::subtract:
    case Op::multiply:
    case Op::matmul:
    case Op::add_row:
    case Op::scale_rows:
    case Op::concat_cols:
      ++nodes_[node.b.index].uses;
      [[fallthrough]];
    default:
      ++nodes_[node.a.index].uses;
  }
  nodes_.push_back(std::move(node));
  return NodeId{nodes_.size() - 1};
}

NodeId Tape::constant(Matrix value) {
  Node n{.op = Op::constant, .rows = value.rows(), .cols = value.cols()};
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Tape::constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

NodeId Tape::parameter(std::size_t slot, Eigen::Index rows, Eigen::Index cols) {
  if (slot >= slot_shapes_.size()) slot_shapes_.resize(slot + 1, {-1, -1});
  auto& declared = slot_shapes_[slot];
  if (declared.first >= 0 && (declared.first != rows || declared.second != cols)) {
    throw ShapeError(nodes_.size(), "parameter slot " + std::to_string(slot) +
                                        " redeclared with a different shape");
  }
  declared = {rows, cols};
  leaf_slots_ = slot_shapes_.size();
  return push(Node{.op = Op::parameter, .rows = rows, .cols = cols, .slot = slot,
                   .needs_grad = true});
}

NodeId Tape::unary(Op op, NodeId a) {
  const Node& na = checked(a);
  return push(Node{.op = op, .a = a, .rows = na.rows, .cols = na.cols,
                   .needs_grad = na.needs_grad});
}

NodeId Tape::add(NodeId a, NodeId b) {
  const Node& na = checked(a);
  const Node& nb = checked(b);
  if (na.rows != nb.rows || na.cols != nb.cols) {
    throw ShapeError(nodes_.size(), "add of " + shape_str(na.rows, na.cols) + " and " +
                                        shape_str(nb.rows, nb.cols));
  }
  return push(Node{.op = Op::add, .a = a, .b = b, .rows = na.rows, .cols = na.cols,
                   .needs_grad = na.needs_grad || nb.needs_grad});
}

NodeId Tape::subtract(NodeId a, NodeId b) {
  const Node& na = checked(a);
  const Node& nb = checked(b);
  if (na.rows != nb.rows || na.cols != nb.cols) {
    throw ShapeError(nodes_.size(), "subtract of " + shape_str(na.rows, na.cols) + " and " +
                                        shape_str(nb.rows, nb.cols));
  }
  return push(Node{.op = Op::subtract, .a = a, .b = b, .rows = na.rows, .cols = na.cols,
                   .needs_grad = na.needs_grad || nb.needs_grad});
}

NodeId Tape::multiply(NodeId a, NodeId b) {
  const Node& na = checked(a);
  const Node& nb = checked(b);
  if (na.rows != nb.rows || na.cols != nb.cols) {
    throw ShapeError(nodes_.size(), "multiply of " + shape_str(na.rows, na.cols) + " and " +
                                        shape_str(nb.rows, nb.cols));
  }
  return push(Node{.op = Op::multiply, .a = a, .b = b, .rows = na.rows, .cols = na.cols,
                   .needs_grad = na.needs_grad || nb.needs_grad});
}

NodeId Tape::matmul(NodeId a, NodeId b) {
  const Node& na = checked(a);
  const Node& nb = checked(b);
  if (na.cols != nb.rows) {
    throw ShapeError(nodes_.size(), "matmul of " + shape_str(na.rows, na.cols) + " and " +
                                        shape_str(nb.rows, nb.cols));
  }
  return push(Node{.op = Op::matmul, .a = a, .b = b, .rows = na.rows, .cols = nb.cols,
                   .needs_grad = na.needs_grad || nb.needs_grad});
}

NodeId Tape::add_row(NodeId a, NodeId row) {
  const Node& na = checked(a);
  const Node& nr = checked(row);
  if (nr.rows != 1 || nr.cols != na.cols) {
    throw ShapeError(nodes_.size(), "add_row of " + shape_str(na.rows, na.cols) + " and " +
                                        shape_str(nr.rows, nr.cols));
  }
  return push(Node{.op = Op::add_row, .a = a, .b = row, .rows = na.rows, .cols = na.cols,
                   .needs_grad = na.needs_grad || nr.needs_grad});
}

NodeId Tape::scale(NodeId a, double factor) {
  const Node& na = checked(a);
  return push(Node{.op = Op::scale, .a = a, .rows = na.rows, .cols = na.cols, .param = factor,
                   .needs_grad = na.needs_grad});
}

NodeId Tape::shift(NodeId a, double offset) {
  const Node& na = checked(a);
  return push(Node{.op = Op::shift, .a = a, .rows = na.rows, .cols = na.cols, .param = offset,
                   .needs_grad = na.needs_grad});
}

NodeId Tape::scale_rows(NodeId a, NodeId s) {
  const Node& na = checked(a);
  const Node& ns = checked(s);
  if (ns.cols != 1 || ns.rows != na.rows) {
    throw ShapeError(nodes_.size(), "scale_rows of " + shape_str(na.rows, na.cols) + " by " +
                                        shape_str(ns.rows, ns.cols));
  }
  return push(Node{.op = Op::scale_rows, .a = a, .b = s, .rows = na.rows, .cols = na.cols,
                   .needs_grad = na.needs_grad || ns.needs_grad});
}

NodeId Tape::sigmoid(NodeId a) { return unary(Op::sigmoid, a); }
NodeId Tape::relu(NodeId a) { return unary(Op::relu, a); }
NodeId Tape::sin(NodeId a) { return unary(Op::sin, a); }
NodeId Tape::cos(NodeId a) { return unary(Op::cos, a); }
NodeId Tape::square(NodeId a) { return unary(Op::square, a); }
NodeId Tape::sqrt(NodeId a) { return unary(Op::sqrt, a); }

NodeId Tape::sum(NodeId a) {
  const Node& na = checked(a);
  return push(Node{.op = Op::sum, .a = a, .rows = 1, .cols = 1, .needs_grad = na.needs_grad});
}

NodeId Tape::mean(NodeId a) {
  const Node& na = checked(a);
  return push(Node{.op = Op::mean, .a = a, .rows = 1, .cols = 1, .needs_grad = na.needs_grad});
}

NodeId Tape::row_sum(NodeId a) {
  const Node& na = checked(a);
  return push(Node{.op = Op::row_sum, .a = a, .rows = na.rows, .cols = 1,
                   .needs_grad = na.needs_grad});
}

NodeId Tape::concat_cols(NodeId a, NodeId b) {
  const Node& na = checked(a);
  const Node& nb = checked(b);
  if (na.rows != nb.rows) {
    throw ShapeError(nodes_.size(), "concat_cols of " + shape_str(na.rows, na.cols) + " and " +
                                        shape_str(nb.rows, nb.cols));
  }
  return push(Node{.op = Op::concat_cols, .a = a, .b = b, .rows = na.rows,
                   .cols = na.cols + nb.cols, .needs_grad = na.needs_grad || nb.needs_grad});
}

NodeId Tape::column(NodeId a, Eigen::Index j) {
  const Node& na = checked(a);
  if (j < 0 || j >= na.cols) {
    throw ShapeError(nodes_.size(), "column " + std::to_string(j) + " of " +
                                        shape_str(na.rows, na.cols));
  }
  return push(Node{.op = Op::column, .a = a, .rows = na.rows, .cols = 1,
                   .param = static_cast<double>(j), .needs_grad = na.needs_grad});
}

NodeId Tape::stop_gradient(NodeId a) {
  const Node& na = checked(a);
  return push(Node{.op = Op::stop_gradient, .a = a, .rows = na.rows, .cols = na.cols,
                   .needs_grad = false});
}

bool Tape::steal_input(Node& n, Op producer) {
  Node& src = nodes_[n.a.index];
  if (src.op != producer || src.uses != 1) return false;
  n.value = std::move(src.value);
  src.value = Matrix();
  src.released = true;
  return true;
}

void Tape::evaluate(std::size_t index, std::span<const Matrix> leaves) {
  Node& n = nodes_[index];
  n.released = false;
  const auto in = [this](NodeId id) -> const Matrix& { return nodes_[id.index].value; };
  switch (n.op) {
    case Op::constant:
      return;  // value fixed at record time
    case Op::parameter: {
      const Matrix& leaf = leaves[n.slot];
      if (leaf.rows() != n.rows || leaf.cols() != n.cols) {
        throw ShapeError(index, "parameter slot " + std::to_string(n.slot) + " bound to " +
                                    shape_str(leaf.rows(), leaf.cols()) + ", declared " +
                                    shape_str(n.rows, n.cols));
      }
      n.value = leaf;
      break;
    }
    case Op::add: n.value = in(n.a) + in(n.b); break;
    case Op::subtract: n.value = in(n.a) - in(n.b); break;
    case Op::multiply: n.value = in(n.a).cwiseProduct(in(n.b)); break;
    case Op::matmul: n.value.noalias() = in(n.a) * in(n.b); break;
    case Op::add_row:
      if (steal_input(n, Op::matmul)) {
        n.value.rowwise() += in(n.b).row(0);
      } else {
        n.value = in(n.a).rowwise() + in(n.b).row(0);
      }
      break;
    case Op::scale: n.value = in(n.a) * n.param; break;
    case Op::shift: n.value = in(n.a).array() + n.param; break;
    case Op::scale_rows: n.value = in(n.a).array().colwise() * in(n.b).col(0).array(); break;
    case Op::sigmoid:
      if (steal_input(n, Op::add_row)) {
        n.value = n.value.unaryExpr(&stable_sigmoid);
      } else {
        n.value = in(n.a).unaryExpr(&stable_sigmoid);
      }
      break;
    case Op::relu:
      if (steal_input(n, Op::add_row)) {
        n.value = n.value.cwiseMax(0.0);
      } else {
        n.value = in(n.a).cwiseMax(0.0);
      }
      break;
    case Op::sin: n.value = in(n.a).array().sin(); break;
    case Op::cos: n.value = in(n.a).array().cos(); break;
    case Op::square: n.value = in(n.a).array().square(); break;
    case Op::sqrt: n.value = in(n.a).array().sqrt(); break;
    case Op::sum: n.value = Matrix::Constant(1, 1, in(n.a).sum()); break;
    case Op::mean: n.value = Matrix::Constant(1, 1, in(n.a).mean()); break;
    case Op::row_sum: n.value = in(n.a).rowwise().sum(); break;
    case Op::concat_cols: {
      const Matrix& a = in(n.a);
      const Matrix& b = in(n.b);
      n.value.resize(n.rows, n.cols);
      n.value.leftCols(a.cols()) = a;
      n.value.rightCols(b.cols()) = b;
      break;
    }
    case Op::column: n.value = in(n.a).col(static_cast<Eigen::Index>(n.param)); break;
    case Op::stop_gradient: n.value = in(n.a); break;
  }
  if (!n.value.allFinite()) throw NonFiniteError(index, n.op);
}

void Tape::forward(std::span<const Matrix> leaves) {
  keep_large_buffers_on_heap();
  evaluated_ = false;
  if (leaves.size() < leaf_slots_) {
    throw ShapeError(nodes_.size(), "forward bound " + std::to_string(leaves.size()) +
                                        " leaves, tape declares " + std::to_string(leaf_slots_));
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == Op::constant && !nodes_[i].value.allFinite()) {
      throw NonFiniteError(i, Op::constant);
    }
    evaluate(i, leaves);
  }
  evaluated_ = true;
}

const Matrix& Tape::value(NodeId id) const {
  if (!evaluated_) throw TapeStateError("tape value read before forward()");
  const Node& n = checked(id);
  if (n.released) {
    throw TapeStateError("node " + std::to_string(id.index) + " (" + op_name(n.op) +
                         ") was folded into its only consumer");
  }
  return n.value;
}

double Tape::scalar(NodeId id) const {
  const Matrix& v = value(id);
  if (v.size() != 1) throw ShapeError(id.index, "scalar() on " + shape_str(v.rows(), v.cols()));
  return v(0, 0);
}

GradientSet Tape::backward(NodeId output, double seed) {
  const Node& out = checked(output);
  if (out.rows != 1 || out.cols != 1) {
    throw ShapeError(output.index, "scalar seed on non-scalar output " +
                                       shape_str(out.rows, out.cols));
  }
  return backward(output, Matrix::Constant(1, 1, seed));
}

GradientSet Tape::backward(NodeId output, const Matrix& seed) {
  if (!evaluated_) throw TapeStateError("backward() called before forward()");
  const Node& out = checked(output);
  if (seed.rows() != out.rows || seed.cols() != out.cols) {
    throw ShapeError(output.index, "seed " + shape_str(seed.rows(), seed.cols()) +
                                       " for output " + shape_str(out.rows, out.cols));
  }

  GradientSet result;
  result.grads.resize(leaf_slots_);
  for (std::size_t s = 0; s < leaf_slots_; ++s) {
    const auto [r, c] = slot_shapes_[s];
    result.grads[s] = Matrix::Zero(std::max<Eigen::Index>(r, 0), std::max<Eigen::Index>(c, 0));
  }
  if (!out.needs_grad) return result;

  std::vector<Matrix> adj(output.index + 1);
  adj[output.index] = seed;

  for (std::size_t i = output.index + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (!n.needs_grad || adj[i].size() == 0) continue;
    Matrix& g = adj[i];
    const auto wants = [this](NodeId id) { return nodes_[id.index].needs_grad; };
    const auto val = [this](NodeId id) -> const Matrix& { return nodes_[id.index].value; };

    switch (n.op) {
      case Op::constant:
      case Op::stop_gradient:
        break;
      case Op::parameter:
        result.grads[n.slot] += g;
        break;
      case Op::add:
        if (wants(n.a) && wants(n.b)) {
          accumulate(adj[n.a.index], g);
          accumulate(adj[n.b.index], std::move(g));
        } else if (wants(n.a) || wants(n.b)) {
          accumulate(adj[(wants(n.a) ? n.a : n.b).index], std::move(g));
        }
        break;
      case Op::subtract:
        if (wants(n.b)) accumulate(adj[n.b.index], -g);
        if (wants(n.a)) accumulate(adj[n.a.index], std::move(g));
        break;
      case Op::multiply:
        if (wants(n.a)) accumulate(adj[n.a.index], g.cwiseProduct(val(n.b)));
        if (wants(n.b)) accumulate(adj[n.b.index], g.cwiseProduct(val(n.a)));
        break;
      case Op::matmul:
        if (wants(n.a)) accumulate(adj[n.a.index], g * val(n.b).transpose());
        if (wants(n.b)) accumulate(adj[n.b.index], val(n.a).transpose() * g);
        break;
      case Op::add_row:
        if (wants(n.b)) accumulate(adj[n.b.index], g.colwise().sum());
        if (wants(n.a)) accumulate(adj[n.a.index], std::move(g));
        break;
      case Op::scale:
        accumulate(adj[n.a.index], g * n.param);
        break;
      case Op::shift:
        accumulate(adj[n.a.index], std::move(g));
        break;
      case Op::scale_rows:
        if (wants(n.a)) {
          accumulate(adj[n.a.index], g.array().colwise() * val(n.b).col(0).array());
        }
        if (wants(n.b)) accumulate(adj[n.b.index], g.cwiseProduct(val(n.a)).rowwise().sum());
        break;
      case Op::sigmoid:
        accumulate(adj[n.a.index], g.array() * n.value.array() * (1.0 - n.value.array()));
        break;
      case Op::relu:
        accumulate(adj[n.a.index], (n.value.array() > 0.0).select(g, 0.0));
        break;
      case Op::sin:
        accumulate(adj[n.a.index], g.array() * val(n.a).array().cos());
        break;
      case Op::cos:
        accumulate(adj[n.a.index], -(g.array() * val(n.a).array().sin()));
        break;
      case Op::square:
        accumulate(adj[n.a.index], 2.0 * g.array() * val(n.a).array());
        break;
      case Op::sqrt:
        accumulate(adj[n.a.index], 0.5 * g.array() / n.value.array());
        break;
      case Op::sum: {
        const Node& na = nodes_[n.a.index];
        accumulate(adj[n.a.index], Matrix::Constant(na.rows, na.cols, g(0, 0)));
        break;
      }
      case Op::mean: {
        const Node& na = nodes_[n.a.index];
        const double count = static_cast<double>(na.rows * na.cols);
        accumulate(adj[n.a.index], Matrix::Constant(na.rows, na.cols, g(0, 0) / count));
        break;
      }
      case Op::row_sum:
        accumulate(adj[n.a.index], g.replicate(1, nodes_[n.a.index].cols));
        break;
      case Op::concat_cols: {
        const Eigen::Index left = nodes_[n.a.index].cols;
        if (wants(n.a)) accumulate(adj[n.a.index], g.leftCols(left));
        if (wants(n.b)) accumulate(adj[n.b.index], g.rightCols(n.cols - left));
        break;
      }
      case Op::column: {
        const Node& na = nodes_[n.a.index];
        Matrix full = Matrix::Zero(na.rows, na.cols);
        full.col(static_cast<Eigen::Index>(n.param)) = g.col(0);
        accumulate(adj[n.a.index], full);
        break;
      }
    }
    if (i != output.index) adj[i].resize(0, 0);
  }
  return result;
}

double finite_diff_check(const GraphBuilder& build, std::span<const Matrix> point, double step) {
  Tape tape;
  const NodeId out = build(tape);
  std::vector<Matrix> leaves(point.begin(), point.end());
  tape.forward(leaves);
  if (!std::isfinite(tape.scalar(out))) throw NonFiniteError(out.index, tape.op(out));
  const GradientSet analytic = tape.backward(out);

  const auto eval = [&]() {
    tape.forward(leaves);
    const double v = tape.scalar(out);
    if (!std::isfinite(v)) throw NonFiniteError(out.index, tape.op(out));
    return v;
  };

  double worst = 0.0;
  for (std::size_t s = 0; s < leaves.size() && s < analytic.size(); ++s) {
    for (Eigen::Index k = 0; k < leaves[s].size(); ++k) {
      double& x = leaves[s].data()[k];
      const double saved = x;
      x = saved + step;
      const double plus = eval();
      x = saved - step;
      const double minus = eval();
      x = saved;
      const double central = (plus - minus) / (2.0 * step);
      const double a = analytic[s].data()[k];
      worst = std::max(worst, std::abs(a - central) / (std::abs(a) + 1e-12));
    }
  }
  return worst;
}

}  // namespace ctphys::ad
