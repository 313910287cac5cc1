#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ctphys::ad {

using Matrix = Eigen::MatrixXd;

/// Handle to a node on a Tape. Only meaningful for the tape that issued it.
struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

enum class Op {
  constant,
  parameter,
  add,
  subtract,
  multiply,
  matmul,
  add_row,
  scale,
  shift,
  scale_rows,
  sigmoid,
  relu,
  sin,
  cos,
  square,
  sqrt,
  sum,
  mean,
  row_sum,
  concat_cols,
  column,
  stop_gradient,
};

const char* op_name(Op op);

class ShapeError : public std::invalid_argument {
 public:
  ShapeError(std::size_t node, const std::string& what)
      : std::invalid_argument("node " + std::to_string(node) + ": " + what), node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::size_t node, Op op)
      : std::runtime_error("non-finite value at node " + std::to_string(node) + " (" +
                           op_name(op) + ")"),
        node_(node) {}
  std::size_t node() const { return node_; }

 private:
  std::size_t node_;
};

class TapeStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Per-parameter-leaf gradient buffers, indexed by leaf slot.
struct GradientSet {
  std::vector<Matrix> grads;

  std::size_t size() const { return grads.size(); }
  const Matrix& operator[](std::size_t slot) const { return grads[slot]; }
  Matrix& operator[](std::size_t slot) { return grads[slot]; }
  bool all_finite() const;
};

/// Reverse-mode tape over dense matrices. Rows are batch samples.
///
/// Nodes are recorded in topological order as the graph is built; values are
/// computed by forward() from the bound parameter leaves, adjoints by
/// backward(). Shapes are inferred at record time, so malformed graphs are
/// rejected before any evaluation.
class Tape {
 public:
  NodeId constant(Matrix value);
  NodeId constant(double value);
  /// Leaf bound to `leaves[slot]` at forward time.
  NodeId parameter(std::size_t slot, Eigen::Index rows, Eigen::Index cols);

  NodeId add(NodeId a, NodeId b);
  NodeId subtract(NodeId a, NodeId b);
  NodeId multiply(NodeId a, NodeId b);
  /// (r x k) * (k x m)
  NodeId matmul(NodeId a, NodeId b);
  /// Adds a 1 x k row to every row of an r x k matrix.
  NodeId add_row(NodeId a, NodeId row);
  NodeId scale(NodeId a, double factor);
  NodeId shift(NodeId a, double offset);
  /// Multiplies row i of an r x k matrix by s(i, 0) for an r x 1 column s.
  NodeId scale_rows(NodeId a, NodeId s);
  NodeId sigmoid(NodeId a);
  NodeId relu(NodeId a);
  NodeId sin(NodeId a);
  NodeId cos(NodeId a);
  NodeId square(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId sum(NodeId a);
  NodeId mean(NodeId a);
  NodeId row_sum(NodeId a);
  NodeId concat_cols(NodeId a, NodeId b);
  NodeId column(NodeId a, Eigen::Index j);
  NodeId stop_gradient(NodeId a);

  /// Evaluates every node. `leaves` must cover every parameter slot with the
  /// declared shape. Throws ShapeError or NonFiniteError.
  void forward(std::span<const Matrix> leaves);

  /// Accumulates d(output)/d(leaf) for every slot bound in the last forward().
  GradientSet backward(NodeId output, double seed = 1.0);
  GradientSet backward(NodeId output, const Matrix& seed);

  /// Throws TapeStateError for an intermediate whose buffer was reused by its
  /// only consumer (a matmul feeding add_row, or add_row feeding an activation).
  const Matrix& value(NodeId id) const;
  double scalar(NodeId id) const;
  Eigen::Index rows(NodeId id) const { return nodes_.at(id.index).rows; }
  Eigen::Index cols(NodeId id) const { return nodes_.at(id.index).cols; }
  Op op(NodeId id) const { return nodes_.at(id.index).op; }
  std::size_t size() const { return nodes_.size(); }
  bool evaluated() const { return evaluated_; }

 private:
  struct Node {
    Op op;
    NodeId a{};
    NodeId b{};
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    double param = 0.0;     // scale factor, shift offset, column index
    std::size_t slot = 0;   // parameter leaves
    bool needs_grad = false;
    std::size_t uses = 0;
    // value moved into the single consumer (matmul -> add_row -> activation)
    bool released = false;
    Matrix value;
  };

  NodeId push(Node node);
  /// Takes over the input's buffer when this node is its only consumer.
  bool steal_input(Node& n, Op producer);
  NodeId unary(Op op, NodeId a);
  const Node& checked(NodeId id) const;
  void evaluate(std::size_t index, std::span<const Matrix> leaves);

  std::vector<Node> nodes_;
  std::size_t leaf_slots_ = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> slot_shapes_;
  bool evaluated_ = false;
};

/// Builds a scalar-valued graph on a fresh tape; leaves are parameter slots.
using GraphBuilder = std::function<NodeId(Tape&)>;

/// Max over every leaf coordinate of |analytic - central| / (|analytic| + 1e-12)
/// where central = (f(p + h e_i) - f(p - h e_i)) / 2h. The graph is recorded
/// once and re-evaluated at each perturbed point.
double finite_diff_check(const GraphBuilder& build, std::span<const Matrix> point, double step);

}  // namespace ctphys::ad
