#pragma once

// Reverse-mode automatic differentiation over dense matrices.
//
// A Tape is a Wengert list: every operation appends one node holding its
// forward value and a closure that pushes the node's gradient onto its
// parents. Nodes are appended after their inputs, so walking the list
// backwards is a valid reverse topological order and each node's gradient is
// complete before its closure runs.

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "aesl/matrix.hpp"

namespace aesl::ad {

class Tape;

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = std::numeric_limits<std::size_t>::max();

  const Matrix& value() const;
  const Matrix& grad() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Value of a 1×1 node.
  double scalar() const;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf whose gradient is tracked (a parameter).
  Var variable(Matrix value);
  /// Leaf excluded from differentiation.
  Var constant(Matrix value);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  /// Accumulated gradient; a zero matrix of the node's shape when nothing
  /// flowed into it.
  const Matrix& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Reverse sweep seeded with d(loss)/d(loss) = 1. The loss must be 1×1.
  /// May be called once per tape.
  void backward(Var loss);

  // Used by operation implementations.
  Var push(Matrix value, std::span<const Var> parents, Backward fn);
  void accumulate(std::size_t id, const Matrix& g);

 private:
  struct Node {
    Matrix value;
    mutable Matrix grad;
    Backward backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// ---- primitive operations -------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// a · s for a 1×1 node s.
Var mul_scalar(Var a, Var s);
/// Broadcast a 1×c row over every row of a.
Var add_row(Var a, Var row);
Var mul_row(Var a, Var row);
/// Column means as a 1×c row.
Var mean_rows(Var a);
/// Each row divided by its Euclidean norm. Throws DomainError naming the
/// first row whose norm vanishes; `what` prefixes the message.
Var row_normalize(Var a, const std::string& what = "row_normalize");
Var relu(Var a);
Var sigmoid(Var a);
Var clamp(Var a, double lo, double hi);
Var arctanh(Var a);
Var square(Var a);
Var select_row(Var a, std::size_t r);
Var select_col(Var a, std::size_t c);
Var hconcat(std::span<const Var> parts);
Var sum(Var a);
/// Σ mask⊙a / Σ mask, as 1×1. Zero mask gives 0.
Var masked_mean(Var a, const Matrix& mask);

// ---- composites -----------------------------------------------------------

/// Pairwise centered cosine similarity of the rows of a (rows centered by
/// their mean). Symmetric with unit diagonal.
Var centered_cosine(Var a, const std::string& what = "centered_cosine");

}  // namespace aesl::ad
