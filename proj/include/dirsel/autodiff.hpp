#ifndef DIRSEL_AUTODIFF_HPP
#define DIRSEL_AUTODIFF_HPP

#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "dirsel/matrix.hpp"

namespace dirsel::ad {

class Tape;
class BackwardCtx;

// One recorded operation. `value` is an owned copy of the forward result;
// custom ops subclass this and implement the adjoint in backward().
class Node {
 public:
  virtual ~Node() = default;
  // Receives d(loss)/d(value) and accumulates contributions into the inputs.
  virtual void backward(const Matrix& out_grad, BackwardCtx& ctx) = 0;

  Matrix value;
  std::vector<int> inputs;
  bool requires_grad = false;
  bool is_leaf = false;
};

// Gradient accumulation interface handed to Node::backward.
class BackwardCtx {
 public:
  const Matrix& value(int id) const;
  bool needs(int id) const;  // false for constants: their gradients are skipped
  void accumulate(int id, Matrix grad);

 private:
  friend class Tape;
  BackwardCtx(const Tape& tape, std::vector<Matrix>& grads, std::vector<char>& present)
      : tape_(tape), grads_(grads), present_(present) {}
  const Tape& tape_;
  std::vector<Matrix>& grads_;
  std::vector<char>& present_;
};

// Handle into a tape; cheap to copy.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool defined() const { return tape != nullptr && id >= 0; }
};

// Gradients keyed by leaf node id.
using GradientMap = std::unordered_map<int, Matrix>;

// Append-only record of forward operations; single-threaded by design.
class Tape {
 public:
  Var leaf(Matrix value, bool requires_grad);
  Var constant(Matrix value) { return leaf(std::move(value), false); }

  // Registers a custom node whose value and inputs are already filled in.
  Var record(std::unique_ptr<Node> node);

  const Matrix& value(int id) const { return nodes_[id]->value; }
  bool requires_grad(int id) const { return nodes_[id]->requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a 1x1 loss. Returns gradients for every
  // requires_grad leaf; empty map when nothing requires gradients.
  GradientMap backward(const Var& loss);

  void clear() { nodes_.clear(); }

 private:
  std::vector<std::unique_ptr<Node>> nodes_;
};

// Elementwise and structural ops. Shape violations raise ShapeError; domain
// violations (log of non-positive, division by zero) raise DomainError.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);   // elementwise
Var div(const Var& a, const Var& b);   // elementwise
Var smul(const Var& a, double c);
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var relu(const Var& a);
Var row_softmax(const Var& a);
Var sum_all(const Var& a);                       // 1x1
Var row_sum(const Var& a);                       // n x 1
Var col_sum(const Var& a);                       // 1 x m
Var gather_cols(const Var& a, std::vector<std::size_t> idx);
Var gather_rows(const Var& a, std::vector<std::size_t> idx);
// Overwrites the listed entries with a constant; those positions pass no
// gradient back (the mask is opaque to the objective).
Var set_entries(const Var& a, std::vector<std::pair<std::size_t, std::size_t>> pos, double v);
Var reduce_max(const Var& a);                    // 1x1; gradient to first argmax
Var div_by_scalar(const Var& a, const Var& s);   // s is 1x1
Var make_diag(const Var& col);                   // n x 1 -> n x n
Var stack_rows(const std::vector<Var>& rows);    // each 1 x n
Var quad_form_trace(const Var& x, const Var& l); // tr(x^T l x), 1x1
// Differentiable Cholesky of a symmetric positive definite input.
Var cholesky(const Var& a);
// b * lower^{-T}; differentiable in both arguments.
Var tri_solve_right_transposed(const Var& b, const Var& lower);
// New leaf holding a copy of a's value; blocks gradient flow.
Var detach(const Var& a);

// Central-difference gradient check of a scalar-valued build function.
// Returns the maximum relative error max|analytic-numeric|/max(1,|numeric|).
double gradcheck(const std::function<Var(Tape&, const Var&)>& build, const Matrix& point,
                 double h = 1e-6);

}  // namespace dirsel::ad

#endif  // DIRSEL_AUTODIFF_HPP
