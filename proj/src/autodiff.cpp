#include "dirsel/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "dirsel/linalg.hpp"

namespace dirsel::ad {

namespace {

Tape& tape_of(const Var& v) {
  if (!v.defined()) throw ShapeError("autodiff: undefined Var");
  return *v.tape;
}

void require_same_tape(const Var& a, const Var& b, const char* op) {
  if (a.tape != b.tape) throw ShapeError(std::string(op) + ": vars from different tapes");
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace

const Matrix& Var::value() const { return tape_of(*this).value(id); }

const Matrix& BackwardCtx::value(int id) const { return tape_.value(id); }

bool BackwardCtx::needs(int id) const { return tape_.requires_grad(id); }

void BackwardCtx::accumulate(int id, Matrix grad) {
  if (!needs(id)) return;
  if (!tape_.value(id).same_shape(grad)) {
    throw ShapeError("backward: gradient shape mismatch for node " + std::to_string(id));
  }
  if (!present_[id]) {
    grads_[id] = std::move(grad);
    present_[id] = 1;
    return;
  }
  double* dst = grads_[id].data();
  const double* src = grad.data();
  for (std::size_t i = 0; i < grad.size(); ++i) dst[i] += src[i];
}

namespace {

class LeafNode final : public Node {
 public:
  void backward(const Matrix&, BackwardCtx&) override {}
};

}  // namespace

Var Tape::leaf(Matrix value, bool track_grad) {
  auto n = std::make_unique<LeafNode>();
  n->value = std::move(value);
  n->requires_grad = track_grad;
  n->is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::record(std::unique_ptr<Node> node) {
  bool req = false;
  for (int id : node->inputs) {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) {
      throw ShapeError("record: input id out of range");
    }
    req = req || nodes_[id]->requires_grad;
  }
  node->requires_grad = req;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

GradientMap Tape::backward(const Var& loss) {
  if (loss.tape != this) throw ShapeError("backward: loss from another tape");
  const Matrix& lv = value(loss.id);
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + std::to_string(lv.rows()) + "x" +
                     std::to_string(lv.cols()));
  }
  if (!std::isfinite(lv(0, 0))) throw NumericError("backward: loss is not finite");

  GradientMap out;
  if (!nodes_[loss.id]->requires_grad) return out;

  std::vector<Matrix> grads(nodes_.size());
  std::vector<char> present(nodes_.size(), 0);
  grads[loss.id] = Matrix(1, 1, 1.0);
  present[loss.id] = 1;
  BackwardCtx ctx(*this, grads, present);

  for (int id = loss.id; id >= 0; --id) {
    if (!present[id] || !nodes_[id]->requires_grad) continue;
    Node& n = *nodes_[id];
    if (n.is_leaf) {
      out.emplace(id, std::move(grads[id]));
    } else {
      n.backward(grads[id], ctx);
      grads[id] = Matrix();  // release as soon as consumed
    }
    present[id] = 0;
  }
  return out;
}

namespace {

// ---- elementwise -----------------------------------------------------------

class AddNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    ctx.accumulate(inputs[0], g);
    ctx.accumulate(inputs[1], g);
  }
};

class SubNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    ctx.accumulate(inputs[0], g);
    ctx.accumulate(inputs[1], scale(g, -1.0));
  }
};

class MulNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    if (ctx.needs(inputs[0])) ctx.accumulate(inputs[0], hadamard(g, ctx.value(inputs[1])));
    if (ctx.needs(inputs[1])) ctx.accumulate(inputs[1], hadamard(g, ctx.value(inputs[0])));
  }
};

class DivNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const Matrix& b = ctx.value(inputs[1]);
    if (ctx.needs(inputs[0])) {
      Matrix ga(g.rows(), g.cols());
      for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] = g.data()[i] / b.data()[i];
      ctx.accumulate(inputs[0], std::move(ga));
    }
    if (ctx.needs(inputs[1])) {
      Matrix gb(g.rows(), g.cols());
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double bi = b.data()[i];
        gb.data()[i] = -g.data()[i] * value.data()[i] / bi;
      }
      ctx.accumulate(inputs[1], std::move(gb));
    }
  }
};

class SmulNode final : public Node {
 public:
  explicit SmulNode(double c) : c_(c) {}
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    ctx.accumulate(inputs[0], scale(g, c_));
  }

 private:
  double c_;
};

class ExpNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    ctx.accumulate(inputs[0], hadamard(g, value));
  }
};

class LogNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const Matrix& a = ctx.value(inputs[0]);
    Matrix ga(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] = g.data()[i] / a.data()[i];
    ctx.accumulate(inputs[0], std::move(ga));
  }
};

class SquareNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const Matrix& a = ctx.value(inputs[0]);
    Matrix ga(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] = 2.0 * g.data()[i] * a.data()[i];
    ctx.accumulate(inputs[0], std::move(ga));
  }
};

class ReluNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const Matrix& a = ctx.value(inputs[0]);
    Matrix ga(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.size(); ++i)
      ga.data()[i] = a.data()[i] > 0.0 ? g.data()[i] : 0.0;
    ctx.accumulate(inputs[0], std::move(ga));
  }
};

// ---- structural -------------------------------------------------------------

class MatMulNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    if (ctx.needs(inputs[0]))
      ctx.accumulate(inputs[0], dirsel::matmul(g, dirsel::transpose(ctx.value(inputs[1]))));
    if (ctx.needs(inputs[1]))
      ctx.accumulate(inputs[1], dirsel::matmul(dirsel::transpose(ctx.value(inputs[0])), g));
  }
};

class TransposeNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    ctx.accumulate(inputs[0], dirsel::transpose(g));
  }
};

class RowSoftmaxNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    // x_bar = y .* (g - rowdot(g, y))
    Matrix ga(g.rows(), g.cols());
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double* y = value.row_ptr(i);
      const double* gr = g.row_ptr(i);
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += gr[j] * y[j];
      double* o = ga.row_ptr(i);
      for (std::size_t j = 0; j < g.cols(); ++j) o[j] = y[j] * (gr[j] - dot);
    }
    ctx.accumulate(inputs[0], std::move(ga));
  }
};

class SumAllNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const Matrix& a = ctx.value(inputs[0]);
    ctx.accumulate(inputs[0], Matrix(a.rows(), a.cols(), g(0, 0)));
  }
};

class RowSumNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const Matrix& a = ctx.value(inputs[0]);
    Matrix ga(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double* o = ga.row_ptr(i);
      const double gi = g(i, 0);
      for (std::size_t j = 0; j < a.cols(); ++j) o[j] = gi;
    }
    ctx.accumulate(inputs[0], std::move(ga));
  }
};

class ColSumNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const Matrix& a = ctx.value(inputs[0]);
    Matrix ga(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
      double* o = ga.row_ptr(i);
      for (std::size_t j = 0; j < a.cols(); ++j) o[j] = g(0, j);
    }
    ctx.accumulate(inputs[0], std::move(ga));
  }
};

class GatherColsNode final : public Node {
 public:
  explicit GatherColsNode(std::vector<std::size_t> idx) : idx_(std::move(idx)) {}
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const Matrix& a = ctx.value(inputs[0]);
    Matrix ga(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = 0; j < idx_.size(); ++j) ga(i, idx_[j]) += g(i, j);
    ctx.accumulate(inputs[0], std::move(ga));
  }

 private:
  std::vector<std::size_t> idx_;
};

class GatherRowsNode final : public Node {
 public:
  explicit GatherRowsNode(std::vector<std::size_t> idx) : idx_(std::move(idx)) {}
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const Matrix& a = ctx.value(inputs[0]);
    Matrix ga(a.rows(), a.cols());
    for (std::size_t i = 0; i < idx_.size(); ++i) {
      double* o = ga.row_ptr(idx_[i]);
      const double* gr = g.row_ptr(i);
      for (std::size_t j = 0; j < a.cols(); ++j) o[j] += gr[j];
    }
    ctx.accumulate(inputs[0], std::move(ga));
  }

 private:
  std::vector<std::size_t> idx_;
};

class SetEntriesNode final : public Node {
 public:
  explicit SetEntriesNode(std::vector<std::pair<std::size_t, std::size_t>> pos)
      : pos_(std::move(pos)) {}
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    Matrix ga = g;
    for (const auto& [r, c] : pos_) ga(r, c) = 0.0;  // masked entries block gradient
    ctx.accumulate(inputs[0], std::move(ga));
  }

 private:
  std::vector<std::pair<std::size_t, std::size_t>> pos_;
};

class ReduceMaxNode final : public Node {
 public:
  ReduceMaxNode(std::size_t r, std::size_t c) : r_(r), c_(c) {}
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const Matrix& a = ctx.value(inputs[0]);
    Matrix ga(a.rows(), a.cols());
    ga(r_, c_) = g(0, 0);
    ctx.accumulate(inputs[0], std::move(ga));
  }

 private:
  std::size_t r_, c_;
};

class DivByScalarNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const double s = ctx.value(inputs[1])(0, 0);
    if (ctx.needs(inputs[0])) ctx.accumulate(inputs[0], scale(g, 1.0 / s));
    if (ctx.needs(inputs[1])) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g.data()[i] * value.data()[i];
      ctx.accumulate(inputs[1], Matrix(1, 1, -acc / s));
    }
  }
};

class MakeDiagNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const std::size_t n = value.rows();
    Matrix ga(n, 1);
    for (std::size_t i = 0; i < n; ++i) ga(i, 0) = g(i, i);
    ctx.accumulate(inputs[0], std::move(ga));
  }
};

class StackRowsNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (!ctx.needs(inputs[i])) continue;
      Matrix gi(1, g.cols());
      const double* src = g.row_ptr(i);
      std::copy(src, src + g.cols(), gi.data());
      ctx.accumulate(inputs[i], std::move(gi));
    }
  }
};

class QuadFormTraceNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const double s = g(0, 0);
    const Matrix& x = ctx.value(inputs[0]);
    const Matrix& l = ctx.value(inputs[1]);
    if (ctx.needs(inputs[0])) {
      Matrix gx = dirsel::matmul(l, x);
      Matrix gxt = dirsel::matmul(dirsel::transpose(l), x);
      ctx.accumulate(inputs[0], scale(add(gx, gxt), s));
    }
    if (ctx.needs(inputs[1])) {
      ctx.accumulate(inputs[1], scale(dirsel::matmul(x, dirsel::transpose(x)), s));
    }
  }
};

// tril with halved diagonal, in place
void phi_lower_half_diag(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    m(i, i) *= 0.5;
    for (std::size_t j = i + 1; j < m.cols(); ++j) m(i, j) = 0.0;
  }
}

class CholeskyNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    // Adjoint of A = L L^T w.r.t. the lower factor; standard result:
    // A_bar = 0.5 * L^{-T} (phi(L^T L_bar) + phi(L^T L_bar)^T) L^{-1}
    const Matrix& l = value;
    Matrix lbar = g;
    for (std::size_t i = 0; i < lbar.rows(); ++i)
      for (std::size_t j = i + 1; j < lbar.cols(); ++j) lbar(i, j) = 0.0;
    Matrix p = dirsel::matmul(dirsel::transpose(l), lbar);
    phi_lower_half_diag(p);
    Matrix sym = add(p, dirsel::transpose(p));
    Matrix w = solve_lower_transposed(l, sym);       // L^{-T} sym
    Matrix abar = solve_right_lower(w, l);           // ... L^{-1}
    ctx.accumulate(inputs[0], scale(abar, 0.5));
  }
};

class TriSolveRightTNode final : public Node {
 public:
  void backward(const Matrix& g, BackwardCtx& ctx) override {
    const Matrix& l = ctx.value(inputs[1]);
    if (ctx.needs(inputs[0])) {
      ctx.accumulate(inputs[0], solve_right_lower(g, l));  // g L^{-1}
    }
    if (ctx.needs(inputs[1])) {
      // L_bar = -L^{-T} (g^T F), restricted to the lower triangle
      Matrix z = dirsel::matmul(dirsel::transpose(g), value);
      Matrix w = solve_lower_transposed(l, z);
      Matrix lbar(w.rows(), w.cols());
      for (std::size_t i = 0; i < w.rows(); ++i)
        for (std::size_t j = 0; j <= i; ++j) lbar(i, j) = -w(i, j);
      ctx.accumulate(inputs[1], std::move(lbar));
    }
  }
};

Var unary(const Var& a, std::unique_ptr<Node> n, Matrix value) {
  n->value = std::move(value);
  n->inputs = {a.id};
  return tape_of(a).record(std::move(n));
}

Var binary(const Var& a, const Var& b, std::unique_ptr<Node> n, Matrix value, const char* op) {
  require_same_tape(a, b, op);
  n->value = std::move(value);
  n->inputs = {a.id, b.id};
  return tape_of(a).record(std::move(n));
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return binary(a, b, std::make_unique<AddNode>(), dirsel::add(a.value(), b.value()), "add");
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return binary(a, b, std::make_unique<SubNode>(), dirsel::sub(a.value(), b.value()), "sub");
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return binary(a, b, std::make_unique<MulNode>(), hadamard(a.value(), b.value()), "mul");
}

Var div(const Var& a, const Var& b) {
  require_same_shape(a, b, "div");
  const Matrix& bv = b.value();
  for (std::size_t i = 0; i < bv.size(); ++i)
    if (bv.data()[i] == 0.0) throw DomainError("div: division by zero");
  Matrix out(bv.rows(), bv.cols());
  for (std::size_t i = 0; i < bv.size(); ++i) out.data()[i] = a.value().data()[i] / bv.data()[i];
  return binary(a, b, std::make_unique<DivNode>(), std::move(out), "div");
}

Var smul(const Var& a, double c) {
  return unary(a, std::make_unique<SmulNode>(c), scale(a.value(), c));
}

Var matmul(const Var& a, const Var& b) {
  require_same_tape(a, b, "matmul");
  return binary(a, b, std::make_unique<MatMulNode>(), dirsel::matmul(a.value(), b.value()),
                "matmul");
}

Var transpose(const Var& a) {
  return unary(a, std::make_unique<TransposeNode>(), dirsel::transpose(a.value()));
}

Var exp(const Var& a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.data()[i] = std::exp(av.data()[i]);
  return unary(a, std::make_unique<ExpNode>(), std::move(out));
}

Var log(const Var& a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) {
    if (av.data()[i] <= 0.0) throw DomainError("log: non-positive input");
    out.data()[i] = std::log(av.data()[i]);
  }
  return unary(a, std::make_unique<LogNode>(), std::move(out));
}

Var square(const Var& a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.data()[i] = av.data()[i] * av.data()[i];
  return unary(a, std::make_unique<SquareNode>(), std::move(out));
}

Var relu(const Var& a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.size(); ++i) out.data()[i] = std::max(0.0, av.data()[i]);
  return unary(a, std::make_unique<ReluNode>(), std::move(out));
}

Var row_softmax(const Var& a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    const double* r = av.row_ptr(i);
    double m = r[0];
    for (std::size_t j = 1; j < av.cols(); ++j) m = std::max(m, r[j]);
    double denom = 0.0;
    double* o = out.row_ptr(i);
    for (std::size_t j = 0; j < av.cols(); ++j) {
      o[j] = std::exp(r[j] - m);
      denom += o[j];
    }
    for (std::size_t j = 0; j < av.cols(); ++j) o[j] /= denom;
  }
  return unary(a, std::make_unique<RowSoftmaxNode>(), std::move(out));
}

Var sum_all(const Var& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.value().size(); ++i) s += a.value().data()[i];
  return unary(a, std::make_unique<SumAllNode>(), Matrix(1, 1, s));
}

Var row_sum(const Var& a) {
  const Matrix& av = a.value();
  Matrix out(av.rows(), 1);
  for (std::size_t i = 0; i < av.rows(); ++i) {
    const double* r = av.row_ptr(i);
    double s = 0.0;
    for (std::size_t j = 0; j < av.cols(); ++j) s += r[j];
    out(i, 0) = s;
  }
  return unary(a, std::make_unique<RowSumNode>(), std::move(out));
}

Var col_sum(const Var& a) {
  const Matrix& av = a.value();
  Matrix out(1, av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i) {
    const double* r = av.row_ptr(i);
    for (std::size_t j = 0; j < av.cols(); ++j) out(0, j) += r[j];
  }
  return unary(a, std::make_unique<ColSumNode>(), std::move(out));
}

Var gather_cols(const Var& a, std::vector<std::size_t> idx) {
  const Matrix& av = a.value();
  for (std::size_t j : idx)
    if (j >= av.cols()) throw ShapeError("gather_cols: index out of range");
  Matrix out(av.rows(), idx.size());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < idx.size(); ++j) out(i, j) = av(i, idx[j]);
  return unary(a, std::make_unique<GatherColsNode>(idx), std::move(out));
}

Var gather_rows(const Var& a, std::vector<std::size_t> idx) {
  const Matrix& av = a.value();
  for (std::size_t i : idx)
    if (i >= av.rows()) throw ShapeError("gather_rows: index out of range");
  Matrix out(idx.size(), av.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const double* src = av.row_ptr(idx[i]);
    std::copy(src, src + av.cols(), out.row_ptr(i));
  }
  return unary(a, std::make_unique<GatherRowsNode>(idx), std::move(out));
}

Var set_entries(const Var& a, std::vector<std::pair<std::size_t, std::size_t>> pos, double v) {
  const Matrix& av = a.value();
  Matrix out = av;
  for (const auto& [r, c] : pos) {
    if (r >= av.rows() || c >= av.cols()) throw ShapeError("set_entries: index out of range");
    out(r, c) = v;
  }
  return unary(a, std::make_unique<SetEntriesNode>(std::move(pos)), std::move(out));
}

Var reduce_max(const Var& a) {
  const Matrix& av = a.value();
  if (av.size() == 0) throw ShapeError("reduce_max: empty input");
  std::size_t br = 0, bc = 0;
  double best = av(0, 0);
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j)
      if (av(i, j) > best) {
        best = av(i, j);
        br = i;
        bc = j;
      }
  return unary(a, std::make_unique<ReduceMaxNode>(br, bc), Matrix(1, 1, best));
}

Var div_by_scalar(const Var& a, const Var& s) {
  require_same_tape(a, s, "div_by_scalar");
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("div_by_scalar: scalar must be 1x1");
  const double sv = s.value()(0, 0);
  if (sv == 0.0) throw DomainError("div_by_scalar: division by zero");
  return binary(a, s, std::make_unique<DivByScalarNode>(), scale(a.value(), 1.0 / sv),
                "div_by_scalar");
}

Var make_diag(const Var& col) {
  const Matrix& cv = col.value();
  if (cv.cols() != 1) throw ShapeError("make_diag: input must be a column");
  Matrix out(cv.rows(), cv.rows());
  for (std::size_t i = 0; i < cv.rows(); ++i) out(i, i) = cv(i, 0);
  return unary(col, std::make_unique<MakeDiagNode>(), std::move(out));
}

Var stack_rows(const std::vector<Var>& rows) {
  if (rows.empty()) throw ShapeError("stack_rows: no rows");
  const std::size_t n = rows.front().cols();
  Matrix out(rows.size(), n);
  auto node = std::make_unique<StackRowsNode>();
  node->inputs.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    require_same_tape(rows.front(), rows[i], "stack_rows");
    const Matrix& rv = rows[i].value();
    if (rv.rows() != 1 || rv.cols() != n) throw ShapeError("stack_rows: rows must all be 1xN");
    std::copy(rv.data(), rv.data() + n, out.row_ptr(i));
    node->inputs.push_back(rows[i].id);
  }
  node->value = std::move(out);
  return tape_of(rows.front()).record(std::move(node));
}

Var quad_form_trace(const Var& x, const Var& l) {
  require_same_tape(x, l, "quad_form_trace");
  const Matrix& xv = x.value();
  const Matrix& lv = l.value();
  if (lv.rows() != lv.cols() || lv.rows() != xv.rows()) {
    throw ShapeError("quad_form_trace: need x n-by-m and l n-by-n");
  }
  const Matrix lx = dirsel::matmul(lv, xv);
  double t = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) t += xv.data()[i] * lx.data()[i];
  auto node = std::make_unique<QuadFormTraceNode>();
  node->value = Matrix(1, 1, t);
  node->inputs = {x.id, l.id};
  return tape_of(x).record(std::move(node));
}

Var cholesky(const Var& a) {
  CholeskyFactor f = dirsel::cholesky(a.value());
  return unary(a, std::make_unique<CholeskyNode>(), std::move(f.lower));
}

Var tri_solve_right_transposed(const Var& b, const Var& lower) {
  require_same_tape(b, lower, "tri_solve_right_transposed");
  Matrix out = solve_right_lower_transposed(b.value(), lower.value());
  auto node = std::make_unique<TriSolveRightTNode>();
  node->value = std::move(out);
  node->inputs = {b.id, lower.id};
  return tape_of(b).record(std::move(node));
}

Var detach(const Var& a) { return tape_of(a).constant(a.value()); }

double gradcheck(const std::function<Var(Tape&, const Var&)>& build, const Matrix& point,
                 double h) {
  Matrix analytic;
  {
    Tape tape;
    Var x = tape.leaf(point, true);
    Var loss = build(tape, x);
    GradientMap g = tape.backward(loss);
    auto it = g.find(x.id);
    if (it == g.end()) throw NumericError("gradcheck: no gradient reached the input");
    analytic = it->second;
  }
  auto eval = [&](const Matrix& p) {
    Tape tape;
    Var x = tape.leaf(p, false);
    Var loss = build(tape, x);
    return loss.value()(0, 0);
  };
  double max_rel = 0.0;
  Matrix p = point;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double orig = p.data()[i];
    p.data()[i] = orig + h;
    const double fp = eval(p);
    p.data()[i] = orig - h;
    const double fm = eval(p);
    p.data()[i] = orig;
    const double numeric = (fp - fm) / (2.0 * h);
    const double rel =
        std::fabs(analytic.data()[i] - numeric) / std::max(1.0, std::fabs(numeric));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace dirsel::ad
