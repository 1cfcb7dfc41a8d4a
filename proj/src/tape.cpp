#include "aesl/tape.hpp"

#include <algorithm>
#include <cmath>

#include "aesl/error.hpp"
#include "aesl/kernels.hpp"

namespace aesl::ad {

const Matrix& Var::value() const { return tape->value(id); }
const Matrix& Var::grad() const { return tape->grad(id); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("scalar(): node is " + v.shape_string());
  return v(0, 0);
}

Var Tape::variable(Matrix value) {
  nodes_.push_back({std::move(value), {}, nullptr, true});
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), {}, nullptr, false});
  return {this, nodes_.size() - 1};
}

const Matrix& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::push(Matrix value, std::span<const Var> parents, Backward fn) {
  bool rg = false;
  for (const Var& p : parents) {
    if (p.tape != this) throw Error("tape: operand belongs to a different tape");
    rg = rg || nodes_[p.id].requires_grad;
  }
  nodes_.push_back({std::move(value), {}, rg ? std::move(fn) : nullptr, rg});
  return {this, nodes_.size() - 1};
}

void Tape::accumulate(std::size_t id, const Matrix& g) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.empty()) {
    n.grad = g;
    return;
  }
  auto dst = n.grad.values();
  auto src = g.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw Error("backward: loss node belongs to a different tape");
  const Matrix& lv = nodes_[loss.id].value;
  if (lv.rows() != 1 || lv.cols() != 1)
    throw ShapeError("backward: loss must be scalar, got " + lv.shape_string());
  if (backward_done_) throw Error("backward: tape already differentiated");
  backward_done_ = true;
  if (!nodes_[loss.id].requires_grad) return;
  nodes_[loss.id].grad = Matrix(1, 1, 1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    // The closure may append to other nodes' grads but never to nodes_.
    n.backward(*this, n.grad);
  }
}

namespace {

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw Error("tape: uninitialised Var");
  return *a.tape;
}

void require_same(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
}

template <class F>
Matrix map(const Matrix& a, F f) {
  Matrix out = a;
  for (double& v : out.values()) v = f(v);
  return out;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  Matrix out = aesl::matmul(av, bv);
  const Var parents[] = {a, b};
  return t.push(std::move(out), parents, [a, b](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(a.id);
    const Matrix& bv = tp.value(b.id);
    if (tp.requires_grad(a.id)) {
      Matrix ga(av.rows(), av.cols());
      kernels::gemm_nt(g.values().data(), bv.values().data(), ga.values().data(),
                       {av.rows(), bv.cols(), av.cols()});
      tp.accumulate(a.id, ga);
    }
    if (tp.requires_grad(b.id)) {
      Matrix gb(bv.rows(), bv.cols());
      kernels::gemm_tn(av.values().data(), g.values().data(), gb.values().data(),
                       {bv.rows(), av.rows(), bv.cols()});
      tp.accumulate(b.id, gb);
    }
  });
}

Var transpose(Var a) {
  const Var parents[] = {a};
  return tape_of(a).push(a.value().transposed(), parents, [a](Tape& tp, const Matrix& g) {
    tp.accumulate(a.id, g.transposed());
  });
}

Var add(Var a, Var b) {
  require_same(a.value(), b.value(), "add");
  const Var parents[] = {a, b};
  return tape_of(a).push(a.value() + b.value(), parents, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a.id, g);
    tp.accumulate(b.id, g);
  });
}

Var sub(Var a, Var b) {
  require_same(a.value(), b.value(), "sub");
  const Var parents[] = {a, b};
  return tape_of(a).push(a.value() - b.value(), parents, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a.id, g);
    tp.accumulate(b.id, -1.0 * g);
  });
}

Var hadamard(Var a, Var b) {
  require_same(a.value(), b.value(), "hadamard");
  Matrix out = a.value();
  auto bv = b.value().values();
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] *= bv[i];
  const Var parents[] = {a, b};
  return tape_of(a).push(std::move(out), parents, [a, b](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(a.id);
    const Matrix& bv = tp.value(b.id);
    Matrix ga = g;
    Matrix gb = g;
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga.values()[i] *= bv.values()[i];
      gb.values()[i] *= av.values()[i];
    }
    tp.accumulate(a.id, ga);
    tp.accumulate(b.id, gb);
  });
}

Var scale(Var a, double s) {
  const Var parents[] = {a};
  return tape_of(a).push(s * a.value(), parents, [a, s](Tape& tp, const Matrix& g) {
    tp.accumulate(a.id, s * g);
  });
}

Var mul_scalar(Var a, Var s) {
  const double sv = s.scalar();
  const Var parents[] = {a, s};
  return tape_of(a).push(sv * a.value(), parents, [a, s](Tape& tp, const Matrix& g) {
    const double sv = tp.value(s.id)(0, 0);
    tp.accumulate(a.id, sv * g);
    if (tp.requires_grad(s.id)) {
      double acc = 0.0;
      const auto av = tp.value(a.id).values();
      for (std::size_t i = 0; i < g.size(); ++i) acc += g.values()[i] * av[i];
      tp.accumulate(s.id, Matrix(1, 1, acc));
    }
  });
}

Var add_row(Var a, Var row) {
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols())
    throw ShapeError("add_row: " + av.shape_string() + " + row " + rv.shape_string());
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += rv(0, c);
  const Var parents[] = {a, row};
  return tape_of(a).push(std::move(out), parents, [a, row](Tape& tp, const Matrix& g) {
    tp.accumulate(a.id, g);
    if (tp.requires_grad(row.id)) {
      Matrix gr(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gr(0, c) += g(r, c);
      tp.accumulate(row.id, gr);
    }
  });
}

Var mul_row(Var a, Var row) {
  const Matrix& av = a.value();
  const Matrix& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols())
    throw ShapeError("mul_row: " + av.shape_string() + " * row " + rv.shape_string());
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) *= rv(0, c);
  const Var parents[] = {a, row};
  return tape_of(a).push(std::move(out), parents, [a, row](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(a.id);
    const Matrix& rv = tp.value(row.id);
    if (tp.requires_grad(a.id)) {
      Matrix ga = g;
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) *= rv(0, c);
      tp.accumulate(a.id, ga);
    }
    if (tp.requires_grad(row.id)) {
      Matrix gr(1, g.cols());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gr(0, c) += g(r, c) * av(r, c);
      tp.accumulate(row.id, gr);
    }
  });
}

Var mean_rows(Var a) {
  const Matrix& av = a.value();
  if (av.rows() == 0) throw ShapeError("mean_rows: no rows");
  Matrix out(1, av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r)
    for (std::size_t c = 0; c < av.cols(); ++c) out(0, c) += av(r, c);
  const double inv = 1.0 / static_cast<double>(av.rows());
  for (double& v : out.values()) v *= inv;
  const Var parents[] = {a};
  return tape_of(a).push(std::move(out), parents, [a](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(a.id);
    const double inv = 1.0 / static_cast<double>(av.rows());
    Matrix ga(av.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r)
      for (std::size_t c = 0; c < av.cols(); ++c) ga(r, c) = g(0, c) * inv;
    tp.accumulate(a.id, ga);
  });
}

Var row_normalize(Var a, const std::string& what) {
  const Matrix& av = a.value();
  Matrix out = av;
  std::vector<double> norms(av.rows());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double ss = 0.0;
    for (double v : av.row_span(r)) ss += v * v;
    const double n = std::sqrt(ss);
    // NaN passes through so the trainer can report divergence.
    if (n <= 1e-12)
      throw DomainError(what + ": row " + std::to_string(r) +
                        " has zero centered norm (equals the mean)");
    norms[r] = n;
    for (double& v : out.row_span(r)) v /= n;
  }
  const Var parents[] = {a};
  return tape_of(a).push(std::move(out), parents,
                        [a, norms = std::move(norms)](Tape& tp, const Matrix& g) {
                          // d(x/‖x‖) = (g − u·(uᵀg)) / ‖x‖ with u = x/‖x‖
                          const Matrix& av = tp.value(a.id);
                          Matrix ga(av.rows(), av.cols());
                          for (std::size_t r = 0; r < av.rows(); ++r) {
                            const double n = norms[r];
                            double dot = 0.0;
                            for (std::size_t c = 0; c < av.cols(); ++c)
                              dot += g(r, c) * av(r, c) / n;
                            for (std::size_t c = 0; c < av.cols(); ++c)
                              ga(r, c) = (g(r, c) - dot * av(r, c) / n) / n;
                          }
                          tp.accumulate(a.id, ga);
                        });
}

Var relu(Var a) {
  const Var parents[] = {a};
  return tape_of(a).push(map(a.value(), [](double v) { return v < 0.0 ? 0.0 : v; }), parents,
                         [a](Tape& tp, const Matrix& g) {
                           const Matrix& av = tp.value(a.id);
                           Matrix ga = g;
                           for (std::size_t i = 0; i < ga.size(); ++i)
                             if (!(av.values()[i] > 0.0)) ga.values()[i] = 0.0;
                           tp.accumulate(a.id, ga);
                         });
}

namespace {
double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Var sigmoid(Var a) {
  const Var parents[] = {a};
  return tape_of(a).push(map(a.value(), sigmoid_scalar), parents,
                         [a](Tape& tp, const Matrix& g) {
                           const Matrix& av = tp.value(a.id);
                           Matrix ga = g;
                           for (std::size_t i = 0; i < ga.size(); ++i) {
                             const double s = sigmoid_scalar(av.values()[i]);
                             ga.values()[i] *= s * (1.0 - s);
                           }
                           tp.accumulate(a.id, ga);
                         });
}

Var clamp(Var a, double lo, double hi) {
  const Var parents[] = {a};
  return tape_of(a).push(map(a.value(), [lo, hi](double v) { return std::clamp(v, lo, hi); }),
                         parents, [a, lo, hi](Tape& tp, const Matrix& g) {
                           const Matrix& av = tp.value(a.id);
                           Matrix ga = g;
                           for (std::size_t i = 0; i < ga.size(); ++i) {
                             const double v = av.values()[i];
                             if (v < lo || v > hi) ga.values()[i] = 0.0;
                           }
                           tp.accumulate(a.id, ga);
                         });
}

Var arctanh(Var a) {
  for (double v : a.value().values())
    if (v <= -1.0 || v >= 1.0) throw DomainError("arctanh: argument outside (-1, 1)");
  const Var parents[] = {a};
  return tape_of(a).push(map(a.value(), [](double v) { return std::atanh(v); }), parents,
                         [a](Tape& tp, const Matrix& g) {
                           const Matrix& av = tp.value(a.id);
                           Matrix ga = g;
                           for (std::size_t i = 0; i < ga.size(); ++i) {
                             const double v = av.values()[i];
                             ga.values()[i] /= (1.0 - v * v);
                           }
                           tp.accumulate(a.id, ga);
                         });
}

Var square(Var a) {
  const Var parents[] = {a};
  return tape_of(a).push(map(a.value(), [](double v) { return v * v; }), parents,
                         [a](Tape& tp, const Matrix& g) {
                           const Matrix& av = tp.value(a.id);
                           Matrix ga = g;
                           for (std::size_t i = 0; i < ga.size(); ++i)
                             ga.values()[i] *= 2.0 * av.values()[i];
                           tp.accumulate(a.id, ga);
                         });
}

Var select_row(Var a, std::size_t r) {
  const Matrix& av = a.value();
  if (r >= av.rows()) throw ShapeError("select_row: row " + std::to_string(r) + " of " +
                                       av.shape_string());
  const Var parents[] = {a};
  return tape_of(a).push(Matrix::row(av.row_span(r)), parents, [a, r](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(a.id);
    Matrix ga(av.rows(), av.cols());
    for (std::size_t c = 0; c < av.cols(); ++c) ga(r, c) = g(0, c);
    tp.accumulate(a.id, ga);
  });
}

Var select_col(Var a, std::size_t c) {
  const Matrix& av = a.value();
  if (c >= av.cols()) throw ShapeError("select_col: col " + std::to_string(c) + " of " +
                                       av.shape_string());
  const Var parents[] = {a};
  return tape_of(a).push(av.col_block(c, 1), parents, [a, c](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(a.id);
    Matrix ga(av.rows(), av.cols());
    for (std::size_t r = 0; r < av.rows(); ++r) ga(r, c) = g(r, 0);
    tp.accumulate(a.id, ga);
  });
}

Var hconcat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("hconcat: no operands");
  Matrix out = parts[0].value();
  for (std::size_t i = 1; i < parts.size(); ++i) out = aesl::hconcat(out, parts[i].value());
  std::vector<Var> ps(parts.begin(), parts.end());
  return tape_of(parts[0]).push(std::move(out), parts, [ps](Tape& tp, const Matrix& g) {
    std::size_t offset = 0;
    for (const Var& p : ps) {
      const std::size_t w = tp.value(p.id).cols();
      if (tp.requires_grad(p.id)) tp.accumulate(p.id, g.col_block(offset, w));
      offset += w;
    }
  });
}

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  const Var parents[] = {a};
  return tape_of(a).push(Matrix(1, 1, acc), parents, [a](Tape& tp, const Matrix& g) {
    const Matrix& av = tp.value(a.id);
    tp.accumulate(a.id, Matrix(av.rows(), av.cols(), g(0, 0)));
  });
}

Var masked_mean(Var a, const Matrix& mask) {
  require_same(a.value(), mask, "masked_mean");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    num += mask.values()[i] * a.value().values()[i];
    den += mask.values()[i];
  }
  const double value = den > 0.0 ? num / den : 0.0;
  const Var parents[] = {a};
  return tape_of(a).push(Matrix(1, 1, value), parents, [a, mask, den](Tape& tp, const Matrix& g) {
    if (!(den > 0.0)) return;
    tp.accumulate(a.id, (g(0, 0) / den) * mask);
  });
}

Var centered_cosine(Var a, const std::string& what) {
  Var centered = add_row(a, scale(mean_rows(a), -1.0));
  Var unit = row_normalize(centered, what);
  return matmul(unit, transpose(unit));
}

}  // namespace aesl::ad
