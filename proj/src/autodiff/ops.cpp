#include "role/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "role/kernels.hpp"
#include "role/tape.hpp"

namespace role::ad {

using detail::Node;

namespace {

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw ShapeError(std::string(op) + ": " + detail);
}

void require_defined(const char* op, const Tensor& t) {
  if (!t.defined()) shape_error(op, "undefined operand");
}

Tape* tape_for(std::initializer_list<const Tensor*> inputs) {
  Tape* tape = active_tape();
  if (!tape) return nullptr;
  for (const Tensor* t : inputs) {
    if (t->defined() && t->requires_grad()) return tape;
  }
  return nullptr;
}

Tape* tape_for(std::span<const Tensor> inputs) {
  Tape* tape = active_tape();
  if (!tape) return nullptr;
  for (const Tensor& t : inputs) {
    if (t.requires_grad()) return tape;
  }
  return nullptr;
}

// Gradient buffer of an operand, or an empty span when it takes no gradient.
std::span<double> grad_of(Node* n) {
  return n && n->requires_grad ? n->ensure_grad() : std::span<double>{};
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  require_defined(op, a);
  require_defined(op, b);
  if (a.shape() != b.shape()) shape_error(op, a.shape().str() + " vs " + b.shape().str());
}

void require_vector(const char* op, const Tensor& t) {
  require_defined(op, t);
  if (t.rank() != 1) shape_error(op, "expected a vector, got " + t.shape().str());
}

void require_matrix(const char* op, const Tensor& t) {
  require_defined(op, t);
  if (t.rank() != 2) shape_error(op, "expected a matrix, got " + t.shape().str());
}

// Elementwise unary op with derivative expressed through (input, output).
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  Tensor out = make_result(a.shape());
  auto x = a.data();
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  if (Tape* tape = tape_for({&a})) {
    Node* o = out.node();
    Node* an = a.node();
    tape->record(out, {a}, [o, an, deriv] {
      auto ga = an->ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o->grad[i] * deriv(an->value[i], o->value[i]);
    });
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Tensor matvec(const Tensor& w, const Tensor& x) {
  require_matrix("matvec", w);
  require_vector("matvec", x);
  const std::size_t m = w.rows(), n = w.cols();
  if (x.numel() != n) shape_error("matvec", w.shape().str() + " * " + x.shape().str());
  Tensor out = make_result(Shape{m});
  kernels::gemv(w.data(), m, n, x.data(), out.mutable_data());
  if (Tape* tape = tape_for({&w, &x})) {
    Node *o = out.node(), *wn = w.node(), *xn = x.node();
    tape->record(out, {w, x}, [o, wn, xn, m, n] {
      if (auto gw = grad_of(wn); !gw.empty()) kernels::ger(1.0, o->grad, xn->value, gw);
      if (auto gx = grad_of(xn); !gx.empty()) kernels::gemv_t(wn->value, m, n, o->grad, gx);
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) shape_error("matmul", a.shape().str() + " * " + b.shape().str());
  Tensor out = make_result(Shape{m, n});
  kernels::gemm(kernels::Trans::No, kernels::Trans::No, m, n, k, a.data(), b.data(),
                out.mutable_data());
  if (Tape* tape = tape_for({&a, &b})) {
    Node *o = out.node(), *an = a.node(), *bn = b.node();
    tape->record(out, {a, b}, [o, an, bn, m, n, k] {
      using kernels::Trans;
      // dA = dC B^T, dB = A^T dC
      if (auto ga = grad_of(an); !ga.empty())
        kernels::gemm(Trans::No, Trans::Yes, m, k, n, o->grad, bn->value, ga);
      if (auto gb = grad_of(bn); !gb.empty())
        kernels::gemm(Trans::Yes, Trans::No, k, n, m, an->value, o->grad, gb);
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
  require_matrix("linear", w);
  require_defined("linear", x);
  const std::size_t out_dim = w.rows(), in_dim = w.cols();
  if (bias.defined() && (bias.rank() != 1 || bias.numel() != out_dim)) {
    shape_error("linear", "bias " + bias.shape().str() + " for weight " + w.shape().str());
  }
  const bool batched = x.rank() == 2;
  if (!(x.rank() == 1 || batched) || (batched ? x.cols() : x.numel()) != in_dim) {
    shape_error("linear", "input " + x.shape().str() + " for weight " + w.shape().str());
  }
  const std::size_t batch = batched ? x.rows() : 1;
  Tensor out = make_result(batched ? Shape{batch, out_dim} : Shape{out_dim});
  auto y = out.mutable_data();
  if (bias.defined()) {
    for (std::size_t r = 0; r < batch; ++r) std::copy_n(bias.data().begin(), out_dim, y.begin() + r * out_dim);
  }
  if (batch >= 4) {
    kernels::gemm(kernels::Trans::No, kernels::Trans::Yes, batch, out_dim, in_dim, x.data(),
                  w.data(), y);
  } else {
    // Tiny batches: row-wise gemv avoids packing a transposed copy of W.
    for (std::size_t r = 0; r < batch; ++r) {
      kernels::gemv(w.data(), out_dim, in_dim, x.data().subspan(r * in_dim, in_dim),
                    y.subspan(r * out_dim, out_dim));
    }
  }
  if (Tape* tape = tape_for({&x, &w, &bias})) {
    Node *o = out.node(), *xn = x.node(), *wn = w.node(), *bn = bias.node();
    std::vector<Tensor> inputs{x, w};
    if (bias.defined()) inputs.push_back(bias);
    tape->record(out, std::move(inputs), [o, xn, wn, bn, batched, batch, in_dim, out_dim] {
      using kernels::Trans;
      if (auto gx = grad_of(xn); !gx.empty()) {
        if (batched) {
          kernels::gemm(Trans::No, Trans::No, batch, in_dim, out_dim, o->grad, wn->value, gx);
        } else {
          kernels::gemv_t(wn->value, out_dim, in_dim, o->grad, gx);
        }
      }
      if (auto gw = grad_of(wn); !gw.empty()) {
        if (batched) {
          kernels::gemm(Trans::Yes, Trans::No, out_dim, in_dim, batch, o->grad, xn->value, gw);
        } else {
          kernels::ger(1.0, o->grad, xn->value, gw);
        }
      }
      if (auto gb = grad_of(bn); !gb.empty()) {
        for (std::size_t r = 0; r < batch; ++r) {
          for (std::size_t j = 0; j < out_dim; ++j) gb[j] += o->grad[r * out_dim + j];
        }
      }
    });
  }
  return out;
}

Tensor outer(const Tensor& a, const Tensor& b) {
  require_vector("outer", a);
  require_vector("outer", b);
  const std::size_t m = a.numel(), n = b.numel();
  Tensor out = make_result(Shape{m, n});
  kernels::ger(1.0, a.data(), b.data(), out.mutable_data());
  if (Tape* tape = tape_for({&a, &b})) {
    Node *o = out.node(), *an = a.node(), *bn = b.node();
    tape->record(out, {a, b}, [o, an, bn, m, n] {
      // d a = G b, d b = G^T a
      if (auto ga = grad_of(an); !ga.empty()) kernels::gemv(o->grad, m, n, bn->value, ga);
      if (auto gb = grad_of(bn); !gb.empty()) kernels::gemv_t(o->grad, m, n, an->value, gb);
    });
  }
  return out;
}

Tensor dot(const Tensor& a, const Tensor& b) {
  require_same_shape("dot", a, b);
  Tensor out = make_result(Shape{});
  out.mutable_data()[0] = kernels::dot(a.data(), b.data());
  if (Tape* tape = tape_for({&a, &b})) {
    Node *o = out.node(), *an = a.node(), *bn = b.node();
    tape->record(out, {a, b}, [o, an, bn] {
      const double g = o->grad[0];
      if (auto ga = grad_of(an); !ga.empty()) kernels::axpy(g, bn->value, ga);
      if (auto gb = grad_of(bn); !gb.empty()) kernels::axpy(g, an->value, gb);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  Tensor out = make_result(a.shape());
  auto y = out.mutable_data();
  auto x1 = a.data();
  auto x2 = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x1[i] + x2[i];
  if (Tape* tape = tape_for({&a, &b})) {
    Node *o = out.node(), *an = a.node(), *bn = b.node();
    tape->record(out, {a, b}, [o, an, bn] {
      if (auto ga = grad_of(an); !ga.empty()) kernels::axpy(1.0, o->grad, ga);
      if (auto gb = grad_of(bn); !gb.empty()) kernels::axpy(1.0, o->grad, gb);
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  Tensor out = make_result(a.shape());
  auto y = out.mutable_data();
  auto x1 = a.data();
  auto x2 = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x1[i] - x2[i];
  if (Tape* tape = tape_for({&a, &b})) {
    Node *o = out.node(), *an = a.node(), *bn = b.node();
    tape->record(out, {a, b}, [o, an, bn] {
      if (auto ga = grad_of(an); !ga.empty()) kernels::axpy(1.0, o->grad, ga);
      if (auto gb = grad_of(bn); !gb.empty()) kernels::axpy(-1.0, o->grad, gb);
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  Tensor out = make_result(a.shape());
  auto y = out.mutable_data();
  auto x1 = a.data();
  auto x2 = b.data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x1[i] * x2[i];
  if (Tape* tape = tape_for({&a, &b})) {
    Node *o = out.node(), *an = a.node(), *bn = b.node();
    tape->record(out, {a, b}, [o, an, bn] {
      if (auto ga = grad_of(an); !ga.empty()) {
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o->grad[i] * bn->value[i];
      }
      if (auto gb = grad_of(bn); !gb.empty()) {
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += o->grad[i] * an->value[i];
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  require_defined("scale", a);
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor one_minus(const Tensor& a) {
  require_defined("one_minus", a);
  return unary(a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

Tensor square(const Tensor& a) {
  require_defined("square", a);
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor sigmoid(const Tensor& a) {
  require_defined("sigmoid", a);
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  require_defined("tanh", a);
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor add_n(std::span<const Tensor> terms) {
  if (terms.empty()) shape_error("add_n", "no terms");
  for (const auto& t : terms) require_same_shape("add_n", terms.front(), t);
  Tensor out = make_result(terms.front().shape());
  auto y = out.mutable_data();
  for (const auto& t : terms) kernels::axpy(1.0, t.data(), y);
  if (Tape* tape = tape_for(terms)) {
    Node* o = out.node();
    std::vector<Node*> nodes;
    for (const auto& t : terms) nodes.push_back(t.node());
    tape->record(out, std::vector<Tensor>(terms.begin(), terms.end()), [o, nodes] {
      for (Node* n : nodes) {
        if (auto g = grad_of(n); !g.empty()) kernels::axpy(1.0, o->grad, g);
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------

Tensor sum(const Tensor& a) {
  require_defined("sum", a);
  Tensor out = make_result(Shape{});
  double s = 0.0;
  for (double v : a.data()) s += v;
  out.mutable_data()[0] = s;
  if (Tape* tape = tape_for({&a})) {
    Node *o = out.node(), *an = a.node();
    tape->record(out, {a}, [o, an] {
      auto ga = an->ensure_grad();
      for (double& g : ga) g += o->grad[0];
    });
  }
  return out;
}

Tensor sum_rows(const Tensor& a) {
  require_matrix("sum_rows", a);
  const std::size_t r = a.rows(), c = a.cols();
  Tensor out = make_result(Shape{c});
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < r; ++i) kernels::axpy(1.0, a.data().subspan(i * c, c), y);
  if (Tape* tape = tape_for({&a})) {
    Node *o = out.node(), *an = a.node();
    tape->record(out, {a}, [o, an, r, c] {
      auto ga = an->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) kernels::axpy(1.0, o->grad, ga.subspan(i * c, c));
    });
  }
  return out;
}

namespace {

// Rows of the last axis: (count, width).
std::pair<std::size_t, std::size_t> last_axis(const char* op, const Tensor& a) {
  require_defined(op, a);
  if (a.rank() == 0) shape_error(op, "scalar input");
  const std::size_t width = a.shape()[a.rank() - 1];
  if (width == 0) shape_error(op, "empty axis");
  return {a.numel() / width, width};
}

}  // namespace

Tensor softmax(const Tensor& a) {
  const auto [count, width] = last_axis("softmax", a);
  Tensor out = make_result(a.shape());
  auto x = a.data();
  auto y = out.mutable_data();
  for (std::size_t r = 0; r < count; ++r) {
    const double* xr = x.data() + r * width;
    double* yr = y.data() + r * width;
    const double mx = *std::max_element(xr, xr + width);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) z += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < width; ++j) yr[j] /= z;
  }
  if (Tape* tape = tape_for({&a})) {
    Node *o = out.node(), *an = a.node();
    tape->record(out, {a}, [o, an, count, width] {
      auto ga = an->ensure_grad();
      for (std::size_t r = 0; r < count; ++r) {
        const double* yr = o->value.data() + r * width;
        const double* gy = o->grad.data() + r * width;
        double inner = 0.0;
        for (std::size_t j = 0; j < width; ++j) inner += gy[j] * yr[j];
        for (std::size_t j = 0; j < width; ++j) ga[r * width + j] += yr[j] * (gy[j] - inner);
      }
    });
  }
  return out;
}

Tensor log_softmax(const Tensor& a) {
  const auto [count, width] = last_axis("log_softmax", a);
  Tensor out = make_result(a.shape());
  auto x = a.data();
  auto y = out.mutable_data();
  for (std::size_t r = 0; r < count; ++r) {
    const double* xr = x.data() + r * width;
    double* yr = y.data() + r * width;
    const double mx = *std::max_element(xr, xr + width);
    double z = 0.0;
    for (std::size_t j = 0; j < width; ++j) z += std::exp(xr[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < width; ++j) yr[j] = xr[j] - lse;
  }
  if (Tape* tape = tape_for({&a})) {
    Node *o = out.node(), *an = a.node();
    tape->record(out, {a}, [o, an, count, width] {
      auto ga = an->ensure_grad();
      for (std::size_t r = 0; r < count; ++r) {
        const double* yr = o->value.data() + r * width;
        const double* gy = o->grad.data() + r * width;
        double total = 0.0;
        for (std::size_t j = 0; j < width; ++j) total += gy[j];
        for (std::size_t j = 0; j < width; ++j) ga[r * width + j] += gy[j] - std::exp(yr[j]) * total;
      }
    });
  }
  return out;
}

Tensor cross_entropy(const Tensor& logits, std::size_t target) {
  require_vector("cross_entropy", logits);
  const std::size_t n = logits.numel();
  if (target >= n) shape_error("cross_entropy", "target index out of range");
  auto x = logits.data();
  const double mx = *std::max_element(x.begin(), x.end());
  double z = 0.0;
  for (double v : x) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  Tensor out = make_result(Shape{});
  out.mutable_data()[0] = lse - x[target];
  if (Tape* tape = tape_for({&logits})) {
    Node *o = out.node(), *ln = logits.node();
    tape->record(out, {logits}, [o, ln, target, lse] {
      auto g = ln->ensure_grad();
      const double go = o->grad[0];
      for (std::size_t j = 0; j < g.size(); ++j) g[j] += go * std::exp(ln->value[j] - lse);
      g[target] -= go;
    });
  }
  return out;
}

Tensor mse(const Tensor& prediction, const Tensor& target) {
  require_same_shape("mse", prediction, target);
  const std::size_t n = prediction.numel();
  auto p = prediction.data();
  auto t = target.data();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (p[i] - t[i]) * (p[i] - t[i]);
  Tensor out = make_result(Shape{});
  out.mutable_data()[0] = s / static_cast<double>(n);
  if (Tape* tape = tape_for({&prediction, &target})) {
    Node *o = out.node(), *pn = prediction.node(), *tn = target.node();
    tape->record(out, {prediction, target}, [o, pn, tn, n] {
      const double k = 2.0 * o->grad[0] / static_cast<double>(n);
      auto gp = grad_of(pn);
      auto gt = grad_of(tn);
      for (std::size_t i = 0; i < n; ++i) {
        const double d = k * (pn->value[i] - tn->value[i]);
        if (!gp.empty()) gp[i] += d;
        if (!gt.empty()) gt[i] -= d;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined("reshape", a);
  if (shape.numel() != a.numel()) shape_error("reshape", a.shape().str() + " -> " + shape.str());
  Tensor out = make_result(std::move(shape));
  std::copy(a.data().begin(), a.data().end(), out.mutable_data().begin());
  if (Tape* tape = tape_for({&a})) {
    Node *o = out.node(), *an = a.node();
    tape->record(out, {a}, [o, an] { kernels::axpy(1.0, o->grad, an->ensure_grad()); });
  }
  return out;
}

Tensor flatten(const Tensor& a) {
  require_defined("flatten", a);
  return reshape(a, Shape{a.numel()});
}

Tensor slice(const Tensor& v, std::size_t start, std::size_t length) {
  require_vector("slice", v);
  if (length == 0 || start + length > v.numel()) shape_error("slice", "range out of bounds");
  Tensor out = make_result(Shape{length});
  std::copy_n(v.data().begin() + static_cast<std::ptrdiff_t>(start), length, out.mutable_data().begin());
  if (Tape* tape = tape_for({&v})) {
    Node *o = out.node(), *vn = v.node();
    tape->record(out, {v}, [o, vn, start, length] {
      kernels::axpy(1.0, o->grad, vn->ensure_grad().subspan(start, length));
    });
  }
  return out;
}

Tensor concat(std::span<const Tensor> vectors) {
  if (vectors.empty()) shape_error("concat", "no operands");
  std::size_t total = 0;
  for (const auto& v : vectors) {
    require_vector("concat", v);
    total += v.numel();
  }
  Tensor out = make_result(Shape{total});
  auto y = out.mutable_data();
  std::size_t off = 0;
  for (const auto& v : vectors) {
    std::copy(v.data().begin(), v.data().end(), y.begin() + static_cast<std::ptrdiff_t>(off));
    off += v.numel();
  }
  if (Tape* tape = tape_for(vectors)) {
    Node* o = out.node();
    std::vector<Node*> nodes;
    for (const auto& v : vectors) nodes.push_back(v.node());
    tape->record(out, std::vector<Tensor>(vectors.begin(), vectors.end()), [o, nodes] {
      std::size_t offset = 0;
      for (Node* n : nodes) {
        const std::size_t len = n->value.size();
        if (auto g = grad_of(n); !g.empty()) {
          kernels::axpy(1.0, std::span<const double>(o->grad).subspan(offset, len), g);
        }
        offset += len;
      }
    });
  }
  return out;
}

Tensor stack_rows(std::span<const Tensor> vectors) {
  if (vectors.empty()) shape_error("stack_rows", "no operands");
  const std::size_t width = vectors.front().numel();
  for (const auto& v : vectors) {
    require_vector("stack_rows", v);
    if (v.numel() != width) shape_error("stack_rows", "ragged rows");
  }
  Tensor flat = concat(vectors);
  return reshape(flat, Shape{vectors.size(), width});
}

Tensor row(const Tensor& m, std::size_t i) {
  require_matrix("row", m);
  if (i >= m.rows()) shape_error("row", "index out of range");
  const std::size_t c = m.cols();
  Tensor out = make_result(Shape{c});
  std::copy_n(m.data().begin() + static_cast<std::ptrdiff_t>(i * c), c, out.mutable_data().begin());
  if (Tape* tape = tape_for({&m})) {
    Node *o = out.node(), *mn = m.node();
    tape->record(out, {m}, [o, mn, i, c] {
      kernels::axpy(1.0, o->grad, mn->ensure_grad().subspan(i * c, c));
    });
  }
  return out;
}

Tensor column(const Tensor& m, std::size_t j) {
  require_matrix("column", m);
  if (j >= m.cols()) shape_error("column", "index out of range");
  const std::size_t r = m.rows(), c = m.cols();
  Tensor out = make_result(Shape{r});
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < r; ++i) y[i] = m.data()[i * c + j];
  if (Tape* tape = tape_for({&m})) {
    Node *o = out.node(), *mn = m.node();
    tape->record(out, {m}, [o, mn, j, r, c] {
      auto g = mn->ensure_grad();
      for (std::size_t i = 0; i < r; ++i) g[i * c + j] += o->grad[i];
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& m, std::size_t start, std::size_t length) {
  require_matrix("slice_cols", m);
  const std::size_t rows = m.rows(), cols = m.cols();
  if (length == 0 || start + length > cols) shape_error("slice_cols", "range out of bounds");
  Tensor out = make_result(Shape{rows, length});
  auto y = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(m.data().begin() + static_cast<std::ptrdiff_t>(r * cols + start), length,
                y.begin() + static_cast<std::ptrdiff_t>(r * length));
  }
  if (Tape* tape = tape_for({&m})) {
    Node *o = out.node(), *mn = m.node();
    tape->record(out, {m}, [o, mn, rows, cols, start, length] {
      auto g = mn->ensure_grad();
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < length; ++j) g[r * cols + start + j] += o->grad[r * length + j];
      }
    });
  }
  return out;
}

Tensor concat_cols(std::span<const Tensor> matrices) {
  if (matrices.empty()) shape_error("concat_cols", "no operands");
  require_matrix("concat_cols", matrices.front());
  const std::size_t rows = matrices.front().rows();
  std::size_t total = 0;
  for (const auto& m : matrices) {
    require_matrix("concat_cols", m);
    if (m.rows() != rows) shape_error("concat_cols", "row counts differ");
    total += m.cols();
  }
  Tensor out = make_result(Shape{rows, total});
  auto y = out.mutable_data();
  std::size_t off = 0;
  for (const auto& m : matrices) {
    const std::size_t c = m.cols();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(m.data().begin() + static_cast<std::ptrdiff_t>(r * c), c,
                  y.begin() + static_cast<std::ptrdiff_t>(r * total + off));
    }
    off += c;
  }
  if (Tape* tape = tape_for(matrices)) {
    Node* o = out.node();
    std::vector<Node*> nodes;
    for (const auto& m : matrices) nodes.push_back(m.node());
    tape->record(out, std::vector<Tensor>(matrices.begin(), matrices.end()), [o, nodes, rows, total] {
      std::size_t offset = 0;
      for (Node* n : nodes) {
        const std::size_t c = n->shape[1];
        if (auto g = grad_of(n); !g.empty()) {
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < c; ++j) g[r * c + j] += o->grad[r * total + offset + j];
          }
        }
        offset += c;
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  require_matrix("gather_rows", table);
  if (ids.empty()) shape_error("gather_rows", "no indices");
  const std::size_t n = table.rows(), c = table.cols();
  for (std::size_t id : ids) {
    if (id >= n) shape_error("gather_rows", "index " + std::to_string(id) + " out of range");
  }
  Tensor out = make_result(Shape{ids.size(), c});
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(table.data().begin() + static_cast<std::ptrdiff_t>(ids[i] * c), c,
                y.begin() + static_cast<std::ptrdiff_t>(i * c));
  }
  if (Tape* tape = tape_for({&table})) {
    Node *o = out.node(), *tn = table.node();
    tape->record(out, {table}, [o, tn, c, idx = std::vector<std::size_t>(ids.begin(), ids.end())] {
      auto g = tn->ensure_grad();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        kernels::axpy(1.0, std::span<const double>(o->grad).subspan(i * c, c), g.subspan(idx[i] * c, c));
      }
    });
  }
  return out;
}

Tensor batch_outer(const Tensor& a, const Tensor& b) {
  require_matrix("batch_outer", a);
  require_matrix("batch_outer", b);
  const std::size_t rows = a.rows(), p = a.cols(), q = b.cols();
  if (b.rows() != rows) shape_error("batch_outer", a.shape().str() + " vs " + b.shape().str());
  Tensor out = make_result(Shape{rows, p * q});
  auto y = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    kernels::ger(1.0, a.data().subspan(r * p, p), b.data().subspan(r * q, q), y.subspan(r * p * q, p * q));
  }
  if (Tape* tape = tape_for({&a, &b})) {
    Node *o = out.node(), *an = a.node(), *bn = b.node();
    tape->record(out, {a, b}, [o, an, bn, rows, p, q] {
      auto ga = grad_of(an);
      auto gb = grad_of(bn);
      for (std::size_t r = 0; r < rows; ++r) {
        auto go = std::span<const double>(o->grad).subspan(r * p * q, p * q);
        if (!ga.empty()) {
          kernels::gemv(go, p, q, std::span<const double>(bn->value).subspan(r * q, q), ga.subspan(r * p, p));
        }
        if (!gb.empty()) {
          kernels::gemv_t(go, p, q, std::span<const double>(an->value).subspan(r * p, p), gb.subspan(r * q, q));
        }
      }
    });
  }
  return out;
}

Tensor segment_sum(const Tensor& m, std::span<const std::size_t> segment, std::size_t n_segments) {
  require_matrix("segment_sum", m);
  const std::size_t rows = m.rows(), c = m.cols();
  if (segment.size() != rows) shape_error("segment_sum", "one segment id per row required");
  if (n_segments == 0) shape_error("segment_sum", "no segments");
  for (std::size_t s : segment) {
    if (s >= n_segments) shape_error("segment_sum", "segment id out of range");
  }
  Tensor out = make_result(Shape{n_segments, c});
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < rows; ++i) kernels::axpy(1.0, m.data().subspan(i * c, c), y.subspan(segment[i] * c, c));
  if (Tape* tape = tape_for({&m})) {
    Node *o = out.node(), *mn = m.node();
    tape->record(out, {m}, [o, mn, c, seg = std::vector<std::size_t>(segment.begin(), segment.end())] {
      auto g = mn->ensure_grad();
      for (std::size_t i = 0; i < seg.size(); ++i) {
        kernels::axpy(1.0, std::span<const double>(o->grad).subspan(seg[i] * c, c), g.subspan(i * c, c));
      }
    });
  }
  return out;
}

Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> targets) {
  require_matrix("cross_entropy_rows", logits);
  const std::size_t rows = logits.rows(), n = logits.cols();
  if (targets.size() != rows) shape_error("cross_entropy_rows", "one target per row required");
  std::vector<double> lse(rows);
  double total = 0.0;
  auto x = logits.data();
  for (std::size_t r = 0; r < rows; ++r) {
    if (targets[r] >= n) shape_error("cross_entropy_rows", "target index out of range");
    auto xr = x.subspan(r * n, n);
    const double mx = *std::max_element(xr.begin(), xr.end());
    double z = 0.0;
    for (double v : xr) z += std::exp(v - mx);
    lse[r] = mx + std::log(z);
    total += lse[r] - xr[targets[r]];
  }
  Tensor out = make_result(Shape{});
  out.mutable_data()[0] = total;
  if (Tape* tape = tape_for({&logits})) {
    Node *o = out.node(), *ln = logits.node();
    tape->record(out, {logits}, [o, ln, n, lse = std::move(lse),
                                 tg = std::vector<std::size_t>(targets.begin(), targets.end())] {
      auto g = ln->ensure_grad();
      const double go = o->grad[0];
      for (std::size_t r = 0; r < tg.size(); ++r) {
        for (std::size_t j = 0; j < n; ++j) g[r * n + j] += go * std::exp(ln->value[r * n + j] - lse[r]);
        g[r * n + tg[r]] -= go;
      }
    });
  }
  return out;
}

Tensor dropout(const Tensor& a, double keep_prob, Rng& rng) {
  require_defined("dropout", a);
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) {
    throw ConfigError("dropout keep probability must lie in (0, 1]");
  }
  if (keep_prob == 1.0) return a;
  std::bernoulli_distribution keep(keep_prob);
  std::vector<double> mask(a.numel());
  for (double& m : mask) m = keep(rng) ? 1.0 / keep_prob : 0.0;
  Tensor out = make_result(a.shape());
  auto y = out.mutable_data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.data()[i] * mask[i];
  if (Tape* tape = tape_for({&a})) {
    Node *o = out.node(), *an = a.node();
    tape->record(out, {a}, [o, an, mask = std::move(mask)] {
      auto g = an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o->grad[i] * mask[i];
    });
  }
  return out;
}

}  // namespace role::ad
