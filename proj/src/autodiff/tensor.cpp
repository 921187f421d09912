#include "role/tensor.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "role/common.hpp"
#include "role/tape.hpp"

namespace role::ad {

Shape::Shape(std::initializer_list<std::size_t> dims) : dims_(dims) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {}

std::size_t Shape::numel() const {
  return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string Shape::str() const {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) out << ", ";
    out << dims_[i];
  }
  out << ']';
  return out.str();
}

namespace {

void validate(const Shape& shape, std::size_t n) {
  for (auto d : shape.dims()) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive: " + shape.str());
  }
  if (shape.numel() != n) {
    throw ShapeError("tensor data length " + std::to_string(n) + " does not match shape " +
                     shape.str());
  }
}

}  // namespace

Tensor make_result(Shape shape) {
  auto node = std::make_shared<detail::Node>();
  node->value.assign(shape.numel(), 0.0);
  node->shape = std::move(shape);
  return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape) {
  validate(shape, shape.numel());
  return make_result(std::move(shape));
}

Tensor Tensor::constant(Shape shape, std::vector<double> values) {
  validate(shape, values.size());
  Tensor t = make_result(Shape{});
  t.node_->shape = std::move(shape);
  t.node_->value = std::move(values);
  return t;
}

Tensor Tensor::scalar(double value) { return constant(Shape{}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return constant(Shape{n}, std::move(values));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  t.node_->ensure_grad();
  return t;
}

std::size_t Tensor::rows() const {
  if (rank() != 2) throw ShapeError("rows() on non-matrix " + shape().str());
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw ShapeError("cols() on non-matrix " + shape().str());
  return shape()[1];
}

double Tensor::at(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape().str());
  return node_->value[0];
}

void Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  if (on) node_->ensure_grad();
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

bool Tensor::all_finite() const {
  for (double v : node_->value) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Tensor Tensor::clone() const { return constant(shape(), node_->value); }

void check_finite(const Tensor& t, const std::string& what) {
  if (!t.all_finite()) throw NumericError("non-finite values in " + what);
}

// ---------------------------------------------------------------------------
// Tape

namespace {
thread_local Tape* g_active_tape = nullptr;
}

Tape* active_tape() { return g_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

void Tape::record(Tensor output, std::vector<Tensor> inputs, BackwardFn fn) {
  output.node()->requires_grad = true;
  entries_.push_back(Entry{std::move(output), std::move(inputs), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss");
  }
  if (!loss.requires_grad()) return;  // constant loss: nothing depends on parameters
  // Intermediate gradients restart from zero so that a repeated call adds
  // exactly one more copy of d(loss)/d(leaf) to every leaf.
  for (auto& e : entries_) e.output.node()->grad.clear();
  loss.node()->ensure_grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->output.node()->grad.empty()) continue;  // not on a path from the loss
    it->fn();
  }
}

}  // namespace role::ad
