#pragma once

#include <functional>
#include <vector>

#include "role/tensor.hpp"

namespace role::ad {

/// Ordered record of primitive operations. Ops append entries while a
/// TapeScope is active on the calling thread and at least one input requires
/// a gradient; with no active tape they only compute forward values.
///
/// backward() walks the entries once in reverse order. Gradients accumulate:
/// calling backward() again (on this or another tape) adds to existing
/// gradient buffers until they are zeroed explicitly.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(Tensor output, std::vector<Tensor> inputs, BackwardFn fn);
  void backward(const Tensor& loss);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }

 private:
  struct Entry {
    Tensor output;
    std::vector<Tensor> inputs;  // keeps operands alive for the closure
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
};

/// Tape recording on the current thread, or nullptr.
Tape* active_tape();

/// Activates a tape for the current thread for the lifetime of the scope.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

/// Suspends recording for the lifetime of the scope.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

}  // namespace role::ad
