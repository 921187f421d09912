#pragma once

#include <cstdint>
#include <vector>

#include "role/params.hpp"

namespace role::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// ADAM with bias correction over every tensor in a ParamSet. The moment
/// buffers are sized from the bundle at construction.
class Adam {
 public:
  Adam(ParamSet& params, AdamConfig config = {});

  /// Applies one update from the accumulated gradients. Throws
  /// role::NumericError naming the parameter if any gradient is non-finite;
  /// parameters are left untouched in that case.
  void step();
  void zero_grad() { params_->zero_grad(); }

  std::uint64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  ParamSet* params_;
  AdamConfig config_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t step_ = 0;
};

}  // namespace role::ad
