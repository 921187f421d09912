#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "role/tensor.hpp"

namespace role::ad {

struct GradCheckOptions {
  std::size_t coordinates = 20;  // sampled per tensor (all, when fewer exist)
  double step = 1e-5;            // central-difference half width
  std::uint64_t seed = 0;
  // Below this magnitude on both sides a coordinate counts as zero-gradient
  // and is compared absolutely.
  double zero_floor = 1e-7;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coordinates_checked = 0;
  std::string worst;  // "<tensor index>[<flat index>]: analytic vs numeric"
};

/// Compares tape gradients of `loss_fn` against central finite differences at
/// randomly sampled coordinates of each tensor in `inputs`. `loss_fn` must be
/// deterministic and return a scalar.
GradCheckResult check_gradients(const std::function<Tensor()>& loss_fn, std::vector<Tensor> inputs,
                                const GradCheckOptions& options = {});

}  // namespace role::ad
