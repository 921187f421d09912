#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "role/adam.hpp"
#include "role/common.hpp"
#include "role/params.hpp"
#include "role/tape.hpp"
#include "role/training.hpp"

namespace role {

struct FitOptions {
  double learning_rate = 1e-3;
  std::size_t patience = 10;
  std::size_t max_epochs = 100;
  std::uint64_t seed = 0;
  double min_delta = 0.0;  // dev improvements at or below this do not reset patience
};

struct FitResult {
  std::vector<LogRow> log;
  std::size_t epochs = 0;
  double best_dev = 0.0;
};

/// Minibatch ADAM with early stopping on a dev loss. `batch_loss` builds the
/// training loss of one batch of indices, `make_batches` draws an epoch's
/// batches, `after_step` (may be empty) runs after every parameter update and
/// `on_epoch` (may be empty) sees each epoch's log row.
/// The best epoch's parameters are restored before returning.
template <typename BatchLoss, typename DevLoss>
FitResult fit_loop(ad::ParamSet& params, const FitOptions& opt, BatchLoss batch_loss, DevLoss dev_loss,
                   const std::function<std::vector<std::vector<std::size_t>>(Rng&)>& make_batches,
                   const std::function<void()>& after_step = {},
                   const std::function<void(const LogRow&)>& on_epoch = {}) {
  Rng rng(opt.seed ^ 0x5bd1e995ULL);
  ad::AdamConfig ac;
  ac.learning_rate = opt.learning_rate;
  ad::Adam adam(params, ac);
  EarlyStopping stop(opt.patience, opt.min_delta);
  auto best = params.snapshot();
  FitResult result;
  std::size_t step = 0;
  while (result.epochs < opt.max_epochs) {
    ++result.epochs;
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& batch : make_batches(rng)) {
      ad::Tape tape;
      {
        ad::TapeScope scope(tape);
        ad::Tensor loss = batch_loss(batch);
        if (!std::isfinite(loss.item())) {
          throw NumericError("training loss is not finite at step " + std::to_string(step));
        }
        tape.backward(loss);
        total += loss.item();
        ++n;
      }
      adam.step();
      adam.zero_grad();
      if (after_step) after_step();
      ++step;
    }
    const double dev = dev_loss();
    result.log.push_back({step, total / static_cast<double>(std::max<std::size_t>(n, 1)), dev});
    if (on_epoch) on_epoch(result.log.back());
    if (stop.update(dev)) best = params.snapshot();
    if (stop.should_stop()) break;
  }
  params.restore(best);
  result.best_dev = stop.best();
  return result;
}

}  // namespace role
