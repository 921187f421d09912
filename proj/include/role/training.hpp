#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "role/common.hpp"

namespace role {

/// One line of a training log.
struct LogRow {
  std::size_t step = 0;
  double loss = 0.0;
  double dev_metric = std::numeric_limits<double>::quiet_NaN();
};

/// Writes rows as CSV "step,loss,dev_metric" (empty dev field when NaN).
void write_training_log(const std::filesystem::path& path, const std::vector<LogRow>& rows);

/// Groups example indices into batches whose members share a length, so
/// sequence models can run each batch as one matrix per time step. Bucket
/// contents and batch order are shuffled with `rng`.
std::vector<std::vector<std::size_t>> length_batches(const std::vector<std::size_t>& lengths, std::size_t batch_size,
                                                     Rng& rng);

/// Same grouping without shuffling, for evaluation.
std::vector<std::vector<std::size_t>> length_groups(const std::vector<std::size_t>& lengths, std::size_t max_batch);

/// Patience-based early stopping on a dev loss (lower is better): stop once
/// `patience` consecutive epochs fail to improve on the best so far.
class EarlyStopping {
 public:
  /// Patience counts epochs since the dev loss last fell by more than
  /// `min_delta` below the value that reset it.
  explicit EarlyStopping(std::size_t patience, double min_delta = 0.0) : patience_(patience), min_delta_(min_delta) {}
  /// Records an epoch's dev loss; returns true if it is a new best.
  bool update(double dev_loss);
  bool should_stop() const { return bad_epochs_ >= std::max<std::size_t>(patience_, 1); }
  double best() const { return best_; }
  std::size_t best_epoch() const { return best_epoch_; }

 private:
  std::size_t patience_;
  double min_delta_;
  std::size_t epoch_ = 0, best_epoch_ = 0, bad_epochs_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  double anchor_ = std::numeric_limits<double>::infinity();
};

/// Splits [0, n) into a shuffled (train, dev) pair with round(dev_fraction * n)
/// dev items (at least one when n > 1).
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> carve_dev(std::size_t n, double dev_fraction, Rng& rng);

}  // namespace role
