#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace role::analysis {

/// Runs fn(0..n-1) on up to `workers` threads (inline when workers <= 1).
/// The first exception thrown by any call is rethrown after all threads join.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

struct VMeasure {
  double homogeneity = 1.0;
  double completeness = 1.0;
  double v = 1.0;
};

/// V-measure of a clustering against ground-truth classes, natural log,
/// with 0/0 taken as 1 for homogeneity and completeness. Throws ShapeError on
/// unequal lengths and ConfigError on empty input.
VMeasure v_measure(std::span<const std::string> predicted, std::span<const std::string> truth);
VMeasure v_measure(std::span<const std::size_t> predicted, std::span<const std::size_t> truth);

/// Decodes a hidden state; `index` identifies the item (some decoders need
/// the input, e.g. for a tree shape).
using HiddenDecoder = std::function<std::vector<std::string>(std::span<const double> hidden, std::size_t index)>;

struct SubstitutionResult {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::vector<bool> per_item;
};

/// Feeds each encoding into the decoder and counts exact full-string matches
/// with `expected`. Throws ShapeError when an encoding is not hidden_dim long.
SubstitutionResult substitution_accuracy(const std::vector<std::vector<double>>& encodings, std::size_t hidden_dim,
                                         const HiddenDecoder& decode,
                                         const std::vector<std::vector<std::string>>& expected,
                                         std::size_t workers = 1);

/// Mean over items of the per-item mean squared difference.
double mean_squared_error(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b);

}  // namespace role::analysis
