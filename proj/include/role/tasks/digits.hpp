#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "role/tasks/dataset.hpp"

namespace role::tasks {

struct DigitCorpusConfig {
  std::uint64_t seed = 0;
  std::size_t n_train = 40000;
  std::size_t n_dev = 5000;
  std::size_t n_test = 5000;
  std::size_t min_len = 2;
  std::size_t max_len = 6;
};

/// Digit strings, one token per digit.
struct DigitCorpus {
  DigitCorpusConfig config;
  std::vector<std::vector<std::string>> train, dev, test;
};

/// Draws distinct strings: a length uniformly from those lengths that still
/// have unused strings, then digits uniformly, rejecting repeats. Splits are
/// consecutive runs of the draw order, so they are disjoint.
/// Throws ConfigError when the length range cannot supply enough strings.
DigitCorpus gen_digit_corpus(const DigitCorpusConfig& config);

/// Autoencoding examples (output = input).
std::vector<Example> autoencoding_examples(const std::vector<std::vector<std::string>>& strings);

}  // namespace role::tasks
