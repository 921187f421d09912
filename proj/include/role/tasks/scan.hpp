#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "role/tasks/dataset.hpp"

namespace role::tasks {

/// The 13 input words and 6 output actions.
const std::vector<std::string>& scan_input_words();
const std::vector<std::string>& scan_output_actions();

/// Every command the grammar generates, with its action sequence. The order
/// is fixed: single commands, then "x and y", then "x after y".
std::vector<Example> scan_generate_all();

/// Action sequence for a grammatical command; throws ParseError otherwise.
std::vector<std::string> scan_interpret(std::span<const std::string> tokens);
bool scan_is_grammatical(std::span<const std::string> tokens);

struct ScanSplit {
  std::uint64_t seed = 0;
  std::vector<Example> train, test;
};

/// Seeded uniform random split; the train side gets round(fraction * n).
ScanSplit scan_split(const std::vector<Example>& commands, std::uint64_t seed, double train_fraction = 0.8);

}  // namespace role::tasks
