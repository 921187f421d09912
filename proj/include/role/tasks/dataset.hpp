#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace role::tasks {

/// One input/output token-sequence pair.
struct Example {
  std::vector<std::string> input;
  std::vector<std::string> output;
  friend bool operator==(const Example&, const Example&) = default;
};

/// JSONL, one {"input": [...], "output": [...]} object per line.
void write_examples(const std::filesystem::path& path, const std::vector<Example>& examples);
std::vector<Example> read_examples(const std::filesystem::path& path);

/// Split files: one space-joined input sequence per line.
void write_split(const std::filesystem::path& path, const std::vector<Example>& examples);
std::vector<std::string> read_split(const std::filesystem::path& path);

/// Selects the examples whose joined input appears in `keys`, in key order.
/// Throws ParseError for keys with no matching example.
std::vector<Example> select_by_input(const std::vector<Example>& all, const std::vector<std::string>& keys);

}  // namespace role::tasks
