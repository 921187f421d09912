#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace role {

/// Aligned (token sequence, vector) records, e.g. the hidden states a target
/// encoder assigns to its inputs. All vectors share one dimension.
class EmbeddingTable {
 public:
  struct Record {
    std::vector<std::string> tokens;
    std::vector<double> vec;
  };

  EmbeddingTable() = default;
  explicit EmbeddingTable(std::string source) : source_(std::move(source)) {}

  /// Throws ShapeError on a dimension mismatch, ParseError on empty tokens.
  void add(std::vector<std::string> tokens, std::vector<double> vec);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t dim() const { return dim_; }
  const std::string& source() const { return source_; }
  void set_source(std::string s) { source_ = std::move(s); }
  const std::vector<Record>& records() const { return records_; }
  const Record& operator[](std::size_t i) const { return records_[i]; }

  std::vector<std::vector<std::string>> token_lists() const;
  /// Records at the given indices, same source.
  EmbeddingTable subset(const std::vector<std::size_t>& indices) const;

 private:
  std::string source_;
  std::size_t dim_ = 0;
  std::vector<Record> records_;
};

/// JSONL, one {"tokens": [...], "vec": [...]} per line, plus "source" when set.
/// Doubles are written with round-trip precision.
void export_embeddings(const EmbeddingTable& table, const std::filesystem::path& path);
/// Throws ParseError on malformed lines, ShapeError on ragged dimensions,
/// and ParseError on a file without records.
EmbeddingTable import_embeddings(const std::filesystem::path& path);

}  // namespace role
