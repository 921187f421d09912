#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace role {

/// Token <-> id map. Ids are assigned in first-seen order.
class Vocab {
 public:
  Vocab() = default;
  explicit Vocab(std::vector<std::string> tokens);

  /// Returns the id of `token`, adding it unless frozen (then throws ParseError).
  std::size_t add(const std::string& token);
  std::size_t id(const std::string& token) const;  // throws ParseError when unknown
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  const std::string& token(std::size_t id) const;
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::vector<std::size_t> encode(std::span<const std::string> tokens) const;
  std::vector<std::string> decode(std::span<const std::size_t> ids) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
  bool frozen_ = false;
};

/// Splits on single spaces; empty pieces are dropped.
std::vector<std::string> split_words(const std::string& text);
std::string join_words(std::span<const std::string> words);

}  // namespace role
