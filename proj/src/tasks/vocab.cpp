#include "role/vocab.hpp"

#include <sstream>

#include "role/common.hpp"

namespace role {

Vocab::Vocab(std::vector<std::string> tokens) {
  for (auto& t : tokens) add(t);
}

std::size_t Vocab::add(const std::string& token) {
  if (auto it = index_.find(token); it != index_.end()) return it->second;
  if (frozen_) throw ParseError("unknown token '" + token + "'");
  index_.emplace(token, tokens_.size());
  tokens_.push_back(token);
  return tokens_.size() - 1;
}

std::size_t Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  if (it == index_.end()) throw ParseError("unknown token '" + token + "'");
  return it->second;
}

const std::string& Vocab::token(std::size_t id) const {
  if (id >= tokens_.size()) throw ParseError("token id " + std::to_string(id) + " out of range");
  return tokens_[id];
}

std::vector<std::size_t> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<std::size_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const std::size_t> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(token(i));
  return out;
}

std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string join_words(std::span<const std::string> words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace role
