#include "role/tasks/tree.hpp"

#include <cctype>

#include "role/common.hpp"

namespace role::tasks {

BinaryTree BinaryTree::leaf(std::string symbol) {
  BinaryTree t;
  t.symbol_ = std::move(symbol);
  return t;
}

BinaryTree BinaryTree::node(BinaryTree left, BinaryTree right) {
  BinaryTree t;
  t.left_ = std::make_shared<const BinaryTree>(std::move(left));
  t.right_ = std::make_shared<const BinaryTree>(std::move(right));
  return t;
}

const std::string& BinaryTree::symbol() const {
  if (!is_leaf()) throw Error("symbol() on an internal tree node");
  return symbol_;
}

const BinaryTree& BinaryTree::left() const {
  if (is_leaf()) throw Error("left() on a tree leaf");
  return *left_;
}

const BinaryTree& BinaryTree::right() const {
  if (is_leaf()) throw Error("right() on a tree leaf");
  return *right_;
}

std::size_t BinaryTree::leaf_count() const {
  return is_leaf() ? 1 : left_->leaf_count() + right_->leaf_count();
}

std::vector<std::string> BinaryTree::leaves() const {
  if (is_leaf()) return {symbol_};
  auto out = left_->leaves();
  for (auto& s : right_->leaves()) out.push_back(std::move(s));
  return out;
}

std::vector<std::string> BinaryTree::leaf_paths() const {
  if (is_leaf()) return {""};
  std::vector<std::string> out;
  for (auto& p : left_->leaf_paths()) out.push_back("L" + p);
  for (auto& p : right_->leaf_paths()) out.push_back("R" + p);
  return out;
}

bool BinaryTree::same_shape(const BinaryTree& other) const {
  if (is_leaf() || other.is_leaf()) return is_leaf() == other.is_leaf();
  return left_->same_shape(*other.left_) && right_->same_shape(*other.right_);
}

std::string BinaryTree::str() const {
  if (is_leaf()) return symbol_;
  return "(" + left_->str() + " " + right_->str() + ")";
}

BinaryTree parse_balanced(std::span<const std::string> symbols) {
  if (symbols.empty()) throw ParseError("cannot parse an empty sequence");
  if (symbols.size() == 1) return BinaryTree::leaf(symbols[0]);
  const std::size_t left = (symbols.size() + 1) / 2;
  return BinaryTree::node(parse_balanced(symbols.first(left)), parse_balanced(symbols.subspan(left)));
}

namespace {

struct BracketParser {
  const std::string& s;
  std::size_t pos = 0;

  void skip() {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }

  BinaryTree parse() {
    skip();
    if (pos >= s.size()) throw ParseError("tree: unexpected end of input");
    if (s[pos] == '(') {
      ++pos;
      BinaryTree l = parse();
      BinaryTree r = parse();
      skip();
      if (pos >= s.size() || s[pos] != ')') throw ParseError("tree: expected ')' at " + std::to_string(pos));
      ++pos;
      return BinaryTree::node(std::move(l), std::move(r));
    }
    const std::size_t start = pos;
    while (pos < s.size() && s[pos] != '(' && s[pos] != ')' &&
           !std::isspace(static_cast<unsigned char>(s[pos]))) {
      ++pos;
    }
    if (pos == start) throw ParseError("tree: expected a symbol at " + std::to_string(pos));
    return BinaryTree::leaf(s.substr(start, pos - start));
  }
};

}  // namespace

BinaryTree parse_bracketed(const std::string& text) {
  BracketParser p{text};
  BinaryTree t = p.parse();
  p.skip();
  if (p.pos != text.size()) throw ParseError("tree: trailing input");
  return t;
}

}  // namespace role::tasks
