#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace role::tasks {

/// Full binary tree with symbols at the leaves. Copies share subtrees.
class BinaryTree {
 public:
  static BinaryTree leaf(std::string symbol);
  static BinaryTree node(BinaryTree left, BinaryTree right);

  bool is_leaf() const { return !left_; }
  const std::string& symbol() const;  // leaves only
  const BinaryTree& left() const;     // internal nodes only
  const BinaryTree& right() const;

  std::size_t leaf_count() const;
  /// Leaf symbols left to right.
  std::vector<std::string> leaves() const;
  /// Root-to-leaf paths ("L"/"R" per step) for the leaves, left to right.
  /// A lone leaf has the empty path.
  std::vector<std::string> leaf_paths() const;
  /// Same shape, ignoring symbols.
  bool same_shape(const BinaryTree& other) const;
  /// Bracketed form, e.g. "((3 1) (1 6))".
  std::string str() const;

 private:
  std::string symbol_;
  std::shared_ptr<const BinaryTree> left_, right_;
};

/// Balanced parse: the left subtree takes ceil(n/2) symbols, recursively.
/// Throws ParseError on empty input.
BinaryTree parse_balanced(std::span<const std::string> symbols);

/// Parses the bracketed form produced by BinaryTree::str. Throws ParseError.
BinaryTree parse_bracketed(const std::string& text);

}  // namespace role::tasks
