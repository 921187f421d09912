#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "role/tasks/tree.hpp"
#include "role/vocab.hpp"

namespace role::schemes {

enum class Scheme { LTR, RTL, Bi, Tree, Wickel, BOW };

const std::vector<Scheme>& all_schemes();
std::string scheme_name(Scheme s);  // "ltr", "rtl", "bi", "tree", "wickel", "bow"
Scheme parse_scheme(const std::string& name);  // throws ConfigError

/// Role labels for one sequence:
///   LTR "0","1",..  RTL counts from the right  Bi "(l,r)"
///   Tree root-to-leaf path ("LR", ..; "root" for a lone leaf)
///   Wickel "<prev>_<next>" with "#" at the ends  BOW "r0"
/// Tree requires `tree` with leaves matching the tokens (ConfigError/ShapeError otherwise).
std::vector<std::string> role_labels(Scheme scheme, std::span<const std::string> tokens,
                                     const tasks::BinaryTree* tree = nullptr);

struct RoleAssignment {
  std::vector<std::string> tokens;
  std::vector<std::string> labels;
  std::vector<std::size_t> roles;  // ids in the scheme's role vocabulary
};

/// A scheme plus its role vocabulary.
class RoleScheme {
 public:
  explicit RoleScheme(Scheme kind) : kind_(kind) {}
  /// Restores a scheme with a previously built (frozen) vocabulary.
  RoleScheme(Scheme kind, Vocab roles) : kind_(kind), roles_(std::move(roles)) { roles_.freeze(); }

  Scheme kind() const { return kind_; }
  /// Assigns roles, growing the vocabulary unless frozen (then unseen labels
  /// throw ParseError).
  RoleAssignment assign(std::span<const std::string> tokens, const tasks::BinaryTree* tree = nullptr);
  RoleAssignment assign(std::span<const std::string> tokens, const tasks::BinaryTree* tree = nullptr) const;

  /// Enumerates labels over `corpus` in order, then freezes. Tree uses the
  /// balanced parse of each sequence.
  void build_vocab(const std::vector<std::vector<std::string>>& corpus);
  const Vocab& vocab() const { return roles_; }
  void freeze() { roles_.freeze(); }

 private:
  Scheme kind_;
  Vocab roles_;
};

/// JSONL, one {"tokens": [...], "roles": [ids]} object per line.
void write_role_assignments(const std::filesystem::path& path, const std::vector<RoleAssignment>& rows);

}  // namespace role::schemes
