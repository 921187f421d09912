#include "role/schemes.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "role/common.hpp"

namespace role::schemes {

const std::vector<Scheme>& all_schemes() {
  static const std::vector<Scheme> s{Scheme::LTR, Scheme::RTL, Scheme::Bi, Scheme::Tree, Scheme::Wickel, Scheme::BOW};
  return s;
}

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::LTR: return "ltr";
    case Scheme::RTL: return "rtl";
    case Scheme::Bi: return "bi";
    case Scheme::Tree: return "tree";
    case Scheme::Wickel: return "wickel";
    case Scheme::BOW: return "bow";
  }
  return "?";
}

Scheme parse_scheme(const std::string& name) {
  for (Scheme s : all_schemes()) {
    if (scheme_name(s) == name) return s;
  }
  throw ConfigError("unknown role scheme '" + name + "'");
}

std::vector<std::string> role_labels(Scheme scheme, std::span<const std::string> tokens,
                                     const tasks::BinaryTree* tree) {
  const std::size_t n = tokens.size();
  std::vector<std::string> out;
  out.reserve(n);
  switch (scheme) {
    case Scheme::LTR:
      for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(i));
      break;
    case Scheme::RTL:
      for (std::size_t i = 0; i < n; ++i) out.push_back(std::to_string(n - 1 - i));
      break;
    case Scheme::Bi:
      for (std::size_t i = 0; i < n; ++i) out.push_back("(" + std::to_string(i) + "," + std::to_string(n - 1 - i) + ")");
      break;
    case Scheme::Tree: {
      if (!tree) throw ConfigError("the tree scheme needs a parse tree");
      if (tree->leaf_count() != n) throw ShapeError("parse tree leaf count differs from sequence length");
      for (auto& p : tree->leaf_paths()) out.push_back(p.empty() ? "root" : p);
      break;
    }
    case Scheme::Wickel:
      for (std::size_t i = 0; i < n; ++i) {
        out.push_back((i == 0 ? std::string("#") : tokens[i - 1]) + "_" + (i + 1 == n ? std::string("#") : tokens[i + 1]));
      }
      break;
    case Scheme::BOW:
      out.assign(n, "r0");
      break;
  }
  return out;
}

RoleAssignment RoleScheme::assign(std::span<const std::string> tokens, const tasks::BinaryTree* tree) {
  RoleAssignment a;
  a.tokens.assign(tokens.begin(), tokens.end());
  a.labels = role_labels(kind_, tokens, tree);
  for (const auto& l : a.labels) a.roles.push_back(roles_.add(l));
  return a;
}

RoleAssignment RoleScheme::assign(std::span<const std::string> tokens, const tasks::BinaryTree* tree) const {
  RoleAssignment a;
  a.tokens.assign(tokens.begin(), tokens.end());
  a.labels = role_labels(kind_, tokens, tree);
  a.roles = roles_.encode(a.labels);
  return a;
}

void RoleScheme::build_vocab(const std::vector<std::vector<std::string>>& corpus) {
  for (const auto& seq : corpus) {
    if (kind_ == Scheme::Tree) {
      const auto t = tasks::parse_balanced(seq);
      assign(seq, &t);
    } else {
      assign(seq);
    }
  }
  roles_.freeze();
}

void write_role_assignments(const std::filesystem::path& path, const std::vector<RoleAssignment>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : rows) out << nlohmann::json{{"tokens", r.tokens}, {"roles", r.roles}}.dump() << '\n';
}

}  // namespace role::schemes
