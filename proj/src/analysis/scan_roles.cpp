#include "role/analysis/scan_roles.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "role/analysis/metrics.hpp"
#include "role/tasks/scan.hpp"

namespace role::analysis {

namespace {

bool is_action(const std::string& w) {
  return w == "walk" || w == "look" || w == "run" || w == "jump" || w == "turn";
}
bool is_direction(const std::string& w) { return w == "left" || w == "right"; }
bool is_rotation(const std::string& w) { return w == "opposite" || w == "around"; }
bool is_cardinality(const std::string& w) { return w == "twice" || w == "thrice"; }

using Words = std::span<const std::string>;

bool ends_with(Words c, std::initializer_list<const char*> tail) {
  if (c.size() < tail.size()) return false;
  std::size_t i = c.size() - tail.size();
  for (const char* w : tail) {
    if (c[i++] != w) return false;
  }
  return true;
}

[[noreturn]] void no_rule(Words c, std::size_t i) {
  throw ParseError("no role rule for '" + c[i] + "' in '" + join_words(c) + "'");
}

// First command of an "x and y" sequence.
int before_and(Words c, std::size_t i) {
  const std::size_t n = c.size();
  const std::string& w = c[i];
  const bool ends_thrice = c.back() == "thrice";
  if (i == n - 1) return 28;
  if (i == 0) return 46;
  if (w == "opposite") return ends_thrice ? 22 : 2;
  if (is_direction(w) && c[i - 1] == "opposite") return c[i + 1] == "thrice" ? 2 : 4;
  if (w == "around") return 22;
  if (is_direction(w) && c[i - 1] == "around") return 2;
  if (is_direction(w) && is_action(c[i - 1]) && is_cardinality(c[i + 1])) return 2;
  no_rule(c, i);
}

// Second command of an "x and y" sequence.
int after_and(Words c, std::size_t i) {
  const std::size_t n = c.size();
  if (i == 0) return 11;
  if (i == n - 1) return 36;
  if (i == n - 2) return 3;
  if (n == 4 && i == 1) return 24;
  no_rule(c, i);
}

// Command preceding "after".
int before_after(Words c, std::size_t i) {
  const std::size_t n = c.size();
  if (i == n - 1) return 8;
  if (i + 2 == n) return 36;
  if (i == 0) return 11;
  if (i == 1) return 3;
  no_rule(c, i);
}

// Command following "after".
int after_after(Words c, std::size_t i) {
  const std::size_t n = c.size();
  const bool ends_thrice = c.back() == "thrice";
  const bool has_rotation = std::any_of(c.begin(), c.end(), is_rotation);
  if (i == n - 1) return 46;
  if (i + 2 == n) return 4;
  if (i == 0) {
    if (ends_with(c, {"around", "right"})) return 4;
    if (ends_thrice && has_rotation) return 10;
    return 17;
  }
  if (i == 1) return ends_thrice ? 17 : 10;
  no_rule(c, i);
}

// A sequence without a conjunction.
int single(Words c, std::size_t i) {
  const std::size_t n = c.size();
  const std::string& w = c[i];
  const bool has_card = is_cardinality(c.back());
  if (is_action(w)) {
    if (!has_card) return 46;
    return i + 2 == n ? 4 : 34;
  }
  if (is_cardinality(w)) {
    // A cardinality after a direction word matches no listed rule; it shares
    // the label of other sequence-final words.
    return i > 0 && is_action(c[i - 1]) ? 2 : 46;
  }
  if (w == "opposite") {
    if (!has_card) return 2;
    return c.back() == "twice" ? 8 : 34;
  }
  if (w == "around") return has_card ? 22 : 3;
  if (is_direction(w)) {
    if (has_card && i + 2 == n) return 2;
    if (!has_card && i > 0) {
      if (c[i - 1] == "opposite") return 26;
      if (c[i - 1] == "around") return 22;
      if (is_action(c[i - 1])) return 22;
    }
  }
  no_rule(c, i);
}

}  // namespace

const std::vector<int>& symbolic_role_inventory() {
  static const std::vector<int> labels{2, 3, 4, 8, 10, 11, 17, 22, 24, 26, 28, 30, 34, 36, 43, 46};
  return labels;
}

std::vector<int> scan_role_algorithm(std::span<const std::string> tokens) {
  if (!tasks::scan_is_grammatical(tokens)) throw ParseError("not a SCAN command: '" + join_words(tokens) + "'");
  std::vector<int> out(tokens.size());
  const auto conj = std::find_if(tokens.begin(), tokens.end(), [](const std::string& w) {
    return w == "and" || w == "after";
  });
  if (conj == tokens.end()) {
    for (std::size_t i = 0; i < tokens.size(); ++i) out[i] = single(tokens, i);
    return out;
  }
  const std::size_t k = static_cast<std::size_t>(conj - tokens.begin());
  const Words first = tokens.subspan(0, k), second = tokens.subspan(k + 1);
  if (*conj == "and") {
    for (std::size_t i = 0; i < first.size(); ++i) out[i] = before_and(first, i);
    for (std::size_t i = 0; i < second.size(); ++i) out[k + 1 + i] = after_and(second, i);
    out[k] = 30;
    return out;
  }
  for (std::size_t i = 0; i < first.size(); ++i) out[i] = before_after(first, i);
  bool other_17 = false;
  for (std::size_t i = 0; i < second.size(); ++i) {
    out[k + 1 + i] = after_after(second, i);
    other_17 = other_17 || out[k + 1 + i] == 17;
  }
  out[k] = !other_17 || ends_with(second, {"around", "left"}) ? 17 : 43;
  return out;
}

RoleMatch fit_role_labels(const std::vector<std::vector<int>>& symbolic,
                          const std::vector<std::vector<std::size_t>>& learned, std::size_t n_roles) {
  if (symbolic.size() != learned.size()) throw ShapeError("fit_role_labels: sequence counts differ");
  const auto& inventory = symbolic_role_inventory();
  if (n_roles < inventory.size()) throw ConfigError("fit_role_labels: fewer learned roles than labels");
  std::map<std::pair<int, std::size_t>, std::size_t> counts;
  std::set<std::size_t> used_roles;
  for (std::size_t s = 0; s < symbolic.size(); ++s) {
    if (symbolic[s].size() != learned[s].size()) throw ShapeError("fit_role_labels: sequence lengths differ");
    for (std::size_t t = 0; t < symbolic[s].size(); ++t) {
      if (learned[s][t] >= n_roles) throw ShapeError("fit_role_labels: learned role out of range");
      ++counts[{symbolic[s][t], learned[s][t]}];
      used_roles.insert(learned[s][t]);
    }
  }
  std::vector<std::pair<std::pair<int, std::size_t>, std::size_t>> pairs(counts.begin(), counts.end());
  std::stable_sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  RoleMatch m;
  std::set<std::size_t> taken;
  for (const auto& [key, count] : pairs) {
    const auto [label, role] = key;
    if (m.label_to_role.count(label) || taken.count(role)) continue;
    m.label_to_role[label] = role;
    taken.insert(role);
  }
  std::size_t next_free = 0;
  for (int label : inventory) {
    if (m.label_to_role.count(label)) continue;
    while (taken.count(next_free)) ++next_free;
    m.label_to_role[label] = next_free;
    taken.insert(next_free);
  }
  for (std::size_t s = 0; s < symbolic.size(); ++s) {
    bool same = true;
    for (std::size_t t = 0; t < symbolic[s].size() && same; ++t) {
      const auto it = m.label_to_role.find(symbolic[s][t]);
      same = it != m.label_to_role.end() && it->second == learned[s][t];
    }
    m.matched += same;
  }
  m.total = symbolic.size();
  m.match_rate = m.total ? static_cast<double>(m.matched) / static_cast<double>(m.total) : 0.0;
  m.distinct_learned_roles = used_roles.size();
  return m;
}

RoleMatch algorithm_match_rate(const learner::RoleModel& model, const std::vector<std::vector<std::string>>& commands) {
  std::vector<std::vector<int>> symbolic;
  for (const auto& c : commands) symbolic.push_back(scan_role_algorithm(c));
  std::vector<std::vector<std::size_t>> learned;
  for (auto& rec : model.attention_all(commands)) learned.push_back(std::move(rec.roles));
  return fit_role_labels(symbolic, learned, model.config().n_roles);
}

// ---------------------------------------------------------------------------
// Surgery

const std::vector<std::vector<std::string>>& scan_equivalence_classes() {
  static const std::vector<std::vector<std::string>> classes{
      {"walk", "look", "run", "jump"}, {"left", "right"}, {"twice", "thrice"}, {"opposite", "around"}};
  return classes;
}

namespace {

const std::vector<std::string>* class_of(const std::string& w) {
  for (const auto& c : scan_equivalence_classes()) {
    if (std::find(c.begin(), c.end(), w) != c.end()) return &c;
  }
  return nullptr;
}

}  // namespace

bool equivalent_words(const std::string& a, const std::string& b) {
  const auto* c = class_of(a);
  return c != nullptr && c == class_of(b);
}

std::vector<std::string> SurgerySpec::result() const {
  std::vector<std::string> cmd = base;
  for (const auto& s : swaps) {
    if (s.position >= cmd.size() || cmd[s.position] != s.old_word) {
      throw ConfigError("swap of '" + s.old_word + "' does not match the command at position " +
                        std::to_string(s.position));
    }
    if (!equivalent_words(s.old_word, s.new_word)) {
      throw ConfigError("'" + s.old_word + "' and '" + s.new_word + "' are not in one equivalence class");
    }
    cmd[s.position] = s.new_word;
  }
  if (!tasks::scan_is_grammatical(cmd)) throw ParseError("surgery result is not a SCAN command");
  return cmd;
}

RoleLabeler algorithm_labeler(std::map<int, std::size_t> label_to_role) {
  return [map = std::move(label_to_role)](std::span<const std::string> tokens) {
    std::vector<std::size_t> out;
    for (int label : scan_role_algorithm(tokens)) {
      const auto it = map.find(label);
      if (it == map.end()) throw ConfigError("surgery: no learned role for label " + std::to_string(label));
      out.push_back(it->second);
    }
    return out;
  };
}

RoleLabeler learned_labeler(const learner::RoleModel& model) {
  return [&model](std::span<const std::string> tokens) { return model.attention(tokens).roles; };
}

std::vector<double> constituent_surgery(std::span<const double> e, const learner::RoleModel& model,
                                        const SurgerySpec& spec, const RoleLabeler& labeler) {
  if (e.size() != model.out_dim()) throw ShapeError("surgery: encoding size does not match the ROLE output");
  const auto after = spec.result();
  const auto old_roles = labeler(spec.base);
  const auto new_roles = labeler(after);
  const auto d = model.config().role_dim;
  auto role_vec = [&](std::size_t role) {
    if (role >= model.config().n_roles) throw ShapeError("surgery: role index out of range");
    const auto row = model.roles().data().subspan(role * d, d);
    return std::vector<double>(row.begin(), row.end());
  };
  std::vector<double> out(e.begin(), e.end());
  const auto& vocab = model.filler_vocab();
  for (std::size_t i = 0; i < after.size(); ++i) {
    if (after[i] == spec.base[i] && new_roles[i] == old_roles[i]) continue;
    const auto minus = model.binding_embedding(vocab.id(spec.base[i]), role_vec(old_roles[i]));
    const auto plus = model.binding_embedding(vocab.id(after[i]), role_vec(new_roles[i]));
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += plus[k] - minus[k];
  }
  return out;
}

SurgerySpec sample_surgery(const std::vector<std::vector<std::string>>& pool, std::size_t n_swaps, Rng& rng) {
  auto swappable = [](const std::vector<std::string>& c) {
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (class_of(c[i])) pos.push_back(i);
    }
    return pos;
  };
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (swappable(pool[i]).size() >= n_swaps) eligible.push_back(i);
  }
  if (eligible.empty() || n_swaps == 0) throw ConfigError("no command admits " + std::to_string(n_swaps) + " swaps");
  SurgerySpec spec;
  spec.base = pool[eligible[std::uniform_int_distribution<std::size_t>(0, eligible.size() - 1)(rng)]];
  auto pos = swappable(spec.base);
  std::shuffle(pos.begin(), pos.end(), rng);
  pos.resize(n_swaps);
  std::sort(pos.begin(), pos.end());
  for (auto p : pos) {
    const auto& cls = *class_of(spec.base[p]);
    std::vector<std::string> options;
    for (const auto& w : cls) {
      if (w != spec.base[p]) options.push_back(w);
    }
    spec.swaps.push_back({p, spec.base[p], options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)]});
  }
  return spec;
}

std::vector<SurgeryPoint> surgery_curve(const nets::Seq2Seq& target, const learner::RoleModel& model,
                                        const RoleLabeler& labeler,
                                        const std::vector<std::vector<std::string>>& pool, std::size_t max_swaps,
                                        std::size_t trials, std::uint64_t seed, std::size_t workers) {
  std::vector<SurgeryPoint> curve;
  for (std::size_t n = 1; n <= max_swaps; ++n) {
    Rng rng(seed + n);
    std::vector<SurgerySpec> specs;
    for (std::size_t t = 0; t < trials; ++t) specs.push_back(sample_surgery(pool, n, rng));
    std::vector<char> ok(trials, 0);
    parallel_for(trials, workers, [&](std::size_t t) {
      const auto& spec = specs[t];
      const auto edited = constituent_surgery(target.encode(spec.base), model, spec, labeler);
      const auto decoded = target.decode_from_hidden(edited);
      ok[t] = !decoded.truncated && decoded.tokens == tasks::scan_interpret(spec.result());
    });
    SurgeryPoint p;
    p.swaps = n;
    p.trials = trials;
    p.correct = static_cast<std::size_t>(std::count(ok.begin(), ok.end(), 1));
    p.accuracy = trials ? static_cast<double>(p.correct) / static_cast<double>(trials) : 0.0;
    curve.push_back(p);
  }
  return curve;
}

std::vector<ChainStep> surgery_chain(const nets::Seq2Seq& target, const learner::RoleModel& model,
                                     const RoleLabeler& labeler,
                                     const std::vector<std::string>& base,
                                     const std::vector<std::pair<std::string, std::string>>& replacements) {
  std::vector<ChainStep> steps;
  auto record = [&](const std::vector<std::string>& cmd, const std::vector<double>& e) {
    ChainStep s;
    s.command = cmd;
    s.expected = tasks::scan_interpret(cmd);
    const auto d = target.decode_from_hidden(e);
    s.decoded = d.tokens;
    s.correct = !d.truncated && d.tokens == s.expected;
    steps.push_back(std::move(s));
  };
  std::vector<std::string> cmd = base;
  std::vector<double> e = target.encode(base);
  record(cmd, e);
  for (const auto& [from, to] : replacements) {
    const auto it = std::find(cmd.begin(), cmd.end(), from);
    if (it == cmd.end()) throw ConfigError("surgery chain: '" + from + "' not in '" + join_words(cmd) + "'");
    SurgerySpec spec{cmd, {{static_cast<std::size_t>(it - cmd.begin()), from, to}}};
    e = constituent_surgery(e, model, spec, labeler);
    cmd = spec.result();
    record(cmd, e);
  }
  return steps;
}

}  // namespace role::analysis
