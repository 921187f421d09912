#include "role/tasks/scan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "role/common.hpp"
#include "role/vocab.hpp"

namespace role::tasks {

namespace {

const std::vector<std::string> kActions{"walk", "look", "run", "jump"};
const std::vector<std::string> kDirections{"left", "right"};

bool is_action(const std::string& w) { return std::find(kActions.begin(), kActions.end(), w) != kActions.end(); }

std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(c - 'a' + 'A');
  return s;
}

std::string turn_action(const std::string& direction) { return direction == "left" ? "TL" : "TR"; }

[[noreturn]] void bad(std::span<const std::string> tokens, const std::string& why) {
  throw ParseError("not a SCAN command (" + why + "): '" + join_words(tokens) + "'");
}

// V := U | U D | U opposite D | U around D | turn D | turn opposite D | turn around D
std::vector<std::string> interpret_v(std::span<const std::string> v) {
  if (v.empty() || v.size() > 3) bad(v, "bad verb phrase length");
  const std::string& head = v[0];
  const bool turn = head == "turn";
  if (!turn && !is_action(head)) bad(v, "expected an action word");
  const std::string act = turn ? "" : upper(head);
  if (v.size() == 1) {
    if (turn) bad(v, "bare turn");
    return {act};
  }
  const std::string& dir = v.back();
  if (dir != "left" && dir != "right") bad(v, "expected a direction");
  const std::string t = turn_action(dir);
  std::vector<std::string> unit{t};
  if (!turn) unit.push_back(act);
  if (v.size() == 2) return unit;
  std::vector<std::string> out;
  if (v[1] == "opposite") {
    out.push_back(t);
    out.insert(out.end(), unit.begin(), unit.end());
  } else if (v[1] == "around") {
    for (int i = 0; i < 4; ++i) out.insert(out.end(), unit.begin(), unit.end());
  } else {
    bad(v, "expected opposite or around");
  }
  return out;
}

// S := V | V twice | V thrice
std::vector<std::string> interpret_s(std::span<const std::string> s) {
  if (s.empty()) bad(s, "empty phrase");
  int reps = 1;
  if (s.back() == "twice") reps = 2;
  if (s.back() == "thrice") reps = 3;
  auto body = interpret_v(reps == 1 ? s : s.first(s.size() - 1));
  std::vector<std::string> out;
  for (int i = 0; i < reps; ++i) out.insert(out.end(), body.begin(), body.end());
  return out;
}

std::vector<std::vector<std::string>> all_verb_phrases() {
  std::vector<std::vector<std::string>> out;
  for (const auto& u : kActions) {
    out.push_back({u});
    for (const auto& d : kDirections) out.push_back({u, d});
    for (const auto& d : kDirections) out.push_back({u, "opposite", d});
    for (const auto& d : kDirections) out.push_back({u, "around", d});
  }
  for (const auto& d : kDirections) out.push_back({"turn", d});
  for (const auto& d : kDirections) out.push_back({"turn", "opposite", d});
  for (const auto& d : kDirections) out.push_back({"turn", "around", d});
  return out;
}

}  // namespace

const std::vector<std::string>& scan_input_words() {
  static const std::vector<std::string> words{"walk", "look", "run", "jump", "turn", "left", "right",
                                              "opposite", "around", "twice", "thrice", "and", "after"};
  return words;
}

const std::vector<std::string>& scan_output_actions() {
  static const std::vector<std::string> actions{"WALK", "LOOK", "RUN", "JUMP", "TL", "TR"};
  return actions;
}

std::vector<std::string> scan_interpret(std::span<const std::string> tokens) {
  std::size_t conj = tokens.size();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == "and" || tokens[i] == "after") {
      if (conj != tokens.size()) bad(tokens, "more than one conjunction");
      conj = i;
    }
  }
  if (conj == tokens.size()) return interpret_s(tokens);
  auto x = interpret_s(tokens.first(conj));
  auto y = interpret_s(tokens.subspan(conj + 1));
  if (tokens[conj] == "after") std::swap(x, y);
  x.insert(x.end(), y.begin(), y.end());
  return x;
}

bool scan_is_grammatical(std::span<const std::string> tokens) {
  try {
    scan_interpret(tokens);
    return true;
  } catch (const ParseError&) {
    return false;
  }
}

std::vector<Example> scan_generate_all() {
  std::vector<std::vector<std::string>> phrases;
  for (const auto& v : all_verb_phrases()) {
    phrases.push_back(v);
    for (const char* c : {"twice", "thrice"}) {
      auto s = v;
      s.emplace_back(c);
      phrases.push_back(std::move(s));
    }
  }
  std::vector<std::vector<std::string>> commands = phrases;
  for (const char* conj : {"and", "after"}) {
    for (const auto& a : phrases) {
      for (const auto& b : phrases) {
        auto c = a;
        c.emplace_back(conj);
        c.insert(c.end(), b.begin(), b.end());
        commands.push_back(std::move(c));
      }
    }
  }
  std::vector<Example> out;
  out.reserve(commands.size());
  for (auto& c : commands) {
    auto actions = scan_interpret(c);
    out.push_back({std::move(c), std::move(actions)});
  }
  return out;
}

ScanSplit scan_split(const std::vector<Example>& commands, std::uint64_t seed, double train_fraction) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw ConfigError("train fraction must lie in [0, 1]");
  std::vector<std::size_t> order(commands.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(commands.size())));
  ScanSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? split.train : split.test).push_back(commands[order[i]]);
  }
  return split;
}

}  // namespace role::tasks
