#include <filesystem>
#include <functional>
#include <map>
#include <set>

#include "doctest.h"
#include "role/common.hpp"
#include "role/tasks/digits.hpp"
#include "role/tasks/scan.hpp"
#include "role/tasks/tree.hpp"
#include "role/vocab.hpp"

using namespace role;
using namespace role::tasks;

namespace {

std::vector<std::string> words(const std::string& s) { return split_words(s); }

// Independent evaluator: a table of verb-phrase meanings built by hand from
// the grammar, then repetition and conjunction applied as string operations.
std::string brute_force_eval(const std::vector<std::string>& cmd) {
  std::map<std::string, std::string> verb;
  const std::map<std::string, std::string> act{{"walk", "WALK"}, {"look", "LOOK"}, {"run", "RUN"}, {"jump", "JUMP"}};
  const std::map<std::string, std::string> turn{{"left", "TL"}, {"right", "TR"}};
  for (const auto& [u, a] : act) {
    verb[u] = a + " ";
    for (const auto& [d, t] : turn) {
      verb[u + " " + d] = t + " " + a + " ";
      verb[u + " opposite " + d] = t + " " + t + " " + a + " ";
      std::string around;
      for (int i = 0; i < 4; ++i) around += t + " " + a + " ";
      verb[u + " around " + d] = around;
    }
  }
  for (const auto& [d, t] : turn) {
    verb["turn " + d] = t + " ";
    verb["turn opposite " + d] = t + " " + t + " ";
    verb["turn around " + d] = t + " " + t + " " + t + " " + t + " ";
  }
  std::function<std::string(std::vector<std::string>)> phrase = [&](std::vector<std::string> p) {
    std::string times = "1";
    if (p.back() == "twice" || p.back() == "thrice") {
      times = p.back();
      p.pop_back();
    }
    const std::string base = verb.at(join_words(p));
    return times == "twice" ? base + base : times == "thrice" ? base + base + base : base;
  };
  for (std::size_t i = 0; i < cmd.size(); ++i) {
    if (cmd[i] == "and" || cmd[i] == "after") {
      std::vector<std::string> l(cmd.begin(), cmd.begin() + static_cast<long>(i));
      std::vector<std::string> r(cmd.begin() + static_cast<long>(i) + 1, cmd.end());
      return cmd[i] == "and" ? phrase(l) + phrase(r) : phrase(r) + phrase(l);
    }
  }
  return phrase(cmd);
}

}  // namespace

TEST_CASE("balanced digit parse") {
  const auto t = parse_balanced(words("3 1 1 6"));
  CHECK(t.str() == "((3 1) (1 6))");
  CHECK(parse_balanced(words("7")).str() == "7");
  CHECK(parse_balanced(words("5 2 3 1 9")).str() == "(((5 2) 3) (1 9))");
  const auto paths = t.leaf_paths();
  CHECK(paths == std::vector<std::string>{"LL", "LR", "RL", "RR"});
  CHECK(std::set<std::string>(paths.begin(), paths.end()).size() == 4);
  CHECK_THROWS_AS(parse_balanced(std::vector<std::string>{}), ParseError);
  CHECK(parse_bracketed(t.str()).str() == t.str());
  CHECK_THROWS_AS(parse_bracketed("(1 2"), ParseError);
}

TEST_CASE("parse trees preserve leaf order for every string up to length 8") {
  for (std::size_t n = 1; n <= 8; ++n) {
    // Leaf order depends only on length, so distinct symbols per position
    // cover every digit string of that length.
    std::vector<std::string> s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(std::to_string(i));
    const auto t = parse_balanced(s);
    CHECK(t.leaves() == s);
    CHECK(t.leaf_count() == n);
  }
}

TEST_CASE("digit corpus") {
  DigitCorpusConfig cfg{0, 10, 2, 2, 2, 3};
  const auto c = gen_digit_corpus(cfg);
  std::set<std::vector<std::string>> all;
  for (const auto* split : {&c.train, &c.dev, &c.test}) {
    for (const auto& s : *split) {
      CHECK(s.size() >= 2);
      CHECK(s.size() <= 3);
      all.insert(s);
    }
  }
  CHECK(all.size() == 14);
  const auto again = gen_digit_corpus(cfg);
  CHECK(again.train == c.train);
  CHECK(again.test == c.test);
  CHECK_THROWS_AS(gen_digit_corpus({0, 100, 1, 0, 2, 2}), ConfigError);
}

TEST_CASE("default digit corpus has no cross-split duplicates") {
  const auto c = gen_digit_corpus({});
  CHECK(c.train.size() == 40000);
  CHECK(c.dev.size() == 5000);
  CHECK(c.test.size() == 5000);
  std::set<std::vector<std::string>> train(c.train.begin(), c.train.end());
  CHECK(train.size() == c.train.size());
  std::size_t shared = 0;
  for (const auto* other : {&c.dev, &c.test}) {
    for (const auto& s : *other) shared += train.count(s);
  }
  std::set<std::vector<std::string>> dev(c.dev.begin(), c.dev.end());
  for (const auto& s : c.test) shared += dev.count(s);
  CHECK(shared == 0);
}

TEST_CASE("SCAN grammar size and examples") {
  const auto all = scan_generate_all();
  CHECK(all.size() == 20910);
  std::size_t tokens = 0, longest = 0;
  std::set<std::string> distinct;
  for (const auto& e : all) {
    tokens += e.input.size();
    longest = std::max(longest, e.output.size());
    distinct.insert(join_words(e.input));
  }
  CHECK(tokens == 151688);
  CHECK(distinct.size() == 20910);
  CHECK(longest == 48);
  CHECK(distinct.count("jump around left after walk thrice") == 1);
}

TEST_CASE("SCAN interpreter examples") {
  CHECK(join_words(scan_interpret(words("jump opposite left"))) == "TL TL JUMP");
  CHECK(join_words(scan_interpret(words("jump around left"))) == "TL JUMP TL JUMP TL JUMP TL JUMP");
  CHECK(join_words(scan_interpret(words("run left twice after jump opposite right thrice"))) ==
        "TR TR JUMP TR TR JUMP TR TR JUMP TL RUN TL RUN");
  CHECK(join_words(scan_interpret(words("turn left and walk"))) == "TL WALK");
  CHECK_THROWS_AS(scan_interpret(words("turn")), ParseError);
  CHECK_THROWS_AS(scan_interpret(words("walk and run and look")), ParseError);
  CHECK_THROWS_AS(scan_interpret(words("walk twice thrice")), ParseError);
  CHECK_THROWS_AS(scan_interpret(words("left walk")), ParseError);
  CHECK_FALSE(scan_is_grammatical(words("jump around")));
}

TEST_CASE("SCAN interpreter agrees with an independent evaluator on every command") {
  std::size_t mismatches = 0;
  for (const auto& e : scan_generate_all()) {
    if (join_words(e.output) + " " != brute_force_eval(e.input)) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("SCAN split") {
  const auto all = scan_generate_all();
  const auto s = scan_split(all, 0);
  CHECK(s.train.size() == 16728);
  CHECK(s.test.size() == 4182);
  std::set<std::string> train;
  for (const auto& e : s.train) train.insert(join_words(e.input));
  std::size_t leaked = 0;
  for (const auto& e : s.test) leaked += train.count(join_words(e.input));
  CHECK(leaked == 0);
  CHECK(scan_split(all, 0).test == s.test);
  CHECK(scan_split(all, 1).test != s.test);
}

TEST_CASE("dataset files round trip") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "role_tasks_test";
  fs::remove_all(dir);
  const auto all = scan_generate_all();
  std::vector<Example> some(all.begin(), all.begin() + 50);
  write_examples(dir / "d.jsonl", some);
  CHECK(read_examples(dir / "d.jsonl") == some);
  write_split(dir / "split.txt", some);
  const auto keys = read_split(dir / "split.txt");
  CHECK(select_by_input(all, keys) == some);
  CHECK_THROWS_AS(select_by_input(some, {"walk twice and walk twice and"}), ParseError);
  fs::remove_all(dir);
}

TEST_CASE("vocab") {
  Vocab v;
  CHECK(v.add("a") == 0);
  CHECK(v.add("b") == 1);
  CHECK(v.add("a") == 0);
  v.freeze();
  CHECK_THROWS_AS(v.add("c"), ParseError);
  CHECK(v.decode(v.encode(words("b a b"))) == words("b a b"));
}
