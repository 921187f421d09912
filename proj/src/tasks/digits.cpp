#include "role/tasks/digits.hpp"

#include <random>
#include <set>

#include "role/common.hpp"

namespace role::tasks {

DigitCorpus gen_digit_corpus(const DigitCorpusConfig& config) {
  if (config.min_len == 0 || config.min_len > config.max_len) {
    throw ConfigError("digit corpus: need 1 <= min_len <= max_len");
  }
  if (config.max_len > 18) throw ConfigError("digit corpus: max_len above 18 is not supported");
  const std::size_t wanted = config.n_train + config.n_dev + config.n_test;
  std::vector<std::size_t> capacity;
  std::size_t total = 0;
  for (std::size_t len = config.min_len; len <= config.max_len; ++len) {
    std::size_t c = 1;
    for (std::size_t i = 0; i < len; ++i) c *= 10;
    capacity.push_back(c);
    total += c;
  }
  if (wanted > total) {
    throw ConfigError("digit corpus: " + std::to_string(wanted) + " distinct strings requested but only " +
                      std::to_string(total) + " exist");
  }

  Rng rng(config.seed);
  std::uniform_int_distribution<int> digit(0, 9);
  std::set<std::string> seen;
  std::vector<std::size_t> used(capacity.size(), 0);
  std::vector<std::string> drawn;
  drawn.reserve(wanted);
  while (drawn.size() < wanted) {
    std::vector<std::size_t> open;
    for (std::size_t i = 0; i < capacity.size(); ++i) {
      if (used[i] < capacity[i]) open.push_back(i);
    }
    const std::size_t li = open[std::uniform_int_distribution<std::size_t>(0, open.size() - 1)(rng)];
    std::string s;
    for (std::size_t i = 0; i < config.min_len + li; ++i) s.push_back(static_cast<char>('0' + digit(rng)));
    if (seen.insert(s).second) {
      ++used[li];
      drawn.push_back(std::move(s));
    }
  }

  auto to_tokens = [](const std::string& s) {
    std::vector<std::string> t;
    for (char c : s) t.emplace_back(1, c);
    return t;
  };
  DigitCorpus corpus;
  corpus.config = config;
  for (std::size_t i = 0; i < drawn.size(); ++i) {
    auto& dst = i < config.n_train ? corpus.train : i < config.n_train + config.n_dev ? corpus.dev : corpus.test;
    dst.push_back(to_tokens(drawn[i]));
  }
  return corpus;
}

std::vector<Example> autoencoding_examples(const std::vector<std::vector<std::string>>& strings) {
  std::vector<Example> out;
  out.reserve(strings.size());
  for (const auto& s : strings) out.push_back({s, s});
  return out;
}

}  // namespace role::tasks
