#include "role/tasks/dataset.hpp"

#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "role/common.hpp"
#include "role/vocab.hpp"

namespace role::tasks {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  return in;
}

}  // namespace

void write_examples(const std::filesystem::path& path, const std::vector<Example>& examples) {
  auto out = open_out(path);
  for (const auto& e : examples) {
    out << nlohmann::json{{"input", e.input}, {"output", e.output}}.dump() << '\n';
  }
}

std::vector<Example> read_examples(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<Example> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      out.push_back({j.at("input").get<std::vector<std::string>>(), j.at("output").get<std::vector<std::string>>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_split(const std::filesystem::path& path, const std::vector<Example>& examples) {
  auto out = open_out(path);
  for (const auto& e : examples) out << join_words(e.input) << '\n';
}

std::vector<std::string> read_split(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

std::vector<Example> select_by_input(const std::vector<Example>& all, const std::vector<std::string>& keys) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < all.size(); ++i) index.emplace(join_words(all[i].input), i);
  std::vector<Example> out;
  out.reserve(keys.size());
  for (const auto& k : keys) {
    auto it = index.find(k);
    if (it == index.end()) throw ParseError("split entry not in dataset: '" + k + "'");
    out.push_back(all[it->second]);
  }
  return out;
}

}  // namespace role::tasks
