#include "role/embedding_table.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "role/common.hpp"

namespace role {

void EmbeddingTable::add(std::vector<std::string> tokens, std::vector<double> vec) {
  if (tokens.empty()) throw ParseError("embedding record without tokens");
  if (vec.empty()) throw ShapeError("embedding record without a vector");
  if (records_.empty()) dim_ = vec.size();
  if (vec.size() != dim_) {
    throw ShapeError("embedding dimension " + std::to_string(vec.size()) + " differs from " + std::to_string(dim_));
  }
  records_.push_back({std::move(tokens), std::move(vec)});
}

std::vector<std::vector<std::string>> EmbeddingTable::token_lists() const {
  std::vector<std::vector<std::string>> out;
  out.reserve(records_.size());
  for (const auto& r : records_) out.push_back(r.tokens);
  return out;
}

EmbeddingTable EmbeddingTable::subset(const std::vector<std::size_t>& indices) const {
  EmbeddingTable t(source_);
  for (auto i : indices) t.add(records_.at(i).tokens, records_.at(i).vec);
  return t;
}

void export_embeddings(const EmbeddingTable& table, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& r : table.records()) {
    nlohmann::json j{{"tokens", r.tokens}, {"vec", r.vec}};
    if (!table.source().empty()) j["source"] = table.source();
    out << j.dump() << '\n';
  }
}

EmbeddingTable import_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  EmbeddingTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      auto tokens = j.at("tokens").get<std::vector<std::string>>();
      auto vec = j.at("vec").get<std::vector<double>>();
      if (table.empty() && j.contains("source")) table.set_source(j["source"].get<std::string>());
      table.add(std::move(tokens), std::move(vec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(where + ": " + e.what());
    } catch (const ShapeError& e) {
      throw ShapeError(where + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(where + ": " + e.what());
    }
  }
  if (table.empty()) throw ParseError(path.string() + ": no embedding records");
  return table;
}

}  // namespace role
