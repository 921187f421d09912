#include "role/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "role/common.hpp"

namespace role::ad {

namespace fs = std::filesystem;
using nlohmann::json;

Tensor& ParamSet::add(std::string name, Tensor t) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  entries_.emplace_back(std::move(name), std::move(t));
  return entries_.back().second;
}

Tensor& ParamSet::get(const std::string& name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw ConfigError("unknown parameter: " + name);
}

const Tensor& ParamSet::get(const std::string& name) const {
  return const_cast<ParamSet*>(this)->get(name);
}

bool ParamSet::contains(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return true;
  }
  return false;
}

std::size_t ParamSet::numel() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

std::vector<std::vector<double>> ParamSet::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.emplace_back(t.data().begin(), t.data().end());
  return out;
}

void ParamSet::restore(const std::vector<std::vector<double>>& values) {
  if (values.size() != entries_.size()) throw ShapeError("snapshot size mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto dst = entries_[i].second.mutable_data();
    if (dst.size() != values[i].size()) throw ShapeError("snapshot shape mismatch");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

namespace {

static_assert(sizeof(double) == 8);

void write_le(std::ofstream& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

double read_le(const unsigned char* bytes) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

fs::path with_suffix(const fs::path& prefix, const char* suffix) {
  return fs::path(prefix.string() + suffix);
}

json read_manifest(const fs::path& prefix) {
  std::ifstream in(with_suffix(prefix, ".json"));
  if (!in) throw ConfigError("missing checkpoint manifest: " + with_suffix(prefix, ".json").string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("bad checkpoint manifest: " + std::string(e.what()));
  }
}

}  // namespace

void save_checkpoint(const ParamSet& params, const fs::path& prefix, const json& meta) {
  if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
  json manifest;
  manifest["format"] = "role-checkpoint-v1";
  manifest["dtype"] = "float64-le";
  manifest["blob"] = with_suffix(prefix, ".bin").filename().string();
  manifest["meta"] = meta;
  json list = json::array();
  std::ofstream blob(with_suffix(prefix, ".bin"), std::ios::binary | std::ios::trunc);
  if (!blob) throw ConfigError("cannot write " + with_suffix(prefix, ".bin").string());
  std::size_t offset = 0;
  for (const auto& [name, t] : params.entries()) {
    list.push_back({{"name", name}, {"shape", t.shape().dims()}, {"offset", offset},
                    {"count", t.numel()}});
    for (double v : t.data()) write_le(blob, v);
    offset += t.numel() * 8;
  }
  manifest["params"] = std::move(list);
  std::ofstream(with_suffix(prefix, ".json")) << manifest.dump(2) << '\n';
}

json load_checkpoint(ParamSet& params, const fs::path& prefix) {
  const json manifest = read_manifest(prefix);
  const auto& list = manifest.at("params");
  if (list.size() != params.size()) {
    throw ConfigError("checkpoint has " + std::to_string(list.size()) + " parameters, model has " +
                      std::to_string(params.size()));
  }
  std::ifstream blob(prefix.parent_path() / manifest.at("blob").get<std::string>(),
                     std::ios::binary);
  if (!blob) throw ConfigError("missing checkpoint blob for " + prefix.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(blob)), {});
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& item = list[i];
    auto& [name, t] = params.entries()[i];
    if (item.at("name").get<std::string>() != name) {
      throw ConfigError("checkpoint parameter order mismatch at " + name);
    }
    if (Shape(item.at("shape").get<std::vector<std::size_t>>()) != t.shape()) {
      throw ShapeError("checkpoint shape mismatch for " + name);
    }
    const auto offset = item.at("offset").get<std::size_t>();
    if (offset + t.numel() * 8 > bytes.size()) throw ParseError("checkpoint blob truncated");
    auto dst = t.mutable_data();
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = read_le(bytes.data() + offset + 8 * j);
  }
  return manifest.value("meta", json::object());
}

json read_checkpoint_meta(const fs::path& prefix) {
  return read_manifest(prefix).value("meta", json::object());
}

ParamSet load_params(const fs::path& prefix) {
  const json manifest = read_manifest(prefix);
  ParamSet params;
  for (const auto& p : manifest.at("params")) {
    Shape shape(p.at("shape").get<std::vector<std::size_t>>());
    const std::size_t n = shape.numel();
    params.add(p.at("name").get<std::string>(), Tensor::parameter(std::move(shape), std::vector<double>(n)));
  }
  load_checkpoint(params, prefix);
  return params;
}

}  // namespace role::ad
