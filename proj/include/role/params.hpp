#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "role/tensor.hpp"

namespace role::ad {

/// Ordered, named parameter bundle. Order is the checkpoint blob order.
class ParamSet {
 public:
  /// Registers a parameter; throws role::ConfigError on a duplicate name.
  Tensor& add(std::string name, Tensor t);

  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t numel() const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }

  void zero_grad();
  /// Deep copy of all values (for best-so-far snapshots).
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Writes `<prefix>.json` (manifest: names, shapes, blob offsets, free-form
/// `meta`) and `<prefix>.bin` (little-endian float64, manifest order).
void save_checkpoint(const ParamSet& params, const std::filesystem::path& prefix,
                     const nlohmann::json& meta = nlohmann::json::object());

/// Loads values into an existing bundle whose names and shapes must match the
/// manifest exactly. Returns the manifest's `meta` object.
nlohmann::json load_checkpoint(ParamSet& params, const std::filesystem::path& prefix);

/// Builds a bundle with the manifest's names and shapes and loads the values.
ParamSet load_params(const std::filesystem::path& prefix);
/// Reads only the manifest's `meta` object.
nlohmann::json read_checkpoint_meta(const std::filesystem::path& prefix);

}  // namespace role::ad
