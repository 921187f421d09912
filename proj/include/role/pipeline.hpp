#pragma once

// End-to-end experiment steps over an artifact directory. Each step writes a
// manifest (config hash, seed, version, metrics) beside its outputs and is
// skipped when a manifest with the same step key already exists.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "role/nets/seq2seq.hpp"
#include "role/role_learner.hpp"
#include "role/schemes.hpp"
#include "role/tasks/digits.hpp"
#include "role/tpe.hpp"

namespace role::pipeline {

enum class Task { Scan, DigitsLtr, DigitsTree };
std::string task_name(Task t);
Task parse_task(const std::string& name);

struct RunConfig {
  Task task = Task::Scan;
  std::uint64_t seed = 0;
  std::size_t workers = 1;

  tasks::DigitCorpusConfig digits;
  double scan_train_fraction = 0.8;
  std::size_t scan_train_subset = 0;  // 0 = the whole train split

  nets::Seq2SeqConfig seq2seq;
  nets::Seq2SeqTrainConfig seq2seq_train;
  tpe::AutoencoderConfig autoencoder;

  learner::RoleModelConfig role;
  learner::RoleTrainConfig role_train;
  tpe::TpeFitConfig tpe_fit;

  std::size_t surgery_max_swaps = 5;
  std::size_t surgery_trials = 500;
  /// "learned": roles from the ROLE model's snapped attention. "algorithm":
  /// roles from the symbolic algorithm through the interpret label map.
  std::string surgery_roles = "learned";
};

/// Task defaults: SCAN uses the GRU seq2seq target with 50 roles of size 50;
/// the digit tasks use TPE autoencoder targets with 20 (LTR) or 120 (tree)
/// roles and lambda = 1.
RunConfig default_config(Task task);

/// Every seed in the sub-configs is set to config.seed.
void propagate_seed(RunConfig& config);

nlohmann::json to_json(const RunConfig& config);
/// Missing keys take the task defaults; unknown keys throw ConfigError.
RunConfig config_from_json(const nlohmann::json& j);

/// Applies "a.b.c=value" to a config document; the value is parsed as JSON
/// when possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Hex FNV-1a 64 of the canonical JSON dump.
std::string config_hash(const nlohmann::json& j);

/// Git-describe-style version baked in at build time.
std::string version();

/// Artifact layout under one root directory.
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root);
  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path data(const std::string& name) const;
  std::filesystem::path model(const std::string& name) const;
  std::filesystem::path embeddings(const std::string& name) const;
  std::filesystem::path report(const std::string& name) const;
  std::filesystem::path manifest(const std::string& step) const;

 private:
  std::filesystem::path root_;
};

struct StepResult {
  std::string step;
  nlohmann::json metrics;
  bool cached = false;
};

using Logger = std::function<void(const std::string&)>;

struct Options {
  bool force = false;          // recompute even when a matching manifest exists
  bool prerequisites = false;  // run missing prerequisite steps instead of failing
  Logger log;                  // progress lines; may be empty
};

// Steps. A step whose prerequisite artifacts are missing or were produced
// under a different config throws ConfigError unless Options::prerequisites.
StepResult gen_data(const RunConfig& c, const Workspace& ws, const Options& o = {});
StepResult train_target(const RunConfig& c, const Workspace& ws, const Options& o = {});
StepResult extract(const RunConfig& c, const Workspace& ws, const Options& o = {});
StepResult train_role(const RunConfig& c, const Workspace& ws, const Options& o = {});
/// `scheme` is a predefined scheme name or "discrete" (snapped ROLE labels).
StepResult fit_tpe(const RunConfig& c, const Workspace& ws, const std::string& scheme, const Options& o = {});
/// mode: target | continuous | snapped | discrete | a predefined scheme name.
StepResult evaluate(const RunConfig& c, const Workspace& ws, const std::string& mode, const Options& o = {});
StepResult interpret(const RunConfig& c, const Workspace& ws, const Options& o = {});
StepResult surgery(const RunConfig& c, const Workspace& ws, const Options& o = {});
StepResult factor_demo(const RunConfig& c, const Workspace& ws, const Options& o = {});

/// Reads a step's stored metrics, or nullopt when it has not run.
std::optional<nlohmann::json> stored_metrics(const Workspace& ws, const std::string& step);

}  // namespace role::pipeline
