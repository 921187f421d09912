#include <cstdio>
#include <sstream>

#include "role/pipeline.hpp"

#ifndef ROLE_VERSION
#define ROLE_VERSION "0.1.0-unknown"
#endif

namespace role::pipeline {

std::string task_name(Task t) {
  switch (t) {
    case Task::Scan:
      return "scan";
    case Task::DigitsLtr:
      return "digits-ltr";
    case Task::DigitsTree:
      return "digits-tree";
  }
  return "scan";
}

Task parse_task(const std::string& name) {
  if (name == "scan") return Task::Scan;
  if (name == "digits-ltr") return Task::DigitsLtr;
  if (name == "digits-tree") return Task::DigitsTree;
  throw ConfigError("unknown task '" + name + "' (expected scan, digits-ltr or digits-tree)");
}

std::string version() { return ROLE_VERSION; }

RunConfig default_config(Task task) {
  RunConfig c;
  c.task = task;
  // Dev MSE gains below 1e-6 are noise around a converged fit.
  c.role_train.min_delta = 1e-6;
  if (task == Task::Scan) {
    c.role = {50, 50, 100, 64, 2, true};
    // The data term is a per-item squared distance over 100 units, so this
    // matches 0.02 against an element-mean MSE.
    c.role_train.lambda = 2.0;
    c.tpe_fit.filler_dim = 100;
    c.tpe_fit.role_dim = 50;
  } else {
    const bool tree = task == Task::DigitsTree;
    c.autoencoder.scheme = tree ? schemes::Scheme::Tree : schemes::Scheme::LTR;
    c.autoencoder.decoder = tree ? tpe::DecoderKind::Tree : tpe::DecoderKind::Gru;
    c.autoencoder.filler_dim = 20;
    c.autoencoder.role_dim = tree ? 120 : 20;
    const std::size_t roles = tree ? 120 : 20;
    c.role = {roles, roles, 20, 32, 2, true};
    c.role_train.lambda = 1.0;
    c.tpe_fit.filler_dim = 20;
    c.tpe_fit.role_dim = tree ? 120 : 20;
  }
  propagate_seed(c);
  return c;
}

void propagate_seed(RunConfig& c) {
  c.digits.seed = c.seed;
  c.seq2seq_train.seed = c.seed;
  c.autoencoder.train.seed = c.seed;
  c.role_train.seed = c.seed;
  c.tpe_fit.train.seed = c.seed;
}

namespace {

nlohmann::json without_seed(nlohmann::json j) {
  j.erase("seed");
  if (j.contains("train") && j["train"].is_object()) j["train"].erase("seed");
  return j;
}

// Rejects keys in `given` that the defaults document does not have.
void check_keys(const nlohmann::json& given, const nlohmann::json& known, const std::string& path) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + path + key + "'");
    if (value.is_object()) check_keys(value, known[key], path + key + ".");
  }
}

}  // namespace

nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["task"] = task_name(c.task);
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["digits"] = without_seed({{"n_train", c.digits.n_train},
                              {"n_dev", c.digits.n_dev},
                              {"n_test", c.digits.n_test},
                              {"min_len", c.digits.min_len},
                              {"max_len", c.digits.max_len}});
  j["scan"] = {{"train_fraction", c.scan_train_fraction}, {"train_subset", c.scan_train_subset}};
  j["seq2seq"] = nets::to_json(c.seq2seq);
  j["seq2seq_train"] = {{"steps", c.seq2seq_train.steps},
                        {"learning_rate", c.seq2seq_train.learning_rate},
                        {"log_every", c.seq2seq_train.log_every}};
  j["autoencoder"] = without_seed(tpe::to_json(c.autoencoder));
  j["role"] = learner::to_json(c.role);
  j["role_train"] = without_seed(learner::to_json(c.role_train));
  j["tpe_fit"] = {{"filler_dim", c.tpe_fit.filler_dim},
                  {"role_dim", c.tpe_fit.role_dim},
                  {"train", without_seed(tpe::to_json(c.tpe_fit.train))}};
  j["surgery"] = {{"max_swaps", c.surgery_max_swaps}, {"trials", c.surgery_trials}, {"roles", c.surgery_roles}};
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c = default_config(parse_task(j.value("task", std::string("scan"))));
  check_keys(j, to_json(c), "");
  try {
    c.seed = j.value("seed", c.seed);
    c.workers = j.value("workers", c.workers);
    if (j.contains("digits")) {
      const auto& d = j["digits"];
      c.digits.n_train = d.value("n_train", c.digits.n_train);
      c.digits.n_dev = d.value("n_dev", c.digits.n_dev);
      c.digits.n_test = d.value("n_test", c.digits.n_test);
      c.digits.min_len = d.value("min_len", c.digits.min_len);
      c.digits.max_len = d.value("max_len", c.digits.max_len);
    }
    if (j.contains("scan")) {
      c.scan_train_fraction = j["scan"].value("train_fraction", c.scan_train_fraction);
      c.scan_train_subset = j["scan"].value("train_subset", c.scan_train_subset);
    }
    if (j.contains("seq2seq")) {
      nlohmann::json merged = nets::to_json(c.seq2seq);
      merged.update(j["seq2seq"]);
      c.seq2seq = nets::seq2seq_config_from_json(merged);
    }
    if (j.contains("seq2seq_train")) {
      const auto& s = j["seq2seq_train"];
      c.seq2seq_train.steps = s.value("steps", c.seq2seq_train.steps);
      c.seq2seq_train.learning_rate = s.value("learning_rate", c.seq2seq_train.learning_rate);
      c.seq2seq_train.log_every = s.value("log_every", c.seq2seq_train.log_every);
    }
    if (j.contains("autoencoder")) c.autoencoder = tpe::autoencoder_config_from_json(j["autoencoder"], c.autoencoder);
    if (j.contains("role")) c.role = learner::model_config_from_json(j["role"], c.role);
    if (j.contains("role_train")) c.role_train = learner::train_config_from_json(j["role_train"], c.role_train);
    if (j.contains("tpe_fit")) {
      const auto& t = j["tpe_fit"];
      c.tpe_fit.filler_dim = t.value("filler_dim", c.tpe_fit.filler_dim);
      c.tpe_fit.role_dim = t.value("role_dim", c.tpe_fit.role_dim);
      if (t.contains("train")) c.tpe_fit.train = tpe::train_config_from_json(t["train"], c.tpe_fit.train);
    }
    if (j.contains("surgery")) {
      c.surgery_max_swaps = j["surgery"].value("max_swaps", c.surgery_max_swaps);
      c.surgery_trials = j["surgery"].value("trials", c.surgery_trials);
      c.surgery_roles = j["surgery"].value("roles", c.surgery_roles);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config value has the wrong type: ") + e.what());
  }
  if (c.role_train.lambda < 0.0) throw ConfigError("role_train.lambda must be >= 0");
  if (c.surgery_roles != "learned" && c.surgery_roles != "algorithm") {
    throw ConfigError("surgery.roles must be learned or algorithm");
  }
  if (c.scan_train_fraction <= 0.0 || c.scan_train_fraction >= 1.0) {
    throw ConfigError("scan.train_fraction must lie in (0, 1)");
  }
  propagate_seed(c);
  return c;
}

void apply_override(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key.path=value: " + assignment);
  const std::string path = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  nlohmann::json* node = &doc;
  std::stringstream ss(path);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(ss, part, '.')) parts.push_back(part);
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    node = &(*node)[parts[i]];
    if (!node->is_object() && !node->is_null()) throw ConfigError("override path crosses a non-object: " + path);
  }
  (*node)[parts.back()] = value;
}

std::string config_hash(const nlohmann::json& j) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace role::pipeline
