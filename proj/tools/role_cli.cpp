// Command-line front end for the experiment pipeline.

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "role/common.hpp"
#include "role/pipeline.hpp"

namespace pl = role::pipeline;
using json = nlohmann::json;

namespace {

struct Flags {
  std::string config_file;
  std::string out = "artifacts";
  std::string task;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::vector<std::string> overrides;
  bool force = false;
  bool chain = false;
  bool quiet = false;
  std::string scheme;
  std::string mode = "continuous";
};

pl::RunConfig build_config(const Flags& f) {
  json doc = json::object();
  if (!f.config_file.empty()) {
    std::ifstream in(f.config_file);
    if (!in) throw role::ConfigError("cannot read config file " + f.config_file);
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw role::ConfigError("config file " + f.config_file + " is not valid JSON: " + e.what());
    }
  }
  if (!f.task.empty()) doc["task"] = f.task;
  for (const auto& o : f.overrides) pl::apply_override(doc, o);
  if (f.seed) doc["seed"] = *f.seed;
  if (f.workers) doc["workers"] = *f.workers;
  return pl::config_from_json(doc);
}

void print_metrics(const pl::StepResult& r) {
  std::cout << r.step << (r.cached ? " (cached)" : "") << '\n' << r.metrics.dump(2) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Role learning experiments: targets, TPE and ROLE fitting, analysis"};
  app.require_subcommand(1, 1);
  Flags f;
  app.add_option("--config", f.config_file, "JSON config file (missing keys take task defaults)");
  app.add_option("--out", f.out, "artifact directory")->capture_default_str();
  app.add_option("--task", f.task, "scan | digits-ltr | digits-tree");
  app.add_option("--seed", f.seed, "seed for every stochastic component");
  app.add_option("--workers", f.workers, "threads for corpus-parallel evaluation");
  app.add_option("--set", f.overrides, "override a config key, e.g. --set role_train.lambda=0.1");
  app.add_flag("--force", f.force, "recompute even when a matching manifest exists");
  app.add_flag("--chain", f.chain, "run missing prerequisite steps first");
  app.add_flag("--quiet", f.quiet, "suppress progress lines");

  auto* gen = app.add_subcommand("gen-data", "generate the task corpus and splits");
  auto* target = app.add_subcommand("train-target", "train the target encoder-decoder");
  auto* ext = app.add_subcommand("extract", "export target encodings as embedding tables");
  auto* role = app.add_subcommand("train-role", "train ROLE over the extracted encodings");
  auto* fit = app.add_subcommand("fit-tpe", "fit a TPE with a predefined scheme or snapped ROLE roles");
  fit->add_option("--scheme", f.scheme, "ltr | rtl | bi | tree | wickel | bow | discrete")->required();
  auto* eval = app.add_subcommand("eval", "substitution accuracy of an approximation");
  eval->add_option("--mode", f.mode, "target | continuous | snapped | discrete | <scheme>")->capture_default_str();
  auto* interp = app.add_subcommand("interpret", "compare learned roles with symbolic ones");
  auto* surg = app.add_subcommand("surgery", "constituent surgery chain and swap curve (scan)");
  auto* factor = app.add_subcommand("factor-demo", "factored-weight identity on the jump-twice example");
  auto* show = app.add_subcommand("show-config", "print the effective config");

  CLI11_PARSE(app, argc, argv);

  try {
    const pl::RunConfig c = build_config(f);
    if (show->parsed()) {
      std::cout << pl::to_json(c).dump(2) << '\n';
      return 0;
    }
    const pl::Workspace ws(f.out);
    pl::Options o;
    o.force = f.force;
    o.prerequisites = f.chain;
    if (!f.quiet) o.log = [](const std::string& line) { std::cerr << line << '\n'; };
    if (gen->parsed()) print_metrics(pl::gen_data(c, ws, o));
    if (target->parsed()) print_metrics(pl::train_target(c, ws, o));
    if (ext->parsed()) print_metrics(pl::extract(c, ws, o));
    if (role->parsed()) print_metrics(pl::train_role(c, ws, o));
    if (fit->parsed()) print_metrics(pl::fit_tpe(c, ws, f.scheme, o));
    if (eval->parsed()) print_metrics(pl::evaluate(c, ws, f.mode, o));
    if (interp->parsed()) print_metrics(pl::interpret(c, ws, o));
    if (surg->parsed()) print_metrics(pl::surgery(c, ws, o));
    if (factor->parsed()) print_metrics(pl::factor_demo(c, ws, o));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
