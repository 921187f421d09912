#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "role/analysis/factor.hpp"
#include "role/analysis/metrics.hpp"
#include "role/analysis/scan_roles.hpp"
#include "role/pipeline.hpp"
#include "role/tasks/scan.hpp"
#include "role/tasks/tree.hpp"

namespace role::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using tasks::Example;

// ---------------------------------------------------------------------------
// Workspace

Workspace::Workspace(fs::path root) : root_(std::move(root)) {
  for (const char* sub : {"data", "models", "embeddings", "reports", "manifests"}) fs::create_directories(root_ / sub);
}
fs::path Workspace::data(const std::string& name) const { return root_ / "data" / name; }
fs::path Workspace::model(const std::string& name) const { return root_ / "models" / name; }
fs::path Workspace::embeddings(const std::string& name) const { return root_ / "embeddings" / name; }
fs::path Workspace::report(const std::string& name) const { return root_ / "reports" / name; }
fs::path Workspace::manifest(const std::string& step) const { return root_ / "manifests" / (step + ".json"); }

namespace {

void say(const Options& o, const std::string& line) {
  if (o.log) o.log(line);
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read " + p.string());
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

void flatten(const json& j, const std::string& prefix, std::ostream& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else {
    out << prefix << ": " << j.dump() << '\n';
  }
}

StepResult run_step(const RunConfig& c, const Workspace& ws, const std::string& step, const json& key_doc,
                    const Options& o, const std::function<json()>& body) {
  const std::string key = config_hash(key_doc);
  const auto manifest = ws.manifest(step);
  if (!o.force && fs::exists(manifest)) {
    const auto m = read_json(manifest);
    if (m.value("key", "") == key) {
      say(o, step + ": up to date (" + key + ")");
      return {step, m.at("metrics"), true};
    }
  }
  say(o, step + ": running");
  const auto t0 = std::chrono::steady_clock::now();
  json metrics = body();
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_json(manifest, {{"step", step},
                        {"key", key},
                        {"config_hash", config_hash(to_json(c))},
                        {"seed", c.seed},
                        {"version", version()},
                        {"seconds", seconds},
                        {"config", to_json(c)},
                        {"metrics", metrics}});
  std::ofstream summary(ws.report(step + ".txt"));
  summary << "step: " << step << "\nversion: " << version() << "\nseed: " << c.seed << "\nseconds: " << seconds
          << '\n';
  flatten(metrics, "", summary);
  say(o, step + ": done in " + std::to_string(static_cast<long>(seconds)) + " s");
  return {step, metrics, false};
}

// Returns a prerequisite step's metrics. With `o.prerequisites` the step runs
// (from cache when possible); otherwise its manifest must already match `key`.
template <typename Run>
StepResult need(const Workspace& ws, const Options& o, const std::string& step, const json& key, Run run) {
  if (o.prerequisites) return run(Options{false, true, o.log});
  const auto manifest = ws.manifest(step);
  if (!fs::exists(manifest)) {
    throw ConfigError("missing prerequisite: run " + step + " first (no manifest in " + ws.root().string() + ")");
  }
  const auto m = read_json(manifest);
  if (m.value("key", "") != config_hash(key)) {
    throw ConfigError("prerequisite " + step + " was produced with a different config; rerun it");
  }
  return {step, m.at("metrics"), true};
}

// Step keys: the parts of the config each step depends on.
json data_key(const RunConfig& c) {
  const json full = to_json(c);
  json k{{"task", full["task"]}, {"seed", c.seed}};
  if (c.task == Task::Scan) {
    k["train_fraction"] = c.scan_train_fraction;
  } else {
    k["digits"] = full["digits"];
  }
  return k;
}

json target_key(const RunConfig& c) {
  const json full = to_json(c);
  json k = data_key(c);
  if (c.task == Task::Scan) {
    k["seq2seq"] = full["seq2seq"];
    k["seq2seq_train"] = full["seq2seq_train"];
    k["train_subset"] = c.scan_train_subset;
  } else {
    k["autoencoder"] = full["autoencoder"];
  }
  return k;
}

json role_key(const RunConfig& c) {
  const json full = to_json(c);
  json k = target_key(c);
  k["role"] = full["role"];
  k["role_train"] = full["role_train"];
  return k;
}

json tpe_key(const RunConfig& c, const std::string& scheme) {
  json k = scheme == "discrete" ? role_key(c) : target_key(c);
  k["tpe_fit"] = to_json(c)["tpe_fit"];
  k["scheme"] = scheme;
  return k;
}

// ---------------------------------------------------------------------------
// Loading artifacts

struct Data {
  std::vector<Example> train, test, all;
};

std::vector<std::vector<std::string>> inputs_of(const std::vector<Example>& xs) {
  std::vector<std::vector<std::string>> out;
  for (const auto& x : xs) out.push_back(x.input);
  return out;
}

std::vector<std::vector<std::string>> outputs_of(const std::vector<Example>& xs) {
  std::vector<std::vector<std::string>> out;
  for (const auto& x : xs) out.push_back(x.output);
  return out;
}

Data load_data(const RunConfig& c, const Workspace& ws) {
  Data d;
  if (c.task == Task::Scan) {
    d.all = tasks::read_examples(ws.data("scan_all.jsonl"));
    d.train = tasks::select_by_input(d.all, tasks::read_split(ws.data("scan_train.txt")));
    d.test = tasks::select_by_input(d.all, tasks::read_split(ws.data("scan_test.txt")));
    if (c.scan_train_subset > 0 && c.scan_train_subset < d.train.size()) d.train.resize(c.scan_train_subset);
  } else {
    d.train = tasks::read_examples(ws.data("digits_train.jsonl"));
    d.test = tasks::read_examples(ws.data("digits_test.jsonl"));
    d.all = d.train;
    const auto dev = tasks::read_examples(ws.data("digits_dev.jsonl"));
    d.all.insert(d.all.end(), dev.begin(), dev.end());
    d.all.insert(d.all.end(), d.test.begin(), d.test.end());
  }
  return d;
}

tasks::DigitCorpus load_corpus(const RunConfig& c, const Workspace& ws) {
  tasks::DigitCorpus corpus;
  corpus.config = c.digits;
  corpus.train = inputs_of(tasks::read_examples(ws.data("digits_train.jsonl")));
  corpus.dev = inputs_of(tasks::read_examples(ws.data("digits_dev.jsonl")));
  corpus.test = inputs_of(tasks::read_examples(ws.data("digits_test.jsonl")));
  return corpus;
}

// The trained target: a seq2seq model for SCAN or a TPE autoencoder for digits.
struct Target {
  std::optional<nets::Seq2Seq> s2s;
  std::optional<tpe::TpeAutoencoder> ae;

  static Target load(const RunConfig& c, const Workspace& ws) {
    Target t;
    if (c.task == Task::Scan) {
      t.s2s.emplace(nets::Seq2Seq::load(ws.model("target")));
    } else {
      t.ae.emplace(tpe::TpeAutoencoder::load(ws.model("target")));
    }
    return t;
  }
  std::size_t hidden_dim() const { return s2s ? s2s->hidden_dim() : ae->hidden_dim(); }
  const Vocab& fillers() const { return s2s ? s2s->input_vocab() : ae->filler_vocab(); }
  std::vector<std::vector<double>> encode_all(const std::vector<std::vector<std::string>>& inputs) const {
    if (s2s) return s2s->encode_all(inputs);
    std::vector<std::vector<double>> out;
    for (const auto& x : inputs) out.push_back(ae->encode(x));
    return out;
  }
  analysis::HiddenDecoder decoder(const std::vector<Example>& items) const {
    if (s2s) {
      return [this](std::span<const double> h, std::size_t) {
        auto r = s2s->decode_from_hidden(h);
        if (r.truncated) r.tokens.push_back("<truncated>");
        return r.tokens;
      };
    }
    return [this, &items](std::span<const double> h, std::size_t i) { return ae->decode(h, items[i].input); };
  }
};

analysis::SubstitutionResult substitute(const Target& t, const std::vector<Example>& items,
                                        const std::vector<std::vector<double>>& enc, std::size_t workers) {
  return analysis::substitution_accuracy(enc, t.hidden_dim(), t.decoder(items), outputs_of(items), workers);
}

EmbeddingTable table_of(const std::vector<Example>& items, const std::vector<std::vector<double>>& enc,
                        const std::string& source) {
  EmbeddingTable t(source);
  for (std::size_t i = 0; i < items.size(); ++i) t.add(items[i].input, enc[i]);
  return t;
}

void copy_checkpoint(const fs::path& from, const fs::path& to) {
  for (const char* ext : {".json", ".bin"}) {
    fs::copy_file(fs::path(from.string() + ext), fs::path(to.string() + ext), fs::copy_options::overwrite_existing);
  }
}

// Ground-truth role labels for the digit tasks.
std::vector<std::vector<std::string>> truth_labels(const RunConfig& c,
                                                   const std::vector<std::vector<std::string>>& inputs) {
  std::vector<std::vector<std::string>> out;
  for (const auto& x : inputs) {
    if (c.task == Task::DigitsTree) {
      const auto tree = tasks::parse_balanced(x);
      out.push_back(schemes::role_labels(schemes::Scheme::Tree, x, &tree));
    } else {
      out.push_back(schemes::role_labels(schemes::Scheme::LTR, x));
    }
  }
  return out;
}

analysis::VMeasure snapped_v_measure(const RunConfig& c, const learner::RoleModel& m,
                                     const std::vector<std::vector<std::string>>& inputs) {
  std::vector<std::size_t> predicted;
  for (const auto& rec : m.attention_all(inputs)) predicted.insert(predicted.end(), rec.roles.begin(), rec.roles.end());
  std::vector<std::string> truth, pred;
  for (const auto& labels : truth_labels(c, inputs)) truth.insert(truth.end(), labels.begin(), labels.end());
  for (auto p : predicted) pred.push_back(std::to_string(p));
  return analysis::v_measure(pred, truth);
}

// Labels for a predefined scheme or the snapped ROLE roles.
struct Labeler {
  std::optional<schemes::RoleScheme> scheme;
  std::optional<learner::RoleModel> role;

  std::vector<std::vector<std::string>> operator()(const std::vector<std::vector<std::string>>& inputs) const {
    if (role) return learner::snapped_labels(*role, inputs);
    std::vector<std::vector<std::string>> out;
    for (const auto& x : inputs) {
      if (scheme->kind() == schemes::Scheme::Tree) {
        const auto tree = tasks::parse_balanced(x);
        out.push_back(schemes::role_labels(schemes::Scheme::Tree, x, &tree));
      } else {
        out.push_back(schemes::role_labels(scheme->kind(), x));
      }
    }
    return out;
  }
};

double mean(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

double stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

std::string pct(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * x << '%';
  return s.str();
}

}  // namespace

std::optional<json> stored_metrics(const Workspace& ws, const std::string& step) {
  if (!fs::exists(ws.manifest(step))) return std::nullopt;
  return read_json(ws.manifest(step)).at("metrics");
}

// ---------------------------------------------------------------------------
// Steps

StepResult gen_data(const RunConfig& c, const Workspace& ws, const Options& o) {
  return run_step(c, ws, "gen-data", data_key(c), o, [&] {
    json m;
    if (c.task == Task::Scan) {
      const auto all = tasks::scan_generate_all();
      const auto split = tasks::scan_split(all, c.seed, c.scan_train_fraction);
      tasks::write_examples(ws.data("scan_all.jsonl"), all);
      tasks::write_split(ws.data("scan_train.txt"), split.train);
      tasks::write_split(ws.data("scan_test.txt"), split.test);
      std::size_t tokens = 0;
      for (const auto& e : all) tokens += e.input.size();
      m = {{"commands", all.size()}, {"tokens", tokens}, {"train", split.train.size()}, {"test", split.test.size()}};
    } else {
      const auto corpus = tasks::gen_digit_corpus(c.digits);
      tasks::write_examples(ws.data("digits_train.jsonl"), tasks::autoencoding_examples(corpus.train));
      tasks::write_examples(ws.data("digits_dev.jsonl"), tasks::autoencoding_examples(corpus.dev));
      tasks::write_examples(ws.data("digits_test.jsonl"), tasks::autoencoding_examples(corpus.test));
      m = {{"train", corpus.train.size()}, {"dev", corpus.dev.size()}, {"test", corpus.test.size()}};
    }
    return m;
  });
}

StepResult train_target(const RunConfig& c, const Workspace& ws, const Options& o) {
  need(ws, o, "gen-data", data_key(c), [&](const Options& p) { return gen_data(c, ws, p); });
  return run_step(c, ws, "train-target", target_key(c), o, [&] {
    const Data d = load_data(c, ws);
    json m;
    if (c.task == Task::Scan) {
      Vocab in;
      for (const auto& w : tasks::scan_input_words()) in.add(w);
      auto model = nets::Seq2Seq::create(in, tasks::scan_output_actions(), c.seq2seq, c.seed);
      auto rep = nets::train_seq2seq(model, d.train, c.seq2seq_train, [&](const LogRow& r) {
        say(o, "  step " + std::to_string(r.step) + " loss " + std::to_string(r.loss));
      });
      model.save(ws.model("target"), {{"task", task_name(c.task)}});
      write_training_log(ws.report("target_log.csv"), rep.log);
      for (const auto& w : rep.warnings) say(o, "  warning: " + w);
      m = {{"train_accuracy", nets::sequence_accuracy(model, d.train)},
           {"test_accuracy", nets::sequence_accuracy(model, d.test)},
           {"steps", c.seq2seq_train.steps},
           {"train_examples", d.train.size()},
           {"warnings", rep.warnings}};
    } else {
      tpe::AutoencoderReport rep;
      auto model = tpe::train_autoencoder(load_corpus(c, ws), c.autoencoder, &rep);
      model.save(ws.model("target"), {{"task", task_name(c.task)}});
      write_training_log(ws.report("target_log.csv"), rep.log);
      m = {{"test_accuracy", rep.test_accuracy}, {"epochs", rep.epochs}, {"best_dev_loss", rep.best_dev_loss}};
    }
    say(o, "  target test accuracy " + pct(m["test_accuracy"].get<double>()));
    return m;
  });
}

StepResult extract(const RunConfig& c, const Workspace& ws, const Options& o) {
  need(ws, o, "train-target", target_key(c), [&](const Options& p) { return train_target(c, ws, p); });
  return run_step(c, ws, "extract", target_key(c), o, [&] {
    const Data d = load_data(c, ws);
    const Target t = Target::load(c, ws);
    const auto source = task_name(c.task) + "-target";
    export_embeddings(table_of(d.train, t.encode_all(inputs_of(d.train)), source), ws.embeddings("train.jsonl"));
    export_embeddings(table_of(d.test, t.encode_all(inputs_of(d.test)), source), ws.embeddings("test.jsonl"));
    return json{{"train", d.train.size()}, {"test", d.test.size()}, {"dim", t.hidden_dim()}};
  });
}

StepResult train_role(const RunConfig& c, const Workspace& ws, const Options& o) {
  need(ws, o, "extract", target_key(c), [&](const Options& p) { return extract(c, ws, p); });
  return run_step(c, ws, "train-role", role_key(c), o, [&] {
    const Data d = load_data(c, ws);
    const Target t = Target::load(c, ws);
    const auto table = import_embeddings(ws.embeddings("train.jsonl"));
    const auto test_table = import_embeddings(ws.embeddings("test.jsonl"));
    const auto test_inputs = inputs_of(d.test);
    json seeds = json::array();
    std::vector<double> continuous, snapped;
    std::size_t best = 0;
    double best_dev = 0.0;
    const std::size_t runs = std::max<std::size_t>(c.role_train.restarts, 1);
    for (std::size_t k = 0; k < runs; ++k) {
      learner::RoleTrainConfig rc = c.role_train;
      rc.seed = c.seed + k;
      learner::RoleTrainReport rep;
      auto model = learner::train_role(table, t.fillers(), c.role, rc, &rep, [&](const LogRow& r) {
        say(o, "  seed " + std::to_string(rc.seed) + " step " + std::to_string(r.step) + " loss " +
                   std::to_string(r.loss) + " dev mse " + std::to_string(r.dev_metric));
      });
      const std::string name = "role_seed" + std::to_string(k);
      model.save(ws.model(name), {{"seed", rc.seed}});
      write_training_log(ws.report(name + "_log.csv"), rep.log);
      const double acc_c =
          substitute(t, d.test, model.encode_all(test_inputs, learner::Mode::Continuous), c.workers).accuracy;
      const double acc_s =
          substitute(t, d.test, model.encode_all(test_inputs, learner::Mode::Snapped), c.workers).accuracy;
      continuous.push_back(acc_c);
      snapped.push_back(acc_s);
      json s{{"seed", rc.seed},
             {"dev_mse", rep.dev_mse},
             {"train_mse", rep.train_mse},
             {"test_mse", learner::role_mse(model, test_table, learner::Mode::Continuous)},
             {"epochs", rep.epochs},
             {"continuous", acc_c},
             {"snapped", acc_s},
             {"distinct_roles", rep.distinct_roles},
             {"mean_max_attention", rep.mean_max_attention}};
      if (c.task != Task::Scan) s["v_measure"] = snapped_v_measure(c, model, test_inputs).v;
      say(o, "  seed " + std::to_string(rc.seed) + ": dev mse " + std::to_string(rep.dev_mse) + ", continuous " +
                 pct(acc_c) + ", snapped " + pct(acc_s));
      seeds.push_back(s);
      if (k == 0 || rep.dev_mse < best_dev) {
        best = k;
        best_dev = rep.dev_mse;
      }
    }
    copy_checkpoint(ws.model("role_seed" + std::to_string(best)), ws.model("role"));
    json m{{"seeds", seeds},
           {"best_seed", seeds[best]["seed"]},
           {"continuous", continuous[best]},
           {"snapped", snapped[best]},
           {"continuous_mean", mean(continuous)},
           {"continuous_std", stddev(continuous)},
           {"snapped_mean", mean(snapped)},
           {"snapped_std", stddev(snapped)},
           {"dev_mse", best_dev},
           {"distinct_roles", seeds[best]["distinct_roles"]}};
    if (c.task != Task::Scan) m["v_measure"] = seeds[best]["v_measure"];
    return m;
  });
}

StepResult fit_tpe(const RunConfig& c, const Workspace& ws, const std::string& scheme, const Options& o) {
  if (scheme == "discrete") {
    need(ws, o, "train-role", role_key(c), [&](const Options& p) { return train_role(c, ws, p); });
  } else {
    schemes::parse_scheme(scheme);
    need(ws, o, "extract", target_key(c), [&](const Options& p) { return extract(c, ws, p); });
  }
  return run_step(c, ws, "fit-tpe-" + scheme, tpe_key(c, scheme), o, [&] {
    const Data d = load_data(c, ws);
    const Target t = Target::load(c, ws);
    const auto table = import_embeddings(ws.embeddings("train.jsonl"));
    const auto test_table = import_embeddings(ws.embeddings("test.jsonl"));
    Labeler labeler;
    Vocab label_vocab;
    if (scheme == "discrete") {
      labeler.role.emplace(learner::RoleModel::load(ws.model("role")));
      for (std::size_t r = 0; r < labeler.role->config().n_roles; ++r) label_vocab.add("r" + std::to_string(r));
    } else {
      labeler.scheme.emplace(schemes::parse_scheme(scheme));
    }
    const auto train_labels = labeler(table.token_lists());
    const auto test_labels = labeler(test_table.token_lists());
    if (scheme != "discrete") {
      for (const auto* set : {&train_labels, &test_labels}) {
        for (const auto& ls : *set) {
          for (const auto& l : ls) label_vocab.add(l);
        }
      }
    }
    tpe::TpeFitReport rep;
    auto reg = tpe::fit_tpe(table, train_labels, t.fillers(), label_vocab, c.tpe_fit, &rep);
    reg.save(ws.model("tpe_" + scheme), {{"scheme", scheme}});
    write_training_log(ws.report("tpe_" + scheme + "_log.csv"), rep.log);
    std::vector<std::vector<double>> enc;
    for (std::size_t i = 0; i < test_table.size(); ++i) enc.push_back(reg.encode(test_table[i].tokens, test_labels[i]));
    const auto sub = substitute(t, d.test, enc, c.workers);
    say(o, "  " + scheme + ": substitution " + pct(sub.accuracy));
    return json{{"scheme", scheme},
                {"substitution", sub.accuracy},
                {"train_mse", rep.train_mse},
                {"dev_mse", rep.dev_mse},
                {"test_mse", tpe::tpe_mse(reg, test_table, test_labels)},
                {"epochs", rep.epochs},
                {"roles", label_vocab.size()}};
  });
}

StepResult evaluate(const RunConfig& c, const Workspace& ws, const std::string& mode, const Options& o) {
  json key;
  if (mode == "target") {
    need(ws, o, "train-target", target_key(c), [&](const Options& p) { return train_target(c, ws, p); });
    key = target_key(c);
  } else if (mode == "continuous" || mode == "snapped") {
    need(ws, o, "train-role", role_key(c), [&](const Options& p) { return train_role(c, ws, p); });
    key = role_key(c);
  } else {
    need(ws, o, "fit-tpe-" + mode, tpe_key(c, mode), [&](const Options& p) { return fit_tpe(c, ws, mode, p); });
    key = tpe_key(c, mode);
  }
  key["mode"] = mode;
  return run_step(c, ws, "eval-" + mode, key, o, [&] {
    const Data d = load_data(c, ws);
    const Target t = Target::load(c, ws);
    const auto inputs = inputs_of(d.test);
    std::vector<std::vector<double>> enc;
    if (mode == "target") {
      enc = t.encode_all(inputs);
    } else if (mode == "continuous" || mode == "snapped") {
      const auto m = learner::RoleModel::load(ws.model("role"));
      enc = m.encode_all(inputs, mode == "continuous" ? learner::Mode::Continuous : learner::Mode::Snapped);
    } else {
      const auto reg = tpe::TpeRegressor::load(ws.model("tpe_" + mode));
      Labeler labeler;
      if (mode == "discrete") {
        labeler.role.emplace(learner::RoleModel::load(ws.model("role")));
      } else {
        labeler.scheme.emplace(schemes::parse_scheme(mode));
      }
      const auto labels = labeler(inputs);
      for (std::size_t i = 0; i < inputs.size(); ++i) enc.push_back(reg.encode(inputs[i], labels[i]));
    }
    const auto sub = substitute(t, d.test, enc, c.workers);
    say(o, "  " + mode + ": substitution " + pct(sub.accuracy) + " (" + std::to_string(sub.correct) + "/" +
               std::to_string(enc.size()) + ")");
    return json{{"mode", mode}, {"accuracy", sub.accuracy}, {"correct", sub.correct}, {"items", enc.size()}};
  });
}

StepResult interpret(const RunConfig& c, const Workspace& ws, const Options& o) {
  need(ws, o, "train-role", role_key(c), [&](const Options& p) { return train_role(c, ws, p); });
  return run_step(c, ws, "interpret", role_key(c), o, [&] {
    const Data d = load_data(c, ws);
    const auto model = learner::RoleModel::load(ws.model("role"));
    const auto inputs = inputs_of(d.all);
    learner::export_role_assignments(model, inputs, ws.report("role_assignments.jsonl"));
    json m;
    if (c.task == Task::Scan) {
      const auto match = analysis::algorithm_match_rate(model, inputs);
      json map = json::object();
      for (const auto& [label, role] : match.label_to_role) map[std::to_string(label)] = role;
      m = {{"match_rate", match.match_rate},
           {"matched", match.matched},
           {"total", match.total},
           {"distinct_roles", match.distinct_learned_roles},
           {"label_to_role", map}};
      say(o, "  algorithm matches " + std::to_string(match.matched) + "/" + std::to_string(match.total) +
                 " sequences; " + std::to_string(match.distinct_learned_roles) + " distinct roles");
    } else {
      const auto test_inputs = inputs_of(d.test);
      const auto v = snapped_v_measure(c, model, test_inputs);
      std::set<std::size_t> used;
      for (const auto& rec : model.attention_all(test_inputs)) used.insert(rec.roles.begin(), rec.roles.end());
      m = {{"v_measure", v.v},
           {"homogeneity", v.homogeneity},
           {"completeness", v.completeness},
           {"distinct_roles", used.size()}};
      say(o, "  V-measure " + std::to_string(v.v));
    }
    return m;
  });
}

StepResult surgery(const RunConfig& c, const Workspace& ws, const Options& o) {
  if (c.task != Task::Scan) throw ConfigError("surgery is defined for the scan task only");
  const bool algorithm = c.surgery_roles == "algorithm";
  StepResult interp;
  if (algorithm) interp = need(ws, o, "interpret", role_key(c), [&](const Options& p) { return interpret(c, ws, p); });
  else need(ws, o, "train-role", role_key(c), [&](const Options& p) { return train_role(c, ws, p); });
  json key = role_key(c);
  key["surgery"] = to_json(c)["surgery"];
  return run_step(c, ws, "surgery", key, o, [&] {
    const Data d = load_data(c, ws);
    const Target t = Target::load(c, ws);
    const auto model = learner::RoleModel::load(ws.model("role"));
    analysis::RoleLabeler labeler = analysis::learned_labeler(model);
    if (algorithm) {
      std::map<int, std::size_t> map;
      for (const auto& [label, role] : interp.metrics.at("label_to_role").items()) {
        map[std::stoi(label)] = role.get<std::size_t>();
      }
      labeler = analysis::algorithm_labeler(std::move(map));
    }
    const auto chain = analysis::surgery_chain(
        *t.s2s, model, labeler, split_words("run left twice after jump opposite right thrice"),
        {{"run", "look"}, {"jump", "walk"}, {"left", "right"}, {"twice", "thrice"}, {"opposite", "around"}});
    json steps = json::array();
    bool chain_ok = true;
    std::ofstream text(ws.report("surgery_chain.txt"));
    for (const auto& s : chain) {
      chain_ok = chain_ok && s.correct;
      steps.push_back({{"command", join_words(s.command)}, {"decoded", join_words(s.decoded)}, {"correct", s.correct}});
      text << (s.correct ? "ok   " : "FAIL ") << join_words(s.command) << "\n     " << join_words(s.decoded) << '\n';
    }
    const auto curve = analysis::surgery_curve(*t.s2s, model, labeler, inputs_of(d.test), c.surgery_max_swaps,
                                               c.surgery_trials, c.seed, c.workers);
    std::ofstream csv(ws.report("surgery_curve.csv"));
    csv << "swaps,trials,correct,accuracy\n";
    json points = json::array();
    for (const auto& p : curve) {
      csv << p.swaps << ',' << p.trials << ',' << p.correct << ',' << p.accuracy << '\n';
      points.push_back({{"swaps", p.swaps}, {"trials", p.trials}, {"correct", p.correct}, {"accuracy", p.accuracy}});
      say(o, "  " + std::to_string(p.swaps) + " swaps: " + pct(p.accuracy));
    }
    return json{{"chain_correct", chain_ok}, {"chain", steps}, {"curve", points}};
  });
}

StepResult factor_demo(const RunConfig& c, const Workspace& ws, const Options& o) {
  return run_step(c, ws, "factor-demo", json{{"seed", c.seed}}, o, [&] {
    const auto d = analysis::jump_twice_demo(4, 3, c.seed);
    auto show = [](const std::vector<double>& v) {
      std::ostringstream s;
      s << std::setprecision(6);
      for (std::size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
      return s.str();
    };
    say(o, "  (W_F (x) W_R) e(jump twice) = " + show(d.mapped));
    say(o, "  e(JUMP JUMP)                = " + show(d.expected));
    std::ostringstream r;
    r << d.residual;
    say(o, "  residual " + r.str());
    return json{{"residual", d.residual}, {"lhs", d.mapped}, {"rhs", d.expected}};
  });
}

}  // namespace role::pipeline
