#include "role/role_learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <set>

#include "role/fit_loop.hpp"
#include "role/kernels.hpp"
#include "role/ops.hpp"
#include "role/tape.hpp"

namespace role::learner {

using namespace role::ad;

nlohmann::json to_json(const RoleModelConfig& c) {
  return {{"n_roles", c.n_roles},         {"role_dim", c.role_dim},       {"filler_dim", c.filler_dim},
          {"lstm_hidden", c.lstm_hidden}, {"lstm_layers", c.lstm_layers}, {"bidirectional", c.bidirectional}};
}

nlohmann::json to_json(const RoleTrainConfig& c) {
  return {{"lambda", c.lambda},         {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"patience", c.patience},     {"max_epochs", c.max_epochs},       {"dev_fraction", c.dev_fraction},
          {"seed", c.seed},             {"restarts", c.restarts},           {"min_delta", c.min_delta}};
}

RoleModelConfig model_config_from_json(const nlohmann::json& j, RoleModelConfig d) {
  d.n_roles = j.value("n_roles", d.n_roles);
  d.role_dim = j.value("role_dim", d.role_dim);
  d.filler_dim = j.value("filler_dim", d.filler_dim);
  d.lstm_hidden = j.value("lstm_hidden", d.lstm_hidden);
  d.lstm_layers = j.value("lstm_layers", d.lstm_layers);
  d.bidirectional = j.value("bidirectional", d.bidirectional);
  return d;
}

RoleTrainConfig train_config_from_json(const nlohmann::json& j, RoleTrainConfig d) {
  d.lambda = j.value("lambda", d.lambda);
  d.learning_rate = j.value("learning_rate", d.learning_rate);
  d.batch_size = j.value("batch_size", d.batch_size);
  d.patience = j.value("patience", d.patience);
  d.max_epochs = j.value("max_epochs", d.max_epochs);
  d.dev_fraction = j.value("dev_fraction", d.dev_fraction);
  d.seed = j.value("seed", d.seed);
  d.restarts = j.value("restarts", d.restarts);
  d.min_delta = j.value("min_delta", d.min_delta);
  if (d.min_delta < 0.0) throw ConfigError("role_train.min_delta must be >= 0");
  return d;
}

RegularizerValues regularizer(const std::vector<std::vector<double>>& attention) {
  RegularizerValues v;
  if (attention.empty()) return v;
  std::vector<double> s(attention.front().size(), 0.0);
  for (const auto& a : attention) {
    if (a.size() != s.size()) throw ShapeError("regularizer: ragged attention vectors");
    for (std::size_t k = 0; k < a.size(); ++k) {
      v.r1 += a[k] * (1.0 - a[k]);
      v.r2 -= a[k] * a[k];
      s[k] += a[k];
    }
  }
  for (double x : s) v.r3 += (x * (1.0 - x)) * (x * (1.0 - x));
  return v;
}

Tensor regularizer_loss(const std::vector<Tensor>& attention) {
  if (attention.empty()) return Tensor::scalar(0.0);
  // R1 + R2 = sum a - 2 sum a^2
  std::vector<Tensor> sums, squares;
  for (const auto& a : attention) {
    sums.push_back(sum(a));
    squares.push_back(sum(square(a)));
  }
  Tensor r12 = sub(add_n(sums), scale(add_n(squares), 2.0));
  Tensor s = add_n(attention);
  Tensor r3 = sum(square(mul(s, one_minus(s))));
  return add(r12, r3);
}

// ---------------------------------------------------------------------------
// RoleModel

RoleModel RoleModel::create(Vocab fillers, std::size_t out_dim, const RoleModelConfig& c, std::uint64_t seed) {
  if (fillers.size() == 0) throw ConfigError("ROLE needs a nonempty filler vocabulary");
  if (!c.n_roles || !c.role_dim || !c.filler_dim || !c.lstm_hidden || !c.lstm_layers || !out_dim) {
    throw ConfigError("ROLE dims must be positive");
  }
  RoleModel m;
  m.config_ = c;
  m.fillers_ = std::move(fillers);
  m.fillers_.freeze();
  Rng rng(seed);
  const std::size_t dfr = c.filler_dim * c.role_dim;
  nets::uniform_param(m.params_, "role.fillers", {m.fillers_.size(), c.filler_dim}, 1, rng);
  nets::uniform_param(m.params_, "role.roles", {c.n_roles, c.role_dim}, 1, rng);
  nets::uniform_param(m.params_, "role.w", {out_dim, dfr}, dfr, rng);
  nets::uniform_param(m.params_, "role.bias", {out_dim}, dfr, rng);
  nets::uniform_param(m.params_, "role.proj_w", {c.filler_dim, c.filler_dim}, c.filler_dim, rng);
  nets::uniform_param(m.params_, "role.proj_b", {c.filler_dim}, c.filler_dim, rng);
  auto stack = nets::LstmStack::create(m.params_, "role.lstm", c.filler_dim, c.lstm_hidden, c.lstm_layers,
                                       c.bidirectional, rng);
  nets::uniform_param(m.params_, "role.keys", {c.n_roles, stack.output_dim()}, stack.output_dim(), rng);
  nets::uniform_param(m.params_, "role.key_bias", {c.n_roles}, stack.output_dim(), rng);
  m.bind_all();
  m.normalize_roles();
  return m;
}

void RoleModel::bind_all() {
  f_ = params_.get("role.fillers");
  r_ = params_.get("role.roles");
  w_ = params_.get("role.w");
  b_ = params_.get("role.bias");
  proj_w_ = params_.get("role.proj_w");
  proj_b_ = params_.get("role.proj_b");
  keys_ = params_.get("role.keys");
  key_bias_ = params_.get("role.key_bias");
  lstm_ = nets::LstmStack::bind(params_, "role.lstm", config_.lstm_layers, config_.bidirectional);
  if (f_.rows() != fillers_.size() || f_.cols() != config_.filler_dim || r_.rows() != config_.n_roles ||
      r_.cols() != config_.role_dim || w_.cols() != config_.filler_dim * config_.role_dim ||
      keys_.cols() != lstm_.output_dim()) {
    throw ShapeError("ROLE parameters do not match the configuration");
  }
}

void RoleModel::save(const std::filesystem::path& prefix, const nlohmann::json& extra_meta) const {
  nlohmann::json meta = extra_meta;
  meta["model"] = "role";
  meta["config"] = to_json(config_);
  meta["filler_vocab"] = fillers_.tokens();
  save_checkpoint(params_, prefix, meta);
}

RoleModel RoleModel::load(const std::filesystem::path& prefix) {
  const auto meta = read_checkpoint_meta(prefix);
  if (meta.value("model", "") != "role") throw ConfigError(prefix.string() + " is not a ROLE checkpoint");
  RoleModel m;
  m.config_ = model_config_from_json(meta.at("config"));
  m.fillers_ = Vocab(meta.at("filler_vocab").get<std::vector<std::string>>());
  m.fillers_.freeze();
  m.params_ = load_params(prefix);
  m.bind_all();
  return m;
}

void RoleModel::normalize_roles() {
  auto data = r_.mutable_data();
  const std::size_t d = r_.cols();
  for (std::size_t i = 0; i < r_.rows(); ++i) {
    double norm = 0.0;
    for (std::size_t k = 0; k < d; ++k) norm += data[i * d + k] * data[i * d + k];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    for (std::size_t k = 0; k < d; ++k) data[i * d + k] /= norm;
  }
}

std::vector<Tensor> RoleModel::lstm_states(const std::vector<std::vector<std::size_t>>& ids) const {
  std::vector<Tensor> xs;
  const std::size_t len = ids.front().size();
  for (std::size_t t = 0; t < len; ++t) {
    std::vector<std::size_t> col;
    for (const auto& s : ids) col.push_back(s[t]);
    xs.push_back(linear(gather_rows(f_, col), proj_w_, proj_b_));
  }
  return lstm_.forward(xs);
}

RoleModel::Forward RoleModel::forward(const std::vector<std::vector<std::size_t>>& ids, Mode mode) const {
  if (ids.empty()) throw ShapeError("ROLE: empty batch");
  const std::size_t len = ids.front().size();
  for (const auto& s : ids) {
    if (s.size() != len) throw ShapeError("ROLE: batch sequences differ in length");
    for (auto id : s) {
      if (id >= f_.rows()) throw ShapeError("ROLE: filler id out of range");
    }
  }
  Forward out;
  if (len == 0) {
    out.encodings = linear(Tensor::zeros(Shape{ids.size(), w_.cols()}), w_, b_);
    return out;
  }
  const auto queries = lstm_states(ids);
  std::vector<Tensor> bindings;
  for (std::size_t t = 0; t < len; ++t) {
    std::vector<std::size_t> col;
    for (const auto& s : ids) col.push_back(s[t]);
    Tensor a = softmax(linear(queries[t], keys_, key_bias_));
    Tensor role_vec;
    if (mode == Mode::Continuous) {
      role_vec = matmul(a, r_);
    } else {
      std::vector<std::size_t> picks;
      for (std::size_t b = 0; b < ids.size(); ++b) {
        auto row = a.data().subspan(b * config_.n_roles, config_.n_roles);
        picks.push_back(static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin()));
      }
      role_vec = gather_rows(r_, picks);
    }
    bindings.push_back(batch_outer(gather_rows(f_, col), role_vec));
    out.attention.push_back(a);
  }
  out.encodings = linear(add_n(bindings), w_, b_);
  return out;
}

AttentionRecord RoleModel::attention(std::span<const std::string> tokens) const {
  return attention_all({std::vector<std::string>(tokens.begin(), tokens.end())}).front();
}

std::vector<AttentionRecord> RoleModel::attention_all(const std::vector<std::vector<std::string>>& inputs) const {
  NoGradScope no_grad;
  std::vector<AttentionRecord> out(inputs.size());
  std::vector<std::size_t> lengths;
  for (const auto& s : inputs) lengths.push_back(s.size());
  for (const auto& group : length_groups(lengths, 256)) {
    if (inputs[group.front()].empty()) continue;
    std::vector<std::vector<std::size_t>> ids;
    for (auto i : group) ids.push_back(fillers_.encode(inputs[i]));
    const auto fwd = forward(ids, Mode::Continuous);
    for (std::size_t b = 0; b < group.size(); ++b) {
      auto& rec = out[group[b]];
      for (const auto& a : fwd.attention) {
        auto row = a.data().subspan(b * config_.n_roles, config_.n_roles);
        const auto it = std::max_element(row.begin(), row.end());
        rec.weights.emplace_back(row.begin(), row.end());
        rec.roles.push_back(static_cast<std::size_t>(it - row.begin()));
        rec.max_weight.push_back(*it);
      }
    }
  }
  return out;
}

std::vector<double> RoleModel::encode(std::span<const std::string> tokens, Mode mode) const {
  return encode_all({std::vector<std::string>(tokens.begin(), tokens.end())}, mode).front();
}

std::vector<std::vector<double>> RoleModel::encode_all(const std::vector<std::vector<std::string>>& inputs,
                                                       Mode mode) const {
  NoGradScope no_grad;
  std::vector<std::vector<double>> out(inputs.size());
  std::vector<std::size_t> lengths;
  for (const auto& s : inputs) lengths.push_back(s.size());
  const std::size_t d = out_dim();
  for (const auto& group : length_groups(lengths, 256)) {
    std::vector<std::vector<std::size_t>> ids;
    for (auto i : group) ids.push_back(fillers_.encode(inputs[i]));
    const auto fwd = forward(ids, mode);
    for (std::size_t b = 0; b < group.size(); ++b) {
      auto row = fwd.encodings.data().subspan(b * d, d);
      out[group[b]].assign(row.begin(), row.end());
    }
  }
  return out;
}

std::vector<std::vector<double>> RoleModel::queries(std::span<const std::string> tokens) const {
  NoGradScope no_grad;
  std::vector<std::vector<double>> out;
  if (tokens.empty()) return out;
  for (const auto& q : lstm_states({fillers_.encode(tokens)})) out.emplace_back(q.data().begin(), q.data().end());
  return out;
}

std::vector<std::vector<double>> RoleModel::role_vectors(std::span<const std::string> tokens, Mode mode) const {
  const auto rec = attention(tokens);
  const std::size_t d = config_.role_dim;
  const auto rd = r_.data();
  std::vector<std::vector<double>> out;
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    std::vector<double> v(d, 0.0);
    if (mode == Mode::Snapped) {
      std::copy_n(rd.begin() + static_cast<long>(rec.roles[t] * d), d, v.begin());
    } else {
      NoGradScope no_grad;
      Tensor a = Tensor::constant(Shape{1, config_.n_roles}, rec.weights[t]);
      auto m = matmul(a, r_);
      std::copy(m.data().begin(), m.data().end(), v.begin());
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<double> RoleModel::binding_embedding(std::size_t filler, std::span<const double> role_vec) const {
  if (filler >= f_.rows()) throw ShapeError("binding_embedding: filler id out of range");
  if (role_vec.size() != config_.role_dim) throw ShapeError("binding_embedding: role vector size mismatch");
  const std::size_t df = config_.filler_dim, dr = config_.role_dim;
  std::vector<double> tpr(df * dr);
  for (std::size_t i = 0; i < df; ++i) {
    for (std::size_t k = 0; k < dr; ++k) tpr[i * dr + k] = f_.at(filler, i) * role_vec[k];
  }
  std::vector<double> out(out_dim(), 0.0);
  kernels::gemv(w_.data(), out_dim(), df * dr, tpr, out);
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

Tensor targets_of(const EmbeddingTable& table, const std::vector<std::size_t>& idx) {
  std::vector<double> v;
  v.reserve(idx.size() * table.dim());
  for (auto i : idx) v.insert(v.end(), table[i].vec.begin(), table[i].vec.end());
  return Tensor::constant(Shape{idx.size(), table.dim()}, std::move(v));
}

double subset_mse(const RoleModel& model, const std::vector<std::vector<std::size_t>>& ids,
                  const EmbeddingTable& table, const std::vector<std::size_t>& idx, Mode mode) {
  if (idx.empty()) return 0.0;
  NoGradScope no_grad;
  std::vector<std::size_t> lengths;
  for (auto i : idx) lengths.push_back(ids[i].size());
  double total = 0.0;
  for (const auto& g : length_groups(lengths, 256)) {
    std::vector<std::size_t> rows;
    std::vector<std::vector<std::size_t>> batch;
    for (auto k : g) {
      rows.push_back(idx[k]);
      batch.push_back(ids[idx[k]]);
    }
    total += mse(model.forward(batch, mode).encodings, targets_of(table, rows)).item() * static_cast<double>(g.size());
  }
  return total / static_cast<double>(idx.size());
}

}  // namespace

RoleModel train_role(const EmbeddingTable& table, const Vocab& fillers, const RoleModelConfig& model_config,
                     const RoleTrainConfig& config, RoleTrainReport* report,
                     const std::function<void(const LogRow&)>& progress) {
  if (table.empty()) throw ConfigError("cannot train ROLE on an empty table");
  RoleModel model = RoleModel::create(fillers, table.dim(), model_config, config.seed);
  std::vector<std::vector<std::size_t>> ids;
  for (std::size_t i = 0; i < table.size(); ++i) ids.push_back(model.filler_vocab().encode(table[i].tokens));

  Rng split_rng(config.seed + 1);
  auto [train_idx, dev_idx] = carve_dev(table.size(), config.dev_fraction, split_rng);
  if (dev_idx.empty()) dev_idx = train_idx;
  std::vector<std::size_t> lengths;
  for (auto i : train_idx) lengths.push_back(ids[i].size());

  auto fit = fit_loop(
      model.params(), FitOptions{config.learning_rate, config.patience, config.max_epochs, config.seed, config.min_delta},
      [&](const std::vector<std::size_t>& batch) {
        std::vector<std::size_t> rows;
        std::vector<std::vector<std::size_t>> b;
        for (auto k : batch) {
          rows.push_back(train_idx[k]);
          b.push_back(ids[train_idx[k]]);
        }
        auto fwd = model.forward(b, Mode::Continuous);
        // Squared distance per item, so lambda does not depend on the encoding size.
        Tensor loss = scale(mse(fwd.encodings, targets_of(table, rows)), static_cast<double>(model.out_dim()));
        if (config.lambda != 0.0 && !fwd.attention.empty()) {
          loss = add(loss, scale(regularizer_loss(fwd.attention), config.lambda / static_cast<double>(batch.size())));
        }
        return loss;
      },
      [&] { return subset_mse(model, ids, table, dev_idx, Mode::Continuous); },
      [&](Rng& rng) { return length_batches(lengths, config.batch_size, rng); }, [&] { model.normalize_roles(); }, progress);

  if (report) {
    report->seed = config.seed;
    report->dev_mse = fit.best_dev;
    report->train_mse = subset_mse(model, ids, table, train_idx, Mode::Continuous);
    report->epochs = fit.epochs;
    report->log = std::move(fit.log);
    std::vector<std::vector<std::string>> dev_inputs, all_inputs;
    for (auto i : dev_idx) dev_inputs.push_back(table[i].tokens);
    for (std::size_t i = 0; i < table.size(); ++i) all_inputs.push_back(table[i].tokens);
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& rec : model.attention_all(dev_inputs)) {
      for (double w : rec.max_weight) total += w, ++n;
    }
    report->mean_max_attention = n ? total / static_cast<double>(n) : 0.0;
    std::set<std::size_t> used;
    for (const auto& rec : model.attention_all(all_inputs)) used.insert(rec.roles.begin(), rec.roles.end());
    report->distinct_roles = used.size();
  }
  return model;
}

RoleModel train_role_best_of(const EmbeddingTable& table, const Vocab& fillers, const RoleModelConfig& model_config,
                             const RoleTrainConfig& config, std::vector<RoleTrainReport>* reports) {
  const std::size_t runs = std::max<std::size_t>(config.restarts, 1);
  std::optional<RoleModel> best;
  double best_dev = 0.0;
  for (std::size_t k = 0; k < runs; ++k) {
    RoleTrainConfig c = config;
    c.seed = config.seed + k;
    RoleTrainReport rep;
    RoleModel m = train_role(table, fillers, model_config, c, &rep);
    if (!best || rep.dev_mse < best_dev) {
      best_dev = rep.dev_mse;
      best.emplace(std::move(m));
    }
    if (reports) reports->push_back(std::move(rep));
  }
  return std::move(*best);
}

double role_mse(const RoleModel& model, const EmbeddingTable& table, Mode mode) {
  std::vector<std::vector<std::size_t>> ids;
  for (std::size_t i = 0; i < table.size(); ++i) ids.push_back(model.filler_vocab().encode(table[i].tokens));
  std::vector<std::size_t> idx(table.size());
  std::iota(idx.begin(), idx.end(), 0);
  return subset_mse(model, ids, table, idx, mode);
}

std::string role_label(std::size_t role) { return "r" + std::to_string(role); }

std::vector<std::vector<std::string>> snapped_labels(const RoleModel& model,
                                                     const std::vector<std::vector<std::string>>& inputs) {
  std::vector<std::vector<std::string>> out;
  for (const auto& rec : model.attention_all(inputs)) {
    std::vector<std::string> labels;
    for (auto r : rec.roles) labels.push_back(role_label(r));
    out.push_back(std::move(labels));
  }
  return out;
}

tpe::TpeRegressor discretize_and_refit(const RoleModel& model, const EmbeddingTable& table,
                                       const tpe::TpeFitConfig& config, tpe::TpeFitReport* report) {
  const auto labels = snapped_labels(model, table.token_lists());
  Vocab roles;
  for (std::size_t r = 0; r < model.config().n_roles; ++r) roles.add(role_label(r));
  return tpe::fit_tpe(table, labels, model.filler_vocab(), roles, config, report);
}

void export_role_assignments(const RoleModel& model, const std::vector<std::vector<std::string>>& inputs,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  const auto records = model.attention_all(inputs);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    nlohmann::json j{{"tokens", inputs[i]}, {"roles", records[i].roles}, {"max_attention", records[i].max_weight}};
    out << j.dump() << '\n';
  }
}

}  // namespace role::learner
