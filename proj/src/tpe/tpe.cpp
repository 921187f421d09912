#include "role/tpe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "role/fit_loop.hpp"
#include "role/nets/rnn.hpp"
#include "role/ops.hpp"
#include "role/tape.hpp"

namespace role::tpe {

using namespace role::ad;

// ---------------------------------------------------------------------------
// TpeModel

TpeModel TpeModel::create(ParamSet& params, const std::string& prefix, std::size_t n_fillers, std::size_t n_roles,
                          std::size_t filler_dim, std::size_t role_dim, std::size_t out_dim, Rng& rng) {
  if (!n_fillers || !n_roles || !filler_dim || !role_dim || !out_dim) throw ConfigError("TPE dims must be positive");
  TpeModel m;
  m.fillers_ = nets::uniform_param(params, prefix + ".fillers", {n_fillers, filler_dim}, 1, rng);
  m.roles_ = nets::uniform_param(params, prefix + ".roles", {n_roles, role_dim}, 1, rng);
  m.w_ = nets::uniform_param(params, prefix + ".w", {out_dim, filler_dim * role_dim}, filler_dim * role_dim, rng);
  m.bias_ = nets::uniform_param(params, prefix + ".bias", {out_dim}, filler_dim * role_dim, rng);
  return m;
}

TpeModel TpeModel::bind(ParamSet& params, const std::string& prefix) {
  TpeModel m;
  m.fillers_ = params.get(prefix + ".fillers");
  m.roles_ = params.get(prefix + ".roles");
  m.w_ = params.get(prefix + ".w");
  m.bias_ = params.get(prefix + ".bias");
  if (m.w_.cols() != m.filler_dim() * m.role_dim()) throw ShapeError(prefix + ": W does not match d_F * d_R");
  return m;
}

void TpeModel::check(const Bindings& b) const {
  if (b.fillers.size() != b.roles.size()) throw ShapeError("TPE: filler and role sequences differ in length");
  for (auto f : b.fillers) {
    if (f >= n_fillers()) throw ShapeError("TPE: filler id " + std::to_string(f) + " out of range");
  }
  for (auto r : b.roles) {
    if (r >= n_roles()) throw ShapeError("TPE: role id " + std::to_string(r) + " out of range");
  }
}

Tensor TpeModel::tpr_batch(const std::vector<Bindings>& batch) const {
  if (batch.empty()) throw ShapeError("TPE: empty batch");
  std::vector<std::size_t> f, r, seg;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    check(batch[b]);
    f.insert(f.end(), batch[b].fillers.begin(), batch[b].fillers.end());
    r.insert(r.end(), batch[b].roles.begin(), batch[b].roles.end());
    seg.insert(seg.end(), batch[b].fillers.size(), b);
  }
  if (f.empty()) return Tensor::zeros(Shape{batch.size(), filler_dim() * role_dim()});
  return segment_sum(batch_outer(gather_rows(fillers_, f), gather_rows(roles_, r)), seg, batch.size());
}

Tensor TpeModel::encode_batch(const std::vector<Bindings>& batch) const {
  return linear(tpr_batch(batch), w_, bias_);
}

std::vector<double> TpeModel::encode(const Bindings& b) const {
  NoGradScope no_grad;
  Tensor e = encode_batch({b});
  return {e.data().begin(), e.data().end()};
}

nlohmann::json to_json(const TpeTrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"batch_size", c.batch_size}, {"patience", c.patience},
          {"max_epochs", c.max_epochs},       {"dev_fraction", c.dev_fraction}, {"seed", c.seed}};
}

TpeTrainConfig train_config_from_json(const nlohmann::json& j, TpeTrainConfig d) {
  d.learning_rate = j.value("learning_rate", d.learning_rate);
  d.batch_size = j.value("batch_size", d.batch_size);
  d.patience = j.value("patience", d.patience);
  d.max_epochs = j.value("max_epochs", d.max_epochs);
  d.dev_fraction = j.value("dev_fraction", d.dev_fraction);
  d.seed = j.value("seed", d.seed);
  return d;
}

// ---------------------------------------------------------------------------
// Regression

Bindings TpeRegressor::bind(std::span<const std::string> tokens, std::span<const std::string> role_labels) const {
  if (tokens.size() != role_labels.size()) throw ShapeError("one role label per token required");
  return {filler_vocab.encode(tokens), role_vocab.encode(role_labels)};
}

std::vector<double> TpeRegressor::encode(std::span<const std::string> tokens,
                                         std::span<const std::string> role_labels) const {
  return model.encode(bind(tokens, role_labels));
}

void TpeRegressor::save(const std::filesystem::path& prefix, const nlohmann::json& extra_meta) const {
  nlohmann::json meta = extra_meta;
  meta["model"] = "tpe";
  meta["filler_vocab"] = filler_vocab.tokens();
  meta["role_vocab"] = role_vocab.tokens();
  save_checkpoint(params, prefix, meta);
}

TpeRegressor TpeRegressor::load(const std::filesystem::path& prefix) {
  const auto meta = read_checkpoint_meta(prefix);
  if (meta.value("model", "") != "tpe") throw ConfigError(prefix.string() + " is not a TPE checkpoint");
  TpeRegressor t;
  t.filler_vocab = Vocab(meta.at("filler_vocab").get<std::vector<std::string>>());
  t.role_vocab = Vocab(meta.at("role_vocab").get<std::vector<std::string>>());
  t.filler_vocab.freeze();
  t.role_vocab.freeze();
  t.params = load_params(prefix);
  t.model = TpeModel::bind(t.params, "tpe");
  return t;
}

namespace {

FitOptions fit_options(const TpeTrainConfig& c) { return {c.learning_rate, c.patience, c.max_epochs, c.seed}; }

std::vector<std::vector<std::size_t>> shuffled_batches(std::size_t n, std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch_size) {
    out.emplace_back(idx.begin() + static_cast<long>(s), idx.begin() + static_cast<long>(std::min(n, s + batch_size)));
  }
  return out;
}

Tensor targets_of(const EmbeddingTable& table, const std::vector<std::size_t>& idx) {
  const std::size_t d = table.dim();
  std::vector<double> v;
  v.reserve(idx.size() * d);
  for (auto i : idx) v.insert(v.end(), table[i].vec.begin(), table[i].vec.end());
  return Tensor::constant(Shape{idx.size(), d}, std::move(v));
}

double batched_mse(const TpeModel& model, const std::vector<Bindings>& bindings, const EmbeddingTable& table,
                   const std::vector<std::size_t>& idx) {
  NoGradScope no_grad;
  double total = 0.0;
  for (std::size_t s = 0; s < idx.size(); s += 512) {
    std::vector<std::size_t> chunk(idx.begin() + static_cast<long>(s),
                                   idx.begin() + static_cast<long>(std::min(idx.size(), s + 512)));
    std::vector<Bindings> b;
    for (auto i : chunk) b.push_back(bindings[i]);
    total += mse(model.encode_batch(b), targets_of(table, chunk)).item() * static_cast<double>(chunk.size());
  }
  return idx.empty() ? 0.0 : total / static_cast<double>(idx.size());
}

}  // namespace

TpeRegressor fit_tpe(const EmbeddingTable& table, const std::vector<std::vector<std::string>>& labels,
                     const Vocab& all_tokens, const Vocab& all_labels, const TpeFitConfig& config,
                     TpeFitReport* report) {
  if (table.empty()) throw ConfigError("cannot fit a TPE to an empty table");
  if (labels.size() != table.size()) throw ShapeError("one label sequence per record required");
  TpeRegressor t;
  t.filler_vocab = all_tokens;
  t.role_vocab = all_labels;
  t.filler_vocab.freeze();
  t.role_vocab.freeze();
  Rng init_rng(config.train.seed);
  t.model = TpeModel::create(t.params, "tpe", t.filler_vocab.size(), t.role_vocab.size(), config.filler_dim,
                             config.role_dim, table.dim(), init_rng);
  std::vector<Bindings> bindings;
  for (std::size_t i = 0; i < table.size(); ++i) bindings.push_back(t.bind(table[i].tokens, labels[i]));

  Rng split_rng(config.train.seed + 1);
  auto [train_idx, dev_idx] = carve_dev(table.size(), config.train.dev_fraction, split_rng);
  if (dev_idx.empty()) dev_idx = train_idx;
  auto fit = fit_loop(
      t.params, fit_options(config.train),
      [&](const std::vector<std::size_t>& batch) {
        std::vector<std::size_t> rows;
        std::vector<Bindings> b;
        for (auto k : batch) {
          rows.push_back(train_idx[k]);
          b.push_back(bindings[train_idx[k]]);
        }
        return mse(t.model.encode_batch(b), targets_of(table, rows));
      },
      [&] { return batched_mse(t.model, bindings, table, dev_idx); },
      [&](Rng& rng) { return shuffled_batches(train_idx.size(), config.train.batch_size, rng); });
  if (report) {
    report->train_mse = batched_mse(t.model, bindings, table, train_idx);
    report->dev_mse = fit.best_dev;
    report->epochs = fit.epochs;
    report->log = std::move(fit.log);
  }
  return t;
}

double tpe_mse(const TpeRegressor& tpe, const EmbeddingTable& table, const std::vector<std::vector<std::string>>& labels) {
  if (labels.size() != table.size()) throw ShapeError("one label sequence per record required");
  std::vector<Bindings> bindings;
  for (std::size_t i = 0; i < table.size(); ++i) bindings.push_back(tpe.bind(table[i].tokens, labels[i]));
  std::vector<std::size_t> idx(table.size());
  std::iota(idx.begin(), idx.end(), 0);
  return batched_mse(tpe.model, bindings, table, idx);
}

// ---------------------------------------------------------------------------
// Autoencoder

namespace {

std::string decoder_name(DecoderKind k) { return k == DecoderKind::Gru ? "gru" : "tree"; }

DecoderKind parse_decoder(const std::string& s) {
  if (s == "gru") return DecoderKind::Gru;
  if (s == "tree") return DecoderKind::Tree;
  throw ConfigError("unknown decoder kind '" + s + "'");
}

}  // namespace

nlohmann::json to_json(const AutoencoderConfig& c) {
  return {{"scheme", schemes::scheme_name(c.scheme)},
          {"decoder", decoder_name(c.decoder)},
          {"filler_dim", c.filler_dim},
          {"role_dim", c.role_dim},
          {"hidden_dim", c.hidden_dim},
          {"decoder_input_dim", c.decoder_input_dim},
          {"train", tpe::to_json(c.train)}};
}

AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j, AutoencoderConfig c) {
  c.scheme = schemes::parse_scheme(j.value("scheme", schemes::scheme_name(c.scheme)));
  c.decoder = parse_decoder(j.value("decoder", decoder_name(c.decoder)));
  c.filler_dim = j.value("filler_dim", c.filler_dim);
  c.role_dim = j.value("role_dim", c.role_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.decoder_input_dim = j.value("decoder_input_dim", c.decoder_input_dim);
  if (j.contains("train")) c.train = train_config_from_json(j["train"], c.train);
  return c;
}

void TpeAutoencoder::build(const std::vector<std::vector<std::string>>& corpus, Rng& rng) {
  if (scheme_.vocab().size() == 0) scheme_.build_vocab(corpus);
  if (fillers_.size() == 0) {
    for (const auto& s : corpus) {
      for (const auto& tok : s) fillers_.add(tok);
    }
  }
  fillers_.freeze();
  tpe_ = TpeModel::create(params_, "tpe", fillers_.size(), scheme_.vocab().size(), config_.filler_dim,
                          config_.role_dim, config_.hidden_dim, rng);
  if (config_.decoder == DecoderKind::Gru) {
    gru_ = nets::GruDecoder::create(params_, "decoder", nets::decoder_vocab(fillers_.tokens()),
                                    config_.decoder_input_dim, config_.hidden_dim, rng);
  } else {
    tree_ = nets::TreeDecoder::create(params_, "decoder", fillers_, config_.decoder_input_dim, config_.hidden_dim, rng);
  }
}

TpeAutoencoder TpeAutoencoder::create(const AutoencoderConfig& config,
                                      const std::vector<std::vector<std::string>>& corpus) {
  if (corpus.empty()) throw ConfigError("autoencoder needs a nonempty corpus");
  TpeAutoencoder a;
  a.config_ = config;
  a.scheme_ = schemes::RoleScheme(config.scheme);
  Rng rng(config.train.seed);
  a.build(corpus, rng);
  return a;
}

void TpeAutoencoder::save(const std::filesystem::path& prefix, const nlohmann::json& extra_meta) const {
  nlohmann::json meta = extra_meta;
  meta["model"] = "tpe-autoencoder";
  meta["config"] = to_json(config_);
  meta["filler_vocab"] = fillers_.tokens();
  meta["role_vocab"] = scheme_.vocab().tokens();
  save_checkpoint(params_, prefix, meta);
}

TpeAutoencoder TpeAutoencoder::load(const std::filesystem::path& prefix) {
  const auto meta = read_checkpoint_meta(prefix);
  if (meta.value("model", "") != "tpe-autoencoder") {
    throw ConfigError(prefix.string() + " is not a TPE autoencoder checkpoint");
  }
  TpeAutoencoder a;
  a.config_ = autoencoder_config_from_json(meta.at("config"));
  a.scheme_ = schemes::RoleScheme(a.config_.scheme, Vocab(meta.at("role_vocab").get<std::vector<std::string>>()));
  a.fillers_ = Vocab(meta.at("filler_vocab").get<std::vector<std::string>>());
  Rng rng(0);
  a.build({}, rng);
  load_checkpoint(a.params_, prefix);
  return a;
}

Bindings TpeAutoencoder::bindings(std::span<const std::string> tokens) const {
  if (config_.scheme == schemes::Scheme::Tree) {
    const auto tree = tasks::parse_balanced(tokens);
    return {fillers_.encode(tokens), scheme_.assign(tokens, &tree).roles};
  }
  return {fillers_.encode(tokens), scheme_.assign(tokens).roles};
}

std::vector<double> TpeAutoencoder::encode(std::span<const std::string> tokens) const {
  return tpe_.encode(bindings(tokens));
}

std::vector<std::string> TpeAutoencoder::decode(std::span<const double> hidden, std::span<const std::string> tokens) const {
  if (config_.decoder == DecoderKind::Gru) {
    // Outputs longer than twice the input can never be right.
    auto r = gru_.greedy(hidden, 2 * tokens.size() + 2);
    return r.tokens;
  }
  return tree_.decode(hidden, tasks::parse_balanced(tokens));
}

Tensor TpeAutoencoder::loss(const std::vector<std::vector<std::string>>& batch) const {
  std::vector<Bindings> b;
  for (const auto& s : batch) b.push_back(bindings(s));
  Tensor h = tpe_.encode_batch(b);
  if (config_.decoder == DecoderKind::Gru) {
    std::vector<std::vector<std::size_t>> targets;
    for (const auto& s : batch) targets.push_back(gru_.vocab().encode(s));
    return gru_.loss(h, targets);
  }
  std::vector<std::vector<std::size_t>> targets;
  for (const auto& s : batch) targets.push_back(tree_.vocab().encode(s));
  return tree_.loss(h, tasks::parse_balanced(batch.front()), targets);
}

double TpeAutoencoder::accuracy(const std::vector<std::vector<std::string>>& strings) const {
  if (strings.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : strings) {
    if (decode(encode(s), s) == s) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(strings.size());
}

TpeAutoencoder train_autoencoder(const tasks::DigitCorpus& corpus, const AutoencoderConfig& config,
                                 AutoencoderReport* report) {
  std::vector<std::vector<std::string>> everything = corpus.train;
  everything.insert(everything.end(), corpus.dev.begin(), corpus.dev.end());
  everything.insert(everything.end(), corpus.test.begin(), corpus.test.end());
  TpeAutoencoder model = TpeAutoencoder::create(config, everything);
  const auto& dev = corpus.dev.empty() ? corpus.train : corpus.dev;

  std::vector<std::size_t> lengths;
  for (const auto& s : corpus.train) lengths.push_back(s.size());
  std::vector<std::size_t> dev_lengths;
  for (const auto& s : dev) dev_lengths.push_back(s.size());
  const auto dev_groups = length_groups(dev_lengths, 256);

  auto gather = [](const std::vector<std::vector<std::string>>& src, const std::vector<std::size_t>& idx) {
    std::vector<std::vector<std::string>> out;
    for (auto i : idx) out.push_back(src[i]);
    return out;
  };
  auto fit = fit_loop(
      model.params(), fit_options(config.train),
      [&](const std::vector<std::size_t>& batch) {
        return scale(model.loss(gather(corpus.train, batch)), 1.0 / static_cast<double>(batch.size()));
      },
      [&] {
        NoGradScope no_grad;
        double total = 0.0;
        for (const auto& g : dev_groups) total += model.loss(gather(dev, g)).item();
        return total / static_cast<double>(dev.size());
      },
      [&](Rng& rng) { return length_batches(lengths, config.train.batch_size, rng); });
  if (report) {
    report->best_dev_loss = fit.best_dev;
    report->epochs = fit.epochs;
    report->log = std::move(fit.log);
    report->test_accuracy = model.accuracy(corpus.test.empty() ? corpus.train : corpus.test);
  }
  return model;
}

}  // namespace role::tpe
