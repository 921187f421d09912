#include "role/nets/seq2seq.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "role/adam.hpp"
#include "role/ops.hpp"
#include "role/tape.hpp"

namespace role::nets {

using namespace role::ad;

nlohmann::json to_json(const Seq2SeqConfig& c) {
  return {{"embedding_dim", c.embedding_dim},
          {"hidden_dim", c.hidden_dim},
          {"dropout", c.dropout},
          {"max_decode_len", c.max_decode_len}};
}

Seq2SeqConfig seq2seq_config_from_json(const nlohmann::json& j) {
  Seq2SeqConfig c;
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.dropout = j.value("dropout", c.dropout);
  c.max_decode_len = j.value("max_decode_len", c.max_decode_len);
  return c;
}

Seq2Seq Seq2Seq::create(Vocab input_vocab, const std::vector<std::string>& output_symbols,
                        const Seq2SeqConfig& config, std::uint64_t seed) {
  if (config.embedding_dim == 0 || config.hidden_dim == 0) throw ConfigError("seq2seq dims must be positive");
  if (!(config.dropout >= 0.0 && config.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  Rng rng(seed);
  Seq2Seq m;
  m.config_ = config;
  input_vocab.freeze();
  m.input_vocab_ = std::move(input_vocab);
  m.embedding_ = uniform_param(m.params_, "encoder.embedding", {m.input_vocab_.size(), config.embedding_dim}, 1, rng);
  m.encoder_ = GruCell::create(m.params_, "encoder.gru", config.embedding_dim, config.hidden_dim, rng);
  m.decoder_ = GruDecoder::create(m.params_, "decoder", decoder_vocab(output_symbols), config.embedding_dim,
                                  config.hidden_dim, rng);
  return m;
}

void Seq2Seq::save(const std::filesystem::path& prefix, const nlohmann::json& extra_meta) const {
  nlohmann::json meta = extra_meta;
  meta["model"] = "seq2seq";
  meta["config"] = to_json(config_);
  meta["input_vocab"] = input_vocab_.tokens();
  const auto& out = decoder_.vocab().tokens();
  meta["output_symbols"] = std::vector<std::string>(out.begin() + 2, out.end());
  save_checkpoint(params_, prefix, meta);
}

Seq2Seq Seq2Seq::load(const std::filesystem::path& prefix) {
  const auto meta = read_checkpoint_meta(prefix);
  if (meta.value("model", "") != "seq2seq") throw ConfigError(prefix.string() + " is not a seq2seq checkpoint");
  Seq2Seq m = create(Vocab(meta.at("input_vocab").get<std::vector<std::string>>()),
                     meta.at("output_symbols").get<std::vector<std::string>>(),
                     seq2seq_config_from_json(meta.at("config")), 0);
  load_checkpoint(m.params_, prefix);
  return m;
}

Tensor Seq2Seq::encode_ids(const std::vector<std::vector<std::size_t>>& ids, Rng* dropout_rng) const {
  const std::size_t B = ids.size(), T = ids.front().size();
  Tensor h = zero_state(B, config_.hidden_dim);
  std::vector<std::size_t> col(B);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t b = 0; b < B; ++b) col[b] = ids[b][t];
    Tensor x = gather_rows(embedding_, col);
    if (dropout_rng && config_.dropout > 0.0) x = dropout(x, 1.0 - config_.dropout, *dropout_rng);
    h = encoder_.step(h, x);
  }
  return h;
}

std::vector<double> Seq2Seq::encode(std::span<const std::string> tokens) const {
  if (tokens.empty()) throw ParseError("cannot encode an empty sequence");
  NoGradScope no_grad;
  Tensor h = encode_ids({input_vocab_.encode(tokens)}, nullptr);
  return {h.data().begin(), h.data().end()};
}

std::vector<std::vector<double>> Seq2Seq::encode_all(const std::vector<std::vector<std::string>>& inputs) const {
  NoGradScope no_grad;
  std::vector<std::size_t> lengths;
  for (const auto& in : inputs) {
    if (in.empty()) throw ParseError("cannot encode an empty sequence");
    lengths.push_back(in.size());
  }
  std::vector<std::vector<double>> out(inputs.size());
  for (const auto& group : length_groups(lengths, 256)) {
    std::vector<std::vector<std::size_t>> ids;
    for (auto i : group) ids.push_back(input_vocab_.encode(inputs[i]));
    Tensor h = encode_ids(ids, nullptr);
    const std::size_t H = config_.hidden_dim;
    for (std::size_t b = 0; b < group.size(); ++b) {
      out[group[b]].assign(h.data().begin() + static_cast<long>(b * H), h.data().begin() + static_cast<long>((b + 1) * H));
    }
  }
  return out;
}

DecodeResult Seq2Seq::decode_from_hidden(std::span<const double> hidden) const {
  return decoder_.greedy(hidden, config_.max_decode_len);
}

Tensor Seq2Seq::loss(const tasks::Example& example, Rng* dropout_rng) const {
  if (example.input.empty()) throw ParseError("empty input sequence");
  Tensor h = encode_ids({input_vocab_.encode(example.input)}, dropout_rng);
  std::vector<std::vector<std::size_t>> target{decoder_.vocab().encode(example.output)};
  return decoder_.loss(h, target, dropout_rng ? config_.dropout : 0.0, dropout_rng);
}

Seq2SeqTrainReport train_seq2seq(Seq2Seq& model, const std::vector<tasks::Example>& train,
                                 const Seq2SeqTrainConfig& config, const std::function<void(const LogRow&)>& progress) {
  if (train.empty()) throw ConfigError("seq2seq training needs a nonempty dataset");
  Seq2SeqTrainReport report;
  Rng order_rng(config.seed), dropout_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  AdamConfig ac;
  ac.learning_rate = config.learning_rate;
  Adam adam(model.params(), ac);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  double window = 0.0;
  std::size_t window_n = 0;
  const std::size_t log_every = std::max<std::size_t>(1, config.log_every);
  for (std::size_t step = 1; step <= config.steps; ++step) {
    if (cursor == order.size()) {
      std::shuffle(order.begin(), order.end(), order_rng);
      cursor = 0;
    }
    const auto& ex = train[order[cursor++]];
    Tape tape;
    {
      TapeScope scope(tape);
      Tensor loss = model.loss(ex, &dropout_rng);
      if (!std::isfinite(loss.item())) throw NumericError("seq2seq loss is not finite at step " + std::to_string(step));
      tape.backward(loss);
      window += loss.item();
      ++window_n;
    }
    adam.step();
    adam.zero_grad();
    if (step % log_every == 0 || step == config.steps) {
      LogRow row{step, window / static_cast<double>(window_n)};
      report.log.push_back(row);
      if (progress) progress(row);
      window = 0.0;
      window_n = 0;
    }
  }
  // Warmup is the first tenth of the logged windows.
  if (report.log.size() >= 10) {
    const double early = report.log[report.log.size() / 10].loss;
    if (report.log.back().loss >= early) {
      report.warnings.push_back("training loss did not decrease after warmup (" + std::to_string(early) + " -> " +
                                std::to_string(report.log.back().loss) + ")");
      std::cerr << "warning: " << report.warnings.back() << '\n';
    }
  }
  return report;
}

double sequence_accuracy(const Seq2Seq& model, const std::vector<tasks::Example>& examples) {
  if (examples.empty()) return 0.0;
  const auto hidden = model.encode_all([&] {
    std::vector<std::vector<std::string>> in;
    for (const auto& e : examples) in.push_back(e.input);
    return in;
  }());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto r = model.decode_from_hidden(hidden[i]);
    if (!r.truncated && r.tokens == examples[i].output) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(examples.size());
}

}  // namespace role::nets
