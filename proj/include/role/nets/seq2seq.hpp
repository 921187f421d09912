#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "role/nets/decoder.hpp"
#include "role/tasks/dataset.hpp"
#include "role/training.hpp"

namespace role::nets {

struct Seq2SeqConfig {
  std::size_t embedding_dim = 100;
  std::size_t hidden_dim = 100;
  double dropout = 0.1;  // on embeddings and on decoder states before projection
  std::size_t max_decode_len = 64;
};

nlohmann::json to_json(const Seq2SeqConfig& c);
Seq2SeqConfig seq2seq_config_from_json(const nlohmann::json& j);

/// GRU encoder-decoder whose only channel between the halves is the
/// encoder's final hidden state.
class Seq2Seq {
 public:
  static Seq2Seq create(Vocab input_vocab, const std::vector<std::string>& output_symbols, const Seq2SeqConfig& config,
                        std::uint64_t seed);
  static Seq2Seq load(const std::filesystem::path& prefix);
  void save(const std::filesystem::path& prefix, const nlohmann::json& extra_meta = nlohmann::json::object()) const;

  Seq2Seq(Seq2Seq&&) = default;
  Seq2Seq& operator=(Seq2Seq&&) = default;
  Seq2Seq(const Seq2Seq&) = delete;
  Seq2Seq& operator=(const Seq2Seq&) = delete;

  /// Final encoder hidden state with dropout off. Throws ParseError on
  /// unknown tokens.
  std::vector<double> encode(std::span<const std::string> tokens) const;
  /// Encodes many sequences at once (grouped by length internally).
  std::vector<std::vector<double>> encode_all(const std::vector<std::vector<std::string>>& inputs) const;
  DecodeResult decode_from_hidden(std::span<const double> hidden) const;
  DecodeResult translate(std::span<const std::string> tokens) const { return decode_from_hidden(encode(tokens)); }

  /// Teacher-forced training loss for one example (summed token cross-entropy).
  ad::Tensor loss(const tasks::Example& example, Rng* dropout_rng) const;

  ad::ParamSet& params() { return params_; }
  const Seq2SeqConfig& config() const { return config_; }
  const Vocab& input_vocab() const { return input_vocab_; }
  const GruDecoder& decoder() const { return decoder_; }
  std::size_t hidden_dim() const { return config_.hidden_dim; }

 private:
  Seq2Seq() = default;
  ad::Tensor encode_ids(const std::vector<std::vector<std::size_t>>& ids, Rng* dropout_rng) const;

  Seq2SeqConfig config_;
  Vocab input_vocab_;
  ad::ParamSet params_;
  ad::Tensor embedding_;
  GruCell encoder_;
  GruDecoder decoder_;
};

struct Seq2SeqTrainConfig {
  std::size_t steps = 100000;  // one example per step
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  std::size_t log_every = 1000;
};

struct Seq2SeqTrainReport {
  std::vector<LogRow> log;
  std::vector<std::string> warnings;
};

/// ADAM with batch size 1 over reshuffled passes of `train`. `progress`,
/// when given, sees each log row as it is produced.
Seq2SeqTrainReport train_seq2seq(Seq2Seq& model, const std::vector<tasks::Example>& train,
                                 const Seq2SeqTrainConfig& config,
                                 const std::function<void(const LogRow&)>& progress = {});

/// Exact full-string match rate of greedy decoding.
double sequence_accuracy(const Seq2Seq& model, const std::vector<tasks::Example>& examples);

}  // namespace role::nets
