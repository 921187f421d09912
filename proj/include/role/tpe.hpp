#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "role/embedding_table.hpp"
#include "role/nets/decoder.hpp"
#include "role/params.hpp"
#include "role/schemes.hpp"
#include "role/tasks/digits.hpp"
#include "role/training.hpp"

namespace role::tpe {

using ad::ParamSet;
using ad::Tensor;

/// Fillers and roles as (vocabulary id) sequences of equal length.
struct Bindings {
  std::vector<std::size_t> fillers;
  std::vector<std::size_t> roles;
};

/// Tensor Product Encoder: W vec(sum_t F[f_t] (x) R[r_t]) + b, where F and R
/// hold one embedding per row and vec() puts the filler index slowest.
class TpeModel {
 public:
  TpeModel() = default;
  static TpeModel create(ParamSet& params, const std::string& prefix, std::size_t n_fillers, std::size_t n_roles,
                         std::size_t filler_dim, std::size_t role_dim, std::size_t out_dim, Rng& rng);
  static TpeModel bind(ParamSet& params, const std::string& prefix);

  /// Flattened TPRs [B, d_F * d_R] (no W).
  Tensor tpr_batch(const std::vector<Bindings>& batch) const;
  /// Encodings [B, out_dim].
  Tensor encode_batch(const std::vector<Bindings>& batch) const;
  std::vector<double> encode(const Bindings& b) const;

  std::size_t n_fillers() const { return fillers_.rows(); }
  std::size_t n_roles() const { return roles_.rows(); }
  std::size_t filler_dim() const { return fillers_.cols(); }
  std::size_t role_dim() const { return roles_.cols(); }
  std::size_t out_dim() const { return w_.rows(); }
  const Tensor& fillers() const { return fillers_; }
  const Tensor& roles() const { return roles_; }
  const Tensor& w() const { return w_; }
  const Tensor& bias() const { return bias_; }

 private:
  void check(const Bindings& b) const;
  Tensor fillers_, roles_, w_, bias_;
};

struct TpeTrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t patience = 10;
  std::size_t max_epochs = 200;
  double dev_fraction = 0.1;  // carved from the training data when no dev set is given
  std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// Regression onto fixed vectors (baselines, discrete refits, ingestion).

/// A TPE with its vocabularies, fitted to an embedding table by MSE.
struct TpeRegressor {
  Vocab filler_vocab;
  Vocab role_vocab;
  ParamSet params;
  TpeModel model;

  Bindings bind(std::span<const std::string> tokens, std::span<const std::string> role_labels) const;
  std::vector<double> encode(std::span<const std::string> tokens, std::span<const std::string> role_labels) const;
  void save(const std::filesystem::path& prefix, const nlohmann::json& extra_meta = nlohmann::json::object()) const;
  static TpeRegressor load(const std::filesystem::path& prefix);
};

struct TpeFitReport {
  double train_mse = 0.0;
  double dev_mse = 0.0;
  std::size_t epochs = 0;
  std::vector<LogRow> log;
};

struct TpeFitConfig {
  std::size_t filler_dim = 100;
  std::size_t role_dim = 50;
  TpeTrainConfig train;
};

/// Fits a TPE to `table` given one role label per token per record. The
/// vocabularies cover `all_tokens`/`all_labels` so later evaluation on
/// held-out sequences never meets an unknown id. A tenth of the table is
/// held out for early stopping.
TpeRegressor fit_tpe(const EmbeddingTable& table, const std::vector<std::vector<std::string>>& labels,
                     const Vocab& all_tokens, const Vocab& all_labels, const TpeFitConfig& config,
                     TpeFitReport* report = nullptr);

/// Mean squared error of the regressor over a table.
double tpe_mse(const TpeRegressor& tpe, const EmbeddingTable& table, const std::vector<std::vector<std::string>>& labels);

// ---------------------------------------------------------------------------
// Digit autoencoders: a TPE encoder trained end to end with a decoder.

enum class DecoderKind { Gru, Tree };

struct AutoencoderConfig {
  schemes::Scheme scheme = schemes::Scheme::LTR;
  DecoderKind decoder = DecoderKind::Gru;
  std::size_t filler_dim = 20;
  std::size_t role_dim = 20;
  std::size_t hidden_dim = 60;          // TPE output = decoder state size
  std::size_t decoder_input_dim = 20;   // GRU token embedding / tree direction embedding
  TpeTrainConfig train{1e-3, 32, 2, 100, 0.1, 0};
};

class TpeAutoencoder {
 public:
  static TpeAutoencoder create(const AutoencoderConfig& config, const std::vector<std::vector<std::string>>& corpus);
  static TpeAutoencoder load(const std::filesystem::path& prefix);
  void save(const std::filesystem::path& prefix, const nlohmann::json& extra_meta = nlohmann::json::object()) const;

  TpeAutoencoder(TpeAutoencoder&&) = default;
  TpeAutoencoder& operator=(TpeAutoencoder&&) = default;

  Bindings bindings(std::span<const std::string> tokens) const;
  std::vector<double> encode(std::span<const std::string> tokens) const;
  /// Decodes a state of size hidden_dim. The input tokens supply the length
  /// and, for the tree decoder, the tree shape.
  std::vector<std::string> decode(std::span<const double> hidden, std::span<const std::string> tokens) const;
  /// Training loss (summed cross-entropy) for a batch of equal-length strings.
  Tensor loss(const std::vector<std::vector<std::string>>& batch) const;
  /// Full-string accuracy of decode(encode(x)) == x.
  double accuracy(const std::vector<std::vector<std::string>>& strings) const;

  const AutoencoderConfig& config() const { return config_; }
  const schemes::RoleScheme& scheme() const { return scheme_; }
  const Vocab& filler_vocab() const { return fillers_; }
  const TpeModel& tpe() const { return tpe_; }
  ParamSet& params() { return params_; }
  std::size_t hidden_dim() const { return config_.hidden_dim; }

 private:
  TpeAutoencoder() : scheme_(schemes::Scheme::LTR) {}
  void build(const std::vector<std::vector<std::string>>& corpus, Rng& rng);

  AutoencoderConfig config_;
  schemes::RoleScheme scheme_;
  Vocab fillers_;
  ParamSet params_;
  TpeModel tpe_;
  nets::GruDecoder gru_;
  nets::TreeDecoder tree_;
};

struct AutoencoderReport {
  double best_dev_loss = 0.0;
  std::size_t epochs = 0;
  double test_accuracy = 0.0;
  std::vector<LogRow> log;
};

/// Trains end to end with cross-entropy, early stopping on dev loss, and
/// restores the best epoch. Reports full-string test accuracy.
TpeAutoencoder train_autoencoder(const tasks::DigitCorpus& corpus, const AutoencoderConfig& config,
                                 AutoencoderReport* report = nullptr);

nlohmann::json to_json(const TpeTrainConfig& c);
TpeTrainConfig train_config_from_json(const nlohmann::json& j, TpeTrainConfig defaults = {});
nlohmann::json to_json(const AutoencoderConfig& c);
AutoencoderConfig autoencoder_config_from_json(const nlohmann::json& j, AutoencoderConfig defaults = {});

}  // namespace role::tpe
