#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "role/embedding_table.hpp"
#include "role/nets/rnn.hpp"
#include "role/tpe.hpp"
#include "role/training.hpp"
#include "role/vocab.hpp"

namespace role::learner {

using ad::ParamSet;
using ad::Tensor;

struct RoleModelConfig {
  std::size_t n_roles = 50;
  std::size_t role_dim = 50;
  std::size_t filler_dim = 100;
  std::size_t lstm_hidden = 64;
  std::size_t lstm_layers = 2;
  bool bidirectional = true;
};

struct RoleTrainConfig {
  double lambda = 1.0;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t patience = 10;
  std::size_t max_epochs = 100;
  double dev_fraction = 0.1;
  std::uint64_t seed = 0;
  std::size_t restarts = 3;  // independent seeds; the lowest dev MSE wins
  double min_delta = 0.0;    // dev MSE gains at or below this do not reset patience
};

nlohmann::json to_json(const RoleModelConfig& c);
nlohmann::json to_json(const RoleTrainConfig& c);
RoleModelConfig model_config_from_json(const nlohmann::json& j, RoleModelConfig defaults = {});
RoleTrainConfig train_config_from_json(const nlohmann::json& j, RoleTrainConfig defaults = {});

enum class Mode { Continuous, Snapped };

/// Per-token attention output.
struct AttentionRecord {
  std::vector<std::vector<double>> weights;  // a_t, one probability vector per token
  std::vector<std::size_t> roles;            // argmax a_t (ties -> lowest index)
  std::vector<double> max_weight;
};

/// Values of the one-hot-encouraging regularizer for one sequence (or summed
/// over many): R1 = sum a(1-a), R2 = -sum a^2, R3 = sum_rho (s(1-s))^2 with
/// s = sum_t a_t.
struct RegularizerValues {
  double r1 = 0.0, r2 = 0.0, r3 = 0.0;
  double total() const { return r1 + r2 + r3; }
};
RegularizerValues regularizer(const std::vector<std::vector<double>>& attention);

/// Tensor form over a batch: attention[t] is [B, n_R]; returns R1+R2+R3
/// summed over the batch rows.
Tensor regularizer_loss(const std::vector<Tensor>& attention);

/// ROLE: an attention LSTM picks a soft role per token; the sequence is
/// encoded as W vec(sum_t f_t (x) R a_t) + b. Fillers and roles are stored
/// one embedding per row (F is [n_F, d_F], R is [n_R, d_R]).
class RoleModel {
 public:
  static RoleModel create(Vocab fillers, std::size_t out_dim, const RoleModelConfig& config, std::uint64_t seed);
  static RoleModel load(const std::filesystem::path& prefix);
  void save(const std::filesystem::path& prefix, const nlohmann::json& extra_meta = nlohmann::json::object()) const;

  RoleModel(RoleModel&&) = default;
  RoleModel& operator=(RoleModel&&) = default;
  RoleModel(const RoleModel&) = delete;
  RoleModel& operator=(const RoleModel&) = delete;

  struct Forward {
    Tensor encodings;                // [B, out_dim]
    std::vector<Tensor> attention;   // per step, [B, n_R]
  };
  /// Batch of equal-length id sequences.
  Forward forward(const std::vector<std::vector<std::size_t>>& ids, Mode mode) const;

  AttentionRecord attention(std::span<const std::string> tokens) const;
  std::vector<double> encode(std::span<const std::string> tokens, Mode mode) const;
  std::vector<std::vector<double>> encode_all(const std::vector<std::vector<std::string>>& inputs, Mode mode) const;
  std::vector<AttentionRecord> attention_all(const std::vector<std::vector<std::string>>& inputs) const;

  /// Role embedding used for each token: R a_t (continuous) or the row of
  /// the argmax role (snapped).
  std::vector<std::vector<double>> role_vectors(std::span<const std::string> tokens, Mode mode) const;

  /// Linear part of W applied to one binding, f (x) r (no bias).
  std::vector<double> binding_embedding(std::size_t filler, std::span<const double> role_vec) const;

  /// Rescales every role embedding to unit L2 norm.
  void normalize_roles();

  const Vocab& filler_vocab() const { return fillers_; }
  const RoleModelConfig& config() const { return config_; }
  std::size_t out_dim() const { return w_.rows(); }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  const Tensor& fillers() const { return f_; }
  const Tensor& roles() const { return r_; }
  const Tensor& w() const { return w_; }
  const Tensor& bias() const { return b_; }
  /// Output layer of the attention network: keys [n_R, 2H] and bias [n_R].
  const Tensor& keys() const { return keys_; }
  const Tensor& key_bias() const { return key_bias_; }
  /// Top-layer LSTM states q_t for one sequence (the attention queries).
  std::vector<std::vector<double>> queries(std::span<const std::string> tokens) const;

 private:
  RoleModel() = default;
  void bind_all();
  std::vector<Tensor> lstm_states(const std::vector<std::vector<std::size_t>>& ids) const;

  RoleModelConfig config_;
  Vocab fillers_;
  ParamSet params_;
  Tensor f_, r_, w_, b_, proj_w_, proj_b_, keys_, key_bias_;
  nets::LstmStack lstm_;
};

struct RoleTrainReport {
  std::uint64_t seed = 0;
  double dev_mse = 0.0;
  double train_mse = 0.0;
  std::size_t epochs = 0;
  std::vector<LogRow> log;
  double mean_max_attention = 0.0;  // over dev tokens at the end
  std::size_t distinct_roles = 0;   // distinct snapped roles over the table
};

/// One training run minimizing the batch mean of squared distance to the
/// target plus lambda * regularizer / batch size. ADAM, role rows
/// renormalized after every step, early stopping on dev MSE with the best
/// epoch restored. `progress`, when given, sees each epoch's log row.
RoleModel train_role(const EmbeddingTable& table, const Vocab& fillers, const RoleModelConfig& model_config,
                     const RoleTrainConfig& config, RoleTrainReport* report = nullptr,
                     const std::function<void(const LogRow&)>& progress = {});

/// `config.restarts` runs with seeds seed, seed+1, ...; returns the run with
/// the lowest dev MSE and fills one report per run.
RoleModel train_role_best_of(const EmbeddingTable& table, const Vocab& fillers, const RoleModelConfig& model_config,
                             const RoleTrainConfig& config, std::vector<RoleTrainReport>* reports = nullptr);

/// Mean squared error of the model's encodings against a table.
double role_mse(const RoleModel& model, const EmbeddingTable& table, Mode mode);

/// Snapped role labels ("r<id>") per token.
std::vector<std::vector<std::string>> snapped_labels(const RoleModel& model,
                                                     const std::vector<std::vector<std::string>>& inputs);

/// Refits a fresh TPE on the model's snapped role labels: the discrete mode.
tpe::TpeRegressor discretize_and_refit(const RoleModel& model, const EmbeddingTable& table,
                                       const tpe::TpeFitConfig& config, tpe::TpeFitReport* report = nullptr);

/// JSONL, one {"tokens", "roles", "max_attention"} object per sequence.
void export_role_assignments(const RoleModel& model, const std::vector<std::vector<std::string>>& inputs,
                             const std::filesystem::path& path);

}  // namespace role::learner
