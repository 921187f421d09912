#pragma once

#include <span>
#include <string>
#include <vector>

#include "role/nets/rnn.hpp"
#include "role/tasks/tree.hpp"
#include "role/vocab.hpp"

namespace role::nets {

inline constexpr const char* kSos = "<sos>";
inline constexpr const char* kEos = "<eos>";

struct DecodeResult {
  std::vector<std::string> tokens;
  bool truncated = false;  // hit the length cap before emitting the end token
};

/// Output vocabulary with <sos> = 0 and <eos> = 1 ahead of `symbols`.
Vocab decoder_vocab(const std::vector<std::string>& symbols);

/// GRU sequence decoder conditioned only through its initial hidden state.
/// Each step consumes the previous token's embedding (<sos> first) and
/// projects the hidden state to output logits.
class GruDecoder {
 public:
  GruDecoder() = default;
  static GruDecoder create(ParamSet& params, const std::string& prefix, Vocab vocab, std::size_t embedding_dim,
                           std::size_t hidden_dim, Rng& rng);
  static GruDecoder bind(ParamSet& params, const std::string& prefix, Vocab vocab);

  /// Teacher-forced cross-entropy summed over steps and rows. h0 is [B, H];
  /// `targets` holds B equal-length id sequences without the end token.
  /// With dropout > 0 and an rng, dropout hits the input embeddings and the
  /// hidden states fed to the output projection.
  Tensor loss(const Tensor& h0, const std::vector<std::vector<std::size_t>>& targets, double dropout = 0.0,
              Rng* rng = nullptr) const;

  /// Greedy argmax decoding from a single hidden vector, up to max_len tokens.
  DecodeResult greedy(std::span<const double> h0, std::size_t max_len) const;

  std::size_t hidden_dim() const { return cell_.hidden_dim; }
  const Vocab& vocab() const { return vocab_; }

 private:
  Vocab vocab_;
  Tensor embedding_, proj_w_, proj_b_;
  GruCell cell_;
};

/// Tree decoder: a GRU cell expands a parent state into left and right child
/// states (the cell input is a learned direction embedding); leaf states are
/// projected to symbol logits. The tree shape is supplied by the caller.
class TreeDecoder {
 public:
  TreeDecoder() = default;
  static TreeDecoder create(ParamSet& params, const std::string& prefix, Vocab vocab, std::size_t direction_dim,
                            std::size_t hidden_dim, Rng& rng);
  static TreeDecoder bind(ParamSet& params, const std::string& prefix, Vocab vocab);

  /// Leaf logits [B, V] in left-to-right order.
  std::vector<Tensor> leaf_logits(const Tensor& root, const tasks::BinaryTree& shape) const;
  /// Cross-entropy summed over leaves and rows; targets are B id sequences
  /// with one id per leaf.
  Tensor loss(const Tensor& root, const tasks::BinaryTree& shape,
              const std::vector<std::vector<std::size_t>>& targets) const;
  std::vector<std::string> decode(std::span<const double> root, const tasks::BinaryTree& shape) const;

  std::size_t hidden_dim() const { return cell_.hidden_dim; }
  const Vocab& vocab() const { return vocab_; }

 private:
  void expand(const Tensor& h, const tasks::BinaryTree& node, std::vector<Tensor>& out) const;

  Vocab vocab_;
  Tensor directions_, proj_w_, proj_b_;
  GruCell cell_;
};

}  // namespace role::nets
