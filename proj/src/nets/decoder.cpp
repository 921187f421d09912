#include "role/nets/decoder.hpp"

#include <algorithm>

#include "role/ops.hpp"
#include "role/tape.hpp"

namespace role::nets {

using namespace role::ad;

namespace {

std::size_t argmax_row(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

Tensor maybe_dropout(const Tensor& t, double p, Rng* rng) {
  if (p <= 0.0 || rng == nullptr) return t;
  return dropout(t, 1.0 - p, *rng);
}

Tensor as_row(std::span<const double> v) {
  return Tensor::constant(Shape{1, v.size()}, std::vector<double>(v.begin(), v.end()));
}

}  // namespace

Vocab decoder_vocab(const std::vector<std::string>& symbols) {
  Vocab v;
  v.add(kSos);
  v.add(kEos);
  for (const auto& s : symbols) v.add(s);
  v.freeze();
  return v;
}

GruDecoder GruDecoder::create(ParamSet& params, const std::string& prefix, Vocab vocab, std::size_t embedding_dim,
                              std::size_t hidden_dim, Rng& rng) {
  if (vocab.size() < 3 || vocab.token(0) != kSos || vocab.token(1) != kEos) {
    throw ConfigError("decoder vocabulary must start with <sos>, <eos>");
  }
  GruDecoder d;
  d.embedding_ = uniform_param(params, prefix + ".embedding", {vocab.size(), embedding_dim}, 1, rng);
  d.cell_ = GruCell::create(params, prefix + ".gru", embedding_dim, hidden_dim, rng);
  d.proj_w_ = uniform_param(params, prefix + ".proj_w", {vocab.size(), hidden_dim}, hidden_dim, rng);
  d.proj_b_ = uniform_param(params, prefix + ".proj_b", {vocab.size()}, hidden_dim, rng);
  d.vocab_ = std::move(vocab);
  return d;
}

GruDecoder GruDecoder::bind(ParamSet& params, const std::string& prefix, Vocab vocab) {
  GruDecoder d;
  d.embedding_ = params.get(prefix + ".embedding");
  d.cell_ = GruCell::bind(params, prefix + ".gru");
  d.proj_w_ = params.get(prefix + ".proj_w");
  d.proj_b_ = params.get(prefix + ".proj_b");
  if (d.embedding_.rows() != vocab.size()) throw ShapeError("decoder vocabulary does not match checkpoint");
  d.vocab_ = std::move(vocab);
  return d;
}

Tensor GruDecoder::loss(const Tensor& h0, const std::vector<std::vector<std::size_t>>& targets, double dropout_p,
                        Rng* rng) const {
  if (targets.empty()) throw ShapeError("decoder loss: empty batch");
  const std::size_t B = targets.size(), L = targets.front().size();
  for (const auto& t : targets) {
    if (t.size() != L) throw ShapeError("decoder loss: target lengths differ within a batch");
  }
  if (h0.rank() != 2 || h0.rows() != B || h0.cols() != hidden_dim()) {
    throw ShapeError("decoder loss: initial state " + h0.shape().str());
  }
  std::vector<Tensor> terms;
  Tensor h = h0;
  std::vector<std::size_t> prev(B, 0), gold(B);
  for (std::size_t step = 0; step <= L; ++step) {
    for (std::size_t b = 0; b < B; ++b) gold[b] = step < L ? targets[b][step] : 1;
    Tensor x = maybe_dropout(gather_rows(embedding_, prev), dropout_p, rng);
    h = cell_.step(h, x);
    Tensor logits = linear(maybe_dropout(h, dropout_p, rng), proj_w_, proj_b_);
    terms.push_back(cross_entropy_rows(logits, gold));
    prev = gold;
  }
  return add_n(terms);
}

DecodeResult GruDecoder::greedy(std::span<const double> h0, std::size_t max_len) const {
  if (h0.size() != hidden_dim()) throw ShapeError("decode: hidden size mismatch");
  NoGradScope no_grad;
  DecodeResult out;
  Tensor h = as_row(h0);
  std::vector<std::size_t> prev{0};
  for (std::size_t step = 0; step < max_len; ++step) {
    h = cell_.step(h, gather_rows(embedding_, prev));
    Tensor logits = linear(h, proj_w_, proj_b_);
    const std::size_t next = argmax_row(logits.data());
    if (next == 1) return out;
    out.tokens.push_back(vocab_.token(next));
    prev[0] = next;
  }
  out.truncated = true;
  return out;
}

TreeDecoder TreeDecoder::create(ParamSet& params, const std::string& prefix, Vocab vocab, std::size_t direction_dim,
                                std::size_t hidden_dim, Rng& rng) {
  TreeDecoder d;
  d.directions_ = uniform_param(params, prefix + ".directions", {2, direction_dim}, 1, rng);
  d.cell_ = GruCell::create(params, prefix + ".gru", direction_dim, hidden_dim, rng);
  d.proj_w_ = uniform_param(params, prefix + ".proj_w", {vocab.size(), hidden_dim}, hidden_dim, rng);
  d.proj_b_ = uniform_param(params, prefix + ".proj_b", {vocab.size()}, hidden_dim, rng);
  d.vocab_ = std::move(vocab);
  return d;
}

TreeDecoder TreeDecoder::bind(ParamSet& params, const std::string& prefix, Vocab vocab) {
  TreeDecoder d;
  d.directions_ = params.get(prefix + ".directions");
  d.cell_ = GruCell::bind(params, prefix + ".gru");
  d.proj_w_ = params.get(prefix + ".proj_w");
  d.proj_b_ = params.get(prefix + ".proj_b");
  if (d.proj_w_.rows() != vocab.size()) throw ShapeError("tree decoder vocabulary does not match checkpoint");
  d.vocab_ = std::move(vocab);
  return d;
}

void TreeDecoder::expand(const Tensor& h, const tasks::BinaryTree& node, std::vector<Tensor>& out) const {
  if (node.is_leaf()) {
    out.push_back(linear(h, proj_w_, proj_b_));
    return;
  }
  const std::size_t B = h.rows();
  const std::vector<std::size_t> left(B, 0), right(B, 1);
  expand(cell_.step(h, gather_rows(directions_, left)), node.left(), out);
  expand(cell_.step(h, gather_rows(directions_, right)), node.right(), out);
}

std::vector<Tensor> TreeDecoder::leaf_logits(const Tensor& root, const tasks::BinaryTree& shape) const {
  if (root.rank() != 2 || root.cols() != hidden_dim()) throw ShapeError("tree decoder: root state " + root.shape().str());
  std::vector<Tensor> out;
  expand(root, shape, out);
  return out;
}

Tensor TreeDecoder::loss(const Tensor& root, const tasks::BinaryTree& shape,
                         const std::vector<std::vector<std::size_t>>& targets) const {
  auto logits = leaf_logits(root, shape);
  if (targets.size() != root.rows()) throw ShapeError("tree decoder: one target per row required");
  std::vector<Tensor> terms;
  std::vector<std::size_t> gold(targets.size());
  for (std::size_t leaf = 0; leaf < logits.size(); ++leaf) {
    for (std::size_t b = 0; b < targets.size(); ++b) {
      if (targets[b].size() != logits.size()) throw ShapeError("tree decoder: target length differs from leaf count");
      gold[b] = targets[b][leaf];
    }
    terms.push_back(cross_entropy_rows(logits[leaf], gold));
  }
  return add_n(terms);
}

std::vector<std::string> TreeDecoder::decode(std::span<const double> root, const tasks::BinaryTree& shape) const {
  if (root.size() != hidden_dim()) throw ShapeError("tree decode: hidden size mismatch");
  NoGradScope no_grad;
  std::vector<std::string> out;
  for (const auto& l : leaf_logits(as_row(root), shape)) out.push_back(vocab_.token(argmax_row(l.data())));
  return out;
}

}  // namespace role::nets
