#include "role/nets/rnn.hpp"

#include <cmath>
#include <random>

#include "role/ops.hpp"

namespace role::nets {

using namespace role::ad;

Tensor& uniform_param(ParamSet& params, const std::string& name, Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  std::vector<double> v(shape.numel());
  for (auto& x : v) x = u(rng);
  return params.add(name, Tensor::parameter(std::move(shape), std::move(v)));
}

Tensor zero_state(std::size_t batch, std::size_t n) { return Tensor::zeros(Shape{batch, n}); }

namespace {

template <typename Cell>
Cell make_cell(ParamSet& params, const std::string& prefix, std::size_t in, std::size_t hidden, std::size_t gates,
               Rng& rng) {
  Cell c;
  c.input_dim = in;
  c.hidden_dim = hidden;
  c.w_ih = uniform_param(params, prefix + ".w_ih", {gates * hidden, in}, hidden, rng);
  c.w_hh = uniform_param(params, prefix + ".w_hh", {gates * hidden, hidden}, hidden, rng);
  c.b_ih = uniform_param(params, prefix + ".b_ih", {gates * hidden}, hidden, rng);
  c.b_hh = uniform_param(params, prefix + ".b_hh", {gates * hidden}, hidden, rng);
  return c;
}

template <typename Cell>
Cell bind_cell(ParamSet& params, const std::string& prefix, std::size_t gates) {
  Cell c;
  c.w_ih = params.get(prefix + ".w_ih");
  c.w_hh = params.get(prefix + ".w_hh");
  c.b_ih = params.get(prefix + ".b_ih");
  c.b_hh = params.get(prefix + ".b_hh");
  c.hidden_dim = c.w_hh.cols();
  c.input_dim = c.w_ih.cols();
  if (c.w_ih.rows() != gates * c.hidden_dim) throw ShapeError(prefix + ": gate rows do not match hidden size");
  return c;
}

}  // namespace

GruCell GruCell::create(ParamSet& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
                        Rng& rng) {
  return make_cell<GruCell>(params, prefix, input_dim, hidden_dim, 3, rng);
}

GruCell GruCell::bind(ParamSet& params, const std::string& prefix) { return bind_cell<GruCell>(params, prefix, 3); }

Tensor GruCell::step(const Tensor& h, const Tensor& x) const {
  const std::size_t H = hidden_dim;
  Tensor gi = linear(x, w_ih, b_ih);
  Tensor gh = linear(h, w_hh, b_hh);
  Tensor r = sigmoid(add(slice_cols(gi, 0, H), slice_cols(gh, 0, H)));
  Tensor z = sigmoid(add(slice_cols(gi, H, H), slice_cols(gh, H, H)));
  Tensor n = tanh(add(slice_cols(gi, 2 * H, H), mul(r, slice_cols(gh, 2 * H, H))));
  // (1 - z) * n + z * h == n + z * (h - n)
  return add(n, mul(z, sub(h, n)));
}

LstmCell LstmCell::create(ParamSet& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
                          Rng& rng) {
  return make_cell<LstmCell>(params, prefix, input_dim, hidden_dim, 4, rng);
}

LstmCell LstmCell::bind(ParamSet& params, const std::string& prefix) { return bind_cell<LstmCell>(params, prefix, 4); }

LstmCell::State LstmCell::step(const State& s, const Tensor& x) const {
  const std::size_t H = hidden_dim;
  Tensor g = add(linear(x, w_ih, b_ih), linear(s.h, w_hh, b_hh));
  Tensor i = sigmoid(slice_cols(g, 0, H));
  Tensor f = sigmoid(slice_cols(g, H, H));
  Tensor c_hat = tanh(slice_cols(g, 2 * H, H));
  Tensor o = sigmoid(slice_cols(g, 3 * H, H));
  Tensor c = add(mul(f, s.c), mul(i, c_hat));
  return {mul(o, tanh(c)), c};
}

namespace {

std::string cell_name(const std::string& prefix, std::size_t layer, std::size_t dir) {
  return prefix + ".l" + std::to_string(layer) + (dir == 0 ? ".fwd" : ".bwd");
}

}  // namespace

LstmStack LstmStack::create(ParamSet& params, const std::string& prefix, std::size_t input_dim,
                            std::size_t hidden_dim, std::size_t layers, bool bidirectional, Rng& rng) {
  if (layers == 0 || hidden_dim == 0) throw ConfigError("LSTM stack needs at least one layer and unit");
  LstmStack s;
  s.hidden_dim_ = hidden_dim;
  s.bidirectional_ = bidirectional;
  const std::size_t dirs = bidirectional ? 2 : 1;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? input_dim : hidden_dim * dirs;
    std::vector<LstmCell> layer;
    for (std::size_t d = 0; d < dirs; ++d) {
      layer.push_back(LstmCell::create(params, cell_name(prefix, l, d), in, hidden_dim, rng));
    }
    s.cells_.push_back(std::move(layer));
  }
  return s;
}

LstmStack LstmStack::bind(ParamSet& params, const std::string& prefix, std::size_t layers, bool bidirectional) {
  LstmStack s;
  s.bidirectional_ = bidirectional;
  const std::size_t dirs = bidirectional ? 2 : 1;
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<LstmCell> layer;
    for (std::size_t d = 0; d < dirs; ++d) layer.push_back(LstmCell::bind(params, cell_name(prefix, l, d)));
    s.cells_.push_back(std::move(layer));
  }
  s.hidden_dim_ = s.cells_.front().front().hidden_dim;
  return s;
}

std::vector<Tensor> LstmStack::forward(const std::vector<Tensor>& xs) const {
  if (xs.empty()) throw ShapeError("LSTM forward over an empty sequence");
  const std::size_t T = xs.size(), B = xs.front().rows();
  std::vector<Tensor> inputs = xs;
  for (const auto& layer : cells_) {
    std::vector<std::vector<Tensor>> per_dir;
    for (std::size_t d = 0; d < layer.size(); ++d) {
      std::vector<Tensor> outs(T);
      LstmCell::State s{zero_state(B, hidden_dim_), zero_state(B, hidden_dim_)};
      for (std::size_t k = 0; k < T; ++k) {
        const std::size_t t = d == 0 ? k : T - 1 - k;
        s = layer[d].step(s, inputs[t]);
        outs[t] = s.h;
      }
      per_dir.push_back(std::move(outs));
    }
    std::vector<Tensor> next(T);
    for (std::size_t t = 0; t < T; ++t) {
      if (per_dir.size() == 1) {
        next[t] = per_dir[0][t];
      } else {
        std::vector<Tensor> both{per_dir[0][t], per_dir[1][t]};
        next[t] = concat_cols(both);
      }
    }
    inputs = std::move(next);
  }
  return inputs;
}

}  // namespace role::nets
