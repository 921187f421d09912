#pragma once

#include <string>
#include <vector>

#include "role/common.hpp"
#include "role/params.hpp"
#include "role/tensor.hpp"

namespace role::nets {

using ad::ParamSet;
using ad::Tensor;

/// Parameter drawn from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) and
/// registered in `params` under `name`.
Tensor& uniform_param(ParamSet& params, const std::string& name, ad::Shape shape, std::size_t fan_in, Rng& rng);

/// Standard GRU cell with fused gate weights in (reset, update, candidate)
/// order:
///   r = sig(W_r x + b_ir + U_r h + b_hr), z = sig(W_z x + b_iz + U_z h + b_hz)
///   n = tanh(W_n x + b_in + r * (U_n h + b_hn)), h' = (1 - z) * n + z * h
/// Inputs are batched row-wise: x [B, in], h [B, H].
struct GruCell {
  std::size_t input_dim = 0, hidden_dim = 0;
  Tensor w_ih, w_hh, b_ih, b_hh;  // [3H, in], [3H, H], [3H], [3H]

  static GruCell create(ParamSet& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
                        Rng& rng);
  /// Binds to parameters already present in `params` (after a load).
  static GruCell bind(ParamSet& params, const std::string& prefix);
  Tensor step(const Tensor& h, const Tensor& x) const;
};

/// Standard LSTM cell, fused gates in (input, forget, cell, output) order.
struct LstmCell {
  std::size_t input_dim = 0, hidden_dim = 0;
  Tensor w_ih, w_hh, b_ih, b_hh;  // [4H, in], [4H, H], [4H], [4H]

  struct State {
    Tensor h, c;  // [B, H]
  };

  static LstmCell create(ParamSet& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
                         Rng& rng);
  static LstmCell bind(ParamSet& params, const std::string& prefix);
  State step(const State& s, const Tensor& x) const;
};

/// Stacked LSTM, optionally bidirectional. Layer l > 0 reads the
/// concatenated per-direction outputs of layer l - 1.
class LstmStack {
 public:
  LstmStack() = default;
  static LstmStack create(ParamSet& params, const std::string& prefix, std::size_t input_dim, std::size_t hidden_dim,
                          std::size_t layers, bool bidirectional, Rng& rng);
  static LstmStack bind(ParamSet& params, const std::string& prefix, std::size_t layers, bool bidirectional);

  /// xs[t] is [B, input_dim]; returns per-step top-layer outputs [B, output_dim()].
  std::vector<Tensor> forward(const std::vector<Tensor>& xs) const;
  std::size_t output_dim() const { return hidden_dim_ * (bidirectional_ ? 2 : 1); }
  std::size_t hidden_dim() const { return hidden_dim_; }
  bool bidirectional() const { return bidirectional_; }

 private:
  std::size_t hidden_dim_ = 0;
  bool bidirectional_ = false;
  std::vector<std::vector<LstmCell>> cells_;  // [layer][direction]
};

/// [B, n] zeros (constant).
Tensor zero_state(std::size_t batch, std::size_t n);

}  // namespace role::nets
