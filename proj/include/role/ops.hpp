#pragma once

// Differentiable primitives. Every function computes its forward value
// eagerly and, when a tape is active and an operand requires a gradient,
// records the matching vector-Jacobian product. Shape violations throw
// role::ShapeError.

#include <cstddef>
#include <span>
#include <vector>

#include "role/common.hpp"
#include "role/tensor.hpp"

namespace role::ad {

// Linear algebra ------------------------------------------------------------

/// W x for W [m, n] and x [n].
Tensor matvec(const Tensor& w, const Tensor& x);
/// A B for A [m, k] and B [k, n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// x W^T + b. x is [in] or [batch, in]; W is [out, in]; bias [out] may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias);
/// a b^T as an [a.size(), b.size()] matrix; both operands must be vectors.
Tensor outer(const Tensor& a, const Tensor& b);
Tensor dot(const Tensor& a, const Tensor& b);

// Elementwise ---------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
/// 1 - a
Tensor one_minus(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
/// Sum of same-shape tensors as one node.
Tensor add_n(std::span<const Tensor> terms);

// Reductions and normalisation ----------------------------------------------

Tensor sum(const Tensor& a);
/// Column sums of a [rows, cols] matrix, giving [cols].
Tensor sum_rows(const Tensor& a);
/// Softmax over the last axis (each row of a matrix). Throws on an empty axis.
Tensor softmax(const Tensor& a);
Tensor log_softmax(const Tensor& a);
/// -log softmax(logits)[target] for a logits vector.
Tensor cross_entropy(const Tensor& logits, std::size_t target);
/// Mean of squared differences over all elements.
Tensor mse(const Tensor& prediction, const Tensor& target);

// Structure -----------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape);
Tensor flatten(const Tensor& a);
Tensor slice(const Tensor& v, std::size_t start, std::size_t length);
Tensor concat(std::span<const Tensor> vectors);
/// Stacks equal-length vectors into the rows of a matrix.
Tensor stack_rows(std::span<const Tensor> vectors);
Tensor row(const Tensor& m, std::size_t i);
/// Column j of a [rows, cols] matrix; the embedding lookup for column-major
/// embedding tables.
Tensor column(const Tensor& m, std::size_t j);

// Batched (row = one example) ---------------------------------------------

/// Columns [start, start+length) of a [rows, cols] matrix.
Tensor slice_cols(const Tensor& m, std::size_t start, std::size_t length);
/// Side-by-side concatenation of matrices with equal row counts.
Tensor concat_cols(std::span<const Tensor> matrices);
/// Rows ids[0], ids[1], ... of table, as an [ids.size(), cols] matrix.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);
/// Row-wise outer product: for a [B, p] and b [B, q], row i of the [B, p*q]
/// result is a[i] (x) b[i] flattened with the a index slowest.
Tensor batch_outer(const Tensor& a, const Tensor& b);
/// Sums rows of m into n_segments rows: out[segment[i]] += m[i]. Segments
/// with no rows stay zero.
Tensor segment_sum(const Tensor& m, std::span<const std::size_t> segment, std::size_t n_segments);
/// Sum over rows of -log softmax(logits[i])[targets[i]].
Tensor cross_entropy_rows(const Tensor& logits, std::span<const std::size_t> targets);

// Regularisation ------------------------------------------------------------

/// Inverted dropout: each element kept with probability keep_prob and scaled
/// by 1/keep_prob. The mask is drawn from `rng` in element order.
Tensor dropout(const Tensor& a, double keep_prob, Rng& rng);

}  // namespace role::ad
