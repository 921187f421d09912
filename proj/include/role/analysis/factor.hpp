#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace role::analysis {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> values;

  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  static Matrix identity(std::size_t n);
};

/// Kronecker product: [A (x) B]_{(i,k),(j,l)} = A_ij B_kl, first operand's
/// index slowest.
Matrix kronecker(const Matrix& a, const Matrix& b);

/// Flattened a (x) b with a's index slowest.
std::vector<double> outer_flat(std::span<const double> a, std::span<const double> b);

struct FactorCheck {
  std::vector<double> lhs;  // (W_F (x) W_R) [f (x) r]
  std::vector<double> rhs;  // [W_F f] (x) [W_R r]
  double residual = 0.0;    // max |lhs - rhs|
};

/// Evaluates both sides of the factored-weight identity. Throws ShapeError
/// when the vectors do not match the matrices' column counts.
FactorCheck factored_weight_check(const Matrix& w_f, const Matrix& w_r, std::span<const double> f,
                                  std::span<const double> r);

/// The "jump twice" construction: W_F sends e_F(jump) to e_F(JUMP), W_R sends
/// the twice-argument role to e_R(R1) + e_R(R2), and W_F (x) W_R applied to
/// e(jump twice) is compared with e(JUMP JUMP).
struct JumpTwiceDemo {
  std::vector<double> e_jump, e_JUMP;              // filler embeddings
  std::vector<double> e_arg, e_R1, e_R2;           // role embeddings
  Matrix w_f, w_r;
  std::vector<double> mapped;    // (W_F (x) W_R) e(jump twice)
  std::vector<double> expected;  // e_F(JUMP) (x) e_R(R1) + e_F(JUMP) (x) e_R(R2)
  double residual = 0.0;
};
JumpTwiceDemo jump_twice_demo(std::size_t filler_dim = 4, std::size_t role_dim = 3, std::uint64_t seed = 0);

}  // namespace role::analysis
