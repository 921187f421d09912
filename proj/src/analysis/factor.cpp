#include "role/analysis/factor.hpp"

#include <cmath>
#include <random>

#include "role/common.hpp"

namespace role::analysis {

Matrix Matrix::identity(std::size_t n) {
  Matrix m{n, n, std::vector<double>(n * n, 0.0)};
  for (std::size_t i = 0; i < n; ++i) m.values[i * n + i] = 1.0;
  return m;
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix k{a.rows * b.rows, a.cols * b.cols, {}};
  k.values.resize(k.rows * k.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t kk = 0; kk < b.rows; ++kk)
      for (std::size_t j = 0; j < a.cols; ++j)
        for (std::size_t l = 0; l < b.cols; ++l)
          k.values[(i * b.rows + kk) * k.cols + j * b.cols + l] = a.at(i, j) * b.at(kk, l);
  return k;
}

std::vector<double> outer_flat(std::span<const double> a, std::span<const double> b) {
  std::vector<double> out;
  out.reserve(a.size() * b.size());
  for (double x : a)
    for (double y : b) out.push_back(x * y);
  return out;
}

namespace {

std::vector<double> apply(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols) throw ShapeError("matrix-vector size mismatch");
  std::vector<double> y(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) y[i] += m.at(i, j) * x[j];
  return y;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

// Rank-one map sending `from` to `to`: to from^T / |from|^2.
Matrix sending(const std::vector<double>& from, const std::vector<double>& to) {
  double nn = 0.0;
  for (double x : from) nn += x * x;
  Matrix m{to.size(), from.size(), {}};
  for (double t : to)
    for (double f : from) m.values.push_back(t * f / nn);
  return m;
}

}  // namespace

FactorCheck factored_weight_check(const Matrix& w_f, const Matrix& w_r, std::span<const double> f,
                                  std::span<const double> r) {
  if (f.size() != w_f.cols || r.size() != w_r.cols) throw ShapeError("factored_weight_check: dims incompatible");
  FactorCheck c;
  c.lhs = apply(kronecker(w_f, w_r), outer_flat(f, r));
  c.rhs = outer_flat(apply(w_f, f), apply(w_r, r));
  c.residual = max_abs_diff(c.lhs, c.rhs);
  return c;
}

JumpTwiceDemo jump_twice_demo(std::size_t filler_dim, std::size_t role_dim, std::uint64_t seed) {
  Rng rng(seed);
  JumpTwiceDemo d;
  d.e_jump = random_vector(filler_dim, rng);
  d.e_JUMP = random_vector(filler_dim, rng);
  d.e_arg = random_vector(role_dim, rng);
  d.e_R1 = random_vector(role_dim, rng);
  d.e_R2 = random_vector(role_dim, rng);
  std::vector<double> both(role_dim);
  for (std::size_t i = 0; i < role_dim; ++i) both[i] = d.e_R1[i] + d.e_R2[i];
  d.w_f = sending(d.e_jump, d.e_JUMP);
  d.w_r = sending(d.e_arg, both);
  d.mapped = apply(kronecker(d.w_f, d.w_r), outer_flat(d.e_jump, d.e_arg));
  d.expected = outer_flat(d.e_JUMP, d.e_R1);
  const auto second = outer_flat(d.e_JUMP, d.e_R2);
  for (std::size_t i = 0; i < d.expected.size(); ++i) d.expected[i] += second[i];
  d.residual = max_abs_diff(d.mapped, d.expected);
  return d;
}

}  // namespace role::analysis
