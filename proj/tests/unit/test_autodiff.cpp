#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "role/adam.hpp"
#include "role/common.hpp"
#include "role/gradcheck.hpp"
#include "role/ops.hpp"
#include "role/params.hpp"
#include "role/tape.hpp"

using namespace role;
using namespace role::ad;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape.numel());
  for (auto& x : v) x = u(rng);
  return Tensor::constant(std::move(shape), std::move(v));
}

// Central difference of f at coordinate i of t (test-side oracle).
double central_difference(const std::function<double()>& f, Tensor& t, std::size_t i,
                          double h = 1e-5) {
  auto d = t.mutable_data();
  const double saved = d[i];
  d[i] = saved + h;
  const double up = f();
  d[i] = saved - h;
  const double down = f();
  d[i] = saved;
  return (up - down) / (2 * h);
}

}  // namespace

TEST_CASE("outer product values") {
  auto r = outer(Tensor::vector({1, 0}), Tensor::vector({0, 1}));
  CHECK(r.shape() == Shape{2, 2});
  CHECK(std::vector<double>(r.data().begin(), r.data().end()) == std::vector<double>{0, 1, 0, 0});
  auto r2 = outer(Tensor::vector({2, 3}), Tensor::vector({1, 1, 1}));
  CHECK(std::vector<double>(r2.data().begin(), r2.data().end()) ==
        std::vector<double>{2, 2, 2, 3, 3, 3});
  CHECK_THROWS_AS(outer(Tensor::constant({1, 2}, {1, 2}), Tensor::vector({1})), ShapeError);
}

TEST_CASE("gradient of sum(outer(a, b)) w.r.t. a is sum(b) in every coordinate") {
  Rng rng(11);
  Tensor a = random_tensor({4}, rng);
  Tensor b = random_tensor({5}, rng);
  a.set_requires_grad(true);
  const double sum_b = std::accumulate(b.data().begin(), b.data().end(), 0.0);
  Tape tape;
  {
    TapeScope s(tape);
    tape.backward(sum(outer(a, b)));
  }
  auto f = [&] { return sum(outer(a, b)).item(); };
  for (std::size_t i = 0; i < 4; ++i) {
    const double fd = central_difference(f, a, i);
    CHECK(fd == doctest::Approx(sum_b).epsilon(1e-8));
    CHECK(a.grad()[i] == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("outer product is bilinear") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a = random_tensor({6}, rng), b = random_tensor({6}, rng), c = random_tensor({4}, rng);
    const double alpha = std::uniform_real_distribution<double>(-3, 3)(rng);
    Tensor lhs = outer(add(scale(a, alpha), b), c);
    Tensor rhs = add(scale(outer(a, c), alpha), outer(b, c));
    for (std::size_t i = 0; i < lhs.numel(); ++i) CHECK(std::abs(lhs[i] - rhs[i]) <= 1e-14);
  }
}

TEST_CASE("softmax and mse examples") {
  auto s = softmax(Tensor::vector({0, 0, 0}));
  for (double v : s.data()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
  auto s2 = softmax(Tensor::vector({std::log(1.0), std::log(2.0), std::log(3.0)}));
  CHECK(s2[0] == doctest::Approx(1.0 / 6).epsilon(1e-14));
  CHECK(s2[1] == doctest::Approx(2.0 / 6).epsilon(1e-14));
  CHECK(s2[2] == doctest::Approx(3.0 / 6).epsilon(1e-14));
  auto x = Tensor::vector({1.5, -2, 7});
  CHECK(mse(x, x).item() == 0.0);
  // Rows of a matrix softmax each sum to one.
  Rng rng(2);
  auto m = softmax(random_tensor({5, 7}, rng, -10, 10));
  for (std::size_t r = 0; r < 5; ++r) {
    double total = 0;
    for (std::size_t c = 0; c < 7; ++c) total += m.at(r, c);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("shape errors") {
  CHECK_THROWS_AS(matvec(Tensor::constant({2, 3}, std::vector<double>(6)), Tensor::vector({1, 2})),
                  ShapeError);
  CHECK_THROWS_AS(add(Tensor::vector({1}), Tensor::vector({1, 2})), ShapeError);
  CHECK_THROWS_AS(Tensor::constant({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(Tensor::zeros(Shape{0}), ShapeError);
  CHECK_THROWS_AS(softmax(Tensor::scalar(1.0)), ShapeError);
}

TEST_CASE("backward on a linear map gives outer(ones, x)") {
  Tensor w = Tensor::parameter({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor x = Tensor::vector({0.5, -2});
  Tape tape;
  {
    TapeScope s(tape);
    tape.backward(sum(matvec(w, x)));
  }
  std::vector<double> expect{0.5, -2, 0.5, -2, 0.5, -2};
  CHECK(std::vector<double>(w.grad().begin(), w.grad().end()) == expect);
}

TEST_CASE("constant loss leaves zero gradients") {
  Tensor w = Tensor::parameter({2}, {1, 2});
  Tape tape;
  {
    TapeScope s(tape);
    Tensor loss = sum(Tensor::vector({3, 4}));
    tape.backward(loss);
  }
  for (double g : w.grad()) CHECK(g == 0.0);
}

TEST_CASE("repeated backward accumulates one more copy of the gradient") {
  Tensor w = Tensor::parameter({2}, {1, 2});
  Tape tape;
  TapeScope s(tape);
  Tensor loss = dot(w, w);
  tape.backward(loss);
  tape.backward(loss);
  CHECK(w.grad()[0] == doctest::Approx(4.0));  // 2 * (2 w)
  CHECK(w.grad()[1] == doctest::Approx(8.0));
  w.zero_grad();
  CHECK(w.grad()[0] == 0.0);
}

TEST_CASE("no tape means no recording") {
  Tensor w = Tensor::parameter({2}, {1, 2});
  Tensor y = scale(w, 2.0);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("every primitive passes the finite-difference check") {
  Rng rng(42);
  GradCheckOptions opt;
  opt.coordinates = 20;
  auto run = [&](const char* name, std::function<Tensor()> f, std::vector<Tensor> inputs) {
    auto res = check_gradients(f, inputs, opt);
    INFO(name << " worst " << res.worst);
    CHECK(res.max_rel_error <= 1e-4);
    CHECK(res.coordinates_checked >= std::min<std::size_t>(20, inputs.front().numel()));
  };
  Tensor w = random_tensor({5, 7}, rng), x = random_tensor({7}, rng), b = random_tensor({5}, rng);
  Tensor xb = random_tensor({4, 7}, rng), m2 = random_tensor({7, 3}, rng);
  Tensor u = random_tensor({5}, rng), v = random_tensor({5}, rng), t = random_tensor({5}, rng);
  Tensor weights = random_tensor({5, 7}, rng);  // fixed readout to make losses non-trivial
  Tensor readout = random_tensor({5}, rng);
  Tensor rows = random_tensor({4, 5}, rng, -3, 3);
  Tensor readout_m = random_tensor({4, 5}, rng);
  Tensor readout_mm = random_tensor({4, 3}, rng);

  run("matvec", [&] { return dot(matvec(w, x), readout); }, {w, x});
  run("matmul", [&] { return sum(mul(matmul(xb, m2), readout_mm)); },
      {xb, m2});
  run("linear vector", [&] { return dot(linear(x, w, b), readout); }, {x, w, b});
  run("linear batch", [&] { return sum(mul(linear(xb, w, b), readout_m)); }, {xb, w, b});
  Tensor x2 = random_tensor({2, 7}, rng), readout_2 = random_tensor({2, 5}, rng);
  run("linear small batch", [&] { return sum(mul(linear(x2, w, b), readout_2)); }, {x2, w, b});
  run("outer", [&] { return sum(mul(outer(u, x), weights)); }, {u, x});
  run("dot", [&] { return dot(u, v); }, {u, v});
  run("add/sub/mul", [&] { return dot(mul(add(u, v), sub(u, t)), readout); }, {u, v, t});
  run("scale/one_minus/square", [&] { return dot(square(one_minus(scale(u, 1.7))), readout); },
      {u});
  run("sigmoid", [&] { return dot(sigmoid(u), readout); }, {u});
  run("tanh", [&] { return dot(tanh(u), readout); }, {u});
  run("add_n", [&] {
        std::vector<Tensor> terms{u, mul(u, v), v};
        return dot(add_n(terms), readout);
      }, {u, v});
  run("sum_rows", [&] { return dot(sum_rows(rows), readout); }, {rows});
  run("softmax", [&] { return sum(mul(softmax(rows), readout_m)); }, {rows});
  run("log_softmax", [&] { return sum(mul(log_softmax(rows), readout_m)); }, {rows});
  run("cross_entropy", [&] { return cross_entropy(u, 3); }, {u});
  run("mse", [&] { return mse(u, v); }, {u, v});
  run("slice/concat", [&] {
        std::vector<Tensor> parts{slice(x, 2, 3), u};
        return sum(square(concat(parts)));
      }, {x, u});
  run("stack_rows/row/column", [&] {
        std::vector<Tensor> vs{u, v, t};
        Tensor m = stack_rows(vs);
        return add(dot(row(m, 1), readout), sum(square(column(m, 2))));
      }, {u, v, t});
  run("reshape/flatten", [&] { return sum(mul(flatten(reshape(rows, {5, 4})), flatten(readout_m))); },
      {rows});
  Tensor wide = random_tensor({4, 6}, rng), narrow = random_tensor({4, 3}, rng);
  Tensor table = random_tensor({5, 3}, rng);
  Tensor readout_w = random_tensor({4, 9}, rng), readout_o = random_tensor({4, 18}, rng);
  const std::vector<std::size_t> ids{4, 0, 4, 2}, targets{1, 0, 5, 3};
  run("slice_cols/concat_cols", [&] {
        std::vector<Tensor> parts{slice_cols(wide, 1, 4), square(narrow), slice_cols(wide, 5, 1)};
        Tensor joined = concat_cols(parts);
        Tensor diff = sub(slice_cols(joined, 0, 4), slice_cols(joined, 4, 4));
        return sum(mul(diff, slice_cols(readout_w, 2, 4)));
      }, {wide, narrow});
  run("gather_rows", [&] { return sum(mul(gather_rows(table, ids), narrow)); }, {table, narrow});
  run("batch_outer", [&] { return sum(mul(batch_outer(wide, narrow), readout_o)); }, {wide, narrow});
  const std::vector<std::size_t> segments{2, 0, 2, 2};
  Tensor readout_s = random_tensor({3, 6}, rng);
  run("segment_sum", [&] { return sum(mul(segment_sum(wide, segments, 3), readout_s)); }, {wide});
  run("cross_entropy_rows", [&] { return cross_entropy_rows(wide, targets); }, {wide});
  run("dropout with fixed stream", [&] {
        Rng mask_rng(9);
        return dot(dropout(u, 0.6, mask_rng), readout);
      }, {u});
}

TEST_CASE("random three-layer composition matches finite differences") {
  Rng rng(123);
  Tensor w1 = random_tensor({8, 6}, rng), b1 = random_tensor({8}, rng);
  Tensor w2 = random_tensor({7, 8}, rng), b2 = random_tensor({7}, rng);
  Tensor w3 = random_tensor({4, 7}, rng), b3 = random_tensor({4}, rng);
  Tensor x = random_tensor({6}, rng);
  auto loss = [&] {
    Tensor h1 = tanh(linear(x, w1, b1));
    Tensor h2 = sigmoid(linear(h1, w2, b2));
    return cross_entropy(linear(h2, w3, b3), 2);
  };
  auto res = check_gradients(loss, {w1, b1, w2, b2, w3, b3, x});
  INFO(res.worst);
  CHECK(res.max_rel_error <= 1e-4);
  CHECK(res.coordinates_checked >= 20);
}

TEST_CASE("batched ops agree with their per-row counterparts") {
  Rng rng(8);
  Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 5}, rng);
  Tensor bo = batch_outer(a, b);
  for (std::size_t r = 0; r < 3; ++r) {
    Tensor o = flatten(outer(row(a, r), row(b, r)));
    for (std::size_t i = 0; i < 20; ++i) CHECK(bo.at(r, i) == o[i]);
  }
  const std::vector<std::size_t> t{3, 0, 2};
  double expect = 0;
  for (std::size_t r = 0; r < 3; ++r) expect += cross_entropy(row(a, r), t[r]).item();
  CHECK(cross_entropy_rows(a, t).item() == doctest::Approx(expect).epsilon(1e-14));
  const std::vector<std::size_t> ids{2, 2, 0};
  Tensor g = gather_rows(a, ids);
  CHECK(g.at(1, 3) == a.at(2, 3));
  CHECK_THROWS_AS(gather_rows(a, std::vector<std::size_t>{3}), ShapeError);
  CHECK_THROWS_AS(batch_outer(a, random_tensor({2, 5}, rng)), ShapeError);
}

TEST_CASE("forward evaluation is deterministic") {
  Rng r1(77), r2(77);
  Tensor a = random_tensor({50, 30}, r1), b = random_tensor({50, 30}, r2);
  Tensor x = Tensor::vector(std::vector<double>(30, 0.25));
  Tensor y1 = softmax(matvec(a, x)), y2 = softmax(matvec(b, x));
  for (std::size_t i = 0; i < y1.numel(); ++i) CHECK(y1[i] == y2[i]);
}

TEST_CASE("non-finite values are detectable") {
  Tensor t = Tensor::vector({1.0, std::nan("")});
  CHECK_FALSE(t.all_finite());
  CHECK_THROWS_AS(check_finite(t, "t"), NumericError);
  CHECK_NOTHROW(check_finite(Tensor::vector({1.0}), "ok"));
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  ParamSet ps;
  ps.add("w", Tensor::parameter({3}, {1.0, -2.0, 0.5}));
  Adam adam(ps);
  for (int i = 0; i < 5; ++i) adam.step();
  auto d = ps.get("w").data();
  CHECK(d[0] == 1.0);
  CHECK(d[1] == -2.0);
  CHECK(d[2] == 0.5);
  CHECK(adam.step_count() == 5);
}

TEST_CASE("adam: constant unit gradient follows the hand recurrence") {
  ParamSet ps;
  ps.add("w", Tensor::parameter({1}, {0.0}));
  Adam adam(ps, AdamConfig{});
  // Hand recurrence with beta1=0.9, beta2=0.999, eps=1e-8, lr=1e-3, g=1.
  double m = 0, v = 0, w = 0;
  for (int t = 1; t <= 3; ++t) {
    ps.get("w").mutable_grad()[0] = 1.0;
    adam.step();
    m = 0.9 * m + 0.1;
    v = 0.999 * v + 0.001;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    w -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(ps.get("w")[0] == doctest::Approx(w).epsilon(1e-12));
    if (t == 1) CHECK(ps.get("w")[0] == doctest::Approx(-1e-3).epsilon(1e-7));
    adam.zero_grad();
  }
}

TEST_CASE("adam: identical parameters receive identical updates") {
  ParamSet ps;
  ps.add("a", Tensor::parameter({2}, {0.3, 0.3}));
  ps.add("b", Tensor::parameter({2}, {0.3, 0.3}));
  Adam adam(ps);
  for (int i = 0; i < 4; ++i) {
    for (auto name : {"a", "b"}) {
      auto g = ps.get(name).mutable_grad();
      g[0] = 0.7 - i;
      g[1] = 0.7 - i;
    }
    adam.step();
  }
  CHECK(ps.get("a")[0] == ps.get("b")[0]);
  CHECK(ps.get("a")[1] == ps.get("a")[0]);
}

TEST_CASE("adam: NaN gradient fails fast") {
  ParamSet ps;
  ps.add("w", Tensor::parameter({2}, {1, 1}));
  Adam adam(ps);
  ps.get("w").mutable_grad()[1] = std::nan("");
  CHECK_THROWS_AS(adam.step(), NumericError);
  CHECK(ps.get("w")[0] == 1.0);
}

TEST_CASE("checkpoint round trip is exact and validates shapes") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "role_ckpt_test";
  fs::remove_all(dir);
  Rng rng(1);
  ParamSet a;
  a.add("F", random_tensor({3, 4}, rng));
  a.add("bias", random_tensor({4}, rng));
  save_checkpoint(a, dir / "model", {{"kind", "test"}});
  ParamSet b;
  b.add("F", Tensor::zeros({3, 4}));
  b.add("bias", Tensor::zeros({4}));
  auto meta = load_checkpoint(b, dir / "model");
  CHECK(meta.at("kind") == "test");
  for (std::size_t i = 0; i < 12; ++i) CHECK(a.get("F")[i] == b.get("F")[i]);
  CHECK(fs::file_size(dir / "model.bin") == 16 * 8);
  ParamSet bad;
  bad.add("F", Tensor::zeros({4, 3}));
  bad.add("bias", Tensor::zeros({4}));
  CHECK_THROWS_AS(load_checkpoint(bad, dir / "model"), ShapeError);
  fs::remove_all(dir);
}
