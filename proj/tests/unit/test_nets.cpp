#include <cmath>
#include <random>

#include "doctest.h"
#include "role/gradcheck.hpp"
#include "role/nets/seq2seq.hpp"
#include "role/ops.hpp"
#include "role/tasks/scan.hpp"
#include "role/training.hpp"

using namespace role;
using namespace role::ad;
using namespace role::nets;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  std::vector<double> v(shape.numel());
  for (auto& x : v) x = u(rng);
  return Tensor::constant(std::move(shape), std::move(v));
}

void fill(Tensor& t, double value) {
  for (auto& x : t.mutable_data()) x = value;
}

std::vector<std::string> words(const std::string& s) { return split_words(s); }

}  // namespace

TEST_CASE("early stopping: patience and min_delta") {
  EarlyStopping strict(2);
  CHECK(strict.update(1.0));
  CHECK(strict.update(0.5));
  CHECK_FALSE(strict.update(0.6));
  CHECK_FALSE(strict.should_stop());
  CHECK(strict.update(0.49));  // any gain resets patience
  CHECK_FALSE(strict.update(0.7));
  CHECK_FALSE(strict.update(0.7));
  CHECK(strict.should_stop());
  CHECK(strict.best() == 0.49);
  CHECK(strict.best_epoch() == 4);

  // Tiny gains are still tracked as the best but no longer reset patience.
  EarlyStopping tol(2, 0.1);
  CHECK(tol.update(1.0));
  CHECK(tol.update(0.95));
  CHECK_FALSE(tol.should_stop());
  CHECK(tol.update(0.91));
  CHECK(tol.should_stop());
  CHECK(tol.best() == 0.91);
  EarlyStopping reset(2, 0.1);
  reset.update(1.0);
  reset.update(0.95);
  reset.update(0.85);  // more than 0.1 below the anchor 1.0
  CHECK_FALSE(reset.should_stop());
}

TEST_CASE("gru: zero weights give a half-open update gate") {
  ParamSet ps;
  Rng rng(1);
  auto cell = GruCell::create(ps, "g", 3, 4, rng);
  for (auto& [name, t] : ps.entries()) fill(t, 0.0);
  Tensor h = Tensor::constant({1, 4}, {0.2, -0.4, 0.6, 1.0});
  Tensor x = Tensor::constant({1, 3}, {1, 2, 3});
  Tensor out = cell.step(h, x);
  // z = sigma(0) = 0.5 and n = tanh(0) = 0, so h' = 0.5 h.
  for (std::size_t i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(0.5 * h[i]).epsilon(1e-15));
}

TEST_CASE("gru: saturated update gate carries the state through") {
  ParamSet ps;
  Rng rng(2);
  auto cell = GruCell::create(ps, "g", 3, 4, rng);
  auto b = cell.b_ih.mutable_data();
  for (std::size_t i = 4; i < 8; ++i) b[i] = 60.0;  // update-gate slice
  Tensor h = random_tensor({2, 4}, rng);
  Tensor out = cell.step(h, random_tensor({2, 3}, rng));
  for (std::size_t i = 0; i < 8; ++i) CHECK(out[i] == doctest::Approx(h[i]).epsilon(1e-12));
}

TEST_CASE("gru: outputs stay in range for random inputs") {
  ParamSet ps;
  Rng rng(3);
  auto cell = GruCell::create(ps, "g", 5, 6, rng);
  Tensor h = zero_state(3, 6);
  for (int t = 0; t < 20; ++t) {
    h = cell.step(h, random_tensor({3, 5}, rng, 5.0));
    for (double v : h.data()) CHECK(std::abs(v) <= 1.0);
  }
}

TEST_CASE("recurrent cells pass finite-difference checks") {
  Rng rng(4);
  ParamSet ps;
  auto gru = GruCell::create(ps, "gru", 3, 4, rng);
  auto lstm = LstmCell::create(ps, "lstm", 3, 4, rng);
  Tensor x = random_tensor({2, 3}, rng), h = random_tensor({2, 4}, rng), c = random_tensor({2, 4}, rng);
  Tensor readout = random_tensor({2, 4}, rng);
  auto r1 = check_gradients([&] { return sum(mul(gru.step(h, x), readout)); },
                            {gru.w_ih, gru.w_hh, gru.b_ih, gru.b_hh, x, h});
  INFO(r1.worst);
  CHECK(r1.max_rel_error <= 1e-4);
  auto r2 = check_gradients(
      [&] {
        auto s = lstm.step({h, c}, x);
        return add(sum(mul(s.h, readout)), sum(square(s.c)));
      },
      {lstm.w_ih, lstm.w_hh, lstm.b_ih, lstm.b_hh, x, h, c});
  INFO(r2.worst);
  CHECK(r2.max_rel_error <= 1e-4);

  auto stack = LstmStack::create(ps, "stack", 3, 3, 2, true, rng);
  std::vector<Tensor> xs{random_tensor({2, 3}, rng), random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)};
  Tensor ro = random_tensor({2, 6}, rng);
  std::vector<Tensor> inputs = xs;
  for (const auto& [name, t] : ps.entries()) {
    if (name.rfind("stack.", 0) == 0) inputs.push_back(t);
  }
  auto r3 = check_gradients(
      [&] {
        auto ys = stack.forward(xs);
        std::vector<Tensor> terms;
        for (auto& y : ys) terms.push_back(sum(mul(y, ro)));
        return add_n(terms);
      },
      inputs);
  INFO(r3.worst);
  CHECK(r3.max_rel_error <= 1e-4);
  CHECK(r3.coordinates_checked >= 20);
}

TEST_CASE("bidirectional lstm with tied directions is mirror symmetric on a palindrome") {
  Rng rng(5);
  ParamSet ps;
  auto stack = LstmStack::create(ps, "s", 2, 3, 1, true, rng);
  for (const char* part : {".w_ih", ".w_hh", ".b_ih", ".b_hh"}) {
    auto src = ps.get(std::string("s.l0.fwd") + part).data();
    auto dst = ps.get(std::string("s.l0.bwd") + part).mutable_data();
    std::copy(src.begin(), src.end(), dst.begin());
  }
  Tensor a = random_tensor({1, 2}, rng), b = random_tensor({1, 2}, rng), c = random_tensor({1, 2}, rng);
  auto ys = stack.forward({a, b, c, b, a});
  for (std::size_t t = 0; t < 5; ++t) {
    for (std::size_t j = 0; j < 3; ++j) CHECK(ys[t][j] == doctest::Approx(ys[4 - t][3 + j]).epsilon(1e-14));
  }
}

TEST_CASE("decoders: structure and gradients") {
  Rng rng(6);
  ParamSet ps;
  auto dec = GruDecoder::create(ps, "dec", decoder_vocab({"a", "b", "c"}), 3, 4, rng);
  auto tree = TreeDecoder::create(ps, "tree", Vocab({"a", "b", "c"}), 2, 4, rng);
  Tensor h0 = random_tensor({2, 4}, rng);
  const std::vector<std::vector<std::size_t>> targets{{2, 3}, {4, 4}};
  std::vector<Tensor> inputs{h0};
  for (const auto& [name, t] : ps.entries()) inputs.push_back(t);
  auto r = check_gradients([&] { return dec.loss(h0, targets); }, inputs);
  INFO(r.worst);
  CHECK(r.max_rel_error <= 1e-4);

  const auto shape = tasks::parse_balanced(words("x x x x"));
  const std::vector<std::vector<std::size_t>> leaf_targets{{0, 1, 2, 0}, {2, 2, 1, 0}};
  auto rt = check_gradients([&] { return tree.loss(h0, shape, leaf_targets); }, inputs);
  INFO(rt.worst);
  CHECK(rt.max_rel_error <= 1e-4);

  std::vector<double> root(4, 0.1);
  CHECK(tree.decode(root, shape).size() == 4);
  CHECK(tree.decode(root, tasks::parse_balanced(words("x"))).size() == 1);
  std::vector<double> zero(4, 0.0);
  auto res = dec.greedy(zero, 10);
  CHECK(res.tokens.size() <= 10);
  CHECK_THROWS_AS(dec.greedy(std::vector<double>(3), 5), ShapeError);
}

TEST_CASE("seq2seq: toy model gradients") {
  Seq2SeqConfig cfg{4, 5, 0.0, 20};
  auto model = Seq2Seq::create(Vocab(tasks::scan_input_words()), tasks::scan_output_actions(), cfg, 3);
  const tasks::Example ex{words("jump twice"), words("JUMP JUMP")};
  std::vector<Tensor> inputs;
  for (const auto& [name, t] : model.params().entries()) inputs.push_back(t);
  auto r = check_gradients([&] { return model.loss(ex, nullptr); }, inputs);
  INFO(r.worst);
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("seq2seq: memorizes a single pair and encodes deterministically") {
  Seq2SeqConfig cfg{16, 24, 0.0, 64};
  auto model = Seq2Seq::create(Vocab(tasks::scan_input_words()), tasks::scan_output_actions(), cfg, 0);
  const tasks::Example ex{words("jump opposite left"), tasks::scan_interpret(words("jump opposite left"))};
  Seq2SeqTrainConfig tc;
  tc.steps = 300;
  tc.log_every = 50;
  auto report = train_seq2seq(model, {ex}, tc);
  CHECK(report.log.back().loss < report.log.front().loss);
  CHECK(sequence_accuracy(model, {ex}) == 1.0);
  CHECK(model.encode(ex.input) == model.encode(ex.input));
  CHECK(model.encode_all({ex.input, words("walk")})[0] == model.encode(ex.input));
  CHECK_THROWS_AS(model.encode(words("fly")), ParseError);
  CHECK_THROWS_AS(train_seq2seq(model, {}, tc), ConfigError);
}

TEST_CASE("seq2seq: checkpoint round trip preserves behavior") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "role_nets_test";
  fs::remove_all(dir);
  Seq2SeqConfig cfg{6, 7, 0.1, 64};
  auto model = Seq2Seq::create(Vocab(tasks::scan_input_words()), tasks::scan_output_actions(), cfg, 9);
  model.save(dir / "m");
  auto loaded = Seq2Seq::load(dir / "m");
  CHECK(loaded.encode(words("walk left")) == model.encode(words("walk left")));
  CHECK(loaded.translate(words("walk left")).tokens == model.translate(words("walk left")).tokens);
  CHECK(loaded.config().dropout == 0.1);
  fs::remove_all(dir);
}
