// Acceptance gate: one PASS/FAIL line per criterion.
//
// Criteria 5-10 train full models. Their artifacts live under --artifacts
// (default: ./acceptance_artifacts) and are reused by later runs whose config
// matches, so the first run takes hours and later runs take seconds.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "role/analysis/factor.hpp"
#include "role/analysis/metrics.hpp"
#include "role/analysis/scan_roles.hpp"
#include "role/gradcheck.hpp"
#include "role/nets/decoder.hpp"
#include "role/nets/rnn.hpp"
#include "role/ops.hpp"
#include "role/pipeline.hpp"
#include "role/tasks/scan.hpp"
#include "role/tasks/tree.hpp"

using namespace role;
using namespace role::ad;
using json = nlohmann::json;
namespace fs = std::filesystem;
namespace pl = role::pipeline;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  // Records a named check; the criterion fails if any check fails.
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[failed] ";
    }
    detail << what << "; ";
  }
};

std::string num(double x, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << x;
  return s.str();
}

std::string pct(double x) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100.0 * x << '%';
  return s.str();
}

Tensor random_tensor(Shape shape, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(shape.numel());
  for (auto& x : v) x = u(rng);
  return Tensor::constant(std::move(shape), std::move(v));
}

std::vector<Tensor> all_params(const ParamSet& ps) {
  std::vector<Tensor> out;
  for (const auto& [name, t] : ps.entries()) out.push_back(t);
  return out;
}

std::vector<std::string> words(const std::string& s) { return split_words(s); }

// ---------------------------------------------------------------------------
// 1. Gradient correctness

void gradient_checks(Outcome& o) {
  Rng rng(2024);
  ad::GradCheckOptions opt;
  opt.coordinates = 20;
  double worst = 0.0;
  std::size_t checked = 0, failures = 0;
  std::string failed;
  auto run = [&](const std::string& name, std::function<Tensor()> f, std::vector<Tensor> inputs) {
    std::size_t available = 0;
    for (const auto& t : inputs) available += t.numel();
    const auto r = ad::check_gradients(f, inputs, opt);
    worst = std::max(worst, r.max_rel_error);
    ++checked;
    if (r.max_rel_error > 1e-4 || r.coordinates_checked < std::min<std::size_t>(20, available)) {
      ++failures;
      failed += name + " (" + r.worst + ") ";
    }
  };
  Tensor w = random_tensor({5, 7}, rng), x = random_tensor({7}, rng), b = random_tensor({5}, rng);
  Tensor xb = random_tensor({4, 7}, rng), m2 = random_tensor({7, 3}, rng), ro43 = random_tensor({4, 3}, rng);
  Tensor u = random_tensor({5}, rng), v = random_tensor({5}, rng), ro5 = random_tensor({5}, rng);
  Tensor rows = random_tensor({4, 5}, rng), ro45 = random_tensor({4, 5}, rng), ro57 = random_tensor({5, 7}, rng);
  Tensor wide = random_tensor({4, 6}, rng), table = random_tensor({5, 3}, rng);
  Tensor ro418 = random_tensor({4, 18}, rng), ro36 = random_tensor({3, 6}, rng);
  const std::vector<std::size_t> ids{4, 0, 4, 2}, targets{1, 0, 5, 3}, segments{2, 0, 2, 2};

  run("matvec", [&] { return ad::dot(ad::matvec(w, x), ro5); }, {w, x});
  run("matmul", [&] { return ad::sum(ad::mul(ad::matmul(xb, m2), ro43)); }, {xb, m2});
  run("linear", [&] { return ad::sum(ad::mul(ad::linear(xb, w, b), ro45)); }, {xb, w, b});
  run("outer", [&] { return ad::sum(ad::mul(ad::outer(u, x), ro57)); }, {u, x});
  run("dot", [&] { return ad::dot(u, v); }, {u, v});
  run("add/sub/mul", [&] { return ad::dot(ad::mul(ad::add(u, v), ad::sub(u, ro5)), ro5); }, {u, v});
  run("scale/one_minus/square", [&] { return ad::dot(ad::square(ad::one_minus(ad::scale(u, 1.3))), ro5); }, {u});
  run("sigmoid", [&] { return ad::dot(ad::sigmoid(u), ro5); }, {u});
  run("tanh", [&] { return ad::dot(ad::tanh(u), ro5); }, {u});
  run("add_n", [&] {
        std::vector<Tensor> terms{u, ad::mul(u, v), v};
        return ad::dot(ad::add_n(terms), ro5);
      }, {u, v});
  run("sum_rows", [&] { return ad::dot(ad::sum_rows(rows), ro5); }, {rows});
  run("softmax", [&] { return ad::sum(ad::mul(ad::softmax(rows), ro45)); }, {rows});
  run("log_softmax", [&] { return ad::sum(ad::mul(ad::log_softmax(rows), ro45)); }, {rows});
  run("cross_entropy", [&] { return ad::cross_entropy(u, 2); }, {u});
  run("cross_entropy_rows", [&] { return ad::cross_entropy_rows(wide, targets); }, {wide});
  run("mse", [&] { return ad::mse(u, v); }, {u, v});
  run("slice/concat", [&] {
        std::vector<Tensor> parts{ad::slice(x, 1, 4), u};
        return ad::sum(ad::square(ad::concat(parts)));
      }, {x, u});
  run("stack_rows/row/column", [&] {
        std::vector<Tensor> vs{u, v, ro5};
        Tensor m = ad::stack_rows(vs);
        return ad::add(ad::dot(ad::row(m, 1), ro5), ad::sum(ad::square(ad::column(m, 2))));
      }, {u, v});
  run("reshape/flatten", [&] {
        return ad::sum(ad::mul(ad::flatten(ad::reshape(rows, {5, 4})), ad::flatten(ro45)));
      }, {rows});
  run("slice_cols/concat_cols", [&] {
        std::vector<Tensor> parts{ad::slice_cols(wide, 2, 3), ad::square(ro43)};
        return ad::sum(ad::square(ad::concat_cols(parts)));
      }, {wide});
  run("gather_rows", [&] { return ad::sum(ad::mul(ad::gather_rows(table, ids), ro43)); }, {table});
  run("batch_outer", [&] { return ad::sum(ad::mul(ad::batch_outer(wide, ro43), ro418)); }, {wide});
  run("segment_sum", [&] { return ad::sum(ad::mul(ad::segment_sum(wide, segments, 3), ro36)); }, {wide});
  run("dropout", [&] {
        Rng mask(3);
        return ad::dot(ad::dropout(u, 0.7, mask), ro5);
      }, {u});

  // Full models.
  {
    ParamSet ps;
    auto gru = nets::GruCell::create(ps, "gru", 3, 4, rng);
    Tensor xi = random_tensor({2, 3}, rng), h = random_tensor({2, 4}, rng), ro = random_tensor({2, 4}, rng);
    run("gru cell", [&] { return ad::sum(ad::mul(gru.step(h, xi), ro)); }, {gru.w_ih, gru.w_hh, gru.b_ih, gru.b_hh, xi, h});
    auto lstm = nets::LstmCell::create(ps, "lstm", 3, 4, rng);
    Tensor c = random_tensor({2, 4}, rng);
    run("lstm cell", [&] {
          auto s = lstm.step({h, c}, xi);
          return ad::add(ad::sum(ad::mul(s.h, ro)), ad::sum(ad::square(s.c)));
        }, {lstm.w_ih, lstm.w_hh, lstm.b_ih, lstm.b_hh, xi, h, c});
  }
  {
    ParamSet ps;
    auto stack = nets::LstmStack::create(ps, "stack", 3, 3, 2, true, rng);
    std::vector<Tensor> xs{random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)};
    Tensor ro = random_tensor({2, 6}, rng);
    run("bidirectional lstm stack", [&] {
          std::vector<Tensor> terms;
          for (auto& y : stack.forward(xs)) terms.push_back(ad::sum(ad::mul(y, ro)));
          return ad::add_n(terms);
        }, all_params(ps));
  }
  {
    ParamSet ps;
    auto dec = nets::GruDecoder::create(ps, "dec", nets::decoder_vocab({"a", "b", "c"}), 3, 4, rng);
    auto tree = nets::TreeDecoder::create(ps, "tree", Vocab({"a", "b", "c"}), 2, 4, rng);
    Tensor h0 = random_tensor({2, 4}, rng);
    auto inputs = all_params(ps);
    inputs.push_back(h0);
    run("gru decoder", [&] { return dec.loss(h0, {{2, 3}, {4, 4}}); }, inputs);
    const auto shape = tasks::parse_balanced(words("x x x"));
    run("tree decoder", [&] { return tree.loss(h0, shape, {{0, 1, 2}, {2, 2, 1}}); }, inputs);
  }
  {
    auto model = nets::Seq2Seq::create(Vocab(tasks::scan_input_words()), tasks::scan_output_actions(),
                                       nets::Seq2SeqConfig{4, 5, 0.0, 20}, 3);
    const tasks::Example ex{words("jump left twice"), words("TL JUMP TL JUMP")};
    run("seq2seq", [&] { return model.loss(ex, nullptr); }, all_params(model.params()));
  }
  {
    ParamSet ps;
    auto m = tpe::TpeModel::create(ps, "t", 4, 3, 3, 2, 5, rng);
    std::vector<tpe::Bindings> batch{{{0, 3, 1}, {2, 0, 1}}, {{2}, {2}}};
    Tensor target = random_tensor({2, 5}, rng);
    run("tpe", [&] { return ad::mse(m.encode_batch(batch), target); }, all_params(ps));
  }
  {
    std::vector<std::vector<std::string>> corpus{words("3 1"), words("7 2")};
    tpe::AutoencoderConfig cfg;
    cfg.filler_dim = 3;
    cfg.role_dim = 2;
    cfg.hidden_dim = 4;
    cfg.decoder_input_dim = 2;
    for (auto kind : {tpe::DecoderKind::Gru, tpe::DecoderKind::Tree}) {
      cfg.decoder = kind;
      auto model = tpe::TpeAutoencoder::create(cfg, corpus);
      run(kind == tpe::DecoderKind::Gru ? "tpe autoencoder (gru)" : "tpe autoencoder (tree)",
          [&] { return model.loss(corpus); }, all_params(model.params()));
    }
  }
  {
    learner::RoleModelConfig cfg;
    cfg.n_roles = 4;
    cfg.role_dim = 3;
    cfg.filler_dim = 3;
    cfg.lstm_hidden = 3;
    auto m = learner::RoleModel::create(Vocab({"a", "b", "c"}), 4, cfg, 5);
    const std::vector<std::vector<std::size_t>> batch{{0, 2, 1}, {1, 1, 0}};
    Tensor target = random_tensor({2, 4}, rng);
    run("role learner", [&] {
          auto fwd = m.forward(batch, learner::Mode::Continuous);
          return ad::add(ad::mse(fwd.encodings, target), ad::scale(learner::regularizer_loss(fwd.attention), 0.3));
        }, all_params(m.params()));
  }
  o.expect(failures == 0, std::to_string(checked - failures) + "/" + std::to_string(checked) +
                              " checks within 1e-4, worst rel. err " + num(worst, 3) +
                              (failed.empty() ? "" : ": " + failed));
}

// ---------------------------------------------------------------------------
// 2. TPR algebra

void tpr_algebra(Outcome& o) {
  Rng rng(7);
  std::normal_distribution<double> g;
  auto vec = [&](std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = g(rng);
    return v;
  };
  double bilinear = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto a1 = vec(4), a2 = vec(4), bb = vec(3);
    const double s = g(rng);
    std::vector<double> mix(4);
    for (std::size_t i = 0; i < 4; ++i) mix[i] = s * a1[i] + a2[i];
    const auto lhs = analysis::outer_flat(mix, bb);
    const auto p1 = analysis::outer_flat(a1, bb), p2 = analysis::outer_flat(a2, bb);
    for (std::size_t i = 0; i < lhs.size(); ++i) bilinear = std::max(bilinear, std::abs(lhs[i] - (s * p1[i] + p2[i])));
  }
  o.expect(bilinear <= 1e-12, "outer product bilinear (max dev " + num(bilinear, 3) + ")");

  ParamSet ps;
  auto m = tpe::TpeModel::create(ps, "t", 10, 6, 4, 3, 5, rng);
  double order = 0.0;
  const auto a = m.encode({{3, 3, 7}, {0, 1, 2}}), b = m.encode({{3, 7, 3}, {0, 2, 1}});
  for (std::size_t i = 0; i < a.size(); ++i) order = std::max(order, std::abs(a[i] - b[i]));
  o.expect(order <= 1e-12, "binding order invariance (max dev " + num(order, 3) + ")");

  double bow = 0.0;
  std::vector<std::size_t> seq{4, 1, 1, 8, 0};
  const auto ref = m.encode({seq, std::vector<std::size_t>(5, 0)});
  std::sort(seq.begin(), seq.end());
  do {
    const auto e = m.encode({seq, std::vector<std::size_t>(5, 0)});
    for (std::size_t i = 0; i < e.size(); ++i) bow = std::max(bow, std::abs(e[i] - ref[i]));
  } while (std::next_permutation(seq.begin(), seq.end()));
  o.expect(bow <= 1e-12, "bag-of-words permutation invariance (max dev " + num(bow, 3) + ")");

  std::uniform_int_distribution<std::size_t> dim(1, 5);
  double factored = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    analysis::Matrix wf{dim(rng), dim(rng), {}}, wr{dim(rng), dim(rng), {}};
    wf.values = vec(wf.rows * wf.cols);
    wr.values = vec(wr.rows * wr.cols);
    factored = std::max(factored, analysis::factored_weight_check(wf, wr, vec(wf.cols), vec(wr.cols)).residual);
  }
  o.expect(factored <= 1e-12, "factored-weight identity over 1000 trials (max residual " + num(factored, 3) + ")");
}

// ---------------------------------------------------------------------------
// 3. Regularizer

void regularizer_exactness(Outcome& o) {
  auto v = learner::regularizer({{0.5, 0.5}});
  o.expect(std::abs(v.r1 - 0.5) < 1e-15 && std::abs(v.r2 + 0.5) < 1e-15 && std::abs(v.r3 - 0.125) < 1e-15,
           "a=[.5,.5] gives R1=" + num(v.r1) + " R2=" + num(v.r2) + " R3=" + num(v.r3));
  v = learner::regularizer({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  o.expect(v.r1 == 0.0 && v.r2 == -3.0 && v.r3 == 0.0, "three distinct one-hots give (0, -3, 0)");
  v = learner::regularizer({{0, 1}, {0, 1}});
  o.expect(v.r3 == 4.0, "one role used twice gives R3=" + num(v.r3));

  Rng rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  std::size_t trials = 0, wrong = 0;
  for (int t = 0; t < 2000; ++t) {
    const std::size_t n = 2 + t % 5, len = 1 + t % 6;
    std::vector<std::vector<double>> a(len, std::vector<double>(n));
    bool one_hot = true;
    for (auto& row : a) {
      if (coin(rng)) {
        std::fill(row.begin(), row.end(), 0.0);
        row[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)] = 1.0;
      } else {
        one_hot = false;
        double z = 0.0;
        for (auto& x : row) z += (x = unit(rng));
        for (auto& x : row) x /= z;
      }
    }
    std::vector<double> mass(n, 0.0);
    for (const auto& row : a) {
      for (std::size_t k = 0; k < n; ++k) mass[k] += row[k];
    }
    const bool binary = std::all_of(mass.begin(), mass.end(), [](double s) { return s == 0.0 || s == 1.0; });
    const auto r = learner::regularizer(a);
    ++trials;
    if ((r.r1 == 0.0) != one_hot || (r.r3 == 0.0) != binary || r.r1 < 0.0 || r.r3 < 0.0) ++wrong;
  }
  o.expect(wrong == 0, "zero conditions hold on " + std::to_string(trials - wrong) + "/" + std::to_string(trials) +
                           " random attention sets");
}

// ---------------------------------------------------------------------------
// 4. SCAN grammar

// Independent evaluator: recursive descent straight from the grammar rules.
std::vector<std::string> eval_scan(const std::vector<std::string>& w, std::size_t lo, std::size_t hi) {
  for (std::size_t i = lo; i < hi; ++i) {
    if (w[i] == "and" || w[i] == "after") {
      auto left = eval_scan(w, lo, i), right = eval_scan(w, i + 1, hi);
      auto& first = w[i] == "and" ? left : right;
      auto& second = w[i] == "and" ? right : left;
      first.insert(first.end(), second.begin(), second.end());
      return first;
    }
  }
  if (w[hi - 1] == "twice" || w[hi - 1] == "thrice") {
    const auto once = eval_scan(w, lo, hi - 1);
    std::vector<std::string> out;
    for (int k = 0; k < (w[hi - 1] == "twice" ? 2 : 3); ++k) out.insert(out.end(), once.begin(), once.end());
    return out;
  }
  const std::string verb = w[lo];
  std::vector<std::string> act;
  if (verb != "turn") {
    std::string up = verb;
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char ch) { return std::toupper(ch); });
    act.push_back(up);
  }
  if (hi - lo == 1) return act;
  const std::string turn = w[hi - 1] == "left" ? "TL" : "TR";
  std::vector<std::string> out;
  auto emit = [&](int turns) {
    for (int k = 0; k < turns; ++k) out.push_back(turn);
    out.insert(out.end(), act.begin(), act.end());
  };
  if (hi - lo == 2) {
    emit(1);
  } else if (w[lo + 1] == "opposite") {
    emit(2);
  } else {
    for (int k = 0; k < 4; ++k) emit(1);
  }
  return out;
}

void scan_grammar(Outcome& o) {
  const auto all = tasks::scan_generate_all();
  std::size_t tokens = 0, mismatches = 0;
  std::set<std::string> distinct;
  for (const auto& e : all) {
    tokens += e.input.size();
    distinct.insert(join_words(e.input));
    if (eval_scan(e.input, 0, e.input.size()) != e.output) ++mismatches;
  }
  o.expect(all.size() == 20910 && distinct.size() == 20910, std::to_string(all.size()) + " distinct commands");
  o.expect(tokens == 151688, std::to_string(tokens) + " tokens");
  o.expect(mismatches == 0, "independent evaluator disagrees on " + std::to_string(mismatches) + " commands");
  const std::vector<std::pair<std::string, std::string>> examples{
      {"jump opposite left", "TL TL JUMP"},
      {"jump around left", "TL JUMP TL JUMP TL JUMP TL JUMP"},
      {"run left twice after jump opposite right thrice", "TR TR JUMP TR TR JUMP TR TR JUMP TL RUN TL RUN"}};
  std::size_t ok = 0;
  for (const auto& [in, out] : examples) ok += join_words(tasks::scan_interpret(words(in))) == out;
  o.expect(ok == examples.size(), std::to_string(ok) + "/3 worked examples");
  o.expect(distinct.count("jump around left after walk thrice") == 1, "worked-example command generated");
}

// ---------------------------------------------------------------------------
// 11. V-measure oracle

double entropy(const std::map<std::size_t, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [k, c] : counts) {
    if (c > 0) h -= c / n * std::log(c / n);
  }
  return h;
}

// Conditional entropy H(A|B) from a joint count table keyed (a, b).
double conditional_entropy(const std::map<std::pair<std::size_t, std::size_t>, double>& joint,
                           const std::map<std::size_t, double>& b_counts, double n, bool a_first) {
  double h = 0.0;
  for (const auto& [ab, c] : joint) {
    const double nb = b_counts.at(a_first ? ab.second : ab.first);
    h -= c / n * std::log(c / nb);
  }
  return h;
}

void v_measure_oracle(Outcome& o) {
  std::size_t cases = 0;
  double worst = 0.0;
  for (std::size_t n = 1; n <= 6; ++n) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < n; ++i) total *= 3;
    std::vector<std::size_t> pred(n), truth(n);
    for (std::size_t p = 0; p < total; ++p) {
      for (std::size_t i = 0, x = p; i < n; ++i, x /= 3) pred[i] = x % 3;
      for (std::size_t t = 0; t < total; ++t) {
        for (std::size_t i = 0, x = t; i < n; ++i, x /= 3) truth[i] = x % 3;
        std::map<std::size_t, double> cc, kc;
        std::map<std::pair<std::size_t, std::size_t>, double> joint;  // (class, cluster)
        for (std::size_t i = 0; i < n; ++i) {
          cc[truth[i]] += 1;
          kc[pred[i]] += 1;
          joint[{truth[i], pred[i]}] += 1;
        }
        const double dn = static_cast<double>(n);
        const double hc = entropy(cc, dn), hk = entropy(kc, dn);
        const double h = hc == 0.0 ? 1.0 : 1.0 - conditional_entropy(joint, kc, dn, true) / hc;
        const double c = hk == 0.0 ? 1.0 : 1.0 - conditional_entropy(joint, cc, dn, false) / hk;
        const double v = h + c == 0.0 ? 0.0 : 2.0 * h * c / (h + c);
        const auto got = analysis::v_measure(pred, truth);
        worst = std::max({worst, std::abs(got.homogeneity - h), std::abs(got.completeness - c), std::abs(got.v - v)});
        ++cases;
      }
    }
  }
  o.expect(worst <= 1e-12, std::to_string(cases) + " clusterings, max deviation " + num(worst, 3));
}

// ---------------------------------------------------------------------------
// 12. Ingestion

void ingestion(Outcome& o, const fs::path& dir) {
  Rng rng(31);
  ParamSet ps;
  const std::size_t n_symbols = 4, max_len = 3;
  auto planted = tpe::TpeModel::create(ps, "planted", n_symbols, max_len, 3, 3, 6, rng);
  std::uniform_int_distribution<std::size_t> len(1, max_len), sym(0, n_symbols - 1);
  EmbeddingTable table("planted-ltr");
  Vocab fillers;
  for (std::size_t s = 0; s < n_symbols; ++s) fillers.add("s" + std::to_string(s));
  for (int i = 0; i < 400; ++i) {
    tpe::Bindings b;
    std::vector<std::string> toks;
    for (std::size_t t = 0, L = len(rng); t < L; ++t) {
      b.fillers.push_back(sym(rng));
      b.roles.push_back(t);
      toks.push_back(fillers.token(b.fillers.back()));
    }
    table.add(toks, planted.encode(b));
  }
  fs::create_directories(dir);
  const auto path = dir / "planted.jsonl";
  export_embeddings(table, path);
  const auto back = import_embeddings(path);
  bool same = back.size() == table.size() && back.dim() == table.dim() && back.source() == table.source();
  for (std::size_t i = 0; same && i < table.size(); ++i) {
    same = back[i].tokens == table[i].tokens && back[i].vec == table[i].vec;
  }
  o.expect(same, "JSONL round trip is exact (" + std::to_string(back.size()) + " records)");

  learner::RoleModelConfig mc;
  mc.n_roles = 3;
  mc.role_dim = 3;
  mc.filler_dim = 3;
  mc.lstm_hidden = 4;
  learner::RoleTrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.max_epochs = 1000;
  tc.patience = 100;
  tc.restarts = 3;
  tc.lambda = 0.01;
  tc.seed = 0;
  std::vector<learner::RoleTrainReport> reports;
  const auto model = learner::train_role_best_of(back, fillers, mc, tc, &reports);
  std::size_t epochs = 0;
  for (const auto& r : reports) epochs = std::max(epochs, r.epochs);
  const double mse = learner::role_mse(model, back, learner::Mode::Continuous);
  o.expect(mse < 1e-5, "ROLE MSE on the imported table " + num(mse, 3) + " (best of 3 seeds, " + std::to_string(epochs) +
                           " epochs at most)");
}

// ---------------------------------------------------------------------------
// Pipeline criteria

struct Env {
  fs::path root;
  std::size_t workers = 1;
  bool verbose = true;

  pl::Options options() const {
    pl::Options o;
    o.prerequisites = true;
    if (verbose) o.log = [](const std::string& line) { std::cerr << "  | " << line << '\n'; };
    return o;
  }
  pl::RunConfig config(pl::Task task) const {
    auto c = pl::default_config(task);
    c.workers = workers;
    return c;
  }
};

double step_seconds(const pl::Workspace& ws, std::initializer_list<const char*> steps) {
  double total = 0.0;
  for (const char* s : steps) {
    if (fs::exists(ws.manifest(s))) {
      std::ifstream in(ws.manifest(s));
      total += json::parse(in).value("seconds", 0.0);
    }
  }
  return total;
}

void digits_pipeline(Outcome& o, const Env& env, pl::Task task) {
  const auto c = env.config(task);
  const pl::Workspace ws(env.root / pl::task_name(task));
  const auto target = pl::train_target(c, ws, env.options()).metrics;
  const auto role_m = pl::train_role(c, ws, env.options()).metrics;
  const double target_acc = target.at("test_accuracy");
  double best_sub = 0.0, best_v = 0.0;
  for (const auto& s : role_m.at("seeds")) {
    best_sub = std::max(best_sub, s.at("continuous").get<double>());
    best_v = std::max(best_v, s.at("v_measure").get<double>());
  }
  const double selected_sub = role_m.at("continuous"), selected_v = role_m.at("v_measure");
  const double seconds = step_seconds(ws, {"gen-data", "train-target", "extract", "train-role"});
  const std::string seeds = " (selected by dev MSE: " + pct(selected_sub) + ", V " + num(selected_v, 3) +
                            "; snapped " + pct(role_m.at("snapped").get<double>()) + ")";
  if (task == pl::Task::DigitsLtr) {
    o.expect(target_acc >= 0.999, "target test accuracy " + pct(target_acc));
    o.expect(best_sub >= 1.0, "ROLE best-of-3 substitution " + pct(best_sub) + seeds);
    o.expect(best_v >= 0.95, "best-of-3 V-measure " + num(best_v, 3));
    o.expect(seconds <= 1800, "runtime " + num(seconds / 60.0, 3) + " min");
  } else {
    o.expect(target_acc >= 0.95, "target test accuracy " + pct(target_acc));
    o.expect(best_sub >= target_acc - 0.02, "ROLE best-of-3 substitution " + pct(best_sub) + seeds);
    o.expect(best_v >= 0.6, "best-of-3 V-measure " + num(best_v, 3));
    o.expect(seconds <= 3600, "runtime " + num(seconds / 60.0, 3) + " min");
  }
}

void scan_target(Outcome& o, const Env& env) {
  {
    auto c = env.config(pl::Task::Scan);
    c.seq2seq_train.steps = 10000;
    c.scan_train_subset = 500;
    const pl::Workspace ws(env.root / "scan-smoke");
    const auto m = pl::train_target(c, ws, env.options()).metrics;
    const double seconds = step_seconds(ws, {"train-target"});
    o.expect(m.at("train_accuracy").get<double>() >= 0.99 && seconds < 600,
             "smoke (10k steps, 500 commands): train accuracy " + pct(m.at("train_accuracy")) + " in " +
                 num(seconds, 3) + " s");
  }
  const auto c = env.config(pl::Task::Scan);
  const pl::Workspace ws(env.root / "scan");
  const auto m = pl::train_target(c, ws, env.options()).metrics;
  o.expect(m.at("test_accuracy").get<double>() >= 0.95,
           "full run: test accuracy " + pct(m.at("test_accuracy")) + " after " + std::to_string(m.at("steps").get<int>()) +
               " steps (" + num(step_seconds(ws, {"train-target"}) / 3600.0, 3) + " h)");
}

void scan_role(Outcome& o, const Env& env) {
  const auto c = env.config(pl::Task::Scan);
  const pl::Workspace ws(env.root / "scan");
  const auto role_m = pl::train_role(c, ws, env.options()).metrics;
  const double continuous = role_m.at("continuous");
  o.expect(continuous >= 0.85, "continuous " + pct(continuous) + " (seed mean " + pct(role_m.at("continuous_mean")) +
                                   " +/- " + pct(role_m.at("continuous_std")) + ")");
  const double discrete = pl::evaluate(c, ws, "discrete", env.options()).metrics.at("accuracy");
  o.expect(discrete >= 0.80, "discrete " + pct(discrete));
  o.detail << "snapped " << pct(role_m.at("snapped")) << " (seed mean " << pct(role_m.at("snapped_mean")) << " +/- "
           << pct(role_m.at("snapped_std")) << "); ";
  std::map<std::string, double> scores;
  for (const char* s : {"ltr", "rtl", "bi", "tree", "wickel", "bow"}) {
    scores[s] = pl::evaluate(c, ws, s, env.options()).metrics.at("accuracy");
  }
  std::string table;
  bool below = true, wickel_best = true;
  for (const auto& [name, acc] : scores) {
    table += name + " " + pct(acc) + " ";
    below = below && acc < continuous && acc < discrete;
    if (name != "wickel") wickel_best = wickel_best && acc < scores["wickel"];
  }
  o.expect(below, "every predefined scheme below the learned roles: " + table);
  o.expect(wickel_best, "wickel is the best predefined scheme");
}

void symbolic_algorithm(Outcome& o, const Env& env) {
  using V = std::vector<int>;
  o.expect(analysis::scan_role_algorithm(words("jump around left after walk thrice")) == V{11, 36, 8, 17, 4, 46},
           "worked example roles");
  o.expect(analysis::scan_role_algorithm(words("run left twice after jump opposite right thrice")) ==
               V{11, 36, 8, 43, 10, 17, 4, 46},
           "chain base command roles");
  const auto c = env.config(pl::Task::Scan);
  const pl::Workspace ws(env.root / "scan");
  const auto m = pl::interpret(c, ws, env.options()).metrics;
  const double rate = m.at("match_rate");
  o.expect(rate >= 0.90, "algorithm matches the learned roles on " + pct(rate) + " of commands");
  const std::size_t distinct = m.at("distinct_roles");
  o.expect(distinct <= 25, std::to_string(distinct) + " distinct snapped roles");
}

void surgery(Outcome& o, const Env& env) {
  const auto c = env.config(pl::Task::Scan);
  const pl::Workspace ws(env.root / "scan");
  const auto m = pl::surgery(c, ws, env.options()).metrics;
  std::size_t ok = 0;
  for (const auto& s : m.at("chain")) ok += s.at("correct").get<bool>();
  o.expect(m.at("chain_correct").get<bool>(),
           "chain decodes correctly at " + std::to_string(ok) + "/" + std::to_string(m.at("chain").size()) + " steps");
  std::string curve;
  double one_swap = 0.0;
  for (const auto& p : m.at("curve")) {
    curve += std::to_string(p.at("swaps").get<int>()) + ":" + pct(p.at("accuracy")) + " ";
    if (p.at("swaps") == 1) one_swap = p.at("accuracy");
  }
  o.expect(one_swap >= 0.70, "1-swap accuracy " + pct(one_swap));
  o.expect(fs::exists(ws.report("surgery_curve.csv")), "curve " + curve);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance gate"};
  Env env;
  std::string artifacts = "acceptance_artifacts";
  std::vector<int> only;
  bool quiet = false;
  app.add_option("--artifacts", artifacts, "directory for trained models and manifests")->capture_default_str();
  app.add_option("--workers", env.workers, "threads for corpus-parallel evaluation");
  app.add_option("--only", only, "run only these criterion numbers")->delimiter(',');
  app.add_flag("--quiet", quiet, "suppress pipeline progress");
  CLI11_PARSE(app, argc, argv);
  env.root = artifacts;
  env.verbose = !quiet;

  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"gradient correctness", gradient_checks},
      {"TPR algebra", tpr_algebra},
      {"regularizer exactness", regularizer_exactness},
      {"SCAN grammar", scan_grammar},
      {"digit LTR pipeline", [&](Outcome& o) { digits_pipeline(o, env, pl::Task::DigitsLtr); }},
      {"digit tree pipeline", [&](Outcome& o) { digits_pipeline(o, env, pl::Task::DigitsTree); }},
      {"SCAN target", [&](Outcome& o) { scan_target(o, env); }},
      {"ROLE on SCAN", [&](Outcome& o) { scan_role(o, env); }},
      {"symbolic algorithm", [&](Outcome& o) { symbolic_algorithm(o, env); }},
      {"surgery", [&](Outcome& o) { surgery(o, env); }},
      {"V-measure oracle", v_measure_oracle},
      {"ingestion", [&](Outcome& o) { ingestion(o, env.root / "ingestion"); }},
  };

  std::size_t failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "error: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << id << "  " << criteria[i].first
              << "  [" << num(secs, 3) << " s]  " << o.detail.str() << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
