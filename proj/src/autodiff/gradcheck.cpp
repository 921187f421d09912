#include "role/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "role/common.hpp"
#include "role/tape.hpp"

namespace role::ad {

GradCheckResult check_gradients(const std::function<Tensor()>& loss_fn, std::vector<Tensor> inputs,
                                const GradCheckOptions& options) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
  }
  std::vector<std::vector<double>> analytic;
  for (const auto& t : inputs) {
    auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(t.numel(), 0.0);
  }

  auto eval = [&] {
    NoGradScope no_grad;
    return loss_fn().item();
  };

  Rng rng(options.seed);
  GradCheckResult result;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor& t = inputs[ti];
    std::vector<std::size_t> idx(t.numel());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(idx.size(), options.coordinates));
    for (std::size_t i : idx) {
      auto data = t.mutable_data();
      const double saved = data[i];
      data[i] = saved + options.step;
      const double up = eval();
      data[i] = saved - options.step;
      const double down = eval();
      data[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[ti][i];
      const double scale = std::max(std::abs(a), std::abs(numeric));
      const double err = scale < options.zero_floor ? std::abs(a - numeric) : std::abs(a - numeric) / scale;
      ++result.coordinates_checked;
      if (err > result.max_rel_error || result.worst.empty()) {
        result.max_rel_error = std::max(result.max_rel_error, err);
        std::ostringstream w;
        w << ti << '[' << i << "]: " << a << " vs " << numeric;
        result.worst = w.str();
      }
    }
  }
  return result;
}

}  // namespace role::ad
