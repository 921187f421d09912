#include "role/analysis/metrics.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "role/common.hpp"

namespace role::analysis {

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) threads.emplace_back(work);
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

namespace {

double entropy(const std::map<std::size_t, std::size_t>& counts, double n) {
  double h = 0.0;
  for (const auto& [k, c] : counts) {
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

VMeasure v_measure(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("v_measure: label lists differ in length");
  if (predicted.empty()) throw ConfigError("v_measure: empty input");
  const double n = static_cast<double>(predicted.size());
  std::map<std::size_t, std::size_t> classes, clusters;
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> joint;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    ++clusters[predicted[i]];
    ++classes[truth[i]];
    ++joint[{truth[i], predicted[i]}];
  }
  // H(C|K) = -sum n_ck/n log(n_ck/n_k); H(K|C) = -sum n_ck/n log(n_ck/n_c)
  double h_c_given_k = 0.0, h_k_given_c = 0.0;
  for (const auto& [ck, count] : joint) {
    const double p = static_cast<double>(count) / n;
    h_c_given_k -= p * std::log(static_cast<double>(count) / static_cast<double>(clusters[ck.second]));
    h_k_given_c -= p * std::log(static_cast<double>(count) / static_cast<double>(classes[ck.first]));
  }
  const double h_c = entropy(classes, n), h_k = entropy(clusters, n);
  VMeasure v;
  v.homogeneity = h_c == 0.0 ? 1.0 : 1.0 - h_c_given_k / h_c;
  v.completeness = h_k == 0.0 ? 1.0 : 1.0 - h_k_given_c / h_k;
  const double s = v.homogeneity + v.completeness;
  v.v = s == 0.0 ? 0.0 : 2.0 * v.homogeneity * v.completeness / s;
  return v;
}

VMeasure v_measure(std::span<const std::string> predicted, std::span<const std::string> truth) {
  std::map<std::string, std::size_t> ids;
  auto intern = [&](std::span<const std::string> labels) {
    std::vector<std::size_t> out;
    for (const auto& l : labels) out.push_back(ids.emplace(l, ids.size()).first->second);
    return out;
  };
  const auto p = intern(predicted);
  ids.clear();
  const auto t = intern(truth);
  return v_measure(std::span<const std::size_t>(p), std::span<const std::size_t>(t));
}

SubstitutionResult substitution_accuracy(const std::vector<std::vector<double>>& encodings, std::size_t hidden_dim,
                                         const HiddenDecoder& decode,
                                         const std::vector<std::vector<std::string>>& expected,
                                         std::size_t workers) {
  if (encodings.size() != expected.size()) throw ShapeError("substitution_accuracy: one expected output per encoding");
  for (const auto& e : encodings) {
    if (e.size() != hidden_dim) {
      throw ShapeError("substitution_accuracy: encoding has dim " + std::to_string(e.size()) + ", decoder expects " +
                       std::to_string(hidden_dim));
    }
  }
  std::vector<char> ok(encodings.size(), 0);
  parallel_for(encodings.size(), workers, [&](std::size_t i) { ok[i] = decode(encodings[i], i) == expected[i]; });
  SubstitutionResult r;
  for (char c : ok) {
    r.per_item.push_back(c != 0);
    r.correct += c != 0;
  }
  r.accuracy = encodings.empty() ? 0.0 : static_cast<double>(r.correct) / static_cast<double>(encodings.size());
  return r;
}

double mean_squared_error(const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
  if (a.size() != b.size()) throw ShapeError("mean_squared_error: item counts differ");
  if (a.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].size() != b[i].size() || a[i].empty()) throw ShapeError("mean_squared_error: vector sizes differ");
    double s = 0.0;
    for (std::size_t k = 0; k < a[i].size(); ++k) s += (a[i][k] - b[i][k]) * (a[i][k] - b[i][k]);
    total += s / static_cast<double>(a[i].size());
  }
  return total / static_cast<double>(a.size());
}

}  // namespace role::analysis
