#include "role/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace role {

void write_training_log(const std::filesystem::path& path, const std::vector<LogRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out.precision(10);
  out << "step,loss,dev_metric\n";
  for (const auto& r : rows) {
    out << r.step << ',' << r.loss << ',';
    if (!std::isnan(r.dev_metric)) out << r.dev_metric;
    out << '\n';
  }
}

std::vector<std::vector<std::size_t>> length_batches(const std::vector<std::size_t>& lengths, std::size_t batch_size,
                                                     Rng& rng) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < lengths.size(); ++i) buckets[lengths[i]].push_back(i);
  std::vector<std::vector<std::size_t>> batches;
  for (auto& [len, idx] : buckets) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t s = 0; s < idx.size(); s += batch_size) {
      batches.emplace_back(idx.begin() + static_cast<long>(s),
                           idx.begin() + static_cast<long>(std::min(idx.size(), s + batch_size)));
    }
  }
  std::shuffle(batches.begin(), batches.end(), rng);
  return batches;
}

std::vector<std::vector<std::size_t>> length_groups(const std::vector<std::size_t>& lengths, std::size_t max_batch) {
  if (max_batch == 0) throw ConfigError("batch size must be positive");
  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < lengths.size(); ++i) buckets[lengths[i]].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [len, idx] : buckets) {
    for (std::size_t s = 0; s < idx.size(); s += max_batch) {
      groups.emplace_back(idx.begin() + static_cast<long>(s),
                          idx.begin() + static_cast<long>(std::min(idx.size(), s + max_batch)));
    }
  }
  return groups;
}

bool EarlyStopping::update(double dev_loss) {
  ++epoch_;
  if (dev_loss < anchor_ - min_delta_) {
    anchor_ = dev_loss;
    bad_epochs_ = 0;
  } else {
    ++bad_epochs_;
  }
  if (dev_loss < best_) {
    best_ = dev_loss;
    best_epoch_ = epoch_;
    return true;
  }
  return false;
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> carve_dev(std::size_t n, double dev_fraction, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  auto n_dev = static_cast<std::size_t>(std::llround(dev_fraction * static_cast<double>(n)));
  if (n > 1) n_dev = std::clamp<std::size_t>(n_dev, 1, n - 1);
  else n_dev = 0;
  std::vector<std::size_t> dev(idx.begin(), idx.begin() + static_cast<long>(n_dev));
  std::vector<std::size_t> train(idx.begin() + static_cast<long>(n_dev), idx.end());
  return {train, dev};
}

}  // namespace role
