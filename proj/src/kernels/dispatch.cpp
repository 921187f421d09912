#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <vector>

#include "role/common.hpp"
#include "role/kernels.hpp"

namespace role::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  if (const char* env = std::getenv("ROLE_KERNELS")) {
    const std::string name(env);
    if (name == "scalar") return Backend::Scalar;
    if (name == "avx2" && backend_supported(Backend::Avx2)) return Backend::Avx2;
  }
  return backend_supported(Backend::Avx2) ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

const detail::KernelTable& table() {
  if (backend_slot().load(std::memory_order_relaxed) == Backend::Avx2) {
    return *detail::avx2_table();
  }
  return detail::scalar_table();
}

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(std::string("kernels: ") + what);
}

}  // namespace

bool backend_supported(Backend backend) {
  switch (backend) {
    case Backend::Scalar:
      return true;
    case Backend::Avx2:
      return detail::avx2_table() != nullptr && cpu_has_avx2();
  }
  return false;
}

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  if (!backend_supported(backend)) {
    throw ConfigError("kernel backend not supported here: " + std::string(backend_name(backend)));
  }
  backend_slot().store(backend, std::memory_order_relaxed);
}

std::string_view backend_name(Backend backend) {
  return backend == Backend::Avx2 ? "avx2" : "scalar";
}

ScopedBackend::ScopedBackend(Backend backend) : previous_(active_backend()) {
  set_backend(backend);
}

ScopedBackend::~ScopedBackend() { backend_slot().store(previous_, std::memory_order_relaxed); }

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot length mismatch");
  return table().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require(x.size() == y.size(), "axpy length mismatch");
  table().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y) {
  require(a.size() == rows * cols && x.size() == cols && y.size() == rows, "gemv shape");
  table().gemv(a.data(), rows, cols, x.data(), y.data());
}

void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y) {
  require(a.size() == rows * cols && x.size() == rows && y.size() == cols, "gemv_t shape");
  table().gemv_t(a.data(), rows, cols, x.data(), y.data());
}

void ger(double alpha, std::span<const double> x, std::span<const double> y,
         std::span<double> a) {
  require(a.size() == x.size() * y.size(), "ger shape");
  table().ger(alpha, x.data(), x.size(), y.data(), y.size(), a.data());
}

namespace {

std::vector<double> transposed(std::span<const double> src, std::size_t rows, std::size_t cols) {
  std::vector<double> out(rows * cols);
  constexpr std::size_t kBlock = 32;
  for (std::size_t i0 = 0; i0 < rows; i0 += kBlock) {
    for (std::size_t j0 = 0; j0 < cols; j0 += kBlock) {
      const std::size_t i1 = std::min(rows, i0 + kBlock);
      const std::size_t j1 = std::min(cols, j0 + kBlock);
      for (std::size_t i = i0; i < i1; ++i) {
        for (std::size_t j = j0; j < j1; ++j) out[j * rows + i] = src[i * cols + j];
      }
    }
  }
  return out;
}

}  // namespace

void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> c) {
  require(a.size() == m * k && b.size() == k * n && c.size() == m * n, "gemm shape");
  if (m == 0 || n == 0 || k == 0) return;
  const auto& t = table();
  // Transposed operands are packed once; the copy is O(mk) against O(mnk) work.
  std::vector<double> a_packed;
  std::vector<double> b_packed;
  const double* ap = a.data();
  const double* bp = b.data();
  if (trans_a == Trans::Yes) {
    a_packed = transposed(a, k, m);
    ap = a_packed.data();
  }
  if (trans_b == Trans::Yes) {
    b_packed = transposed(b, n, k);
    bp = b_packed.data();
  }
  t.gemm_nn(m, n, k, ap, bp, c.data());
}

}  // namespace role::kernels
