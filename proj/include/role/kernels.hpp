#pragma once

// Dense float64 inner-loop kernels with a scalar reference implementation and
// an AVX2/FMA variant selected at runtime. All matrices are row-major and
// contiguous. Every kernel accumulates into its output.

#include <cstddef>
#include <span>
#include <string_view>

namespace role::kernels {

enum class Backend { Scalar, Avx2 };

/// True when the running CPU (and this build) can execute `backend`.
bool backend_supported(Backend backend);

/// Backend used by the free functions below. Chosen on first use: the
/// `ROLE_KERNELS` environment variable (`scalar` or `avx2`) if set, otherwise
/// the best supported backend.
Backend active_backend();

/// Switches the process-wide backend. Throws role::ConfigError if unsupported.
/// Not thread-safe with respect to concurrent kernel calls.
void set_backend(Backend backend);

std::string_view backend_name(Backend backend);

/// RAII override of the active backend, restored on destruction.
class ScopedBackend {
 public:
  explicit ScopedBackend(Backend backend);
  ~ScopedBackend();
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

double dot(std::span<const double> a, std::span<const double> b);

/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

/// y += A x, A is rows x cols.
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<double> y);

/// y += A^T x, A is rows x cols.
void gemv_t(std::span<const double> a, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> y);

/// A += alpha * x y^T, A is x.size() x y.size().
void ger(double alpha, std::span<const double> x, std::span<const double> y,
         std::span<double> a);

enum class Trans { No, Yes };

/// C += op(A) op(B) where op(A) is m x k, op(B) is k x n and C is m x n.
/// A is stored m x k (or k x m when transposed); likewise B.
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k,
          std::span<const double> a, std::span<const double> b, std::span<double> c);

namespace detail {

// Raw kernel table; one instance per backend.
struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  void (*ger)(double alpha, const double* x, std::size_t m, const double* y, std::size_t n,
              double* a);
  // C += A B with A m x k, B k x n, all row-major contiguous.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                  double* c);
};

const KernelTable& scalar_table();
// Null when the build has no AVX2 translation unit.
const KernelTable* avx2_table();

}  // namespace detail

}  // namespace role::kernels
