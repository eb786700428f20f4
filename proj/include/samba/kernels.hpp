#pragma once

// Dense f64 inner-loop kernels. Every kernel has a scalar reference version
// and, when the target supports it, an AVX2/FMA version. The active backend
// is chosen once at startup from CPUID and can be pinned with the
// SAMBA_SIMD environment variable ("scalar" or "avx2").

#include <cstddef>
#include <string_view>

namespace samba::kernels {

struct Backend {
  const char* name;

  // c[m x n] (+)= a[m x k] * b[k x n], all row-major.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate);
  // c[m x n] (+)= a[m x k] * b[n x k]^T
  void (*gemm_nt)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate);
  // c[m x n] (+)= a[k x m]^T * b[k x n]
  void (*gemm_tn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  const double* b, double* c, bool accumulate);

  double (*dot)(std::size_t n, const double* x, const double* y);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // z = x + y
  void (*add)(std::size_t n, const double* x, const double* y, double* z);
  // z = x * y
  void (*mul)(std::size_t n, const double* x, const double* y, double* z);
  // z += x * y
  void (*mul_acc)(std::size_t n, const double* x, const double* y, double* z);
};

const Backend& scalar_backend();

// nullptr when the build or the CPU lacks AVX2/FMA.
const Backend* avx2_backend();

const Backend& active();

// Pins the active backend by name; returns false if unavailable.
bool select(std::string_view name);

}  // namespace samba::kernels
