#pragma once

#include <cstddef>

namespace samba::kernels {

#define SAMBA_KERNEL_DECLS                                                                      \
  void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,  \
               double* c, bool accumulate);                                                    \
  void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,  \
               double* c, bool accumulate);                                                    \
  void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,  \
               double* c, bool accumulate);                                                    \
  double dot(std::size_t n, const double* x, const double* y);                                 \
  void axpy(std::size_t n, double alpha, const double* x, double* y);                          \
  void add(std::size_t n, const double* x, const double* y, double* z);                        \
  void mul(std::size_t n, const double* x, const double* y, double* z);                        \
  void mul_acc(std::size_t n, const double* x, const double* y, double* z);

namespace scalar {
SAMBA_KERNEL_DECLS
}

#if defined(SAMBA_HAVE_AVX2)
namespace avx2 {
SAMBA_KERNEL_DECLS
}
#endif

#undef SAMBA_KERNEL_DECLS

}  // namespace samba::kernels
