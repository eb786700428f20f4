#include "samba/kernels.hpp"

#include <cstdlib>
#include <string>

#include "kernels_impl.hpp"

namespace samba::kernels {

namespace {

const Backend kScalar{
    "scalar",       scalar::gemm_nn, scalar::gemm_nt, scalar::gemm_tn, scalar::dot,
    scalar::axpy,   scalar::add,     scalar::mul,     scalar::mul_acc,
};

#if defined(SAMBA_HAVE_AVX2)
const Backend kAvx2{
    "avx2",       avx2::gemm_nn, avx2::gemm_nt, avx2::gemm_tn, avx2::dot,
    avx2::axpy,   avx2::add,     avx2::mul,     avx2::mul_acc,
};

bool cpu_has_avx2() {
#if defined(__GNUC__) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}
#endif

const Backend* initial_backend() {
  const char* env = std::getenv("SAMBA_SIMD");
  const std::string want = env ? env : "";
  if (want == "scalar") return &kScalar;
  if (const Backend* v = avx2_backend()) return v;
  return &kScalar;
}

const Backend*& current() {
  static const Backend* b = initial_backend();
  return b;
}

}  // namespace

const Backend& scalar_backend() { return kScalar; }

const Backend* avx2_backend() {
#if defined(SAMBA_HAVE_AVX2)
  static const bool ok = cpu_has_avx2();
  return ok ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const Backend& active() { return *current(); }

bool select(std::string_view name) {
  if (name == "scalar") {
    current() = &kScalar;
    return true;
  }
  if (name == "avx2") {
    if (const Backend* v = avx2_backend()) {
      current() = v;
      return true;
    }
  }
  return false;
}

}  // namespace samba::kernels
