#include <cstdlib>
#include <string>

#include "mulsim/error.hpp"
#include "mulsim/kernels.hpp"

namespace mulsim::kernels {
namespace {

Backend g_backend = Backend::kScalar;
bool g_initialized = false;

Backend detect() {
#if defined(__x86_64__) || defined(_M_X64)
  if (const char* env = std::getenv("MULSIM_KERNELS")) {
    std::string v(env);
    if (v == "scalar") return Backend::kScalar;
    if (v == "avx2" && avx2_supported()) return Backend::kAvx2;
  }
  if (avx2_supported()) return Backend::kAvx2;
#endif
  return Backend::kScalar;
}

void ensure_init() {
  if (!g_initialized) {
    g_backend = detect();
    g_initialized = true;
  }
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() {
  ensure_init();
  return g_backend;
}

void force_backend(Backend b) {
  if (b == Backend::kAvx2 && !avx2_supported())
    throw ConfigError("force_backend: avx2 not supported on this host");
  g_backend = b;
  g_initialized = true;
}

const Ops& active() {
  ensure_init();
  return g_backend == Backend::kAvx2 ? avx2_ops() : scalar_ops();
}

}  // namespace mulsim::kernels
