#include "lsm/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace lsm::kernels {
namespace {

Backend detect() {
  if (const char* env = std::getenv("LSM_SIMD"); env && std::string(env) == "scalar")
    return Backend::kScalar;
  return supported(Backend::kAvx2) ? Backend::kAvx2 : Backend::kScalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> backend{detect()};
  return backend;
}

}  // namespace

bool supported(Backend backend) {
  switch (backend) {
    case Backend::kScalar:
      return true;
    case Backend::kAvx2:
#if defined(LSM_HAVE_AVX2)
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Backend backend) {
  if (!supported(backend))
    throw std::runtime_error("kernel backend " + std::string(name(backend)) +
                             " not supported on this CPU");
#if defined(LSM_HAVE_AVX2)
  if (backend == Backend::kAvx2) return detail::kAvx2Table;
#endif
  return detail::kScalarTable;
}

const KernelTable& active() { return table(current().load(std::memory_order_relaxed)); }

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend backend) {
  table(backend);  // validates
  current().store(backend, std::memory_order_relaxed);
}

std::string_view name(Backend backend) {
  return backend == Backend::kAvx2 ? "avx2" : "scalar";
}

}  // namespace lsm::kernels
