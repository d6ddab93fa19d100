#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"
#include "uflst/kernels.hpp"

namespace uflst::kernels {

namespace {

constexpr KernelTable kScalar{"scalar", detail::dot_scalar, detail::squared_distance_scalar,
                              detail::axpy_scalar};

#if defined(UFLST_HAVE_AVX2)
constexpr KernelTable kAvx2{"avx2", detail::dot_avx2, detail::squared_distance_avx2,
                            detail::axpy_avx2};

bool cpu_has_avx2() noexcept {
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable* initial_table() noexcept {
  const char* env = std::getenv("UFLST_KERNEL");
  const std::string_view want = env ? env : "auto";
  if (want == "scalar") return &kScalar;
  const KernelTable* simd = avx2_table();
  return simd ? simd : &kScalar;
}

std::atomic<const KernelTable*>& slot() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

const KernelTable* avx2_table() noexcept {
#if defined(UFLST_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() noexcept { return *slot().load(std::memory_order_acquire); }

bool select(std::string_view name) noexcept {
  const KernelTable* table = nullptr;
  if (name == "scalar") {
    table = &kScalar;
  } else if (name == "avx2") {
    table = avx2_table();
  } else if (name == "auto") {
    table = avx2_table() ? avx2_table() : &kScalar;
  }
  if (!table) return false;
  slot().store(table, std::memory_order_release);
  return true;
}

}  // namespace uflst::kernels
