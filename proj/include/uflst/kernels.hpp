#pragma once

#include <cassert>
#include <cstddef>
#include <span>
#include <string_view>

// Inner-loop arithmetic shared by the network, the distance matrix and the
// losses. A scalar reference table is always available; an AVX2+FMA table is
// compiled in on x86-64 and picked at runtime when the CPU supports it.
namespace uflst::kernels {

struct KernelTable {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

const KernelTable& scalar_table() noexcept;

// nullptr when the build or the host CPU lacks AVX2/FMA.
const KernelTable* avx2_table() noexcept;

// Table used by the library. Initialized from UFLST_KERNEL (scalar | avx2 |
// auto, default auto) on first use.
const KernelTable& active() noexcept;

// Overrides the active table. Returns false if `name` is unknown or
// unsupported on this host.
bool select(std::string_view name) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  assert(a.size() == b.size());
  return active().dot(a.data(), b.data(), a.size());
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  assert(a.size() == b.size());
  return active().squared_distance(a.data(), b.data(), a.size());
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  assert(x.size() == y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace uflst::kernels
