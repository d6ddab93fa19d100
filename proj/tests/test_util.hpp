#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "uflst/error.hpp"
#include "uflst/matrix.hpp"
#include "uflst/rng.hpp"

namespace testutil {

inline uflst::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                   double scale = 1.0) {
  uflst::Rng rng(seed);
  uflst::Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

// Fresh empty directory under the system temp dir.
inline std::string scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("uflst_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// Kind of the uflst::Error thrown by f, nullopt if nothing was thrown.
template <class F>
std::optional<uflst::ErrorKind> error_kind(F&& f) {
  try {
    f();
  } catch (const uflst::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

}  // namespace testutil
