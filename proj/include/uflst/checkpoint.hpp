#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "uflst/network.hpp"

namespace uflst {

// Binary layout, all integers and reals little-endian:
//   "UFLST\0"                      6 magic bytes
//   u32 version (= 1)
//   u32 layer_count
//   per layer: u32 in_dim, u32 out_dim, u32 activation (hidden: tag, last: linear)
//   weights of every layer (row-major f64), then biases
//   Adam first moments (weights then biases), second moments, u64 step
//   u64 rounds_completed
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelParams params;
  std::uint64_t rounds_completed = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in, const std::string& source = "checkpoint");

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace uflst
