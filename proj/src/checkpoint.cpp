#include "uflst/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "uflst/binary_io.hpp"
#include "uflst/error.hpp"

namespace uflst {

namespace {

constexpr char kMagic[6] = {'U', 'F', 'L', 'S', 'T', '\0'};

void put_layers(std::ostream& out, const std::vector<DenseLayer>& layers) {
  for (const auto& l : layers)
    for (double w : l.weight.values()) binary::put_f64(out, w);
  for (const auto& l : layers)
    for (double b : l.bias) binary::put_f64(out, b);
}

void get_layers(binary::Reader& in, std::vector<DenseLayer>& layers) {
  for (auto& l : layers)
    for (double& w : l.weight.values()) w = in.f64();
  for (auto& l : layers)
    for (double& b : l.bias) b = in.f64();
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  p.validate();
  out.write(kMagic, sizeof kMagic);
  binary::put_u32(out, kCheckpointVersion);
  binary::put_u32(out, static_cast<std::uint32_t>(p.layers.size()));
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    binary::put_u32(out, static_cast<std::uint32_t>(p.layers[l].in_dim()));
    binary::put_u32(out, static_cast<std::uint32_t>(p.layers[l].out_dim()));
    const Activation a = l < p.hidden_activations.size() ? p.hidden_activations[l] : Activation::kLinear;
    binary::put_u32(out, static_cast<std::uint32_t>(a));
  }
  put_layers(out, p.layers);
  put_layers(out, p.adam.first_moment);
  put_layers(out, p.adam.second_moment);
  binary::put_u64(out, p.adam.step);
  binary::put_u64(out, ckpt.rounds_completed);
}

Checkpoint read_checkpoint(std::istream& in, const std::string& source) {
  binary::Reader r(in, source);
  char magic[6];
  r.bytes(magic, sizeof magic);
  require(std::memcmp(magic, kMagic, sizeof kMagic) == 0, ErrorKind::kFormat,
          source + ": bad magic bytes (not a UFLST checkpoint)");
  const std::uint32_t version = r.u32();
  require(version == kCheckpointVersion, ErrorKind::kFormat,
          source + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  require(count >= 1 && count < 4096, ErrorKind::kFormat, source + ": implausible layer count");
  Checkpoint ckpt;
  ModelParams& p = ckpt.params;
  for (std::uint32_t l = 0; l < count; ++l) {
    const std::uint32_t in_dim = r.u32();
    const std::uint32_t out_dim = r.u32();
    const std::uint32_t act = r.u32();
    require(in_dim > 0 && out_dim > 0, ErrorKind::kFormat, source + ": zero layer dimension");
    require(act <= static_cast<std::uint32_t>(Activation::kTanh), ErrorKind::kFormat,
            source + ": unknown activation tag");
    p.layers.push_back({Matrix(out_dim, in_dim), std::vector<double>(out_dim, 0.0)});
    if (l + 1 < count) p.hidden_activations.push_back(static_cast<Activation>(act));
  }
  p.adam.first_moment = zero_like(p.layers);
  p.adam.second_moment = zero_like(p.layers);
  get_layers(r, p.layers);
  get_layers(r, p.adam.first_moment);
  get_layers(r, p.adam.second_moment);
  p.adam.step = r.u64();
  ckpt.rounds_completed = r.u64();
  require(r.at_end(), ErrorKind::kFormat, source + ": trailing bytes after checkpoint");
  try {
    p.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kFormat, source + ": " + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ostringstream buf(std::ios::binary);
  write_checkpoint(buf, ckpt);
  binary::write_atomically(path, buf.str());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open checkpoint " + path);
  return read_checkpoint(in, path);
}

}  // namespace uflst
