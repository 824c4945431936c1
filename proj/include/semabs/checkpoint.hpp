// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// SABS checkpoint files: model config, named parameter tensors, AdamW moments,
// step counter and the training rng state. Decoding validates everything
// before returning, so a bad file never yields a half-loaded model.

#pragma once

#include "semabs/binary_io.hpp"
#include "semabs/grid.hpp"
#include "semabs/network.hpp"
#include "semabs/optim.hpp"

#include <filesystem>
#include <string>

namespace semabs {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::string task;  // "ovssc" or "vool"
  UNetConfig unet;
  GridSpec grid;  // voxelization grid the encoder was trained on
  Params<float> params;
  AdamState<float> adam;
  std::uint64_t step = 0;
  std::string rng_state;
  std::string meta;  // free-form JSON (training config)

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

inline void write_tensors(io::ByteWriter& w, const Params<float>& p) {
  w.u32(static_cast<std::uint32_t>(p.tensors().size()));
  for (const auto& t : p.tensors()) {
    w.str(t.name);
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    w.f32s(t.value);
  }
}

/// Reads a tensor block that must match `layout` exactly (names and shapes).
inline Params<float> read_tensors(io::ByteReader& r, const Params<float>& layout, const char* block) {
  const auto at = r.offset();
  const auto n = r.u32();
  if (n != layout.tensors().size())
    throw FormatError(std::string(block) + ": tensor count does not match model config", at);
  Params<float> out = layout.zeros_like();
  for (auto& t : out.tensors()) {
    const auto name_at = r.offset();
    if (r.str(4096) != t.name) throw FormatError(std::string(block) + ": unexpected tensor name", name_at);
    const auto ndim = r.u32();
    if (ndim != t.shape.size()) throw FormatError(std::string(block) + ": rank mismatch for " + t.name, name_at);
    for (int d : t.shape)
      if (r.u32() != static_cast<std::uint32_t>(d))
        throw FormatError(std::string(block) + ": shape mismatch for " + t.name, name_at);
    r.f32s(t.value);
  }
  return out;
}

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ck) {
  io::ByteWriter w;
  w.magic("SABS");
  w.u32(kCheckpointVersion);
  w.str(ck.task);
  w.u32(static_cast<std::uint32_t>(ck.unet.levels));
  w.u32(static_cast<std::uint32_t>(ck.unet.base_channels));
  w.u32(static_cast<std::uint32_t>(ck.unet.in_channels));
  w.u32(static_cast<std::uint32_t>(ck.unet.out_channels));
  for (int a = 0; a < 3; ++a) w.f64(ck.grid.lower[a]);
  for (int a = 0; a < 3; ++a) w.f64(ck.grid.upper[a]);
  for (int a = 0; a < 3; ++a) w.u32(static_cast<std::uint32_t>(ck.grid.resolution[a]));
  detail::write_tensors(w, ck.params);
  w.u64(ck.adam.t);
  detail::write_tensors(w, ck.adam.m);
  detail::write_tensors(w, ck.adam.v);
  w.u64(ck.step);
  w.str(ck.rng_state);
  w.str(ck.meta);
  return w.take();
}

inline Checkpoint decode_checkpoint(std::string_view bytes) {
  io::ByteReader r(bytes);
  r.expect_magic("SABS");
  const auto vat = r.offset();
  if (const auto v = r.u32(); v != kCheckpointVersion)
    throw FormatError("unsupported SABS version " + std::to_string(v), vat);
  Checkpoint ck;
  ck.task = r.str(64);
  const auto cat = r.offset();
  ck.unet.levels = static_cast<int>(r.u32());
  ck.unet.base_channels = static_cast<int>(r.u32());
  ck.unet.in_channels = static_cast<int>(r.u32());
  ck.unet.out_channels = static_cast<int>(r.u32());
  const auto sane = [](int v) { return v >= 1 && v <= 4096; };
  if (!sane(ck.unet.levels) || ck.unet.levels > 16 || !sane(ck.unet.base_channels) || !sane(ck.unet.in_channels) ||
      !sane(ck.unet.out_channels))
    throw FormatError("implausible UNet config", cat);
  const auto gat = r.offset();
  for (int a = 0; a < 3; ++a) ck.grid.lower[a] = r.f64();
  for (int a = 0; a < 3; ++a) ck.grid.upper[a] = r.f64();
  for (int a = 0; a < 3; ++a) ck.grid.resolution[a] = static_cast<int>(r.u32());
  for (int a = 0; a < 3; ++a)
    if (!(ck.grid.lower[a] < ck.grid.upper[a]) || ck.grid.resolution[a] < 1 || ck.grid.resolution[a] > 4096)
      throw FormatError("implausible grid spec", gat);
  const auto layout = init_model_params<float>(ck.unet, 0);
  ck.params = detail::read_tensors(r, layout, "params");
  ck.adam.t = r.u64();
  ck.adam.m = detail::read_tensors(r, layout, "adam.m");
  ck.adam.v = detail::read_tensors(r, layout, "adam.v");
  ck.step = r.u64();
  ck.rng_state = r.str();
  ck.meta = r.str();
  r.expect_end();
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  io::write_file_atomic(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace semabs
