// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// Little-endian binary encoding helpers shared by the DPTH, FVOL, IMSK, RMAP
// and SABS file formats, plus temp-then-rename file writes.

#pragma once

#include "semabs/common.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace semabs::io {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class ByteWriter {
 public:
  void magic(std::string_view m) { buf_.append(m.data(), m.size()); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i32(std::int32_t v) { raw(&v, sizeof v); }
  void f32(float v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s.data(), s.size());
  }
  void f32s(std::span<const float> v) { raw(v.data(), v.size_bytes()); }
  void i32s(std::span<const std::int32_t> v) { raw(v.data(), v.size_bytes()); }

  const std::string& bytes() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  void raw(const void* p, std::size_t n) { buf_.append(static_cast<const char*>(p), n); }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  void expect_magic(std::string_view m) {
    need(m.size(), "magic");
    if (data_.substr(pos_, m.size()) != m)
      throw FormatError("bad magic, expected \"" + std::string(m) + "\"", pos_);
    pos_ += m.size();
  }
  std::uint32_t u32() { return pod<std::uint32_t>("u32"); }
  std::uint64_t u64() { return pod<std::uint64_t>("u64"); }
  std::int32_t i32() { return pod<std::int32_t>("i32"); }
  float f32() { return pod<float>("f32"); }
  double f64() { return pod<double>("f64"); }
  std::string str(std::size_t max_len = 1u << 20) {
    const auto at = pos_;
    const auto n = u32();
    if (n > max_len) throw FormatError("string length " + std::to_string(n) + " too large", at);
    need(n, "string bytes");
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void f32s(std::span<float> out) { bulk(out.data(), out.size_bytes(), "f32 array"); }
  void i32s(std::span<std::int32_t> out) { bulk(out.data(), out.size_bytes(), "i32 array"); }

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  void expect_end() const {
    if (pos_ != data_.size()) throw FormatError("trailing bytes", pos_);
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (data_.size() - pos_ < n)
      throw FormatError(std::string("truncated while reading ") + what, pos_);
  }
  template <class T>
  T pod(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void bulk(void* dst, std::size_t n, const char* what) {
    need(n, what);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes to a sibling temp file and renames over the destination, so readers
/// never observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace semabs::io
