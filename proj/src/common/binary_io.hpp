// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Little-endian encode/decode helpers for the on-disk formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include "promptrecon/error.hpp"

namespace promptrecon::binary {

template <typename T>
T byteswap_if_big(T v) noexcept {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_arithmetic_v<T>);
    v = byteswap_if_big(v);
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_floats(std::span<const float> v) {
    if constexpr (std::endian::native == std::endian::little) {
      buf_.append(reinterpret_cast<const char*>(v.data()), v.size_bytes());
    } else {
      for (float f : v) put(f);
    }
  }
  void put_bytes(std::string_view s) { buf_.append(s); }

  std::string& buffer() noexcept { return buf_; }

 private:
  std::string buf_;
};

/// Bounds-checked cursor; running past the end throws Error(kTruncatedFile).
class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
  T get() {
    static_assert(std::is_arithmetic_v<T>);
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return byteswap_if_big(v);
  }
  void get_floats(float* out, std::size_t n) {
    need(n * sizeof(float));
    std::memcpy(out, data_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
    if constexpr (std::endian::native == std::endian::big) {
      for (std::size_t i = 0; i < n; ++i) out[i] = byteswap_if_big(out[i]);
    }
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    auto s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) {
      throw Error(ErrorCode::kTruncatedFile, "unexpected end of data at byte " + std::to_string(pos_));
    }
  }

  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace promptrecon::binary
