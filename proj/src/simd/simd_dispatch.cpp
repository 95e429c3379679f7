// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <cstring>

#include "promptrecon/simd.hpp"

namespace promptrecon::simd {
namespace {

struct KernelTable {
  Isa isa;
  float (*dot_f32)(const float*, const float*, std::size_t) noexcept;
  double (*dot_f64)(const double*, const double*, std::size_t) noexcept;
  void (*axpy_f32)(float, const float*, float*, std::size_t) noexcept;
  void (*axpy_f64)(double, const double*, double*, std::size_t) noexcept;
};

constexpr KernelTable kScalarTable{Isa::kScalar, &scalar::dot, &scalar::dot, &scalar::axpy,
                                   &scalar::axpy};

bool cpu_has(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
      __builtin_cpu_init();
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Isa::kNeon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

KernelTable select_table() noexcept {
  const char* forced = std::getenv("PROMPTRECON_SIMD");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return kScalarTable;
#if defined(__x86_64__) || defined(_M_X64)
  if (cpu_has(Isa::kAvx2)) {
    return KernelTable{Isa::kAvx2, &avx2::dot, &avx2::dot, &avx2::axpy, &avx2::axpy};
  }
#endif
#if defined(__aarch64__)
  return KernelTable{Isa::kNeon, &neon::dot, &neon::dot, &neon::axpy, &neon::axpy};
#endif
  return kScalarTable;
}

const KernelTable& table() noexcept {
  static const KernelTable t = select_table();
  return t;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
  switch (isa) {
    case Isa::kScalar: return "scalar";
    case Isa::kAvx2: return "avx2";
    case Isa::kNeon: return "neon";
  }
  return "unknown";
}

Isa active_isa() noexcept { return table().isa; }

bool isa_available(Isa isa) noexcept { return cpu_has(isa); }

float dot(std::span<const float> a, std::span<const float> b) noexcept {
  return table().dot_f32(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  return table().dot_f64(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

void axpy(float alpha, std::span<const float> x, std::span<float> y) noexcept {
  table().axpy_f32(alpha, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  table().axpy_f64(alpha, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

namespace {

// Rows are scored in blocks so the query stays hot in L1 while a block of the
// matrix streams through.
constexpr std::size_t kRowBlock = 64;

template <typename T, typename Dot>
void matvec_impl(std::span<const T> matrix, std::size_t rows, std::span<const T> x,
                 std::span<T> out, Dot dot_fn) noexcept {
  const std::size_t cols = x.size();
  for (std::size_t block = 0; block < rows; block += kRowBlock) {
    const std::size_t end = block + kRowBlock < rows ? block + kRowBlock : rows;
    for (std::size_t r = block; r < end; ++r) {
      out[r] = dot_fn(matrix.data() + r * cols, x.data(), cols);
    }
  }
}

}  // namespace

void matvec(std::span<const float> matrix, std::size_t rows, std::span<const float> x,
            std::span<float> out) noexcept {
  matvec_impl(matrix, rows, x, out, table().dot_f32);
}

void matvec(std::span<const double> matrix, std::size_t rows, std::span<const double> x,
            std::span<double> out) noexcept {
  matvec_impl(matrix, rows, x, out, table().dot_f64);
}

}  // namespace promptrecon::simd
