// Copyright 2026 The promptrecon Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Data-parallel kernels behind bank scoring and the MLP.
//
// Each kernel exists as a scalar reference in simd::scalar and, where the
// target supports it, as an AVX2/FMA (x86-64) or NEON (aarch64) variant. The
// unqualified entry points dispatch once, at first use, to the best variant
// the running CPU supports. Setting PROMPTRECON_SIMD=scalar in the
// environment forces the reference path.
//
// Per-row arithmetic in matvec is exactly the arithmetic of dot on that row,
// so scores produced through either entry point are bit-identical.

#include <cstddef>
#include <span>
#include <string_view>

namespace promptrecon::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view to_string(Isa isa) noexcept;

/// ISA picked by the dispatcher for this process.
Isa active_isa() noexcept;

/// True when the variant for `isa` is compiled in and the CPU supports it.
bool isa_available(Isa isa) noexcept;

float dot(std::span<const float> a, std::span<const float> b) noexcept;
double dot(std::span<const double> a, std::span<const double> b) noexcept;

// y += alpha * x
void axpy(float alpha, std::span<const float> x, std::span<float> y) noexcept;
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;

// out[r] = dot(row r of a rows x cols row-major matrix, x)
void matvec(std::span<const float> matrix, std::size_t rows, std::span<const float> x,
            std::span<float> out) noexcept;
void matvec(std::span<const double> matrix, std::size_t rows, std::span<const double> x,
            std::span<double> out) noexcept;

namespace scalar {
float dot(const float* a, const float* b, std::size_t n) noexcept;
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(float alpha, const float* x, float* y, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
float dot(const float* a, const float* b, std::size_t n) noexcept;
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(float alpha, const float* x, float* y, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
float dot(const float* a, const float* b, std::size_t n) noexcept;
double dot(const double* a, const double* b, std::size_t n) noexcept;
void axpy(float alpha, const float* x, float* y, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
}  // namespace neon
#endif

}  // namespace promptrecon::simd
