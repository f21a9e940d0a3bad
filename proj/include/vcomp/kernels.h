// Copyright 2026 The vcomp Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VCOMP_KERNELS_H_
#define VCOMP_KERNELS_H_

// GEMM programs for the vector machine, in an uncompressed (binary32 in
// memory) and a compressed (bfloat16 in memory, widened in-register) flavour,
// together with the scalar oracle they are checked against.
//
// Both kernels use the row-broadcast formulation
//
//   for each output row i:
//     acc[0..n) = 0
//     for k in row_order(i):          // k outer
//       for each strip s of width vlen/32:   // strip-mine inner
//         acc[s] = fma(A[i][k], B[k][s], acc[s])
//     C[i] = acc
//
// row_order(i) is ascending for even i and descending for odd i under the
// default serpentine order, so consecutive rows reuse the most recently
// loaded rows of B first. Every element of C is therefore accumulated with a
// fused multiply-add in a fixed, documented order, and the scalar oracle
// follows the same order to make bit-exact comparison well-posed.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vcomp/formats.h"
#include "vcomp/vvm.h"

namespace vcomp {

enum class ElementWidth : uint32_t { kBf16 = 16, kB32 = 32 };

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Row-major matrix of raw element patterns. bfloat16 patterns occupy the low
// 16 bits of each slot.
class Matrix {
 public:
  Matrix() = default;
  Matrix(size_t rows, size_t cols, ElementWidth width);

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  ElementWidth width() const { return width_; }
  size_t element_bytes() const { return static_cast<size_t>(width_) / 8; }

  uint32_t bits(size_t r, size_t c) const { return bits_[r * cols_ + c]; }
  void set_bits(size_t r, size_t c, uint32_t v);
  std::span<const uint32_t> data() const { return bits_; }

  // Numeric value; bfloat16 elements are widened by zero padding with
  // subnormals flushed.
  float value(size_t r, size_t c) const;

  // Packed little-endian bytes as laid out in vector-machine memory.
  std::vector<uint8_t> ToBytes() const;
  static Matrix FromBytes(size_t rows, size_t cols, ElementWidth width,
                          std::span<const uint8_t> bytes);

  static Matrix FromFloats(size_t rows, size_t cols, std::span<const float> v);
  static Matrix Identity(size_t n, ElementWidth width);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  ElementWidth width_ = ElementWidth::kB32;
  std::vector<uint32_t> bits_;
};

// binary32 -> bfloat16 by truncation, element-wise.
Matrix CompressMatrix(const Matrix& m);
// bfloat16 -> binary32 bit patterns with the given fill.
Matrix DecompressMatrix(const Matrix& m, FillMode fill);

// Seeded uniform [-1, 1) values already truncated to bfloat16, returned as a
// binary32 matrix so that both kernels can start from identical reals.
Matrix RandomBf16ExactMatrix(size_t rows, size_t cols, uint64_t seed);

enum class GemmMode { kUncompressed, kCompressed };
enum class AccumulationOrder { kSerpentine, kAscending };

std::string_view GemmModeName(GemmMode mode);
std::optional<GemmMode> ParseGemmMode(std::string_view name);

struct KernelSpec {
  uint32_t n = 128;
  GemmMode mode = GemmMode::kUncompressed;
  uint32_t vlen_bits = 4096;
  FillMode fill = FillMode::kZeroPad;
  AccumulationOrder order = AccumulationOrder::kSerpentine;
};

// Byte addresses of the operands in vector-machine memory.
struct GemmLayout {
  uint64_t a = 0;
  uint64_t b = 0;
  uint64_t c = 0;
  uint64_t memory_bytes = 0;

  static GemmLayout For(const KernelSpec& spec);
};

// Register budget: accumulators v0-v7, loads v8-v15, widened rows v16-v23.
inline constexpr int kMaxStripsPerGroup = 8;

// k ordering for output row `row`.
bool RowAscending(AccumulationOrder order, size_t row);

// Appends the in-register bfloat16 -> binary32 widening of `src16` into
// `dst32`: one vwmulu_sc by 2^16 (zero pad) or 2^16 + 1 (replicate).
void AppendUnpack(Program& program, uint8_t dst32, uint8_t src16, FillMode fill);
// Appends the binary32 -> bfloat16 narrowing: one vnsrl_imm by 16.
void AppendPack(Program& program, uint8_t dst16, uint8_t src32);

// The full instruction stream for `spec` over `layout`. The program depends
// only on the spec, never on matrix contents.
Program BuildGemmProgram(const KernelSpec& spec, const GemmLayout& layout);

struct GemmRun {
  Matrix c;
  Program program;
  Trace trace;
};

// Uncompressed kernel over binary32 operands. Throws DimensionError unless A
// and B are n x n binary32 matrices with n == spec.n.
GemmRun GemmUncompressed(const Matrix& a, const Matrix& b, KernelSpec spec);
// Compressed kernel over bfloat16 operands; C comes back as bfloat16.
GemmRun GemmCompressed(const Matrix& a, const Matrix& b, KernelSpec spec);
// Dispatches on spec.mode. Operands must already be in the mode's width.
GemmRun RunGemm(const Matrix& a, const Matrix& b, const KernelSpec& spec);

// Plain triple loop over binary32 operands with the same fused accumulation
// order as the kernels.
Matrix ScalarGemmOracle(const Matrix& a, const Matrix& b,
                        AccumulationOrder order = AccumulationOrder::kSerpentine);

// Oracle for the compressed kernel: widen A and B with `fill`, run the scalar
// oracle, truncate C to bfloat16.
Matrix CompressedGemmOracle(const Matrix& a, const Matrix& b, FillMode fill,
                            AccumulationOrder order = AccumulationOrder::kSerpentine);

// Exact per-mnemonic counts; mnemonics that never occur are absent.
std::map<std::string, uint64_t> InstructionCensus(const Trace& trace);

// ---------------------------------------------------------------------------
// Matrix files. Binary: 16-byte little-endian header (magic "VMAT", rows,
// cols, element width in bits) followed by packed elements. CSV: one row per
// line of decimal values.

void WriteMatrixBinary(std::ostream& os, const Matrix& m);
Matrix ReadMatrixBinary(std::istream& is);
void WriteMatrixCsv(std::ostream& os, const Matrix& m);
Matrix ReadMatrixCsv(std::istream& is, ElementWidth width);

}  // namespace vcomp

#endif  // VCOMP_KERNELS_H_
