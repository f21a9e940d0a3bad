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

#ifndef VCOMP_FORMATS_H_
#define VCOMP_FORMATS_H_

// Bit-level codecs for the 16- and 8-bit storage formats: bfloat16 (the upper
// half of a binary32), bfloat8 (the upper half of a binary16) and
// posit<nbits, esbits>. Everything here is a pure function over value types.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vcomp {

struct Binary32Bits {
  uint32_t bits = 0;
  friend bool operator==(Binary32Bits, Binary32Bits) = default;
};

struct Binary16Bits {
  uint16_t bits = 0;
  friend bool operator==(Binary16Bits, Binary16Bits) = default;
};

// Sign 1, exponent 8, fraction 7.
struct BFloat16Bits {
  uint16_t bits = 0;
  friend bool operator==(BFloat16Bits, BFloat16Bits) = default;
};

// Sign 1, exponent 5, fraction 2.
struct BFloat8Bits {
  uint8_t bits = 0;
  friend bool operator==(BFloat8Bits, BFloat8Bits) = default;
};

// How the 16 discarded low bits are refilled when a bfloat16 is widened back
// to binary32.
enum class FillMode { kZeroPad, kReplicate };

std::string_view FillModeName(FillMode mode);
std::optional<FillMode> ParseFillMode(std::string_view name);

Binary32Bits FloatToBits(float value);
float BitsToFloat(Binary32Bits bits);

// binary32 -> bfloat16 by dropping the low 16 bits (a logical right shift).
// NaN payloads are truncated, not canonicalized.
constexpr BFloat16Bits F32ToBf16Trunc(Binary32Bits x) {
  return BFloat16Bits{static_cast<uint16_t>(x.bits >> 16)};
}

// Round-to-nearest-even variant. The kernels never use it; it exists for
// comparison against truncation.
BFloat16Bits F32ToBf16RoundNearestEven(Binary32Bits x);

constexpr Binary32Bits Bf16ToF32ZeroPad(BFloat16Bits b) {
  return Binary32Bits{static_cast<uint32_t>(b.bits) << 16};
}

constexpr Binary32Bits Bf16ToF32Replicate(BFloat16Bits b) {
  return Binary32Bits{(static_cast<uint32_t>(b.bits) << 16) | b.bits};
}

constexpr Binary32Bits Bf16ToF32(BFloat16Bits b, FillMode mode) {
  return mode == FillMode::kZeroPad ? Bf16ToF32ZeroPad(b)
                                    : Bf16ToF32Replicate(b);
}

// Value-level decode: widens with `mode` and flushes subnormal bfloat16
// inputs (zero exponent field, nonzero fraction) to a signed zero.
float Bf16ToFloat(BFloat16Bits b, FillMode mode = FillMode::kZeroPad);

constexpr BFloat8Bits F16ToBf8(Binary16Bits h) {
  return BFloat8Bits{static_cast<uint8_t>(h.bits >> 8)};
}

constexpr Binary16Bits Bf8ToF16(BFloat8Bits b) {
  return Binary16Bits{static_cast<uint16_t>(b.bits << 8)};
}

// ---------------------------------------------------------------------------
// Posits.

class PositFormatError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// posit<nbits, esbits>. useed = 2^(2^esbits) is derived on demand.
class PositFormat {
 public:
  static constexpr int kMaxNbits = 32;
  // Above this every decoded value no longer fits binary64 exactly.
  static constexpr int kMaxEsbits = 5;

  // Throws PositFormatError unless 2 <= nbits <= 32 and
  // 0 <= esbits <= min(nbits - 2, kMaxEsbits).
  PositFormat(int nbits, int esbits);

  int nbits() const { return nbits_; }
  int esbits() const { return esbits_; }
  // log2(useed) = 2^esbits.
  int useed_log2() const { return 1 << esbits_; }
  double useed() const;
  uint32_t mask() const {
    return nbits_ == 32 ? 0xFFFFFFFFu : ((1u << nbits_) - 1);
  }
  uint32_t nar_pattern() const { return 1u << (nbits_ - 1); }
  uint32_t maxpos_pattern() const { return nar_pattern() - 1; }

  friend bool operator==(const PositFormat&, const PositFormat&) = default;

 private:
  int nbits_;
  int esbits_;
};

// An nbits-wide two's-complement pattern tagged with its format. Bits above
// nbits must be zero.
struct PositBits {
  uint32_t bits = 0;
  PositFormat format{16, 2};
  friend bool operator==(const PositBits&, const PositBits&) = default;
};

// Fields of a decoded posit, useful for inspection and tests.
struct PositFields {
  bool negative = false;
  int regime_run = 0;      // l
  int regime_bit = 0;      // b
  int k = 0;               // regime value
  uint32_t exponent = 0;   // e, missing low bits read as 0
  int exponent_bits = 0;   // how many exponent bits were present
  uint64_t fraction = 0;   // raw fraction bits
  int fraction_bits = 0;   // f = fraction / 2^fraction_bits
};

enum class PositClass { kZero, kNaR, kReal };

struct PositValue {
  PositClass kind = PositClass::kZero;
  double value = 0.0;  // meaningful for kReal; 0 for kZero, NaN for kNaR

  static PositValue Zero() { return {PositClass::kZero, 0.0}; }
  static PositValue NaR();
  static PositValue Real(double v) { return {PositClass::kReal, v}; }
  bool is_nar() const { return kind == PositClass::kNaR; }
};

// Throws PositFormatError if bits has set bits above nbits.
PositValue PositDecode(const PositBits& p);
// Field breakdown of a non-special pattern; nullopt for zero and NaR.
std::optional<PositFields> PositDecodeFields(const PositBits& p);

// Nearest posit with round-to-nearest-even on the dropped bits. NaN and
// infinities map to NaR, 0 to 0, and finite nonzero values saturate to
// +-minpos / +-maxpos instead of rounding to 0 or NaR.
PositBits PositEncode(double x, const PositFormat& fmt);

// Signed integer view of the pattern, used for ordering.
int64_t PositSignedPattern(const PositBits& p);

// ---------------------------------------------------------------------------
// Conversion error.

// |x - y| / |x|. Throws std::domain_error when x == 0.
double RelativeError(double x, double y);

enum class SamplerKind { kNormal, kUniform, kConstant };

struct SamplerSpec {
  SamplerKind kind = SamplerKind::kNormal;
  double constant = 1.0;  // used by kConstant
};

std::string_view SamplerKindName(SamplerKind kind);
std::optional<SamplerKind> ParseSamplerKind(std::string_view name);

// Relative-error histogram of the bfloat16 round trip
// x -> F32ToBf16Trunc -> widen(mode) for n samples.
struct ErrorHistogram {
  FillMode mode = FillMode::kZeroPad;
  SamplerKind sampler = SamplerKind::kNormal;
  uint64_t seed = 0;
  uint64_t n = 0;
  std::vector<double> edges;     // bins + 1 ascending edges
  std::vector<uint64_t> counts;  // values past the last edge land in the last bin
  double mean = 0.0;
  double max = 0.0;

  // CSV with a leading '#' comment line carrying mode, n, seed and sampler,
  // then `bin_lo,bin_hi,count` rows.
  void WriteCsv(std::ostream& os) const;
};

// Histogram bins span [0, upper_edge). Zero samples are skipped and redrawn;
// throws std::invalid_argument for n == 0 or bins == 0 and std::domain_error
// when the sampler only yields zeros.
ErrorHistogram ErrorDensity(FillMode mode, const SamplerSpec& sampler,
                            uint64_t n, int bins, uint64_t seed,
                            double upper_edge = 1.0 / 128.0);

}  // namespace vcomp

#endif  // VCOMP_FORMATS_H_
