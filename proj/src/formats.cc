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

#include "vcomp/formats.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>

#include <fmt/format.h>

namespace vcomp {

std::string_view FillModeName(FillMode mode) {
  return mode == FillMode::kZeroPad ? "zeropad" : "replicate";
}

std::optional<FillMode> ParseFillMode(std::string_view name) {
  if (name == "zeropad") return FillMode::kZeroPad;
  if (name == "replicate") return FillMode::kReplicate;
  return std::nullopt;
}

Binary32Bits FloatToBits(float value) {
  return Binary32Bits{std::bit_cast<uint32_t>(value)};
}

float BitsToFloat(Binary32Bits bits) { return std::bit_cast<float>(bits.bits); }

BFloat16Bits F32ToBf16RoundNearestEven(Binary32Bits x) {
  // NaN must stay NaN; rounding could carry the payload into infinity.
  if ((x.bits & 0x7F800000u) == 0x7F800000u && (x.bits & 0x007FFFFFu) != 0) {
    return BFloat16Bits{static_cast<uint16_t>((x.bits >> 16) | 0x0040u)};
  }
  const uint32_t lsb = (x.bits >> 16) & 1u;
  const uint32_t rounded = x.bits + 0x7FFFu + lsb;
  return BFloat16Bits{static_cast<uint16_t>(rounded >> 16)};
}

float Bf16ToFloat(BFloat16Bits b, FillMode mode) {
  if ((b.bits & 0x7F80u) == 0 && (b.bits & 0x007Fu) != 0) {
    return (b.bits & 0x8000u) ? -0.0f : 0.0f;
  }
  return BitsToFloat(Bf16ToF32(b, mode));
}

// ---------------------------------------------------------------------------
// Posits.

PositFormat::PositFormat(int nbits, int esbits) : nbits_(nbits), esbits_(esbits) {
  if (nbits < 2 || nbits > kMaxNbits) {
    throw PositFormatError(fmt::format("posit nbits must be in [2, {}], got {}",
                                       kMaxNbits, nbits));
  }
  if (esbits < 0 || esbits > nbits - 2 || esbits > kMaxEsbits) {
    throw PositFormatError(fmt::format(
        "posit esbits must be in [0, min(nbits - 2, {})], got {} for nbits {}",
        kMaxEsbits, esbits, nbits));
  }
}

double PositFormat::useed() const { return std::ldexp(1.0, useed_log2()); }

PositValue PositValue::NaR() {
  return {PositClass::kNaR, std::numeric_limits<double>::quiet_NaN()};
}

namespace {

void CheckWidth(const PositBits& p) {
  if ((p.bits & ~p.format.mask()) != 0) {
    throw PositFormatError(fmt::format(
        "pattern 0x{:x} does not fit posit<{},{}>", p.bits, p.format.nbits(),
        p.format.esbits()));
  }
}

}  // namespace

std::optional<PositFields> PositDecodeFields(const PositBits& p) {
  CheckWidth(p);
  const PositFormat& f = p.format;
  const int nbits = f.nbits();
  if (p.bits == 0 || p.bits == f.nar_pattern()) return std::nullopt;

  PositFields out;
  out.negative = (p.bits >> (nbits - 1)) & 1u;
  const uint32_t magnitude = out.negative ? ((~p.bits + 1u) & f.mask()) : p.bits;

  // Bits after the sign, most significant first.
  int pos = nbits - 2;
  auto bit_at = [&](int i) { return static_cast<int>((magnitude >> i) & 1u); };
  out.regime_bit = bit_at(pos);
  while (pos >= 0 && bit_at(pos) == out.regime_bit) {
    ++out.regime_run;
    --pos;
  }
  --pos;  // terminating bit, absent when the run reaches the end
  out.k = out.regime_bit == 0 ? -out.regime_run : out.regime_run - 1;

  const int remaining = std::max(pos + 1, 0);
  out.exponent_bits = std::min(remaining, f.esbits());
  uint32_t e = 0;
  for (int i = 0; i < out.exponent_bits; ++i) e = (e << 1) | bit_at(pos--);
  out.exponent = e << (f.esbits() - out.exponent_bits);

  out.fraction_bits = std::max(pos + 1, 0);
  out.fraction = out.fraction_bits == 0
                     ? 0
                     : (magnitude & ((uint64_t{1} << out.fraction_bits) - 1));
  return out;
}

PositValue PositDecode(const PositBits& p) {
  CheckWidth(p);
  if (p.bits == 0) return PositValue::Zero();
  if (p.bits == p.format.nar_pattern()) return PositValue::NaR();
  const PositFields fields = *PositDecodeFields(p);
  // 1 + f as an integer over 2^fraction_bits; at most 29 bits, exact.
  const double significand =
      std::ldexp(static_cast<double>((uint64_t{1} << fields.fraction_bits) |
                                     fields.fraction),
                 -fields.fraction_bits);
  const int scale = fields.k * p.format.useed_log2() +
                    static_cast<int>(fields.exponent);
  const double magnitude = std::ldexp(significand, scale);
  return PositValue::Real(fields.negative ? -magnitude : magnitude);
}

PositBits PositEncode(double x, const PositFormat& fmt) {
  if (!std::isfinite(x)) return PositBits{fmt.nar_pattern(), fmt};
  if (x == 0.0) return PositBits{0, fmt};

  const bool negative = std::signbit(x);
  const int body = fmt.nbits() - 1;  // bits after the sign
  int exp2 = 0;
  const double mant = std::frexp(std::fabs(x), &exp2);  // [0.5, 1)
  const int scale = exp2 - 1;                            // x = 1.m * 2^scale
  const int useed_log2 = fmt.useed_log2();
  // Floor division so the exponent field stays nonnegative.
  int k = scale >= 0 ? scale / useed_log2
                     : -((-scale + useed_log2 - 1) / useed_log2);
  const uint32_t e = static_cast<uint32_t>(scale - k * useed_log2);

  uint32_t magnitude = 0;
  if (k >= body - 1) {
    magnitude = fmt.maxpos_pattern();
  } else if (-k >= body) {
    magnitude = 1;  // minpos
  } else {
    // Unbounded bit string: regime, exponent, 52 fraction bits.
    using u128 = unsigned __int128;
    u128 acc = 0;
    int len = 0;
    auto push = [&](uint64_t value, int width) {
      acc = (acc << width) | value;
      len += width;
    };
    if (k >= 0) {
      push((uint64_t{1} << (k + 1)) - 1, k + 1);
      push(0, 1);
    } else {
      push(0, -k);
      push(1, 1);
    }
    push(e, fmt.esbits());
    const uint64_t frac =
        static_cast<uint64_t>(std::ldexp(mant, 53)) & ((uint64_t{1} << 52) - 1);
    push(frac, 52);

    const int drop = len - body;
    if (drop <= 0) {
      magnitude = static_cast<uint32_t>(acc << (-drop));
    } else {
      magnitude = static_cast<uint32_t>(acc >> drop);
      const bool round = (acc >> (drop - 1)) & 1u;
      const bool sticky = (acc & ((u128{1} << (drop - 1)) - 1)) != 0;
      if (round && (sticky || (magnitude & 1u))) ++magnitude;
      // Never round into NaR or to zero.
      magnitude = std::clamp<uint32_t>(magnitude, 1u, fmt.maxpos_pattern());
    }
  }
  const uint32_t bits = negative ? ((~magnitude + 1u) & fmt.mask()) : magnitude;
  return PositBits{bits, fmt};
}

int64_t PositSignedPattern(const PositBits& p) {
  const int nbits = p.format.nbits();
  const uint64_t sign_bit = uint64_t{1} << (nbits - 1);
  const auto raw = static_cast<int64_t>(p.bits);
  return (p.bits & sign_bit) ? raw - static_cast<int64_t>(sign_bit << 1) : raw;
}

// ---------------------------------------------------------------------------
// Conversion error.

double RelativeError(double x, double y) {
  if (x == 0.0) throw std::domain_error("relative error undefined for x = 0");
  return std::fabs(x - y) / std::fabs(x);
}

std::string_view SamplerKindName(SamplerKind kind) {
  switch (kind) {
    case SamplerKind::kNormal:
      return "normal";
    case SamplerKind::kUniform:
      return "uniform";
    case SamplerKind::kConstant:
      return "constant";
  }
  return "?";
}

std::optional<SamplerKind> ParseSamplerKind(std::string_view name) {
  if (name == "normal") return SamplerKind::kNormal;
  if (name == "uniform") return SamplerKind::kUniform;
  if (name == "constant") return SamplerKind::kConstant;
  return std::nullopt;
}

void ErrorHistogram::WriteCsv(std::ostream& os) const {
  os << fmt::format("# mode={} n={} seed={} sampler={} mean={:.9e}\n",
                    FillModeName(mode), n, seed, SamplerKindName(sampler),
                    mean);
  os << "bin_lo,bin_hi,count\n";
  for (size_t i = 0; i < counts.size(); ++i) {
    os << fmt::format("{:.9e},{:.9e},{}\n", edges[i], edges[i + 1], counts[i]);
  }
}

ErrorHistogram ErrorDensity(FillMode mode, const SamplerSpec& sampler,
                            uint64_t n, int bins, uint64_t seed,
                            double upper_edge) {
  if (n == 0) throw std::invalid_argument("error density needs n >= 1");
  if (bins <= 0) throw std::invalid_argument("error density needs bins >= 1");
  if (!(upper_edge > 0.0)) {
    throw std::invalid_argument("histogram upper edge must be positive");
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  auto draw = [&]() -> float {
    switch (sampler.kind) {
      case SamplerKind::kNormal:
        return static_cast<float>(normal(rng));
      case SamplerKind::kUniform:
        return static_cast<float>(uniform(rng));
      case SamplerKind::kConstant:
        return static_cast<float>(sampler.constant);
    }
    return 0.0f;
  };

  ErrorHistogram h;
  h.mode = mode;
  h.sampler = sampler.kind;
  h.seed = seed;
  h.n = n;
  h.counts.assign(static_cast<size_t>(bins), 0);
  h.edges.resize(static_cast<size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) h.edges[i] = upper_edge * i / bins;

  constexpr int kMaxConsecutiveZeros = 1000;
  double sum = 0.0;
  for (uint64_t i = 0; i < n; ++i) {
    float x = draw();
    int zeros = 0;
    while (x == 0.0f || !std::isfinite(x)) {
      if (++zeros >= kMaxConsecutiveZeros) {
        throw std::domain_error("sampler produced no finite nonzero values");
      }
      x = draw();
    }
    const float y = Bf16ToFloat(F32ToBf16Trunc(FloatToBits(x)), mode);
    const double err = RelativeError(x, y);
    sum += err;
    h.max = std::max(h.max, err);
    auto bin = static_cast<size_t>(err / upper_edge * bins);
    h.counts[std::min(bin, h.counts.size() - 1)]++;
  }
  h.mean = sum / static_cast<double>(n);
  return h;
}

}  // namespace vcomp
