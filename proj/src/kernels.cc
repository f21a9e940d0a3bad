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

#include "vcomp/kernels.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

#include <fmt/format.h>

namespace vcomp {

// ---------------------------------------------------------------------------
// Matrix.

Matrix::Matrix(size_t rows, size_t cols, ElementWidth width)
    : rows_(rows), cols_(cols), width_(width), bits_(rows * cols, 0) {}

void Matrix::set_bits(size_t r, size_t c, uint32_t v) {
  if (width_ == ElementWidth::kBf16 && v > 0xFFFFu) {
    throw std::invalid_argument("bfloat16 element wider than 16 bits");
  }
  bits_[r * cols_ + c] = v;
}

float Matrix::value(size_t r, size_t c) const {
  const uint32_t v = bits(r, c);
  if (width_ == ElementWidth::kBf16) {
    return Bf16ToFloat(BFloat16Bits{static_cast<uint16_t>(v)});
  }
  return BitsToFloat(Binary32Bits{v});
}

std::vector<uint8_t> Matrix::ToBytes() const {
  const size_t eb = element_bytes();
  std::vector<uint8_t> out(bits_.size() * eb);
  for (size_t i = 0; i < bits_.size(); ++i) {
    for (size_t b = 0; b < eb; ++b) {
      out[i * eb + b] = static_cast<uint8_t>(bits_[i] >> (8 * b));
    }
  }
  return out;
}

Matrix Matrix::FromBytes(size_t rows, size_t cols, ElementWidth width,
                         std::span<const uint8_t> bytes) {
  Matrix m(rows, cols, width);
  const size_t eb = m.element_bytes();
  if (bytes.size() != rows * cols * eb) {
    throw DimensionError(fmt::format(
        "expected {} bytes for a {}x{} matrix, got {}", rows * cols * eb, rows,
        cols, bytes.size()));
  }
  for (size_t i = 0; i < rows * cols; ++i) {
    uint32_t v = 0;
    for (size_t b = 0; b < eb; ++b) v |= uint32_t{bytes[i * eb + b]} << (8 * b);
    m.bits_[i] = v;
  }
  return m;
}

Matrix Matrix::FromFloats(size_t rows, size_t cols, std::span<const float> v) {
  if (v.size() != rows * cols) {
    throw DimensionError(fmt::format("expected {} values, got {}", rows * cols,
                                     v.size()));
  }
  Matrix m(rows, cols, ElementWidth::kB32);
  for (size_t i = 0; i < v.size(); ++i) m.bits_[i] = FloatToBits(v[i]).bits;
  return m;
}

Matrix Matrix::Identity(size_t n, ElementWidth width) {
  Matrix m(n, n, width);
  const uint32_t one = width == ElementWidth::kBf16 ? 0x3F80u : 0x3F800000u;
  for (size_t i = 0; i < n; ++i) m.bits_[i * n + i] = one;
  return m;
}

Matrix CompressMatrix(const Matrix& m) {
  if (m.width() != ElementWidth::kB32) {
    throw DimensionError("compression expects a binary32 matrix");
  }
  Matrix out(m.rows(), m.cols(), ElementWidth::kBf16);
  for (size_t r = 0; r < m.rows(); ++r) {
    for (size_t c = 0; c < m.cols(); ++c) {
      out.set_bits(r, c, F32ToBf16Trunc(Binary32Bits{m.bits(r, c)}).bits);
    }
  }
  return out;
}

Matrix DecompressMatrix(const Matrix& m, FillMode fill) {
  if (m.width() != ElementWidth::kBf16) {
    throw DimensionError("decompression expects a bfloat16 matrix");
  }
  Matrix out(m.rows(), m.cols(), ElementWidth::kB32);
  for (size_t r = 0; r < m.rows(); ++r) {
    for (size_t c = 0; c < m.cols(); ++c) {
      const auto b = BFloat16Bits{static_cast<uint16_t>(m.bits(r, c))};
      out.set_bits(r, c, Bf16ToF32(b, fill).bits);
    }
  }
  return out;
}

Matrix RandomBf16ExactMatrix(size_t rows, size_t cols, uint64_t seed) {
  std::mt19937_64 rng(seed);
  // 24 random bits scaled into [-1, 1); exact in binary32.
  std::vector<float> v(rows * cols);
  for (float& x : v) {
    const auto r = static_cast<int32_t>(rng() >> 40);  // [0, 2^24)
    x = std::ldexp(static_cast<float>(r - (1 << 23)), -23);
    x = BitsToFloat(Bf16ToF32ZeroPad(F32ToBf16Trunc(FloatToBits(x))));
  }
  return Matrix::FromFloats(rows, cols, v);
}

std::string_view GemmModeName(GemmMode mode) {
  return mode == GemmMode::kCompressed ? "compressed" : "uncompressed";
}

std::optional<GemmMode> ParseGemmMode(std::string_view name) {
  if (name == "compressed") return GemmMode::kCompressed;
  if (name == "uncompressed") return GemmMode::kUncompressed;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Program construction.

namespace {

constexpr uint64_t kOperandAlign = 4096;

uint64_t AlignUp(uint64_t v, uint64_t a) { return (v + a - 1) / a * a; }

uint32_t ElementBits(GemmMode mode) {
  return mode == GemmMode::kCompressed ? 16 : 32;
}

// Scalar work per k iteration: load A[i][k] (plus the shift that widens a
// bfloat16 scalar), two pointer bumps, loop branch.
constexpr uint32_t kScalarOpsPerK[] = {4, 6};
// Row prologue: pointer setup for A, B and C.
constexpr uint32_t kScalarOpsPerRow = 3;

uint8_t AccReg(size_t s) { return static_cast<uint8_t>(s); }
uint8_t LoadReg(size_t s) { return static_cast<uint8_t>(8 + s); }
uint8_t WideReg(size_t s) { return static_cast<uint8_t>(16 + s); }

Instr UnpackInstr(uint8_t dst32, uint8_t src16, FillMode fill) {
  return Instr::VwmuluSc(dst32, src16,
                         fill == FillMode::kZeroPad ? 0x10000u : 0x10001u);
}

// Emits instructions, dropping vsetvli that would not change vtype and
// attaching pending scalar-op counts to the next vector instruction.
class Emitter {
 public:
  explicit Emitter(Program& p) : p_(p) {}

  void SetVl(uint32_t avl, uint32_t sew) {
    if (avl == avl_ && sew == sew_) return;
    avl_ = avl;
    sew_ = sew;
    Emit(Instr::Vsetvli(avl, sew));
  }

  void Scalar(uint32_t n) { pending_ += n; }

  void Emit(Instr in) {
    in.scalar_ops += pending_;
    pending_ = 0;
    p_.push_back(in);
  }

 private:
  Program& p_;
  uint32_t avl_ = 0;
  uint32_t sew_ = 0;
  uint32_t pending_ = 0;
};

void CheckSpec(const KernelSpec& spec) {
  if (spec.n == 0) throw DimensionError("matrix dimension must be positive");
  MachineShape shape(spec.vlen_bits);  // validates vlen
  (void)shape;
}

}  // namespace

GemmLayout GemmLayout::For(const KernelSpec& spec) {
  const uint64_t bytes =
      uint64_t{spec.n} * spec.n * (ElementBits(spec.mode) / 8);
  GemmLayout l;
  l.a = 0;
  l.b = AlignUp(l.a + bytes, kOperandAlign);
  l.c = AlignUp(l.b + bytes, kOperandAlign);
  l.memory_bytes = AlignUp(l.c + bytes, kOperandAlign);
  return l;
}

bool RowAscending(AccumulationOrder order, size_t row) {
  return order == AccumulationOrder::kAscending || row % 2 == 0;
}

void AppendUnpack(Program& program, uint8_t dst32, uint8_t src16, FillMode fill) {
  program.push_back(UnpackInstr(dst32, src16, fill));
}

void AppendPack(Program& program, uint8_t dst16, uint8_t src32) {
  program.push_back(Instr::VnsrlImm(dst16, src32, 16));
}

Program BuildGemmProgram(const KernelSpec& spec, const GemmLayout& layout) {
  CheckSpec(spec);
  const bool compressed = spec.mode == GemmMode::kCompressed;
  const uint32_t n = spec.n;
  const uint32_t eb = ElementBits(spec.mode) / 8;
  // Strips are sized for the binary32 view so a widened row fits one register.
  const uint32_t strip = spec.vlen_bits / 32;
  const uint32_t strips = (n + strip - 1) / strip;
  const ScalarSource a_source =
      !compressed ? ScalarSource::kMemF32
      : spec.fill == FillMode::kZeroPad ? ScalarSource::kMemBf16ZeroPad
                                        : ScalarSource::kMemBf16Replicate;
  const uint32_t scalar_per_k = kScalarOpsPerK[compressed ? 1 : 0];

  Program program;
  Emitter out(program);
  auto strip_len = [&](uint32_t s) { return std::min(strip, n - s * strip); };

  for (uint32_t i = 0; i < n; ++i) {
    const bool ascending = RowAscending(spec.order, i);
    out.Scalar(kScalarOpsPerRow);
    for (uint32_t g0 = 0; g0 < strips; g0 += kMaxStripsPerGroup) {
      const uint32_t g1 = std::min<uint32_t>(strips, g0 + kMaxStripsPerGroup);
      for (uint32_t s = g0; s < g1; ++s) {
        out.SetVl(strip_len(s), 32);
        out.Emit(Instr::VfmvSplat(AccReg(s - g0), 0.0f));
      }
      for (uint32_t step = 0; step < n; ++step) {
        const uint32_t k = ascending ? step : n - 1 - step;
        const uint64_t a_addr = layout.a + (uint64_t{i} * n + k) * eb;
        out.Scalar(scalar_per_k);
        if (!compressed) {
          for (uint32_t s = g0; s < g1; ++s) {
            const uint64_t b_addr = layout.b + (uint64_t{k} * n + s * strip) * eb;
            out.SetVl(strip_len(s), 32);
            out.Emit(Instr::Vle(32, LoadReg(s - g0), b_addr));
            out.Emit(Instr::VfmaccScMem(AccReg(s - g0), a_source, a_addr,
                                        LoadReg(s - g0)));
          }
        } else {
          for (uint32_t s = g0; s < g1; ++s) {
            const uint64_t b_addr = layout.b + (uint64_t{k} * n + s * strip) * eb;
            out.SetVl(strip_len(s), 16);
            out.Emit(Instr::Vle(16, LoadReg(s - g0), b_addr));
            out.Emit(UnpackInstr(WideReg(s - g0), LoadReg(s - g0), spec.fill));
          }
          for (uint32_t s = g0; s < g1; ++s) {
            out.SetVl(strip_len(s), 32);
            out.Emit(Instr::VfmaccScMem(AccReg(s - g0), a_source, a_addr,
                                        WideReg(s - g0)));
          }
        }
      }
      for (uint32_t s = g0; s < g1; ++s) {
        const uint64_t c_addr = layout.c + (uint64_t{i} * n + s * strip) * eb;
        if (!compressed) {
          out.SetVl(strip_len(s), 32);
          out.Emit(Instr::Vse(32, AccReg(s - g0), c_addr));
        } else {
          out.SetVl(strip_len(s), 16);
          out.Emit(Instr::VnsrlImm(LoadReg(s - g0), AccReg(s - g0), 16));
          out.Emit(Instr::Vse(16, LoadReg(s - g0), c_addr));
        }
      }
    }
  }
  return program;
}

// ---------------------------------------------------------------------------
// Running the kernels.

namespace {

void CheckOperands(const Matrix& a, const Matrix& b, const KernelSpec& spec,
                   ElementWidth width) {
  auto square = [&](const Matrix& m, const char* name) {
    if (m.rows() != spec.n || m.cols() != spec.n) {
      throw DimensionError(fmt::format("{} is {}x{}, kernel expects {}x{}",
                                       name, m.rows(), m.cols(), spec.n,
                                       spec.n));
    }
    if (m.width() != width) {
      throw DimensionError(fmt::format("{} has {}-bit elements, kernel expects {}",
                                       name, static_cast<int>(m.width()),
                                       static_cast<int>(width)));
    }
  };
  square(a, "A");
  square(b, "B");
}

GemmRun Run(const Matrix& a, const Matrix& b, const KernelSpec& spec,
            ElementWidth width) {
  CheckSpec(spec);
  CheckOperands(a, b, spec, width);
  const GemmLayout layout = GemmLayout::For(spec);
  VvmState state(MachineShape(spec.vlen_bits), layout.memory_bytes);
  state.WriteMemory(layout.a, a.ToBytes());
  state.WriteMemory(layout.b, b.ToBytes());

  GemmRun run;
  run.program = BuildGemmProgram(spec, layout);
  run.trace = Execute(run.program, state);
  const size_t c_bytes = size_t{spec.n} * spec.n * (static_cast<size_t>(width) / 8);
  run.c = Matrix::FromBytes(spec.n, spec.n, width,
                            state.memory().subspan(layout.c, c_bytes));
  return run;
}

}  // namespace

GemmRun GemmUncompressed(const Matrix& a, const Matrix& b, KernelSpec spec) {
  spec.mode = GemmMode::kUncompressed;
  return Run(a, b, spec, ElementWidth::kB32);
}

GemmRun GemmCompressed(const Matrix& a, const Matrix& b, KernelSpec spec) {
  spec.mode = GemmMode::kCompressed;
  return Run(a, b, spec, ElementWidth::kBf16);
}

GemmRun RunGemm(const Matrix& a, const Matrix& b, const KernelSpec& spec) {
  return spec.mode == GemmMode::kCompressed ? GemmCompressed(a, b, spec)
                                            : GemmUncompressed(a, b, spec);
}

Matrix ScalarGemmOracle(const Matrix& a, const Matrix& b,
                        AccumulationOrder order) {
  if (a.width() != ElementWidth::kB32 || b.width() != ElementWidth::kB32) {
    throw DimensionError("scalar oracle expects binary32 operands");
  }
  if (a.cols() != b.rows()) {
    throw DimensionError(fmt::format("cannot multiply {}x{} by {}x{}", a.rows(),
                                     a.cols(), b.rows(), b.cols()));
  }
  const size_t n = a.rows(), inner = a.cols(), m = b.cols();
  std::vector<float> acc(m);
  Matrix c(n, m, ElementWidth::kB32);
  for (size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0f);
    const bool ascending = RowAscending(order, i);
    for (size_t step = 0; step < inner; ++step) {
      const size_t k = ascending ? step : inner - 1 - step;
      const float aik = BitsToFloat(Binary32Bits{a.bits(i, k)});
      for (size_t j = 0; j < m; ++j) {
        acc[j] = std::fma(aik, BitsToFloat(Binary32Bits{b.bits(k, j)}), acc[j]);
      }
    }
    for (size_t j = 0; j < m; ++j) c.set_bits(i, j, FloatToBits(acc[j]).bits);
  }
  return c;
}

Matrix CompressedGemmOracle(const Matrix& a, const Matrix& b, FillMode fill,
                            AccumulationOrder order) {
  return CompressMatrix(
      ScalarGemmOracle(DecompressMatrix(a, fill), DecompressMatrix(b, fill), order));
}

std::map<std::string, uint64_t> InstructionCensus(const Trace& trace) {
  std::array<uint64_t, kNumOpcodes> counts{};
  for (const TraceRecord& r : trace.records) ++counts[static_cast<size_t>(r.op)];
  std::map<std::string, uint64_t> out;
  for (size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] != 0) out[std::string(Mnemonic(static_cast<Opcode>(i)))] = counts[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix files.

namespace {

constexpr uint32_t kMatrixMagic = 0x54414D56;  // "VMAT" little-endian

void PutU32(std::ostream& os, uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v), static_cast<char>(v >> 8),
                                 static_cast<char>(v >> 16),
                                 static_cast<char>(v >> 24)};
  os.write(b.data(), 4);
}

uint32_t GetU32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw std::runtime_error("truncated matrix header");
  }
  return uint32_t{b[0]} | uint32_t{b[1]} << 8 | uint32_t{b[2]} << 16 |
         uint32_t{b[3]} << 24;
}

}  // namespace

void WriteMatrixBinary(std::ostream& os, const Matrix& m) {
  PutU32(os, kMatrixMagic);
  PutU32(os, static_cast<uint32_t>(m.rows()));
  PutU32(os, static_cast<uint32_t>(m.cols()));
  PutU32(os, static_cast<uint32_t>(m.width()));
  const auto bytes = m.ToBytes();
  os.write(reinterpret_cast<const char*>(bytes.data()),
           static_cast<std::streamsize>(bytes.size()));
}

Matrix ReadMatrixBinary(std::istream& is) {
  if (GetU32(is) != kMatrixMagic) throw std::runtime_error("bad matrix magic");
  const uint32_t rows = GetU32(is);
  const uint32_t cols = GetU32(is);
  const uint32_t width = GetU32(is);
  if (width != 16 && width != 32) {
    throw std::runtime_error(fmt::format("unsupported element width {}", width));
  }
  std::vector<uint8_t> bytes(size_t{rows} * cols * (width / 8));
  if (!is.read(reinterpret_cast<char*>(bytes.data()),
               static_cast<std::streamsize>(bytes.size()))) {
    throw std::runtime_error("truncated matrix payload");
  }
  return Matrix::FromBytes(rows, cols, static_cast<ElementWidth>(width), bytes);
}

void WriteMatrixCsv(std::ostream& os, const Matrix& m) {
  for (size_t r = 0; r < m.rows(); ++r) {
    for (size_t c = 0; c < m.cols(); ++c) {
      if (c) os << ',';
      os << fmt::format("{:.9g}", m.value(r, c));
    }
    os << '\n';
  }
}

Matrix ReadMatrixCsv(std::istream& is, ElementWidth width) {
  std::vector<float> values;
  size_t rows = 0, cols = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    size_t count = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        size_t used = 0;
        values.push_back(std::stof(cell, &used));
      } catch (const std::exception&) {
        throw std::runtime_error(
            fmt::format("matrix csv line {}: bad value '{}'", line_no, cell));
      }
      ++count;
    }
    if (rows == 0) cols = count;
    if (count != cols) {
      throw DimensionError(fmt::format(
          "matrix csv line {}: {} columns, expected {}", line_no, count, cols));
    }
    ++rows;
  }
  Matrix m = Matrix::FromFloats(rows, cols, values);
  return width == ElementWidth::kBf16 ? CompressMatrix(m) : m;
}

}  // namespace vcomp
