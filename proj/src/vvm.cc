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

#include "vcomp/vvm.h"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace vcomp {

namespace {

constexpr std::array<std::string_view, kNumOpcodes> kMnemonics = {
    "vsetvli",   "vle16",     "vle32",     "vse16",      "vse32",
    "vwmulu_sc", "vnsrl_imm", "vfmacc_sc", "vfmv_splat",
};

}  // namespace

std::string_view Mnemonic(Opcode op) {
  return kMnemonics[static_cast<size_t>(op)];
}

std::optional<Opcode> ParseMnemonic(std::string_view name) {
  for (size_t i = 0; i < kMnemonics.size(); ++i) {
    if (kMnemonics[i] == name) return static_cast<Opcode>(i);
  }
  return std::nullopt;
}

bool IsLoad(Opcode op) { return op == Opcode::kVle16 || op == Opcode::kVle32; }
bool IsStore(Opcode op) { return op == Opcode::kVse16 || op == Opcode::kVse32; }

bool IsSupportedSew(uint32_t sew) {
  return sew == 8 || sew == 16 || sew == 32 || sew == 64;
}

// ---------------------------------------------------------------------------
// Instruction constructors.

Instr Instr::Vsetvli(uint32_t avl, uint32_t sew) {
  Instr i;
  i.op = Opcode::kVsetvli;
  i.imm = avl;
  i.sew = sew;
  return i;
}

Instr Instr::Vle(int width, uint8_t vd, uint64_t addr) {
  Instr i;
  i.op = width == 16 ? Opcode::kVle16 : Opcode::kVle32;
  i.vd = vd;
  i.addr = addr;
  return i;
}

Instr Instr::Vse(int width, uint8_t vs, uint64_t addr) {
  Instr i;
  i.op = width == 16 ? Opcode::kVse16 : Opcode::kVse32;
  i.vd = vs;
  i.addr = addr;
  return i;
}

Instr Instr::VwmuluSc(uint8_t vd, uint8_t vs, uint32_t multiplier) {
  Instr i;
  i.op = Opcode::kVwmuluSc;
  i.vd = vd;
  i.vs = vs;
  i.imm = multiplier;
  return i;
}

Instr Instr::VnsrlImm(uint8_t vd, uint8_t vs, uint32_t shamt) {
  Instr i;
  i.op = Opcode::kVnsrlImm;
  i.vd = vd;
  i.vs = vs;
  i.imm = shamt;
  return i;
}

Instr Instr::VfmaccSc(uint8_t acc, float scalar, uint8_t vs) {
  Instr i;
  i.op = Opcode::kVfmaccSc;
  i.vd = acc;
  i.vs = vs;
  i.imm = std::bit_cast<uint32_t>(scalar);
  return i;
}

Instr Instr::VfmaccScMem(uint8_t acc, ScalarSource source, uint64_t addr,
                         uint8_t vs) {
  Instr i;
  i.op = Opcode::kVfmaccSc;
  i.vd = acc;
  i.vs = vs;
  i.scalar = source;
  i.addr = addr;
  return i;
}

Instr Instr::VfmvSplat(uint8_t vd, float scalar) {
  Instr i;
  i.op = Opcode::kVfmvSplat;
  i.vd = vd;
  i.imm = std::bit_cast<uint32_t>(scalar);
  return i;
}

// ---------------------------------------------------------------------------
// Trace text format.

TraceFormatError::TraceFormatError(int line, const std::string& what)
    : std::runtime_error(fmt::format("trace line {}: {}", line, what)),
      line_(line) {}

namespace {

std::string RegField(uint8_t r) {
  return r == kNoReg ? std::string("-") : std::to_string(r);
}

template <typename T>
bool ParseUnsigned(std::string_view s, T& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::vector<std::string_view> Split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

void WriteTrace(std::ostream& os, const Trace& trace) {
  os << "# vlen_bits=" << trace.vlen_bits << "\n";
  os << "seq,mnemonic,sew,vl,bytes,base,regs,scalar_ops\n";
  std::string line;
  for (const TraceRecord& r : trace.records) {
    line.clear();
    fmt::format_to(std::back_inserter(line), "{},{},{},{},{},{},{}:{}:{},{}\n",
                   r.seq, Mnemonic(r.op), r.sew, r.vl, r.bytes, r.base,
                   RegField(r.dst), RegField(r.src1), RegField(r.src2),
                   r.scalar_ops);
    os << line;
  }
}

Trace ReadTrace(std::istream& is) {
  Trace trace;
  std::string line;
  int line_no = 0;
  bool have_vlen = false;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      constexpr std::string_view kKey = "# vlen_bits=";
      if (line.rfind(kKey, 0) == 0) {
        if (!ParseUnsigned(std::string_view(line).substr(kKey.size()),
                           trace.vlen_bits)) {
          throw TraceFormatError(line_no, "bad vlen_bits value");
        }
        have_vlen = true;
      }
      continue;
    }
    if (!have_header) {
      if (line != "seq,mnemonic,sew,vl,bytes,base,regs,scalar_ops") {
        throw TraceFormatError(line_no, "expected column header");
      }
      have_header = true;
      continue;
    }
    const auto cols = Split(line, ',');
    if (cols.size() != 8) {
      throw TraceFormatError(line_no, fmt::format("expected 8 columns, got {}",
                                                  cols.size()));
    }
    TraceRecord r;
    const auto op = ParseMnemonic(cols[1]);
    if (!op) {
      throw TraceFormatError(line_no,
                             fmt::format("unknown mnemonic '{}'", cols[1]));
    }
    r.op = *op;
    if (!ParseUnsigned(cols[0], r.seq) || !ParseUnsigned(cols[2], r.sew) ||
        !ParseUnsigned(cols[3], r.vl) || !ParseUnsigned(cols[4], r.bytes) ||
        !ParseUnsigned(cols[5], r.base) ||
        !ParseUnsigned(cols[7], r.scalar_ops)) {
      throw TraceFormatError(line_no, "malformed numeric field");
    }
    const auto regs = Split(cols[6], ':');
    if (regs.size() != 3) {
      throw TraceFormatError(line_no, "regs must be dst:src1:src2");
    }
    std::array<uint8_t*, 3> slots = {&r.dst, &r.src1, &r.src2};
    for (size_t i = 0; i < 3; ++i) {
      if (regs[i] == "-") continue;
      unsigned v = 0;
      if (!ParseUnsigned(regs[i], v) || v >= MachineShape::kNumVregs) {
        throw TraceFormatError(line_no, "bad register id");
      }
      *slots[i] = static_cast<uint8_t>(v);
    }
    if (IsMemory(r.op)) r.stride = r.op == Opcode::kVle16 || r.op == Opcode::kVse16 ? 2 : 4;
    trace.records.push_back(r);
  }
  if (!have_vlen) throw TraceFormatError(line_no, "missing '# vlen_bits=' line");
  if (!have_header) throw TraceFormatError(line_no, "missing column header");
  return trace;
}

// ---------------------------------------------------------------------------
// Machine state.

MachineShape::MachineShape(uint32_t vlen) : vlen_bits(vlen) {
  if (vlen == 0 || vlen % 64 != 0) {
    throw std::invalid_argument(
        fmt::format("vlen_bits must be a positive multiple of 64, got {}", vlen));
  }
}

VvmFault::VvmFault(size_t position, Opcode op, const std::string& cause)
    : std::runtime_error(fmt::format("fault at instruction {} ({}): {}",
                                     position, Mnemonic(op), cause)),
      position_(position),
      op_(op),
      cause_(cause) {}

VvmState::VvmState(MachineShape shape, size_t memory_bytes)
    : shape_(shape),
      regs_(static_cast<size_t>(MachineShape::kNumVregs) * shape.vlen_bytes()),
      memory_(memory_bytes) {}

std::span<uint8_t> VvmState::vreg(int index) {
  return std::span<uint8_t>(regs_).subspan(
      static_cast<size_t>(index) * shape_.vlen_bytes(), shape_.vlen_bytes());
}

std::span<const uint8_t> VvmState::vreg(int index) const {
  return std::span<const uint8_t>(regs_).subspan(
      static_cast<size_t>(index) * shape_.vlen_bytes(), shape_.vlen_bytes());
}

uint32_t VvmState::ReadElement(int reg, int width, uint32_t index) const {
  const auto r = vreg(reg);
  const size_t bytes = static_cast<size_t>(width) / 8;
  uint32_t v = 0;
  for (size_t b = 0; b < bytes; ++b) {
    v |= static_cast<uint32_t>(r[index * bytes + b]) << (8 * b);
  }
  return v;
}

void VvmState::WriteElement(int reg, int width, uint32_t index, uint32_t value) {
  auto r = vreg(reg);
  const size_t bytes = static_cast<size_t>(width) / 8;
  for (size_t b = 0; b < bytes; ++b) {
    r[index * bytes + b] = static_cast<uint8_t>(value >> (8 * b));
  }
}

void VvmState::WriteMemory(uint64_t addr, std::span<const uint8_t> bytes) {
  if (addr > memory_.size() || bytes.size() > memory_.size() - addr) {
    throw std::out_of_range(fmt::format("write of {} bytes at {} exceeds memory",
                                        bytes.size(), addr));
  }
  std::copy(bytes.begin(), bytes.end(), memory_.begin() + addr);
}

void VvmState::ReadMemory(uint64_t addr, std::span<uint8_t> out) const {
  if (addr > memory_.size() || out.size() > memory_.size() - addr) {
    throw std::out_of_range(fmt::format("read of {} bytes at {} exceeds memory",
                                        out.size(), addr));
  }
  std::copy_n(memory_.begin() + addr, out.size(), out.begin());
}

uint32_t VvmState::SetVl(uint32_t avl, uint32_t sew) {
  if (!IsSupportedSew(sew)) {
    throw std::invalid_argument(fmt::format("unsupported sew {}", sew));
  }
  sew_ = sew;
  vl_ = std::min(avl, shape_.vlmax(sew));
  return vl_;
}

// ---------------------------------------------------------------------------
// Execution.

namespace {

// All element data is little-endian, so a host memcpy is a faithful view on
// the x86/ARM hosts this runs on.
static_assert(std::endian::native == std::endian::little);

class Executor {
 public:
  Executor(VvmState& state, Trace& trace) : s_(state), trace_(trace) {}

  void Step(size_t pos, const Instr& in) {
    pos_ = pos;
    op_ = in.op;
    TraceRecord rec;
    rec.seq = static_cast<uint32_t>(trace_.records.size());
    rec.op = in.op;
    rec.scalar_ops = in.scalar_ops;
    switch (in.op) {
      case Opcode::kVsetvli:
        if (!IsSupportedSew(in.sew)) Fault(fmt::format("unsupported sew {}", in.sew));
        s_.SetVl(in.imm, in.sew);
        break;
      case Opcode::kVle16:
      case Opcode::kVle32:
        Load(in, in.op == Opcode::kVle16 ? 16 : 32, rec);
        break;
      case Opcode::kVse16:
      case Opcode::kVse32:
        Store(in, in.op == Opcode::kVse16 ? 16 : 32, rec);
        break;
      case Opcode::kVwmuluSc:
        WidenMul(in, rec);
        break;
      case Opcode::kVnsrlImm:
        NarrowShift(in, rec);
        break;
      case Opcode::kVfmaccSc:
        Fmacc(in, rec);
        break;
      case Opcode::kVfmvSplat:
        Splat(in, rec);
        break;
    }
    rec.sew = s_.sew();
    rec.vl = s_.vl();
    trace_.records.push_back(rec);
  }

 private:
  [[noreturn]] void Fault(const std::string& cause) const {
    throw VvmFault(pos_, op_, cause);
  }

  void CheckReg(uint8_t r) const {
    if (r >= MachineShape::kNumVregs) Fault(fmt::format("register v{} out of range", r));
  }

  void RequireWideFits() const {
    if (uint64_t{s_.vl()} * 4 > s_.shape().vlen_bytes())
      Fault(fmt::format("vl {} too long for a 32-bit wide operand", s_.vl()));
  }

  void RequireSew(uint32_t sew) const {
    if (s_.sew() != sew) {
      Fault(fmt::format("requires sew={}, active sew={}", sew, s_.sew()));
    }
  }

  void CheckRange(uint64_t addr, uint64_t bytes) const {
    const uint64_t size = s_.memory().size();
    if (addr > size || bytes > size - addr) {
      Fault(fmt::format("access [{}, {}) outside memory of {} bytes", addr,
                        addr + bytes, size));
    }
  }

  void Load(const Instr& in, int width, TraceRecord& rec) {
    CheckReg(in.vd);
    RequireSew(static_cast<uint32_t>(width));
    const uint64_t bytes = uint64_t{s_.vl()} * (width / 8);
    CheckRange(in.addr, bytes);
    std::memcpy(s_.vreg(in.vd).data(), s_.memory().data() + in.addr, bytes);
    rec.dst = in.vd;
    rec.bytes = static_cast<uint32_t>(bytes);
    rec.stride = static_cast<uint32_t>(width / 8);
    rec.base = in.addr;
  }

  void Store(const Instr& in, int width, TraceRecord& rec) {
    CheckReg(in.vd);
    RequireSew(static_cast<uint32_t>(width));
    const uint64_t bytes = uint64_t{s_.vl()} * (width / 8);
    CheckRange(in.addr, bytes);
    std::memcpy(s_.memory().data() + in.addr, s_.vreg(in.vd).data(), bytes);
    rec.src1 = in.vd;
    rec.bytes = static_cast<uint32_t>(bytes);
    rec.stride = static_cast<uint32_t>(width / 8);
    rec.base = in.addr;
  }

  // 16-bit elements, zero-extended, times a full 32-bit unsigned scalar;
  // the product is kept modulo 2^32.
  void WidenMul(const Instr& in, TraceRecord& rec) {
    CheckReg(in.vd);
    CheckReg(in.vs);
    RequireSew(16);
    RequireWideFits();
    const uint32_t vl = s_.vl();
    std::vector<uint16_t> src(vl);
    std::memcpy(src.data(), s_.vreg(in.vs).data(), vl * sizeof(uint16_t));
    std::vector<uint32_t> dst(vl);
    for (uint32_t i = 0; i < vl; ++i) dst[i] = uint32_t{src[i]} * in.imm;
    std::memcpy(s_.vreg(in.vd).data(), dst.data(), vl * sizeof(uint32_t));
    rec.dst = in.vd;
    rec.src1 = in.vs;
  }

  void NarrowShift(const Instr& in, TraceRecord& rec) {
    CheckReg(in.vd);
    CheckReg(in.vs);
    RequireSew(16);
    if (in.imm >= 32) Fault(fmt::format("shift amount {} >= 32", in.imm));
    RequireWideFits();
    const uint32_t vl = s_.vl();
    std::vector<uint32_t> src(vl);
    std::memcpy(src.data(), s_.vreg(in.vs).data(), vl * sizeof(uint32_t));
    std::vector<uint16_t> dst(vl);
    for (uint32_t i = 0; i < vl; ++i) dst[i] = static_cast<uint16_t>(src[i] >> in.imm);
    std::memcpy(s_.vreg(in.vd).data(), dst.data(), vl * sizeof(uint16_t));
    rec.dst = in.vd;
    rec.src1 = in.vs;
  }

  float ScalarOperand(const Instr& in) const {
    switch (in.scalar) {
      case ScalarSource::kImmediate:
        return std::bit_cast<float>(in.imm);
      case ScalarSource::kMemF32: {
        CheckRange(in.addr, 4);
        uint32_t bits = 0;
        std::memcpy(&bits, s_.memory().data() + in.addr, 4);
        return std::bit_cast<float>(bits);
      }
      case ScalarSource::kMemBf16ZeroPad:
      case ScalarSource::kMemBf16Replicate: {
        CheckRange(in.addr, 2);
        uint16_t half = 0;
        std::memcpy(&half, s_.memory().data() + in.addr, 2);
        uint32_t bits = uint32_t{half} << 16;
        if (in.scalar == ScalarSource::kMemBf16Replicate) bits |= half;
        return std::bit_cast<float>(bits);
      }
    }
    return 0.0f;
  }

  void Fmacc(const Instr& in, TraceRecord& rec) {
    CheckReg(in.vd);
    CheckReg(in.vs);
    RequireSew(32);
    const float scalar = ScalarOperand(in);
    const uint32_t vl = s_.vl();
    std::vector<float> acc(vl), src(vl);
    std::memcpy(acc.data(), s_.vreg(in.vd).data(), vl * sizeof(float));
    std::memcpy(src.data(), s_.vreg(in.vs).data(), vl * sizeof(float));
    for (uint32_t i = 0; i < vl; ++i) acc[i] = std::fma(scalar, src[i], acc[i]);
    std::memcpy(s_.vreg(in.vd).data(), acc.data(), vl * sizeof(float));
    rec.dst = in.vd;
    rec.src1 = in.vd;
    rec.src2 = in.vs;
  }

  void Splat(const Instr& in, TraceRecord& rec) {
    CheckReg(in.vd);
    RequireSew(32);
    const uint32_t vl = s_.vl();
    auto reg = s_.vreg(in.vd);
    for (uint32_t i = 0; i < vl; ++i) std::memcpy(reg.data() + 4 * i, &in.imm, 4);
    rec.dst = in.vd;
  }

  VvmState& s_;
  Trace& trace_;
  size_t pos_ = 0;
  Opcode op_ = Opcode::kVsetvli;
};

}  // namespace

Trace Execute(std::span<const Instr> program, VvmState& state) {
  Trace trace;
  trace.vlen_bits = state.shape().vlen_bits;
  trace.records.reserve(program.size());
  Executor exec(state, trace);
  for (size_t i = 0; i < program.size(); ++i) exec.Step(i, program[i]);
  return trace;
}

}  // namespace vcomp
