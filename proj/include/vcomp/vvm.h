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

#ifndef VCOMP_VVM_H_
#define VCOMP_VVM_H_

// A small vector-length-agnostic vector machine. It executes the handful of
// RVV-style instructions the GEMM kernels need, in order and functionally,
// and records one TraceRecord per committed vector instruction. Scalar code
// between vector instructions is not executed; each instruction carries a
// count of the scalar operations that precede it.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vcomp {

enum class Opcode : uint8_t {
  kVsetvli,
  kVle16,
  kVle32,
  kVse16,
  kVse32,
  kVwmuluSc,
  kVnsrlImm,
  kVfmaccSc,
  kVfmvSplat,
};

inline constexpr int kNumOpcodes = 9;

std::string_view Mnemonic(Opcode op);
std::optional<Opcode> ParseMnemonic(std::string_view name);
bool IsLoad(Opcode op);
bool IsStore(Opcode op);
inline bool IsMemory(Opcode op) { return IsLoad(op) || IsStore(op); }

// Where vfmacc_sc takes its binary32 scalar from. The memory forms model the
// scalar code that loads an element of A (and, for bfloat16, widens it).
enum class ScalarSource : uint8_t {
  kImmediate,        // `imm` holds binary32 bits
  kMemF32,           // 32-bit load from `addr`
  kMemBf16ZeroPad,   // 16-bit load from `addr`, shifted left by 16
  kMemBf16Replicate, // 16-bit load from `addr`, copied into both halves
};

struct Instr {
  Opcode op = Opcode::kVsetvli;
  uint8_t vd = 0;  // destination; the data register for stores
  uint8_t vs = 0;  // source
  ScalarSource scalar = ScalarSource::kImmediate;
  uint32_t sew = 0;  // vsetvli only
  uint32_t imm = 0;  // avl, shift amount, multiplier or binary32 scalar bits
  uint64_t addr = 0;
  uint32_t scalar_ops = 0;  // scalar operations since the previous instruction

  static Instr Vsetvli(uint32_t avl, uint32_t sew);
  static Instr Vle(int width, uint8_t vd, uint64_t addr);
  static Instr Vse(int width, uint8_t vs, uint64_t addr);
  static Instr VwmuluSc(uint8_t vd, uint8_t vs, uint32_t multiplier);
  static Instr VnsrlImm(uint8_t vd, uint8_t vs, uint32_t shamt);
  static Instr VfmaccSc(uint8_t acc, float scalar, uint8_t vs);
  static Instr VfmaccScMem(uint8_t acc, ScalarSource source, uint64_t addr,
                           uint8_t vs);
  static Instr VfmvSplat(uint8_t vd, float scalar);

  Instr& WithScalarOps(uint32_t n) {
    scalar_ops = n;
    return *this;
  }
};

using Program = std::vector<Instr>;

inline constexpr uint8_t kNoReg = 0xFF;

struct TraceRecord {
  uint32_t seq = 0;
  Opcode op = Opcode::kVsetvli;
  uint8_t dst = kNoReg;
  uint8_t src1 = kNoReg;
  uint8_t src2 = kNoReg;
  uint32_t sew = 0;
  uint32_t vl = 0;
  uint32_t bytes = 0;  // vl * element bytes for memory ops, else 0
  uint32_t stride = 0;  // element bytes for memory ops (unit stride)
  uint64_t base = 0;
  uint32_t scalar_ops = 0;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct Trace {
  uint32_t vlen_bits = 0;
  std::vector<TraceRecord> records;

  friend bool operator==(const Trace&, const Trace&) = default;
};

class TraceFormatError : public std::runtime_error {
 public:
  TraceFormatError(int line, const std::string& what);
  int line() const { return line_; }

 private:
  int line_;
};

// Text form: `# vlen_bits=N`, then `seq,mnemonic,sew,vl,bytes,base,regs,scalar_ops`
// rows. `regs` is `dst:src1:src2` with `-` for an unused slot.
void WriteTrace(std::ostream& os, const Trace& trace);
Trace ReadTrace(std::istream& is);

struct MachineShape {
  static constexpr int kNumVregs = 32;

  // Throws std::invalid_argument unless vlen_bits is a positive multiple of 64.
  explicit MachineShape(uint32_t vlen_bits);

  uint32_t vlen_bits;
  uint32_t vlen_bytes() const { return vlen_bits / 8; }
  uint32_t vlmax(uint32_t sew) const { return vlen_bits / sew; }

  friend bool operator==(const MachineShape&, const MachineShape&) = default;
};

bool IsSupportedSew(uint32_t sew);

// Raised when execution cannot continue. Carries the program position.
class VvmFault : public std::runtime_error {
 public:
  VvmFault(size_t position, Opcode op, const std::string& cause);
  size_t position() const { return position_; }
  Opcode op() const { return op_; }
  const std::string& cause() const { return cause_; }

 private:
  size_t position_;
  Opcode op_;
  std::string cause_;
};

class VvmState {
 public:
  VvmState(MachineShape shape, size_t memory_bytes);

  const MachineShape& shape() const { return shape_; }
  uint32_t vl() const { return vl_; }
  uint32_t sew() const { return sew_; }

  std::span<uint8_t> memory() { return memory_; }
  std::span<const uint8_t> memory() const { return memory_; }
  std::span<uint8_t> vreg(int index);
  std::span<const uint8_t> vreg(int index) const;

  // Element accessors over a register viewed at `width` bits.
  uint32_t ReadElement(int reg, int width, uint32_t index) const;
  void WriteElement(int reg, int width, uint32_t index, uint32_t value);

  void WriteMemory(uint64_t addr, std::span<const uint8_t> bytes);
  void ReadMemory(uint64_t addr, std::span<uint8_t> out) const;

  // Applies vsetvli semantics directly. Throws std::invalid_argument for an
  // unsupported sew.
  uint32_t SetVl(uint32_t avl, uint32_t sew);

  friend bool operator==(const VvmState&, const VvmState&) = default;

 private:
  MachineShape shape_;
  uint32_t vl_ = 0;
  uint32_t sew_ = 0;
  std::vector<uint8_t> regs_;
  std::vector<uint8_t> memory_;
};

// Executes `program` against `state`, returning the committed-instruction
// trace. Throws VvmFault on the first faulting instruction; `state` then
// reflects every instruction before it.
Trace Execute(std::span<const Instr> program, VvmState& state);

}  // namespace vcomp

#endif  // VCOMP_VVM_H_
