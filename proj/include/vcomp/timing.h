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

#ifndef VCOMP_TIMING_H_
#define VCOMP_TIMING_H_

// Trace-driven timing model.
//
// Memory: one fully-associative LRU L1 of l1_size bytes in l1_line blocks in
// front of a memory with a fixed latency and a single transfer channel.
// Loads and stores are both write-allocate; evictions are free. Whether an
// access hits depends only on trace order, so the cache pass is computed once
// per (trace, l1 geometry) and reused across timing configurations.
//
// Core: instructions enter a reorder buffer in trace order, one per cycle,
// once a slot is free (at most rob_entries in flight; slots free at in-order
// commit). An instruction starts once its source registers' producers have
// completed and the last vsetvli has completed. Registers are renamed, so
// only true dependences stall. Completion is out of order.
//
// Costs, with ns converted to cycles as ceil(ns * clock):
//   vsetvli                  instr_latency[vsetvli]
//   arithmetic               instr_latency[op], on a single vector ALU that
//                            serves instructions in trace order and stays
//                            busy for the whole latency
//   memory, every line hits  l1_latency
//   memory, any line misses  mem_latency + ceil(missed_bytes / bandwidth),
//                            where missed_bytes = missed lines * l1_line; the
//                            transfer part is serialized on the memory channel
//                            in trace order
//
// The standalone cost of an instruction is the figure above without any
// waiting. Phase aggregates sum standalone costs by phase, so with
// rob_entries = 1 the total equals the sum of all standalone costs.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "vcomp/vvm.h"

namespace vcomp {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MachineConfig {
  uint64_t l1_size_bytes = 512 * 1024;
  uint64_t l1_line_bytes = 64;
  double l1_latency_ns = 20.0;
  double mem_latency_ns = 60.0;
  double mem_bandwidth_bytes_per_s = 10e9;
  uint32_t rob_entries = 64;
  double clock_hz = 1e9;
  // Indexed by Opcode. Entries for loads and stores are not used; their cost
  // comes from the memory model.
  std::array<uint32_t, kNumOpcodes> instr_latency_cycles;

  MachineConfig();

  // Sets the latency of both vnsrl_imm and vwmulu_sc.
  void SetConversionLatency(uint32_t cycles);
  uint32_t latency(Opcode op) const {
    return instr_latency_cycles[static_cast<size_t>(op)];
  }

  // Throws ConfigError when a field is out of range.
  void Validate() const;

  uint64_t L1Cycles() const;
  uint64_t MemCycles() const;
  uint64_t TransferCycles(uint64_t bytes) const;

  friend bool operator==(const MachineConfig&, const MachineConfig&) = default;
};

// Flat `key = value` text, `#` starts a comment. Keys: l1_size_bytes,
// l1_line_bytes, l1_latency_ns, mem_latency_ns, mem_bandwidth_bytes_per_s,
// rob_entries, clock_hz, instr_latency_cycles.<mnemonic> and the shorthand
// conv_latency_cycles (vnsrl_imm and vwmulu_sc together). Unset keys keep
// their defaults. Errors name the offending line.
MachineConfig ParseMachineConfig(std::istream& is);
void WriteMachineConfig(std::ostream& os, const MachineConfig& config);
// Applies a single key; returns false for an unknown key, throws ConfigError
// for a malformed value.
bool ApplyConfigKey(MachineConfig& config, const std::string& key,
                    const std::string& value);

// Hit/miss outcome of every trace record for one L1 geometry.
struct CacheProfile {
  uint64_t l1_size_bytes = 0;
  uint64_t l1_line_bytes = 0;
  std::vector<uint32_t> missed_lines;  // per record; 0 for non-memory
  uint64_t op_hits = 0;                // memory ops with no missed line
  uint64_t op_misses = 0;
  uint64_t line_hits = 0;
  uint64_t line_misses = 0;
};

CacheProfile ProfileCache(const Trace& trace, uint64_t l1_size_bytes,
                          uint64_t l1_line_bytes);

// Aggregates of standalone costs by phase.
struct PhaseTimes {
  uint64_t t_load = 0;     // vle32
  uint64_t t_cload = 0;    // vle16
  uint64_t t_unpack = 0;   // vwmulu_sc
  uint64_t t_pack = 0;     // vnsrl_imm
  uint64_t t_store = 0;    // vse32
  uint64_t t_cstore = 0;   // vse16
  uint64_t t_proc = 0;     // vfmacc_sc, vfmv_splat
  uint64_t t_config = 0;   // vsetvli

  uint64_t Sum() const {
    return t_load + t_cload + t_unpack + t_pack + t_store + t_cstore + t_proc +
           t_config;
  }
};

struct TimingReport {
  uint64_t total_cycles = 0;
  uint64_t serialized_cycles = 0;  // sum of standalone costs
  uint64_t instructions = 0;
  std::array<uint64_t, kNumOpcodes> op_count{};
  std::array<uint64_t, kNumOpcodes> op_cycles{};
  uint64_t l1_hits = 0;
  uint64_t l1_misses = 0;
  uint64_t line_hits = 0;
  uint64_t line_misses = 0;
  PhaseTimes phases;

  // `metric,value` rows.
  void WriteCsv(std::ostream& os) const;
  void WriteSummary(std::ostream& os) const;
};

// Throws ConfigError for an invalid config.
TimingReport Simulate(const Trace& trace, const MachineConfig& config);
// Reuses a cache profile computed for config's L1 geometry; throws
// std::invalid_argument when the geometry or record count does not match.
TimingReport Simulate(const Trace& trace, const MachineConfig& config,
                      const CacheProfile& profile);

struct ImprovementResult {
  uint64_t cycles_c = 0;
  uint64_t cycles_u = 0;
  double improvement = 0.0;  // percent
};

// 100 * (1 - cycles_c / cycles_u). Throws std::domain_error for cycles_u == 0.
ImprovementResult ComputeImprovement(uint64_t cycles_c, uint64_t cycles_u);
// Throws std::invalid_argument if the traces were made for different VLEN.
ImprovementResult Improvement(const Trace& trace_c, const Trace& trace_u,
                              const MachineConfig& config);

struct InequalityCheck {
  uint64_t t_cload = 0;
  uint64_t t_unpack = 0;
  uint64_t t_load = 0;
  uint64_t t_pack = 0;
  uint64_t t_cstore = 0;
  uint64_t t_store = 0;
  bool load_side = false;   // t_cload + t_unpack < t_load
  bool store_side = false;  // t_pack + t_cstore < t_store
};

InequalityCheck CheckInequalities(const PhaseTimes& compressed,
                                  const PhaseTimes& uncompressed);
inline InequalityCheck CheckInequalities(const TimingReport& compressed,
                                         const TimingReport& uncompressed) {
  return CheckInequalities(compressed.phases, uncompressed.phases);
}

}  // namespace vcomp

#endif  // VCOMP_TIMING_H_
