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

#include "vcomp/timing.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include <fmt/format.h>

namespace vcomp {

namespace {

// ceil() that forgives representation noise around integers, so 20 ns at
// 1 GHz is 20 cycles even if the product lands a hair above 20.
uint64_t CeilCycles(double v) {
  const double r = std::round(v);
  if (std::fabs(v - r) <= 1e-9 * std::max(1.0, std::fabs(r))) {
    return static_cast<uint64_t>(r);
  }
  return static_cast<uint64_t>(std::ceil(v));
}

}  // namespace

MachineConfig::MachineConfig() { instr_latency_cycles.fill(1); }

void MachineConfig::SetConversionLatency(uint32_t cycles) {
  instr_latency_cycles[static_cast<size_t>(Opcode::kVnsrlImm)] = cycles;
  instr_latency_cycles[static_cast<size_t>(Opcode::kVwmuluSc)] = cycles;
}

void MachineConfig::Validate() const {
  if (l1_line_bytes == 0) throw ConfigError("l1_line_bytes must be positive");
  if (l1_size_bytes == 0 || l1_size_bytes % l1_line_bytes != 0) {
    throw ConfigError(fmt::format(
        "l1_size_bytes ({}) must be a positive multiple of l1_line_bytes ({})",
        l1_size_bytes, l1_line_bytes));
  }
  if (!(l1_latency_ns > 0)) throw ConfigError("l1_latency_ns must be positive");
  if (!(mem_latency_ns > 0)) throw ConfigError("mem_latency_ns must be positive");
  if (!(mem_bandwidth_bytes_per_s > 0)) {
    throw ConfigError("mem_bandwidth_bytes_per_s must be positive");
  }
  if (!(clock_hz > 0)) throw ConfigError("clock_hz must be positive");
  if (rob_entries == 0) throw ConfigError("rob_entries must be positive");
  for (size_t i = 0; i < instr_latency_cycles.size(); ++i) {
    const auto op = static_cast<Opcode>(i);
    if (!IsMemory(op) && instr_latency_cycles[i] == 0) {
      throw ConfigError(fmt::format("instr_latency_cycles.{} must be positive",
                                    Mnemonic(op)));
    }
  }
}

uint64_t MachineConfig::L1Cycles() const {
  return CeilCycles(l1_latency_ns * (clock_hz / 1e9));
}

uint64_t MachineConfig::MemCycles() const {
  return CeilCycles(mem_latency_ns * (clock_hz / 1e9));
}

uint64_t MachineConfig::TransferCycles(uint64_t bytes) const {
  return CeilCycles(static_cast<double>(bytes) * clock_hz /
                    mem_bandwidth_bytes_per_s);
}

// ---------------------------------------------------------------------------
// Config files.

namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double ParseNumber(const std::string& key, const std::string& value) {
  double v = 0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ConfigError(fmt::format("{}: '{}' is not a number", key, value));
  }
  return v;
}

uint64_t ParseCount(const std::string& key, const std::string& value) {
  const double v = ParseNumber(key, value);
  if (v < 0 || v != std::floor(v) || v > 1e18) {
    throw ConfigError(fmt::format("{}: '{}' is not a nonnegative integer", key, value));
  }
  return static_cast<uint64_t>(v);
}

}  // namespace

bool ApplyConfigKey(MachineConfig& c, const std::string& key,
                    const std::string& value) {
  if (key == "l1_size_bytes") {
    c.l1_size_bytes = ParseCount(key, value);
  } else if (key == "l1_line_bytes") {
    c.l1_line_bytes = ParseCount(key, value);
  } else if (key == "l1_latency_ns") {
    c.l1_latency_ns = ParseNumber(key, value);
  } else if (key == "mem_latency_ns") {
    c.mem_latency_ns = ParseNumber(key, value);
  } else if (key == "mem_bandwidth_bytes_per_s") {
    c.mem_bandwidth_bytes_per_s = ParseNumber(key, value);
  } else if (key == "rob_entries") {
    c.rob_entries = static_cast<uint32_t>(ParseCount(key, value));
  } else if (key == "clock_hz") {
    c.clock_hz = ParseNumber(key, value);
  } else if (key == "conv_latency_cycles") {
    c.SetConversionLatency(static_cast<uint32_t>(ParseCount(key, value)));
  } else if (key.rfind("instr_latency_cycles.", 0) == 0) {
    const auto op = ParseMnemonic(key.substr(std::string("instr_latency_cycles.").size()));
    if (!op) return false;
    c.instr_latency_cycles[static_cast<size_t>(*op)] =
        static_cast<uint32_t>(ParseCount(key, value));
  } else {
    return false;
  }
  return true;
}

MachineConfig ParseMachineConfig(std::istream& is) {
  MachineConfig c;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("config line {}: expected key = value", line_no));
    }
    const std::string key = Trim(line.substr(0, eq));
    const std::string value = Trim(line.substr(eq + 1));
    try {
      if (!ApplyConfigKey(c, key, value)) {
        throw ConfigError(fmt::format("unknown key '{}'", key));
      }
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("config line {}: {}", line_no, e.what()));
    }
  }
  c.Validate();
  return c;
}

void WriteMachineConfig(std::ostream& os, const MachineConfig& c) {
  os << fmt::format("l1_size_bytes = {}\n", c.l1_size_bytes);
  os << fmt::format("l1_line_bytes = {}\n", c.l1_line_bytes);
  os << fmt::format("l1_latency_ns = {}\n", c.l1_latency_ns);
  os << fmt::format("mem_latency_ns = {}\n", c.mem_latency_ns);
  os << fmt::format("mem_bandwidth_bytes_per_s = {}\n", c.mem_bandwidth_bytes_per_s);
  os << fmt::format("rob_entries = {}\n", c.rob_entries);
  os << fmt::format("clock_hz = {}\n", c.clock_hz);
  for (size_t i = 0; i < c.instr_latency_cycles.size(); ++i) {
    const auto op = static_cast<Opcode>(i);
    if (IsMemory(op)) continue;
    os << fmt::format("instr_latency_cycles.{} = {}\n", Mnemonic(op),
                      c.instr_latency_cycles[i]);
  }
}

// ---------------------------------------------------------------------------
// Cache pass.

namespace {

// Fully-associative LRU over line numbers, as an intrusive list threaded
// through flat arrays indexed by line number.
class LruCache {
 public:
  LruCache(uint64_t capacity_lines, uint64_t max_line)
      : capacity_(capacity_lines),
        prev_(max_line + 1, kNil),
        next_(max_line + 1, kNil),
        present_(max_line + 1, 0) {}

  // Returns true on hit; the line becomes most recently used either way.
  bool Touch(uint64_t line) {
    if (present_[line]) {
      Unlink(line);
      PushFront(line);
      return true;
    }
    if (size_ == capacity_) {
      const uint64_t victim = tail_;
      Unlink(victim);
      present_[victim] = 0;
      --size_;
    }
    PushFront(line);
    present_[line] = 1;
    ++size_;
    return false;
  }

 private:
  static constexpr uint64_t kNil = ~uint64_t{0};

  void Unlink(uint64_t x) {
    if (prev_[x] != kNil) next_[prev_[x]] = next_[x]; else head_ = next_[x];
    if (next_[x] != kNil) prev_[next_[x]] = prev_[x]; else tail_ = prev_[x];
    prev_[x] = next_[x] = kNil;
  }

  void PushFront(uint64_t x) {
    prev_[x] = kNil;
    next_[x] = head_;
    if (head_ != kNil) prev_[head_] = x; else tail_ = x;
    head_ = x;
  }

  uint64_t capacity_;
  uint64_t size_ = 0;
  uint64_t head_ = kNil;
  uint64_t tail_ = kNil;
  std::vector<uint64_t> prev_;
  std::vector<uint64_t> next_;
  std::vector<uint8_t> present_;
};

}  // namespace

CacheProfile ProfileCache(const Trace& trace, uint64_t l1_size_bytes,
                          uint64_t l1_line_bytes) {
  if (l1_line_bytes == 0 || l1_size_bytes == 0 || l1_size_bytes % l1_line_bytes) {
    throw ConfigError("l1 size must be a positive multiple of the line size");
  }
  CacheProfile p;
  p.l1_size_bytes = l1_size_bytes;
  p.l1_line_bytes = l1_line_bytes;
  p.missed_lines.assign(trace.records.size(), 0);

  uint64_t max_line = 0;
  for (const TraceRecord& r : trace.records) {
    if (IsMemory(r.op) && r.bytes > 0) {
      max_line = std::max(max_line, (r.base + r.bytes - 1) / l1_line_bytes);
    }
  }
  LruCache cache(l1_size_bytes / l1_line_bytes, max_line);
  for (size_t i = 0; i < trace.records.size(); ++i) {
    const TraceRecord& r = trace.records[i];
    if (!IsMemory(r.op)) continue;
    uint32_t missed = 0;
    if (r.bytes > 0) {
      const uint64_t first = r.base / l1_line_bytes;
      const uint64_t last = (r.base + r.bytes - 1) / l1_line_bytes;
      for (uint64_t line = first; line <= last; ++line) {
        if (cache.Touch(line)) {
          ++p.line_hits;
        } else {
          ++p.line_misses;
          ++missed;
        }
      }
    }
    p.missed_lines[i] = missed;
    if (missed == 0) ++p.op_hits; else ++p.op_misses;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Timing pass.

TimingReport Simulate(const Trace& trace, const MachineConfig& config) {
  config.Validate();
  return Simulate(trace, config,
                  ProfileCache(trace, config.l1_size_bytes, config.l1_line_bytes));
}

TimingReport Simulate(const Trace& trace, const MachineConfig& config,
                      const CacheProfile& profile) {
  config.Validate();
  if (profile.l1_size_bytes != config.l1_size_bytes ||
      profile.l1_line_bytes != config.l1_line_bytes ||
      profile.missed_lines.size() != trace.records.size()) {
    throw std::invalid_argument("cache profile does not match trace and config");
  }

  const uint64_t l1 = config.L1Cycles();
  const uint64_t mem = config.MemCycles();
  const uint32_t rob = config.rob_entries;

  TimingReport rep;
  rep.instructions = trace.records.size();
  rep.l1_hits = profile.op_hits;
  rep.l1_misses = profile.op_misses;
  rep.line_hits = profile.line_hits;
  rep.line_misses = profile.line_misses;

  std::vector<uint64_t> commit_ring(rob, 0);
  std::array<uint64_t, MachineShape::kNumVregs> reg_ready{};
  uint64_t prev_dispatch = 0;
  uint64_t last_commit = 0;
  uint64_t vtype_ready = 0;
  uint64_t alu_free = 0;
  uint64_t bus_free = 0;
  uint64_t transfer_memo_bytes = ~uint64_t{0};
  uint64_t transfer_memo = 0;

  for (size_t i = 0; i < trace.records.size(); ++i) {
    const TraceRecord& r = trace.records[i];
    if (static_cast<size_t>(r.op) >= kNumOpcodes) {
      throw std::invalid_argument(fmt::format("record {}: unknown opcode", i));
    }
    uint64_t dispatch = i == 0 ? 0 : prev_dispatch + 1;
    if (i >= rob) dispatch = std::max(dispatch, commit_ring[i % rob]);
    prev_dispatch = dispatch;

    uint64_t ready = dispatch;
    if (r.op != Opcode::kVsetvli) ready = std::max(ready, vtype_ready);
    for (uint8_t src : {r.src1, r.src2}) {
      if (src != kNoReg) ready = std::max(ready, reg_ready[src]);
    }

    uint64_t cost = 0;
    uint64_t complete = 0;
    switch (r.op) {
      case Opcode::kVsetvli:
        cost = config.latency(r.op);
        complete = ready + cost;
        vtype_ready = complete;
        break;
      case Opcode::kVwmuluSc:
      case Opcode::kVnsrlImm:
      case Opcode::kVfmaccSc:
      case Opcode::kVfmvSplat: {
        cost = config.latency(r.op);
        const uint64_t start = std::max(ready, alu_free);
        complete = start + cost;
        alu_free = complete;
        break;
      }
      case Opcode::kVle16:
      case Opcode::kVle32:
      case Opcode::kVse16:
      case Opcode::kVse32: {
        const uint64_t missed = profile.missed_lines[i];
        if (missed == 0) {
          cost = l1;
          complete = ready + l1;
        } else {
          const uint64_t bytes = missed * config.l1_line_bytes;
          if (bytes != transfer_memo_bytes) {
            transfer_memo_bytes = bytes;
            transfer_memo = config.TransferCycles(bytes);
          }
          cost = mem + transfer_memo;
          const uint64_t transfer_start = std::max(ready + mem, bus_free);
          complete = transfer_start + transfer_memo;
          bus_free = complete;
        }
        break;
      }
    }
    if (r.dst != kNoReg) reg_ready[r.dst] = complete;
    last_commit = std::max(last_commit, complete);
    commit_ring[i % rob] = last_commit;

    rep.serialized_cycles += cost;
    rep.op_count[static_cast<size_t>(r.op)]++;
    rep.op_cycles[static_cast<size_t>(r.op)] += cost;
  }
  rep.total_cycles = last_commit;

  auto cyc = [&](Opcode op) { return rep.op_cycles[static_cast<size_t>(op)]; };
  PhaseTimes& ph = rep.phases;
  ph.t_load = cyc(Opcode::kVle32);
  ph.t_cload = cyc(Opcode::kVle16);
  ph.t_unpack = cyc(Opcode::kVwmuluSc);
  ph.t_pack = cyc(Opcode::kVnsrlImm);
  ph.t_store = cyc(Opcode::kVse32);
  ph.t_cstore = cyc(Opcode::kVse16);
  ph.t_proc = cyc(Opcode::kVfmaccSc) + cyc(Opcode::kVfmvSplat);
  ph.t_config = cyc(Opcode::kVsetvli);
  return rep;
}

void TimingReport::WriteCsv(std::ostream& os) const {
  os << "metric,value\n";
  os << fmt::format("total_cycles,{}\n", total_cycles);
  os << fmt::format("serialized_cycles,{}\n", serialized_cycles);
  os << fmt::format("instructions,{}\n", instructions);
  os << fmt::format("l1_hits,{}\nl1_misses,{}\n", l1_hits, l1_misses);
  os << fmt::format("line_hits,{}\nline_misses,{}\n", line_hits, line_misses);
  os << fmt::format("t_load,{}\nt_cload,{}\nt_unpack,{}\nt_pack,{}\n", phases.t_load,
                    phases.t_cload, phases.t_unpack, phases.t_pack);
  os << fmt::format("t_store,{}\nt_cstore,{}\nt_proc,{}\nt_config,{}\n",
                    phases.t_store, phases.t_cstore, phases.t_proc,
                    phases.t_config);
  for (size_t i = 0; i < op_count.size(); ++i) {
    if (op_count[i] == 0) continue;
    const auto m = Mnemonic(static_cast<Opcode>(i));
    os << fmt::format("count.{},{}\ncycles.{},{}\n", m, op_count[i], m, op_cycles[i]);
  }
}

void TimingReport::WriteSummary(std::ostream& os) const {
  os << fmt::format("total cycles       {}\n", total_cycles);
  os << fmt::format("serialized sum     {}\n", serialized_cycles);
  os << fmt::format("instructions       {}\n", instructions);
  os << fmt::format("L1 ops hit/miss    {} / {}\n", l1_hits, l1_misses);
  os << fmt::format("L1 lines hit/miss  {} / {}\n", line_hits, line_misses);
  os << fmt::format("phases  load {}  cload {}  unpack {}  pack {}\n", phases.t_load,
                    phases.t_cload, phases.t_unpack, phases.t_pack);
  os << fmt::format("        store {}  cstore {}  proc {}  config {}\n",
                    phases.t_store, phases.t_cstore, phases.t_proc,
                    phases.t_config);
  for (size_t i = 0; i < op_count.size(); ++i) {
    if (op_count[i] == 0) continue;
    os << fmt::format("  {:<11} {:>10} instr {:>14} cycles\n",
                      Mnemonic(static_cast<Opcode>(i)), op_count[i], op_cycles[i]);
  }
}

ImprovementResult ComputeImprovement(uint64_t cycles_c, uint64_t cycles_u) {
  if (cycles_u == 0) throw std::domain_error("uncompressed cycle count is zero");
  ImprovementResult r;
  r.cycles_c = cycles_c;
  r.cycles_u = cycles_u;
  r.improvement = 100.0 * (1.0 - static_cast<double>(cycles_c) /
                                     static_cast<double>(cycles_u));
  return r;
}

ImprovementResult Improvement(const Trace& trace_c, const Trace& trace_u,
                              const MachineConfig& config) {
  if (trace_c.vlen_bits != trace_u.vlen_bits) {
    throw std::invalid_argument(fmt::format(
        "traces were recorded at different VLEN ({} vs {})", trace_c.vlen_bits,
        trace_u.vlen_bits));
  }
  return ComputeImprovement(Simulate(trace_c, config).total_cycles,
                            Simulate(trace_u, config).total_cycles);
}

InequalityCheck CheckInequalities(const PhaseTimes& c, const PhaseTimes& u) {
  InequalityCheck out;
  out.t_cload = c.t_cload;
  out.t_unpack = c.t_unpack;
  out.t_load = u.t_load;
  out.t_pack = c.t_pack;
  out.t_cstore = c.t_cstore;
  out.t_store = u.t_store;
  out.load_side = out.t_cload + out.t_unpack < out.t_load;
  out.store_side = out.t_pack + out.t_cstore < out.t_store;
  return out;
}

}  // namespace vcomp
