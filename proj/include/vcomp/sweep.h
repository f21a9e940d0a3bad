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

#ifndef VCOMP_SWEEP_H_
#define VCOMP_SWEEP_H_

// Parameter sweeps: the cross product of a few MachineConfig axes, each grid
// point simulated for the compressed and the uncompressed GEMM trace.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "vcomp/kernels.h"
#include "vcomp/timing.h"

namespace vcomp {

class SweepError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Axis {
  kMemBandwidth,  // mem_bandwidth_bytes_per_s
  kL1Size,        // l1_size_bytes
  kL1Latency,     // l1_latency_ns
  kMemLatency,    // mem_latency_ns
  kConvLatency,   // conv_latency_cycles (vnsrl_imm and vwmulu_sc)
};

std::string_view AxisName(Axis axis);
std::optional<Axis> ParseAxis(std::string_view name);
// Writes `value` into the field `axis` names. Throws SweepError when the value
// cannot be represented (negative, or fractional for integer fields).
void ApplyAxis(MachineConfig& config, Axis axis, double value);
double AxisValue(const MachineConfig& config, Axis axis);

struct SweepAxis {
  Axis axis;
  std::vector<double> values;
};

struct SweepSpec {
  MachineConfig base;
  std::vector<SweepAxis> axes;  // first axis varies slowest
  uint32_t n = 512;
  uint32_t vlen_bits = 16384;
  FillMode fill = FillMode::kZeroPad;
  AccumulationOrder order = AccumulationOrder::kSerpentine;
  uint64_t seed = 1;  // operand matrices; timing does not depend on values
  size_t max_points = 10000;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct SweepRow {
  MachineConfig config;
  std::vector<double> axis_values;  // same order as SweepSpec::axes
  ImprovementResult result;
  InequalityCheck inequalities;
};

struct SweepResult {
  std::vector<SweepAxis> axes;
  std::vector<SweepRow> rows;

  // Header names every config field, then
  // cycles_c,cycles_u,improvement,load_side,store_side.
  void WriteCsv(std::ostream& os) const;
};

// Generates each (n, vlen, mode, fill, seed) trace once and hands out shared
// references. Thread-safe.
class TraceStore {
 public:
  const Trace& Get(const KernelSpec& spec, uint64_t seed);
  int generated() const;

 private:
  using Key = std::tuple<uint32_t, uint32_t, int, int, int, uint64_t>;
  mutable std::mutex mu_;
  std::map<Key, Trace> traces_;
  int generated_ = 0;
};

size_t GridSize(const std::vector<SweepAxis>& axes);

// Throws SweepError for an empty axis, a grid larger than max_points, or an
// axis value that yields an invalid config.
SweepResult RunSweep(const SweepSpec& spec, TraceStore& store);
SweepResult RunSweep(const SweepSpec& spec);

enum class Direction {
  kNonIncreasing,
  kNonDecreasing,
  kStrictlyDecreasing,
  kStrictlyIncreasing,
};

struct OrderingViolation {
  size_t lower_row = 0;  // row with the smaller axis value
  size_t upper_row = 0;
  double lower_improvement = 0;
  double upper_improvement = 0;
};

struct OrderingReport {
  bool ok = true;
  std::vector<OrderingViolation> violations;
};

// Walks `axis` in ascending value order with every other axis held fixed and
// checks improvement follows `direction`. Throws SweepError when `axis` is not
// swept or the rows do not cover the full grid.
OrderingReport CheckOrdering(const SweepResult& result, Axis axis,
                             Direction direction);

// Posit converter budget for one setting of the non-latency axes.
struct ConversionBudget {
  std::vector<double> axis_values;  // the other axes, in sweep order
  // Largest swept latency such that every swept latency up to it improves;
  // 0 when the first swept latency already does not improve.
  double budget_lo = 0;
  // First swept latency without improvement; empty when all improve.
  std::optional<double> budget_hi;
  // Linear zero crossing of improvement between budget_lo and budget_hi
  // (equal to budget_lo when budget_hi is empty or budget_lo is 0).
  double budget_interp = 0;
  // Improvement at `conversion_cycles`, linearly interpolated; empty outside
  // the swept range.
  std::optional<double> improvement_at_cost;
  std::optional<bool> feasible;
};

// For each grid point of the other axes, the largest compression-instruction
// latency that still leaves a positive improvement, and whether a converter
// costing `conversion_cycles` stays within it. Throws SweepError unless the
// sweep includes the conversion-latency axis.
std::vector<ConversionBudget> PositWhatIf(const SweepResult& result,
                                          double conversion_cycles);
void WriteWhatIfCsv(std::ostream& os, const SweepResult& result,
                    const std::vector<ConversionBudget>& budgets,
                    double conversion_cycles);

// Flat `key = value` file: n, vlen_bits, fill, order, seed, max_points, threads,
// any MachineConfig key for the base config, and
// `axis.<name> = v1, v2, ...` lines whose order fixes the axis order. Config
// keys override `base`.
SweepSpec ParseSweepSpec(std::istream& is, const MachineConfig& base = {});

// Experiment grids.
SweepSpec Table1Sweep();  // L1 size x bandwidth, n=512, vlen=16384
SweepSpec Fig7Sweep();    // bandwidth ladder 1..100 GB/s x L1 size
SweepSpec Fig8Sweep();    // bandwidth x L1 latency x memory latency at 1 MB
SweepSpec Fig9Sweep();    // bandwidth x memory latency x L1 size x conv latency
std::optional<SweepSpec> SweepPreset(std::string_view name);

}  // namespace vcomp

#endif  // VCOMP_SWEEP_H_
