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

#include "vcomp/sweep.h"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <thread>

#include <fmt/format.h>

namespace vcomp {

namespace {

constexpr uint64_t kKiB = 1024;
constexpr uint64_t kMiB = 1024 * 1024;

struct AxisInfo {
  Axis axis;
  std::string_view name;
};

constexpr AxisInfo kAxes[] = {
    {Axis::kMemBandwidth, "mem_bandwidth_bytes_per_s"},
    {Axis::kL1Size, "l1_size_bytes"},
    {Axis::kL1Latency, "l1_latency_ns"},
    {Axis::kMemLatency, "mem_latency_ns"},
    {Axis::kConvLatency, "conv_latency_cycles"},
};

uint64_t ToCount(Axis axis, double v) {
  if (!(v > 0) || v != std::floor(v) || v > 1e15) {
    throw SweepError(fmt::format("{} needs a positive integer, got {}",
                                 AxisName(axis), v));
  }
  return static_cast<uint64_t>(v);
}

}  // namespace

std::string_view AxisName(Axis axis) {
  for (const auto& a : kAxes) {
    if (a.axis == axis) return a.name;
  }
  return "?";
}

std::optional<Axis> ParseAxis(std::string_view name) {
  for (const auto& a : kAxes) {
    if (a.name == name) return a.axis;
  }
  return std::nullopt;
}

void ApplyAxis(MachineConfig& c, Axis axis, double v) {
  if (!std::isfinite(v) || !(v > 0)) {
    throw SweepError(fmt::format("{} must be positive, got {}", AxisName(axis), v));
  }
  switch (axis) {
    case Axis::kMemBandwidth:
      c.mem_bandwidth_bytes_per_s = v;
      break;
    case Axis::kL1Size:
      c.l1_size_bytes = ToCount(axis, v);
      break;
    case Axis::kL1Latency:
      c.l1_latency_ns = v;
      break;
    case Axis::kMemLatency:
      c.mem_latency_ns = v;
      break;
    case Axis::kConvLatency:
      c.SetConversionLatency(static_cast<uint32_t>(ToCount(axis, v)));
      break;
  }
}

double AxisValue(const MachineConfig& c, Axis axis) {
  switch (axis) {
    case Axis::kMemBandwidth:
      return c.mem_bandwidth_bytes_per_s;
    case Axis::kL1Size:
      return static_cast<double>(c.l1_size_bytes);
    case Axis::kL1Latency:
      return c.l1_latency_ns;
    case Axis::kMemLatency:
      return c.mem_latency_ns;
    case Axis::kConvLatency:
      return c.latency(Opcode::kVwmuluSc);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Traces.

const Trace& TraceStore::Get(const KernelSpec& spec, uint64_t seed) {
  std::lock_guard<std::mutex> lock(mu_);
  const Key key{spec.n, spec.vlen_bits, static_cast<int>(spec.mode),
                static_cast<int>(spec.fill), static_cast<int>(spec.order), seed};
  auto it = traces_.find(key);
  if (it != traces_.end()) return it->second;

  const Matrix a = RandomBf16ExactMatrix(spec.n, spec.n, seed);
  const Matrix b = RandomBf16ExactMatrix(spec.n, spec.n, seed + 1);
  GemmRun run = spec.mode == GemmMode::kCompressed
                    ? GemmCompressed(CompressMatrix(a), CompressMatrix(b), spec)
                    : GemmUncompressed(a, b, spec);
  ++generated_;
  return traces_.emplace(key, std::move(run.trace)).first->second;
}

int TraceStore::generated() const {
  std::lock_guard<std::mutex> lock(mu_);
  return generated_;
}

// ---------------------------------------------------------------------------
// Running a sweep.

size_t GridSize(const std::vector<SweepAxis>& axes) {
  size_t total = 1;
  for (const auto& a : axes) total *= a.values.size();
  return total;
}

SweepResult RunSweep(const SweepSpec& spec) {
  TraceStore store;
  return RunSweep(spec, store);
}

SweepResult RunSweep(const SweepSpec& spec, TraceStore& store) {
  if (spec.axes.empty()) throw SweepError("sweep needs at least one axis");
  std::set<Axis> seen;
  for (const auto& a : spec.axes) {
    if (a.values.empty()) {
      throw SweepError(fmt::format("axis {} has no values", AxisName(a.axis)));
    }
    if (!seen.insert(a.axis).second) {
      throw SweepError(fmt::format("axis {} listed twice", AxisName(a.axis)));
    }
  }
  // Overflow-safe cap check.
  size_t points = 1;
  for (const auto& a : spec.axes) {
    if (a.values.size() > spec.max_points / points) {
      throw SweepError(fmt::format("grid exceeds the cap of {} points",
                                   spec.max_points));
    }
    points *= a.values.size();
  }

  SweepResult result;
  result.axes = spec.axes;
  result.rows.resize(points);
  for (size_t p = 0; p < points; ++p) {
    SweepRow& row = result.rows[p];
    row.config = spec.base;
    row.axis_values.resize(spec.axes.size());
    size_t rem = p;
    for (size_t ai = spec.axes.size(); ai-- > 0;) {
      const auto& axis = spec.axes[ai];
      const double v = axis.values[rem % axis.values.size()];
      rem /= axis.values.size();
      row.axis_values[ai] = v;
      ApplyAxis(row.config, axis.axis, v);
    }
    try {
      row.config.Validate();
    } catch (const ConfigError& e) {
      throw SweepError(fmt::format("grid point {}: {}", p, e.what()));
    }
  }

  KernelSpec ks;
  ks.n = spec.n;
  ks.vlen_bits = spec.vlen_bits;
  ks.fill = spec.fill;
  ks.order = spec.order;
  ks.mode = GemmMode::kCompressed;
  const Trace& trace_c = store.Get(ks, spec.seed);
  ks.mode = GemmMode::kUncompressed;
  const Trace& trace_u = store.Get(ks, spec.seed);

  // The cache pass depends only on the L1 geometry.
  std::map<std::pair<uint64_t, uint64_t>, std::pair<CacheProfile, CacheProfile>>
      profiles;
  for (const SweepRow& row : result.rows) {
    const auto key = std::make_pair(row.config.l1_size_bytes, row.config.l1_line_bytes);
    if (profiles.count(key)) continue;
    profiles.emplace(key, std::make_pair(ProfileCache(trace_c, key.first, key.second),
                                         ProfileCache(trace_u, key.first, key.second)));
  }

  unsigned threads = spec.threads ? spec.threads : std::thread::hardware_concurrency();
  threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(points));
  std::atomic<size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&]() {
    while (true) {
      const size_t p = next.fetch_add(1);
      if (p >= points) return;
      SweepRow& row = result.rows[p];
      try {
        const auto& prof = profiles.at(
            std::make_pair(row.config.l1_size_bytes, row.config.l1_line_bytes));
        const TimingReport rc = Simulate(trace_c, row.config, prof.first);
        const TimingReport ru = Simulate(trace_u, row.config, prof.second);
        row.result = ComputeImprovement(rc.total_cycles, ru.total_cycles);
        row.inequalities = CheckInequalities(rc, ru);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return result;
}

void SweepResult::WriteCsv(std::ostream& os) const {
  std::string header =
      "l1_size_bytes,l1_line_bytes,l1_latency_ns,mem_latency_ns,"
      "mem_bandwidth_bytes_per_s,rob_entries,clock_hz";
  for (int i = 0; i < kNumOpcodes; ++i) {
    const auto op = static_cast<Opcode>(i);
    if (!IsMemory(op)) header += fmt::format(",instr_latency_cycles.{}", Mnemonic(op));
  }
  header += ",cycles_c,cycles_u,improvement,load_side,store_side\n";
  os << header;
  std::string line;
  for (const SweepRow& r : rows) {
    const MachineConfig& c = r.config;
    line = fmt::format("{},{},{},{},{},{},{}", c.l1_size_bytes, c.l1_line_bytes,
                       c.l1_latency_ns, c.mem_latency_ns,
                       c.mem_bandwidth_bytes_per_s, c.rob_entries, c.clock_hz);
    for (int i = 0; i < kNumOpcodes; ++i) {
      const auto op = static_cast<Opcode>(i);
      if (!IsMemory(op)) line += fmt::format(",{}", c.latency(op));
    }
    line += fmt::format(",{},{},{},{},{}\n", r.result.cycles_c, r.result.cycles_u,
                        r.result.improvement, r.inequalities.load_side ? 1 : 0,
                        r.inequalities.store_side ? 1 : 0);
    os << line;
  }
}

// ---------------------------------------------------------------------------
// Analyses over a finished grid.

namespace {

size_t AxisIndex(const SweepResult& result, Axis axis) {
  for (size_t i = 0; i < result.axes.size(); ++i) {
    if (result.axes[i].axis == axis) return i;
  }
  throw SweepError(fmt::format("axis {} is not part of the sweep", AxisName(axis)));
}

// Rows grouped by every axis except `axis_index`, each group sorted by the
// value on that axis. Throws when the grid is incomplete.
std::map<std::vector<double>, std::vector<size_t>> GroupAlong(
    const SweepResult& result, size_t axis_index) {
  std::map<std::vector<double>, std::vector<size_t>> groups;
  for (size_t r = 0; r < result.rows.size(); ++r) {
    std::vector<double> key = result.rows[r].axis_values;
    if (key.size() != result.axes.size()) throw SweepError("row/axis mismatch");
    key.erase(key.begin() + static_cast<std::ptrdiff_t>(axis_index));
    groups[key].push_back(r);
  }
  std::set<double> expected(result.axes[axis_index].values.begin(),
                            result.axes[axis_index].values.end());
  for (auto& [key, members] : groups) {
    std::sort(members.begin(), members.end(), [&](size_t a, size_t b) {
      return result.rows[a].axis_values[axis_index] <
             result.rows[b].axis_values[axis_index];
    });
    std::set<double> present;
    for (size_t m : members) present.insert(result.rows[m].axis_values[axis_index]);
    if (present != expected || members.size() != expected.size()) {
      throw SweepError(fmt::format("incomplete grid along {}",
                                   AxisName(result.axes[axis_index].axis)));
    }
  }
  size_t other = 1;
  for (size_t i = 0; i < result.axes.size(); ++i) {
    if (i == axis_index) continue;
    other *= std::set<double>(result.axes[i].values.begin(), result.axes[i].values.end()).size();
  }
  if (groups.size() != other) throw SweepError("incomplete grid");
  return groups;
}

bool Holds(Direction d, double lower, double upper) {
  switch (d) {
    case Direction::kNonIncreasing:
      return upper <= lower;
    case Direction::kNonDecreasing:
      return upper >= lower;
    case Direction::kStrictlyDecreasing:
      return upper < lower;
    case Direction::kStrictlyIncreasing:
      return upper > lower;
  }
  return false;
}

}  // namespace

OrderingReport CheckOrdering(const SweepResult& result, Axis axis,
                             Direction direction) {
  const size_t ai = AxisIndex(result, axis);
  OrderingReport report;
  for (const auto& [key, members] : GroupAlong(result, ai)) {
    for (size_t j = 1; j < members.size(); ++j) {
      const double lo = result.rows[members[j - 1]].result.improvement;
      const double hi = result.rows[members[j]].result.improvement;
      if (!Holds(direction, lo, hi)) {
        report.ok = false;
        report.violations.push_back({members[j - 1], members[j], lo, hi});
      }
    }
  }
  return report;
}

std::vector<ConversionBudget> PositWhatIf(const SweepResult& result,
                                          double conversion_cycles) {
  const size_t ai = AxisIndex(result, Axis::kConvLatency);
  std::vector<ConversionBudget> out;
  for (const auto& [key, members] : GroupAlong(result, ai)) {
    ConversionBudget b;
    b.axis_values = key;
    std::vector<double> lat, imp;
    for (size_t m : members) {
      lat.push_back(result.rows[m].axis_values[ai]);
      imp.push_back(result.rows[m].result.improvement);
    }
    size_t first_bad = lat.size();
    for (size_t j = 0; j < lat.size(); ++j) {
      if (!(imp[j] > 0)) {
        first_bad = j;
        break;
      }
    }
    if (first_bad == 0) {
      b.budget_lo = 0;
      b.budget_hi = lat[0];
      b.budget_interp = 0;
    } else if (first_bad == lat.size()) {
      b.budget_lo = lat.back();
      b.budget_interp = lat.back();
    } else {
      const double l0 = lat[first_bad - 1], l1 = lat[first_bad];
      const double i0 = imp[first_bad - 1], i1 = imp[first_bad];
      b.budget_lo = l0;
      b.budget_hi = l1;
      b.budget_interp = i0 == i1 ? l0 : l0 + (l1 - l0) * i0 / (i0 - i1);
    }

    if (conversion_cycles >= lat.front() && conversion_cycles <= lat.back()) {
      const auto it = std::lower_bound(lat.begin(), lat.end(), conversion_cycles);
      const size_t j = static_cast<size_t>(it - lat.begin());
      double v = imp[j];
      if (lat[j] != conversion_cycles) {
        const double t = (conversion_cycles - lat[j - 1]) / (lat[j] - lat[j - 1]);
        v = imp[j - 1] + t * (imp[j] - imp[j - 1]);
      }
      b.improvement_at_cost = v;
      b.feasible = v > 0;
    } else if (conversion_cycles < lat.front() && imp.front() > 0) {
      b.feasible = true;  // improvement only grows as latency drops
    } else if (conversion_cycles > lat.back() && !(imp.back() > 0)) {
      b.feasible = false;
    }
    out.push_back(std::move(b));
  }
  return out;
}

void WriteWhatIfCsv(std::ostream& os, const SweepResult& result,
                    const std::vector<ConversionBudget>& budgets,
                    double conversion_cycles) {
  os << fmt::format("# conversion_cycles={}\n", conversion_cycles);
  std::string header;
  for (const auto& a : result.axes) {
    if (a.axis == Axis::kConvLatency) continue;
    header += fmt::format("{},", AxisName(a.axis));
  }
  header += "budget_lo,budget_hi,budget_interp,improvement_at_cost,feasible\n";
  os << header;
  for (const auto& b : budgets) {
    std::string line;
    for (double v : b.axis_values) line += fmt::format("{},", v);
    line += fmt::format("{},{},{},{},{}\n", b.budget_lo,
                        b.budget_hi ? fmt::format("{}", *b.budget_hi) : "",
                        b.budget_interp,
                        b.improvement_at_cost ? fmt::format("{}", *b.improvement_at_cost) : "",
                        b.feasible ? (*b.feasible ? "yes" : "no") : "unknown");
    os << line;
  }
}

// ---------------------------------------------------------------------------
// Spec files and presets.

namespace {

std::string Trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double ParseDouble(const std::string& s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw SweepError(fmt::format("'{}' is not a number", s));
  }
  return v;
}

uint64_t ParseUint(const std::string& s) {
  const double v = ParseDouble(s);
  if (v < 0 || v != std::floor(v)) {
    throw SweepError(fmt::format("'{}' is not a nonnegative integer", s));
  }
  return static_cast<uint64_t>(v);
}

}  // namespace

SweepSpec ParseSweepSpec(std::istream& is, const MachineConfig& base) {
  SweepSpec spec;
  spec.base = base;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    try {
      if (eq == std::string::npos) throw SweepError("expected key = value");
      const std::string key = Trim(std::string_view(line).substr(0, eq));
      const std::string value = Trim(std::string_view(line).substr(eq + 1));
      if (key.rfind("axis.", 0) == 0) {
        const auto axis = ParseAxis(key.substr(5));
        if (!axis) throw SweepError(fmt::format("unknown axis '{}'", key.substr(5)));
        SweepAxis a{*axis, {}};
        size_t start = 0;
        while (start <= value.size()) {
          const size_t comma = value.find(',', start);
          const std::string item =
              Trim(std::string_view(value).substr(start, comma == std::string::npos
                                                              ? std::string::npos
                                                              : comma - start));
          if (item.empty()) throw SweepError("empty axis value");
          a.values.push_back(ParseDouble(item));
          if (comma == std::string::npos) break;
          start = comma + 1;
        }
        spec.axes.push_back(std::move(a));
      } else if (key == "n") {
        spec.n = static_cast<uint32_t>(ParseUint(value));
      } else if (key == "vlen_bits") {
        spec.vlen_bits = static_cast<uint32_t>(ParseUint(value));
      } else if (key == "fill") {
        const auto f = ParseFillMode(value);
        if (!f) throw SweepError(fmt::format("unknown fill '{}'", value));
        spec.fill = *f;
      } else if (key == "order") {
        if (value == "serpentine") {
          spec.order = AccumulationOrder::kSerpentine;
        } else if (value == "ascending") {
          spec.order = AccumulationOrder::kAscending;
        } else {
          throw SweepError(fmt::format("unknown order '{}'", value));
        }
      } else if (key == "seed") {
        spec.seed = ParseUint(value);
      } else if (key == "max_points") {
        spec.max_points = ParseUint(value);
      } else if (key == "threads") {
        spec.threads = static_cast<unsigned>(ParseUint(value));
      } else if (!ApplyConfigKey(spec.base, key, value)) {
        throw SweepError(fmt::format("unknown key '{}'", key));
      }
    } catch (const std::runtime_error& e) {
      throw SweepError(fmt::format("sweep spec line {}: {}", line_no, e.what()));
    }
  }
  try {
    spec.base.Validate();
  } catch (const ConfigError& e) {
    throw SweepError(fmt::format("sweep spec base config: {}", e.what()));
  }
  return spec;
}

SweepSpec Table1Sweep() {
  SweepSpec s;
  s.base.l1_latency_ns = 20;
  s.base.mem_latency_ns = 60;
  s.axes = {
      {Axis::kL1Size, {512.0 * kKiB, 1.0 * kMiB, 2.5 * kMiB}},
      {Axis::kMemBandwidth, {1e9, 100e9}},
  };
  return s;
}

SweepSpec Fig7Sweep() {
  SweepSpec s;
  s.base.l1_latency_ns = 20;
  s.base.mem_latency_ns = 60;
  std::vector<double> ladder;
  for (int i = 0; i <= 6; ++i) ladder.push_back(std::round(1e9 * std::pow(10.0, i / 3.0)));
  s.axes = {
      {Axis::kL1Size,
       {256.0 * kKiB, 512.0 * kKiB, 1.0 * kMiB, 1.5 * kMiB, 2.0 * kMiB, 2.5 * kMiB}},
      {Axis::kMemBandwidth, ladder},
  };
  return s;
}

SweepSpec Fig8Sweep() {
  SweepSpec s;
  s.base.l1_size_bytes = kMiB;
  s.axes = {
      {Axis::kMemBandwidth, {1e9, 10e9, 50e9, 100e9}},
      {Axis::kL1Latency, {10, 15, 20, 25, 30}},
      {Axis::kMemLatency, {50, 70, 90, 110, 130, 150}},
  };
  return s;
}

SweepSpec Fig9Sweep() {
  SweepSpec s;
  s.base.l1_latency_ns = 15;
  s.axes = {
      {Axis::kMemBandwidth, {10e9, 50e9, 100e9}},
      {Axis::kMemLatency, {50, 70, 90, 110, 130, 150}},
      {Axis::kL1Size, {512.0 * kKiB, 1.0 * kMiB, 2.5 * kMiB}},
      {Axis::kConvLatency, {1, 10, 20, 30, 40, 50}},
  };
  return s;
}

std::optional<SweepSpec> SweepPreset(std::string_view name) {
  if (name == "table1") return Table1Sweep();
  if (name == "fig7") return Fig7Sweep();
  if (name == "fig8") return Fig8Sweep();
  if (name == "fig9") return Fig9Sweep();
  return std::nullopt;
}

}  // namespace vcomp
