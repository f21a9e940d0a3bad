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

#include <sstream>

#include <gtest/gtest.h>

namespace vcomp {
namespace {

SweepSpec Small(std::vector<SweepAxis> axes) {
  SweepSpec s;
  s.n = 64;
  s.vlen_bits = 1024;
  s.base.l1_size_bytes = 16 * 1024;
  s.axes = std::move(axes);
  return s;
}

std::string Csv(const SweepResult& r) {
  std::ostringstream os;
  r.WriteCsv(os);
  return os.str();
}

// A hand-built result for the analysis functions.
SweepResult Synthetic(const std::vector<double>& lat, const std::vector<double>& imp) {
  SweepResult r;
  r.axes = {{Axis::kConvLatency, lat}};
  for (size_t i = 0; i < lat.size(); ++i) {
    SweepRow row;
    row.axis_values = {lat[i]};
    row.result.improvement = imp[i];
    r.rows.push_back(row);
  }
  return r;
}

TEST(AxisTest, NamesAndApply) {
  for (Axis a : {Axis::kMemBandwidth, Axis::kL1Size, Axis::kL1Latency, Axis::kMemLatency,
                 Axis::kConvLatency}) {
    EXPECT_EQ(ParseAxis(AxisName(a)), a);
    MachineConfig c;
    ApplyAxis(c, a, 2048);
    EXPECT_EQ(AxisValue(c, a), 2048);
  }
  EXPECT_FALSE(ParseAxis("clock"));
  MachineConfig c;
  EXPECT_THROW(ApplyAxis(c, Axis::kL1Size, 1.5), SweepError);
  EXPECT_THROW(ApplyAxis(c, Axis::kMemBandwidth, -1), SweepError);
  EXPECT_THROW(ApplyAxis(c, Axis::kConvLatency, 0), SweepError);
}

TEST(RunSweepTest, RowCountAndLexicographicOrder) {
  const SweepSpec s = Small({{Axis::kL1Size, {8192, 16384, 65536}},
                             {Axis::kMemBandwidth, {1e9, 1e11}}});
  const SweepResult r = RunSweep(s);
  ASSERT_EQ(r.rows.size(), 6u);
  EXPECT_EQ(r.rows[0].axis_values, (std::vector<double>{8192, 1e9}));
  EXPECT_EQ(r.rows[1].axis_values, (std::vector<double>{8192, 1e11}));
  EXPECT_EQ(r.rows[2].axis_values, (std::vector<double>{16384, 1e9}));
  EXPECT_EQ(r.rows[5].axis_values, (std::vector<double>{65536, 1e11}));
  EXPECT_EQ(r.rows[3].config.l1_size_bytes, 16384u);
  EXPECT_EQ(r.rows[3].config.mem_bandwidth_bytes_per_s, 1e11);
}

TEST(RunSweepTest, SinglePointEqualsDirectImprovement) {
  const SweepSpec s = Small({{Axis::kMemBandwidth, {5e9}}});
  const SweepResult r = RunSweep(s);
  ASSERT_EQ(r.rows.size(), 1u);

  TraceStore store;
  KernelSpec ks;
  ks.n = s.n;
  ks.vlen_bits = s.vlen_bits;
  ks.mode = GemmMode::kCompressed;
  const Trace& tc = store.Get(ks, s.seed);
  ks.mode = GemmMode::kUncompressed;
  const Trace& tu = store.Get(ks, s.seed);
  MachineConfig c = s.base;
  c.mem_bandwidth_bytes_per_s = 5e9;
  const ImprovementResult direct = Improvement(tc, tu, c);
  EXPECT_EQ(r.rows[0].result.cycles_c, direct.cycles_c);
  EXPECT_EQ(r.rows[0].result.cycles_u, direct.cycles_u);
  EXPECT_EQ(r.rows[0].result.improvement, direct.improvement);
}

TEST(RunSweepTest, TracesGeneratedOncePerMode) {
  TraceStore store;
  const SweepSpec s = Small({{Axis::kMemBandwidth, {1e9, 1e10, 1e11}},
                             {Axis::kConvLatency, {1, 10, 20, 30}}});
  RunSweep(s, store);
  EXPECT_EQ(store.generated(), 2);
  RunSweep(Small({{Axis::kL1Size, {8192, 32768}}}), store);
  EXPECT_EQ(store.generated(), 2);
}

TEST(RunSweepTest, DeterministicAcrossThreadCounts) {
  SweepSpec s = Small({{Axis::kMemBandwidth, {1e9, 1e10, 1e11}},
                       {Axis::kL1Size, {8192, 65536}},
                       {Axis::kConvLatency, {1, 25, 50}}});
  s.threads = 1;
  const std::string one = Csv(RunSweep(s));
  s.threads = 7;
  EXPECT_EQ(Csv(RunSweep(s)), one);
  s.threads = 0;
  EXPECT_EQ(Csv(RunSweep(s)), one);
}

TEST(RunSweepTest, CsvHeaderAndImprovementPrecision) {
  const SweepResult r = RunSweep(Small({{Axis::kMemBandwidth, {3e9}}}));
  const std::string csv = Csv(r);
  const std::string header = csv.substr(0, csv.find('\n'));
  for (const char* field : {"l1_size_bytes", "l1_line_bytes", "l1_latency_ns",
                            "mem_latency_ns", "mem_bandwidth_bytes_per_s", "rob_entries",
                            "clock_hz", "instr_latency_cycles.vnsrl_imm",
                            "instr_latency_cycles.vwmulu_sc", "cycles_c", "cycles_u",
                            "improvement", "load_side", "store_side"}) {
    EXPECT_NE(header.find(field), std::string::npos) << field;
  }
  // The improvement column parses back to the exact double.
  const std::string row = csv.substr(csv.find('\n') + 1);
  std::vector<std::string> cells;
  std::stringstream ss(row.substr(0, row.find('\n')));
  for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
  const double imp = std::stod(cells[cells.size() - 3]);
  EXPECT_EQ(imp, r.rows[0].result.improvement);
  EXPECT_EQ(imp, 100.0 * (1.0 - static_cast<double>(r.rows[0].result.cycles_c) /
                                    static_cast<double>(r.rows[0].result.cycles_u)));
}

TEST(RunSweepTest, Errors) {
  EXPECT_THROW(RunSweep(Small({})), SweepError);
  EXPECT_THROW(RunSweep(Small({{Axis::kMemBandwidth, {}}})), SweepError);
  EXPECT_THROW(RunSweep(Small({{Axis::kMemBandwidth, {1e9}}, {Axis::kMemBandwidth, {2e9}}})),
               SweepError);
  EXPECT_THROW(RunSweep(Small({{Axis::kL1Size, {1000}}})), SweepError);  // not line aligned
  EXPECT_THROW(RunSweep(Small({{Axis::kMemLatency, {-5}}})), SweepError);
  SweepSpec big = Small({{Axis::kMemBandwidth, std::vector<double>(200, 1e9)},
                         {Axis::kMemLatency, std::vector<double>(200, 10)}});
  EXPECT_THROW(RunSweep(big), SweepError);
  big.max_points = 3;
  big.axes = {{Axis::kMemBandwidth, {1e9, 2e9, 3e9, 4e9}}};
  EXPECT_THROW(RunSweep(big), SweepError);
}

TEST(GridSizeTest, Product) {
  EXPECT_EQ(GridSize(Fig9Sweep().axes), 324u);
  EXPECT_EQ(GridSize(Table1Sweep().axes), 6u);
  EXPECT_EQ(GridSize(Fig8Sweep().axes), 120u);
  EXPECT_EQ(GridSize(Fig7Sweep().axes), 42u);
}

TEST(PresetTest, Fig9MatchesConfigurationLists) {
  const SweepSpec s = Fig9Sweep();
  ASSERT_EQ(s.axes.size(), 4u);
  EXPECT_EQ(s.axes[0].values, (std::vector<double>{10e9, 50e9, 100e9}));
  EXPECT_EQ(s.axes[3].axis, Axis::kConvLatency);
  EXPECT_EQ(s.axes[3].values, (std::vector<double>{1, 10, 20, 30, 40, 50}));
  EXPECT_EQ(s.n, 512u);
  EXPECT_EQ(s.vlen_bits, 16384u);
  EXPECT_TRUE(SweepPreset("table1"));
  EXPECT_FALSE(SweepPreset("fig10"));
  const SweepSpec f7 = Fig7Sweep();
  EXPECT_EQ(f7.axes[1].values.front(), 1e9);
  EXPECT_EQ(f7.axes[1].values.back(), 100e9);
}

TEST(CheckOrderingTest, SweptGridIsMonotone) {
  const SweepResult r = RunSweep(Small({{Axis::kMemBandwidth, {1e9, 1e10, 1e11}},
                                        {Axis::kConvLatency, {1, 10, 50}}}));
  EXPECT_TRUE(CheckOrdering(r, Axis::kMemBandwidth, Direction::kNonIncreasing).ok);
  EXPECT_TRUE(CheckOrdering(r, Axis::kConvLatency, Direction::kNonIncreasing).ok);
  EXPECT_FALSE(CheckOrdering(r, Axis::kConvLatency, Direction::kNonDecreasing).ok);
  EXPECT_THROW(CheckOrdering(r, Axis::kL1Size, Direction::kNonIncreasing), SweepError);
}

TEST(CheckOrderingTest, ConstantRowsHaveNoViolations) {
  const SweepResult r = Synthetic({1, 2, 3}, {5, 5, 5});
  EXPECT_TRUE(CheckOrdering(r, Axis::kConvLatency, Direction::kNonIncreasing).ok);
  EXPECT_TRUE(CheckOrdering(r, Axis::kConvLatency, Direction::kNonDecreasing).ok);
  EXPECT_FALSE(CheckOrdering(r, Axis::kConvLatency, Direction::kStrictlyDecreasing).ok);
}

TEST(CheckOrderingTest, ReportsViolations) {
  const SweepResult r = Synthetic({30, 10, 20}, {1, 5, 7});
  const OrderingReport rep = CheckOrdering(r, Axis::kConvLatency, Direction::kNonIncreasing);
  EXPECT_FALSE(rep.ok);
  ASSERT_EQ(rep.violations.size(), 1u);  // 10 -> 20 rises; 20 -> 30 falls
  EXPECT_EQ(rep.violations[0].lower_row, 1u);
  EXPECT_EQ(rep.violations[0].upper_row, 2u);
}

TEST(CheckOrderingTest, IncompleteGridThrows) {
  SweepResult r;
  r.axes = {{Axis::kMemBandwidth, {1, 2}}, {Axis::kMemLatency, {1, 2}}};
  for (auto v : std::vector<std::vector<double>>{{1, 1}, {1, 2}, {2, 1}}) {
    SweepRow row;
    row.axis_values = v;
    r.rows.push_back(row);
  }
  EXPECT_THROW(CheckOrdering(r, Axis::kMemBandwidth, Direction::kNonIncreasing), SweepError);
}

TEST(PositWhatIfTest, BudgetBracketsTheCrossing) {
  const auto b = PositWhatIf(Synthetic({1, 10, 20, 30, 40}, {50, 30, 10, -10, -30}), 15);
  ASSERT_EQ(b.size(), 1u);
  EXPECT_EQ(b[0].budget_lo, 20);
  EXPECT_EQ(b[0].budget_hi, 30);
  EXPECT_DOUBLE_EQ(b[0].budget_interp, 25);
  EXPECT_GE(b[0].budget_interp, 20);
  EXPECT_LT(b[0].budget_interp, 30);
  EXPECT_DOUBLE_EQ(*b[0].improvement_at_cost, 20);
  EXPECT_EQ(b[0].feasible, true);
}

TEST(PositWhatIfTest, AllPositiveGivesAxisMax) {
  const auto b = PositWhatIf(Synthetic({1, 10, 50}, {9, 8, 7}), 100);
  EXPECT_EQ(b[0].budget_lo, 50);
  EXPECT_FALSE(b[0].budget_hi);
  EXPECT_EQ(b[0].budget_interp, 50);
  EXPECT_FALSE(b[0].improvement_at_cost);
  EXPECT_FALSE(b[0].feasible);  // beyond the sweep, still unknown
}

TEST(PositWhatIfTest, NeverPositiveGivesZero) {
  const auto b = PositWhatIf(Synthetic({1, 10}, {-1, -2}), 5);
  EXPECT_EQ(b[0].budget_lo, 0);
  EXPECT_EQ(b[0].budget_interp, 0);
  EXPECT_EQ(b[0].feasible, false);
}

TEST(PositWhatIfTest, MissingAxisThrows) {
  const SweepResult r = RunSweep(Small({{Axis::kMemBandwidth, {1e9}}}));
  EXPECT_THROW(PositWhatIf(r, 10), SweepError);
}

// The reported bracket agrees with a bisection over direct simulations.
TEST(PositWhatIfTest, AgreesWithBisectionOnSimulatedSweep) {
  std::vector<double> lats;
  for (int l = 1; l <= 64; ++l) lats.push_back(l);
  SweepSpec s = Small({{Axis::kMemBandwidth, {1e11}}, {Axis::kConvLatency, lats}});
  TraceStore store;
  const SweepResult r = RunSweep(s, store);
  const auto budgets = PositWhatIf(r, 10);
  ASSERT_EQ(budgets.size(), 1u);

  KernelSpec ks;
  ks.n = s.n;
  ks.vlen_bits = s.vlen_bits;
  ks.mode = GemmMode::kCompressed;
  const Trace& tc = store.Get(ks, s.seed);
  ks.mode = GemmMode::kUncompressed;
  const Trace& tu = store.Get(ks, s.seed);
  auto improves = [&](int lat) {
    MachineConfig c = s.base;
    c.mem_bandwidth_bytes_per_s = 1e11;
    c.SetConversionLatency(lat);
    return Improvement(tc, tu, c).improvement > 0;
  };
  int lo = 0, hi = 65;  // improves(lo) or lo == 0; !improves(hi) or hi past the axis
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (improves(mid) ? lo : hi) = mid;
  }
  EXPECT_EQ(budgets[0].budget_lo, lo);
  if (hi <= 64) {
    EXPECT_EQ(budgets[0].budget_hi, hi);
  } else {
    EXPECT_FALSE(budgets[0].budget_hi);
  }
}

TEST(PositWhatIfTest, CsvIsWritten) {
  SweepResult r = Synthetic({1, 10}, {3, -3});
  std::ostringstream os;
  WriteWhatIfCsv(os, r, PositWhatIf(r, 5), 5);
  EXPECT_EQ(os.str(),
            "# conversion_cycles=5\n"
            "budget_lo,budget_hi,budget_interp,improvement_at_cost,feasible\n"
            "1,10,5.5,0.3333333333333335,yes\n");
}

TEST(ParseSweepSpecTest, ParsesKeysAndAxes) {
  std::istringstream in(
      "# small sweep\n"
      "n = 32\nvlen_bits = 2048\nfill = replicate\nseed = 9\nthreads = 2\n"
      "mem_latency_ns = 80\n"
      "axis.mem_bandwidth_bytes_per_s = 1e9, 1e10\n"
      "axis.conv_latency_cycles = 1,5\n");
  const SweepSpec s = ParseSweepSpec(in);
  EXPECT_EQ(s.n, 32u);
  EXPECT_EQ(s.vlen_bits, 2048u);
  EXPECT_EQ(s.fill, FillMode::kReplicate);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_EQ(s.threads, 2u);
  EXPECT_EQ(s.base.mem_latency_ns, 80);
  ASSERT_EQ(s.axes.size(), 2u);
  EXPECT_EQ(s.axes[0].axis, Axis::kMemBandwidth);
  EXPECT_EQ(s.axes[1].values, (std::vector<double>{1, 5}));
}

TEST(ParseSweepSpecTest, ErrorsNameTheLine) {
  std::istringstream in("n = 32\naxis.clock = 1\n");
  try {
    ParseSweepSpec(in);
    FAIL();
  } catch (const SweepError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  std::istringstream bad_num("axis.mem_latency_ns = 10, x\n");
  EXPECT_THROW(ParseSweepSpec(bad_num), SweepError);
  std::istringstream empty_item("axis.mem_latency_ns = 10,,20\n");
  EXPECT_THROW(ParseSweepSpec(empty_item), SweepError);
}

}  // namespace
}  // namespace vcomp
