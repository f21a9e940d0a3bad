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

#include "vcomp/cli.h"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "vcomp/formats.h"
#include "vcomp/kernels.h"
#include "vcomp/sweep.h"
#include "vcomp/timing.h"
#include "vcomp/vvm.h"

namespace vcomp {
namespace {

// Bad input: unreadable files, parse failures, out-of-range values.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ifstream OpenIn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError(fmt::format("cannot open '{}' for reading", path));
  return in;
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw UsageError(fmt::format("cannot open '{}' for writing", path));
  return os;
}

void CloseOut(std::ofstream& os, const std::string& path) {
  os.close();
  if (!os) throw UsageError(fmt::format("failed writing '{}'", path));
}

bool IsCsvPath(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".csv") == 0;
}

Matrix LoadMatrix(const std::string& path) {
  std::ifstream in = OpenIn(path);
  return IsCsvPath(path) ? ReadMatrixCsv(in, ElementWidth::kB32) : ReadMatrixBinary(in);
}

void SaveMatrix(const std::string& path, const Matrix& m) {
  std::ofstream os = OpenOut(path);
  if (IsCsvPath(path)) {
    WriteMatrixCsv(os, m);
  } else {
    WriteMatrixBinary(os, m);
  }
  CloseOut(os, path);
}

// --config, then $VCOMP_CONFIG, then built-in defaults; --set pairs last.
MachineConfig LoadConfig(const std::string& path, const std::vector<std::string>& sets) {
  MachineConfig config;
  std::string source = path;
  if (source.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar); env && *env) source = env;
  }
  if (!source.empty()) {
    std::ifstream in = OpenIn(source);
    try {
      config = ParseMachineConfig(in);
    } catch (const ConfigError& e) {
      throw UsageError(fmt::format("{}: {}", source, e.what()));
    }
  }
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw UsageError(fmt::format("--set expects key=value, got '{}'", kv));
    }
    if (!ApplyConfigKey(config, kv.substr(0, eq), kv.substr(eq + 1))) {
      throw UsageError(fmt::format("unknown config key '{}'", kv.substr(0, eq)));
    }
  }
  config.Validate();
  return config;
}

Trace LoadTrace(const std::string& path) {
  std::ifstream in = OpenIn(path);
  try {
    return ReadTrace(in);
  } catch (const TraceFormatError& e) {
    throw UsageError(fmt::format("{}: {}", path, e.what()));
  }
}

// FNV-1a over the element patterns, so runs can be compared at a glance.
uint64_t Checksum(const Matrix& m) {
  uint64_t h = 1469598103934665603ull;
  for (uint32_t v : m.data()) {
    for (int i = 0; i < 4; ++i) {
      h ^= (v >> (8 * i)) & 0xFF;
      h *= 1099511628211ull;
    }
  }
  return h;
}

// ---------------------------------------------------------------------------

struct AccuracyArgs {
  std::string mode = "both";
  uint64_t n = 1000000;
  uint64_t seed = 1;
  int bins = 64;
  std::string sampler = "normal";
  double constant = 1.0;
  std::string out = "accuracy";
};

int RunAccuracy(const AccuracyArgs& a, std::ostream& out) {
  std::vector<FillMode> modes;
  if (a.mode == "both") {
    modes = {FillMode::kZeroPad, FillMode::kReplicate};
  } else {
    modes = {*ParseFillMode(a.mode)};
  }
  SamplerSpec sampler{*ParseSamplerKind(a.sampler), a.constant};
  for (FillMode mode : modes) {
    ErrorHistogram h;
    try {
      h = ErrorDensity(mode, sampler, a.n, a.bins, a.seed);
    } catch (const std::exception& e) {
      throw UsageError(e.what());
    }
    const std::string path = fmt::format("{}_{}.csv", a.out, FillModeName(mode));
    std::ofstream os = OpenOut(path);
    h.WriteCsv(os);
    CloseOut(os, path);
    fmt::print(out, "{} mean_rel_error={:.9e} max_rel_error={:.9e} -> {}\n",
               FillModeName(mode), h.mean, h.max, path);
  }
  return kExitOk;
}

struct GemmArgs {
  uint32_t n = 128;
  uint32_t vlen = 4096;
  std::string mode = "compressed";
  std::string fill = "zeropad";
  std::string order = "serpentine";
  uint64_t seed = 1;
  std::string trace_out;
  std::string a_path;
  std::string b_path;
  std::string c_out;
  bool identity_a = false;
  bool check = false;
};

int RunGemmCommand(const GemmArgs& g, std::ostream& out, std::ostream& err) {
  KernelSpec spec;
  spec.n = g.n;
  spec.vlen_bits = g.vlen;
  spec.mode = *ParseGemmMode(g.mode);
  spec.fill = *ParseFillMode(g.fill);
  spec.order = g.order == "ascending" ? AccumulationOrder::kAscending
                                      : AccumulationOrder::kSerpentine;

  Matrix a = g.identity_a ? Matrix::Identity(g.n, ElementWidth::kB32)
             : g.a_path.empty() ? RandomBf16ExactMatrix(g.n, g.n, g.seed)
                                : LoadMatrix(g.a_path);
  Matrix b = g.b_path.empty() ? RandomBf16ExactMatrix(g.n, g.n, g.seed + 1)
                              : LoadMatrix(g.b_path);
  const ElementWidth want =
      spec.mode == GemmMode::kCompressed ? ElementWidth::kBf16 : ElementWidth::kB32;
  auto to_width = [&](const Matrix& m) {
    if (m.width() == want) return m;
    return want == ElementWidth::kBf16 ? CompressMatrix(m) : DecompressMatrix(m, spec.fill);
  };
  a = to_width(a);
  b = to_width(b);

  GemmRun run;
  try {
    run = RunGemm(a, b, spec);
  } catch (const DimensionError& e) {
    throw UsageError(e.what());
  } catch (const VvmFault& e) {
    throw UsageError(e.what());
  }

  fmt::print(out, "gemm n={} vlen={} mode={} fill={} order={}\n", g.n, g.vlen,
             GemmModeName(spec.mode), FillModeName(spec.fill), g.order);
  uint64_t bytes = 0;
  for (const auto& r : run.trace.records) bytes += r.bytes;
  fmt::print(out, "instructions={} memory_bytes={} c_checksum={:016x}\n",
             run.trace.records.size(), bytes, Checksum(run.c));

  if (!g.trace_out.empty()) {
    std::ofstream os = OpenOut(g.trace_out);
    WriteTrace(os, run.trace);
    CloseOut(os, g.trace_out);
  }
  if (!g.c_out.empty()) SaveMatrix(g.c_out, run.c);

  if (g.check) {
    const Matrix oracle = spec.mode == GemmMode::kCompressed
                              ? CompressedGemmOracle(a, b, spec.fill, spec.order)
                              : ScalarGemmOracle(a, b, spec.order);
    size_t mismatches = 0;
    for (size_t r = 0; r < oracle.rows(); ++r) {
      for (size_t c = 0; c < oracle.cols(); ++c) {
        if (oracle.bits(r, c) == run.c.bits(r, c)) continue;
        if (mismatches < 10) {
          fmt::print(err, "mismatch at ({}, {}): kernel {:#x} oracle {:#x}\n", r, c,
                     run.c.bits(r, c), oracle.bits(r, c));
        }
        ++mismatches;
      }
    }
    fmt::print(out, "check: {} mismatches\n", mismatches);
    if (mismatches) return kExitVerifyFailed;
  }
  return kExitOk;
}

int RunCensus(const std::string& trace_path, std::ostream& out) {
  const Trace trace = LoadTrace(trace_path);
  fmt::print(out, "mnemonic,count\n");
  for (const auto& [name, count] : InstructionCensus(trace)) {
    fmt::print(out, "{},{}\n", name, count);
  }
  return kExitOk;
}

struct SimulateArgs {
  std::string trace;
  std::string baseline;
  std::string config;
  std::vector<std::string> sets;
  std::string out;
};

int RunSimulate(const SimulateArgs& s, std::ostream& out) {
  const MachineConfig config = LoadConfig(s.config, s.sets);
  const Trace trace = LoadTrace(s.trace);
  const TimingReport report = Simulate(trace, config);
  report.WriteSummary(out);
  if (config.rob_entries == 1) {
    fmt::print(out, "rob=1 cross-check: total {} serialized {} -> {}\n",
               report.total_cycles, report.serialized_cycles,
               report.total_cycles == report.serialized_cycles ? "equal" : "DIFFERENT");
  }
  if (!s.baseline.empty()) {
    const Trace base = LoadTrace(s.baseline);
    if (base.vlen_bits != trace.vlen_bits) {
      throw UsageError("traces were produced for different vlen");
    }
    const TimingReport ru = Simulate(base, config);
    const ImprovementResult imp = ComputeImprovement(report.total_cycles, ru.total_cycles);
    const InequalityCheck ineq = CheckInequalities(report, ru);
    fmt::print(out, "cycles_c={} cycles_u={} improvement={:.6f}%\n", imp.cycles_c,
               imp.cycles_u, imp.improvement);
    fmt::print(out, "load side:  t_cload {} + t_unpack {} < t_load {} : {}\n",
               ineq.t_cload, ineq.t_unpack, ineq.t_load,
               ineq.load_side ? "holds" : "fails");
    fmt::print(out, "store side: t_pack {} + t_cstore {} < t_store {} : {}\n",
               ineq.t_pack, ineq.t_cstore, ineq.t_store,
               ineq.store_side ? "holds" : "fails");
  }
  if (!s.out.empty()) {
    std::ofstream os = OpenOut(s.out);
    report.WriteCsv(os);
    CloseOut(os, s.out);
  }
  return kExitOk;
}

struct SweepArgs {
  std::string spec;
  std::string preset;
  std::string config;
  std::string out;
  std::string whatif_out;
  double posit_cycles = 20;
  unsigned threads = 0;
  bool threads_set = false;
};

int RunSweepCommand(const SweepArgs& a, std::ostream& out) {
  SweepSpec spec;
  if (!a.preset.empty()) {
    spec = *SweepPreset(a.preset);
  } else {
    const MachineConfig base = LoadConfig(a.config, {});
    std::ifstream in = OpenIn(a.spec);
    spec = ParseSweepSpec(in, base);
  }
  if (a.threads_set) spec.threads = a.threads;
  const SweepResult result = RunSweep(spec);

  if (a.out.empty()) {
    result.WriteCsv(out);
  } else {
    std::ofstream os = OpenOut(a.out);
    result.WriteCsv(os);
    CloseOut(os, a.out);
    fmt::print(out, "{} rows -> {}\n", result.rows.size(), a.out);
  }
  if (!a.whatif_out.empty()) {
    const auto budgets = PositWhatIf(result, a.posit_cycles);
    std::ofstream os = OpenOut(a.whatif_out);
    WriteWhatIfCsv(os, result, budgets, a.posit_cycles);
    CloseOut(os, a.whatif_out);
    const auto feasible = std::count_if(budgets.begin(), budgets.end(), [](const auto& b) {
      return b.feasible.value_or(false);
    });
    fmt::print(out, "what-if at {} cycles: {} of {} points feasible -> {}\n",
               a.posit_cycles, feasible, budgets.size(), a.whatif_out);
  }
  return kExitOk;
}

struct PositCheckArgs {
  int nbits = 16;
  int esbits = 2;
};

int RunPositCheck(const PositCheckArgs& a, std::ostream& out, std::ostream& err) {
  if (a.nbits > 16) throw UsageError("posit-check is exhaustive and takes nbits <= 16");
  const PositFormat format = [&] {
    try {
      return PositFormat(a.nbits, a.esbits);
    } catch (const PositFormatError& e) {
      throw UsageError(e.what());
    }
  }();
  const uint32_t count = 1u << a.nbits;
  uint64_t verified = 0;
  std::vector<std::string> violations;

  for (uint32_t bits = 0; bits < count; ++bits) {
    const PositBits p{bits, format};
    const PositValue v = PositDecode(p);
    if (bits == 0) {
      if (v.kind != PositClass::kZero) violations.push_back("0x0 does not decode to zero");
      continue;
    }
    if (bits == format.nar_pattern()) {
      if (!v.is_nar()) violations.push_back(fmt::format("{:#x} does not decode to NaR", bits));
      continue;
    }
    ++verified;
    if (v.kind != PositClass::kReal) {
      violations.push_back(fmt::format("{:#x} decodes to a special value", bits));
      continue;
    }
    const PositBits back = PositEncode(v.value, format);
    if (back.bits != bits) {
      violations.push_back(fmt::format("{:#x} -> {} -> {:#x}", bits, v.value, back.bits));
    }
  }

  // Value order follows two's-complement order over everything but NaR.
  std::vector<uint32_t> patterns;
  for (uint32_t bits = 0; bits < count; ++bits) {
    if (bits != format.nar_pattern()) patterns.push_back(bits);
  }
  std::sort(patterns.begin(), patterns.end(), [&](uint32_t x, uint32_t y) {
    return PositSignedPattern({x, format}) < PositSignedPattern({y, format});
  });
  for (size_t i = 1; i < patterns.size(); ++i) {
    const double lo = PositDecode({patterns[i - 1], format}).value;
    const double hi = PositDecode({patterns[i], format}).value;
    if (!(lo < hi)) {
      violations.push_back(fmt::format("order: {:#x} ({}) !< {:#x} ({})", patterns[i - 1],
                                       lo, patterns[i], hi));
    }
  }

  fmt::print(out, "posit<{},{}>: {} non-special patterns verified, {} violations\n",
             a.nbits, a.esbits, verified, violations.size());
  for (const auto& v : violations) fmt::print(err, "violation: {}\n", v);
  return violations.empty() ? kExitOk : kExitVerifyFailed;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Compressed-storage vector GEMM toolkit"};
  app.name("vcomp");
  app.require_subcommand(1);

  const auto fills = CLI::IsMember({"zeropad", "replicate"});

  AccuracyArgs acc;
  auto* accuracy = app.add_subcommand(
      "accuracy", "bfloat16 round-trip relative error histograms");
  accuracy->add_option("--mode", acc.mode, "zeropad, replicate or both")
      ->check(CLI::IsMember({"zeropad", "replicate", "both"}))
      ->capture_default_str();
  accuracy->add_option("--n", acc.n, "samples per mode")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  accuracy->add_option("--seed", acc.seed, "RNG seed")->capture_default_str();
  accuracy->add_option("--bins", acc.bins, "histogram bins over [0, 2^-7)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  accuracy->add_option("--sampler", acc.sampler, "normal, uniform or constant")
      ->check(CLI::IsMember({"normal", "uniform", "constant"}))
      ->capture_default_str();
  accuracy->add_option("--constant", acc.constant, "value for the constant sampler")
      ->capture_default_str();
  accuracy->add_option("--out", acc.out, "output prefix; writes <prefix>_<mode>.csv")
      ->capture_default_str();

  GemmArgs gm;
  auto* gemm = app.add_subcommand("gemm", "run the GEMM kernel on the vector machine");
  gemm->add_option("--n", gm.n, "matrix order")->check(CLI::PositiveNumber)->capture_default_str();
  gemm->add_option("--vlen", gm.vlen, "vector register width in bits (multiple of 64)")
      ->capture_default_str();
  gemm->add_option("--mode", gm.mode, "compressed or uncompressed")
      ->check(CLI::IsMember({"compressed", "uncompressed"}))
      ->capture_default_str();
  gemm->add_option("--fill", gm.fill, "widening fill: zeropad or replicate")
      ->check(fills)
      ->capture_default_str();
  gemm->add_option("--order", gm.order, "k order: serpentine or ascending")
      ->check(CLI::IsMember({"serpentine", "ascending"}))
      ->capture_default_str();
  gemm->add_option("--seed", gm.seed, "seed for random operands (B uses seed+1)")
      ->capture_default_str();
  gemm->add_option("--trace-out", gm.trace_out, "write the instruction trace CSV");
  gemm->add_option("--a", gm.a_path, "A matrix file (.csv or binary)");
  gemm->add_option("--b", gm.b_path, "B matrix file (.csv or binary)");
  gemm->add_option("--c-out", gm.c_out, "write C (.csv or binary)");
  gemm->add_flag("--identity-a", gm.identity_a, "use the identity for A");
  gemm->add_flag("--check", gm.check, "compare C with the scalar oracle; exit 1 on mismatch");

  std::string census_trace;
  auto* census = app.add_subcommand("census", "per-mnemonic instruction counts of a trace");
  census->add_option("--trace", census_trace, "trace CSV")->required();

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "timing simulation of a trace");
  simulate->add_option("--trace", sim.trace, "trace CSV")->required();
  simulate->add_option("--baseline", sim.baseline,
                       "uncompressed trace; adds improvement and the load/store inequalities");
  simulate->add_option("--config", sim.config,
                       fmt::format("machine config file (default ${})", kConfigEnvVar));
  simulate->add_option("--set", sim.sets, "override a config key, key=value (repeatable)");
  simulate->add_option("--out", sim.out, "write the report as metric,value CSV");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "parameter sweep over machine configs");
  auto* spec_opt = sweep->add_option("--spec", sw.spec, "sweep spec file");
  auto* preset_opt = sweep->add_option("--preset", sw.preset, "table1, fig7, fig8 or fig9")
                         ->check(CLI::IsMember({"table1", "fig7", "fig8", "fig9"}));
  spec_opt->excludes(preset_opt);
  sweep->add_option("--config", sw.config,
                    fmt::format("base config for --spec (default ${})", kConfigEnvVar));
  sweep->add_option("--out", sw.out, "sweep CSV (stdout when absent)");
  sweep->add_option("--whatif-out", sw.whatif_out,
                    "posit converter budget CSV; needs the conv_latency_cycles axis");
  sweep->add_option("--posit-cycles", sw.posit_cycles, "converter latency for the what-if")
      ->capture_default_str();
  auto* threads_opt = sweep->add_option("--threads", sw.threads, "worker threads (0 = all cores)");

  PositCheckArgs pc;
  auto* posit = app.add_subcommand("posit-check", "exhaustive posit codec verification");
  posit->add_option("--nbits", pc.nbits, "posit width, at most 16")->capture_default_str();
  posit->add_option("--esbits", pc.esbits, "exponent field width")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
    if (sweep->parsed() && sw.spec.empty() && sw.preset.empty()) {
      throw CLI::ValidationError("sweep", "one of --spec or --preset is required");
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  sw.threads_set = threads_opt->count() > 0;

  try {
    if (accuracy->parsed()) return RunAccuracy(acc, out);
    if (gemm->parsed()) return RunGemmCommand(gm, out, err);
    if (census->parsed()) return RunCensus(census_trace, out);
    if (simulate->parsed()) return RunSimulate(sim, out);
    if (sweep->parsed()) return RunSweepCommand(sw, out);
    if (posit->parsed()) return RunPositCheck(pc, out, err);
  } catch (const std::exception& e) {
    fmt::print(err, "error: {}\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace vcomp
