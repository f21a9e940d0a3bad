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
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "vcomp/kernels.h"

namespace vcomp {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "vcomp");
  std::ostringstream out, err;
  const int code = RunCli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("vcomp_cli_" + std::string(::testing::UnitTest::GetInstance()
                                           ->current_test_info()
                                           ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv(kConfigEnvVar);
  }
  void TearDown() override {
    fs::remove_all(dir_);
    unsetenv(kConfigEnvVar);
  }
  std::string P(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, HelpAndUsageErrors) {
  const Outcome help = Cli({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  for (const char* cmd : {"accuracy", "gemm", "census", "simulate", "sweep", "posit-check"}) {
    EXPECT_NE(help.out.find(cmd), std::string::npos) << cmd;
  }
  const Outcome gemm_help = Cli({"gemm", "--help"});
  EXPECT_EQ(gemm_help.code, kExitOk);
  for (const char* flag : {"--n", "--vlen", "--mode", "--fill", "--seed", "--trace-out",
                           "--check", "--identity-a"}) {
    EXPECT_NE(gemm_help.out.find(flag), std::string::npos) << flag;
  }
  EXPECT_EQ(Cli({}).code, kExitUsage);
  EXPECT_EQ(Cli({"gemm", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(Cli({"gemm", "--mode", "sideways"}).code, kExitUsage);
  EXPECT_EQ(Cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(Cli({"sweep"}).code, kExitUsage);
  EXPECT_EQ(Cli({"census"}).code, kExitUsage);
}

TEST_F(CliTest, PositCheck) {
  const Outcome o = Cli({"posit-check", "--nbits", "16", "--esbits", "2"});
  EXPECT_EQ(o.code, kExitOk);
  EXPECT_NE(o.out.find("65534 non-special patterns verified, 0 violations"),
            std::string::npos)
      << o.out;
  EXPECT_EQ(Cli({"posit-check", "--nbits", "8", "--esbits", "0"}).code, kExitOk);
  EXPECT_EQ(Cli({"posit-check", "--nbits", "20"}).code, kExitUsage);
  EXPECT_EQ(Cli({"posit-check", "--nbits", "8", "--esbits", "7"}).code, kExitUsage);
}

TEST_F(CliTest, AccuracyWritesBothModes) {
  const Outcome o = Cli({"accuracy", "--mode", "both", "--n", "20000", "--seed", "7",
                         "--out", P("acc")});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  const std::string z = Slurp(P("acc_zeropad.csv"));
  const std::string r = Slurp(P("acc_replicate.csv"));
  EXPECT_EQ(z.rfind("# mode=zeropad n=20000 seed=7", 0), 0u);
  EXPECT_EQ(r.rfind("# mode=replicate n=20000 seed=7", 0), 0u);
  EXPECT_NE(o.out.find("zeropad mean_rel_error="), std::string::npos);

  ASSERT_EQ(Cli({"accuracy", "--mode", "both", "--n", "20000", "--seed", "7", "--out",
                 P("again")})
                .code,
            kExitOk);
  EXPECT_EQ(Slurp(P("again_zeropad.csv")), z);
  EXPECT_EQ(Slurp(P("again_replicate.csv")), r);
}

TEST_F(CliTest, AccuracySingleSample) {
  const Outcome o = Cli({"accuracy", "--mode", "zeropad", "--n", "1", "--sampler",
                         "constant", "--out", P("one")});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  EXPECT_NE(Slurp(P("one_zeropad.csv")).find("\n0.000000000e+00,"), std::string::npos);
  EXPECT_FALSE(fs::exists(P("one_replicate.csv")));
}

TEST_F(CliTest, AccuracyUnwritableOutput) {
  EXPECT_EQ(Cli({"accuracy", "--n", "10", "--out", P("missing/dir/acc")}).code, kExitUsage);
}

TEST_F(CliTest, GemmCheckAndTrace) {
  const Outcome o = Cli({"gemm", "--n", "32", "--vlen", "1024", "--mode", "compressed",
                         "--check", "--trace-out", P("c.trace")});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  EXPECT_NE(o.out.find("check: 0 mismatches"), std::string::npos);
  const std::string trace = Slurp(P("c.trace"));
  EXPECT_EQ(trace.rfind("# vlen_bits=1024\n", 0), 0u);
  EXPECT_NE(trace.find(",vnsrl_imm,"), std::string::npos);
  EXPECT_NE(trace.find(",vwmulu_sc,"), std::string::npos);
}

TEST_F(CliTest, GemmIdentityGivesB) {
  const float bv[] = {1.5f, -2.0f, 0.25f, 8.0f};
  std::ofstream(P("b.csv")) << "1.5,-2\n0.25,8\n";
  const Outcome o = Cli({"gemm", "--n", "2", "--mode", "uncompressed", "--identity-a",
                         "--b", P("b.csv"), "--c-out", P("c.csv")});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  std::ifstream in(P("c.csv"));
  EXPECT_EQ(ReadMatrixCsv(in, ElementWidth::kB32), Matrix::FromFloats(2, 2, bv));
}

TEST_F(CliTest, GemmBadInputs) {
  std::ofstream(P("b.csv")) << "1,2,3\n4,5,6\n";
  EXPECT_EQ(Cli({"gemm", "--n", "2", "--b", P("b.csv")}).code, kExitUsage);
  EXPECT_EQ(Cli({"gemm", "--n", "4", "--vlen", "100"}).code, kExitUsage);
  EXPECT_EQ(Cli({"gemm", "--n", "0"}).code, kExitUsage);
}

TEST_F(CliTest, CensusAndSimulate) {
  ASSERT_EQ(Cli({"gemm", "--n", "16", "--vlen", "512", "--mode", "compressed",
                 "--trace-out", P("c.trace")})
                .code,
            kExitOk);
  ASSERT_EQ(Cli({"gemm", "--n", "16", "--vlen", "512", "--mode", "uncompressed",
                 "--trace-out", P("u.trace")})
                .code,
            kExitOk);
  const Outcome census = Cli({"census", "--trace", P("c.trace")});
  ASSERT_EQ(census.code, kExitOk);
  EXPECT_EQ(census.out.rfind("mnemonic,count\n", 0), 0u);
  EXPECT_NE(census.out.find("vnsrl_imm,"), std::string::npos);

  const Outcome sim = Cli({"simulate", "--trace", P("c.trace"), "--baseline", P("u.trace"),
                           "--set", "rob_entries=1", "--out", P("report.csv")});
  ASSERT_EQ(sim.code, kExitOk) << sim.err;
  EXPECT_NE(sim.out.find("-> equal"), std::string::npos) << sim.out;
  EXPECT_NE(sim.out.find("load side:"), std::string::npos);
  EXPECT_NE(sim.out.find("improvement="), std::string::npos);
  EXPECT_EQ(Slurp(P("report.csv")).rfind("metric,value\n", 0), 0u);
}

TEST_F(CliTest, CensusOnEmptyTrace) {
  std::ofstream(P("empty.trace"))
      << "# vlen_bits=512\nseq,mnemonic,sew,vl,bytes,base,regs,scalar_ops\n";
  const Outcome o = Cli({"census", "--trace", P("empty.trace")});
  EXPECT_EQ(o.code, kExitOk);
  EXPECT_EQ(o.out, "mnemonic,count\n");
}

TEST_F(CliTest, ParseErrorsCarryLineNumbers) {
  std::ofstream(P("bad.trace"))
      << "# vlen_bits=512\nseq,mnemonic,sew,vl,bytes,base,regs,scalar_ops\n0,vxor,32,1,0,0,-:-:-,0\n";
  const Outcome t = Cli({"census", "--trace", P("bad.trace")});
  EXPECT_EQ(t.code, kExitUsage);
  EXPECT_NE(t.err.find("line 3"), std::string::npos) << t.err;

  std::ofstream(P("bad.cfg")) << "rob_entries = 4\nmystery = 1\n";
  std::ofstream(P("empty.trace"))
      << "# vlen_bits=512\nseq,mnemonic,sew,vl,bytes,base,regs,scalar_ops\n";
  const Outcome c = Cli({"simulate", "--trace", P("empty.trace"), "--config", P("bad.cfg")});
  EXPECT_EQ(c.code, kExitUsage);
  EXPECT_NE(c.err.find("line 2"), std::string::npos) << c.err;

  EXPECT_EQ(Cli({"census", "--trace", P("nope.trace")}).code, kExitUsage);
}

TEST_F(CliTest, ConfigFromEnvironment) {
  ASSERT_EQ(Cli({"gemm", "--n", "8", "--vlen", "512", "--trace-out", P("t.trace")}).code,
            kExitOk);
  std::ofstream(P("rob1.cfg")) << "rob_entries = 1\n";
  setenv(kConfigEnvVar, P("rob1.cfg").c_str(), 1);
  const Outcome o = Cli({"simulate", "--trace", P("t.trace")});
  ASSERT_EQ(o.code, kExitOk) << o.err;
  EXPECT_NE(o.out.find("rob=1 cross-check"), std::string::npos);
}

TEST_F(CliTest, SweepFromSpecIsDeterministic) {
  std::ofstream(P("s.spec")) << "n = 16\nvlen_bits = 512\nl1_size_bytes = 4096\n"
                                "axis.mem_bandwidth_bytes_per_s = 1e9, 1e11\n"
                                "axis.conv_latency_cycles = 1, 20, 50\n";
  const std::vector<std::string> args = {"sweep", "--spec", P("s.spec"), "--out",
                                         P("a.csv"), "--whatif-out", P("w.csv")};
  const Outcome o = Cli(args);
  ASSERT_EQ(o.code, kExitOk) << o.err;
  EXPECT_NE(o.out.find("6 rows"), std::string::npos);
  const std::string first = Slurp(P("a.csv"));
  const std::string whatif = Slurp(P("w.csv"));
  ASSERT_EQ(Cli(args).code, kExitOk);
  EXPECT_EQ(Slurp(P("a.csv")), first);
  EXPECT_EQ(Slurp(P("w.csv")), whatif);
  EXPECT_EQ(std::count(first.begin(), first.end(), '\n'), 7);
}

TEST_F(CliTest, SweepErrors) {
  std::ofstream(P("s.spec")) << "axis.l1_size_bytes = 100\n";
  EXPECT_EQ(Cli({"sweep", "--spec", P("s.spec")}).code, kExitUsage);
  std::ofstream(P("t.spec")) << "n = 16\nvlen_bits = 512\naxis.mem_latency_ns = 10\n";
  EXPECT_EQ(Cli({"sweep", "--spec", P("t.spec"), "--whatif-out", P("w.csv")}).code,
            kExitUsage);
  EXPECT_EQ(Cli({"sweep", "--preset", "fig99"}).code, kExitUsage);
}

}  // namespace
}  // namespace vcomp
