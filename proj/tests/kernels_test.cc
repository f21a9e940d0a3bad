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

#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "vcomp/formats.h"

namespace vcomp {
namespace {

uint64_t MemoryBytes(const Trace& t, bool loads) {
  uint64_t total = 0;
  for (const auto& r : t.records) {
    if (loads ? IsLoad(r.op) : IsStore(r.op)) total += r.bytes;
  }
  return total;
}

uint64_t Count(const std::map<std::string, uint64_t>& census, const std::string& m) {
  auto it = census.find(m);
  return it == census.end() ? 0 : it->second;
}

KernelSpec Spec(uint32_t n, uint32_t vlen, GemmMode mode,
                FillMode fill = FillMode::kZeroPad) {
  KernelSpec s;
  s.n = n;
  s.vlen_bits = vlen;
  s.mode = mode;
  s.fill = fill;
  return s;
}

TEST(MatrixTest, BytesRoundTrip) {
  const Matrix m = RandomBf16ExactMatrix(3, 5, 4);
  EXPECT_EQ(Matrix::FromBytes(3, 5, ElementWidth::kB32, m.ToBytes()), m);
  const Matrix c = CompressMatrix(m);
  EXPECT_EQ(c.width(), ElementWidth::kBf16);
  EXPECT_EQ(c.ToBytes().size(), 30u);
  EXPECT_EQ(DecompressMatrix(c, FillMode::kZeroPad), m);
}

TEST(MatrixTest, RandomValuesAreBf16Exact) {
  const Matrix m = RandomBf16ExactMatrix(16, 16, 9);
  for (uint32_t v : m.data()) EXPECT_EQ(v & 0xFFFF, 0u);
  for (size_t i = 0; i < 16; ++i) {
    EXPECT_GE(m.value(i, i), -1.0f);
    EXPECT_LT(m.value(i, i), 1.0f);
  }
  EXPECT_EQ(RandomBf16ExactMatrix(16, 16, 9), m);
  EXPECT_NE(RandomBf16ExactMatrix(16, 16, 10), m);
}

TEST(MatrixTest, BinaryFileRoundTrip) {
  for (const Matrix& m : {RandomBf16ExactMatrix(4, 7, 1), CompressMatrix(RandomBf16ExactMatrix(2, 3, 2))}) {
    std::stringstream ss;
    WriteMatrixBinary(ss, m);
    EXPECT_EQ(ss.str().substr(0, 4), "VMAT");
    EXPECT_EQ(ss.str().size(), 16 + m.rows() * m.cols() * m.element_bytes());
    EXPECT_EQ(ReadMatrixBinary(ss), m);
  }
  std::istringstream bad("XXXX0000000000000000");
  EXPECT_THROW(ReadMatrixBinary(bad), std::exception);
}

TEST(MatrixTest, CsvRoundTrip) {
  const Matrix m = RandomBf16ExactMatrix(3, 4, 5);
  std::stringstream ss;
  WriteMatrixCsv(ss, m);
  EXPECT_EQ(ReadMatrixCsv(ss, ElementWidth::kB32), m);
  std::istringstream ragged("1,2\n3\n");
  EXPECT_THROW(ReadMatrixCsv(ragged, ElementWidth::kB32), std::exception);
}

TEST(GemmTest, TwoByTwoExample) {
  const float av[] = {1, 2, 3, 4};
  const float bv[] = {5, 6, 7, 8};
  const Matrix a = Matrix::FromFloats(2, 2, av);
  const Matrix b = Matrix::FromFloats(2, 2, bv);
  const float cv[] = {19, 22, 43, 50};
  const Matrix expected = Matrix::FromFloats(2, 2, cv);
  EXPECT_EQ(GemmUncompressed(a, b, Spec(2, 4096, GemmMode::kUncompressed)).c, expected);
  EXPECT_EQ(ScalarGemmOracle(a, b), expected);
  EXPECT_EQ(GemmCompressed(CompressMatrix(a), CompressMatrix(b),
                           Spec(2, 4096, GemmMode::kCompressed))
                .c,
            CompressMatrix(expected));
}

TEST(GemmTest, IdentityGivesB) {
  for (uint32_t n : {2u, 5u, 64u}) {
    const Matrix b = RandomBf16ExactMatrix(n, n, n);
    const Matrix i32 = Matrix::Identity(n, ElementWidth::kB32);
    EXPECT_EQ(GemmUncompressed(i32, b, Spec(n, 1024, GemmMode::kUncompressed)).c, b);
    const Matrix b16 = CompressMatrix(b);
    EXPECT_EQ(GemmCompressed(Matrix::Identity(n, ElementWidth::kBf16), b16,
                             Spec(n, 1024, GemmMode::kCompressed))
                  .c,
              b16);
  }
}

TEST(GemmTest, DimensionErrors) {
  const Matrix a = RandomBf16ExactMatrix(4, 4, 1);
  EXPECT_THROW(GemmUncompressed(a, RandomBf16ExactMatrix(4, 3, 1),
                                Spec(4, 1024, GemmMode::kUncompressed)),
               DimensionError);
  EXPECT_THROW(GemmUncompressed(a, a, Spec(8, 1024, GemmMode::kUncompressed)),
               DimensionError);
  EXPECT_THROW(GemmCompressed(a, a, Spec(4, 1024, GemmMode::kCompressed)), DimensionError);
  EXPECT_THROW(ScalarGemmOracle(a, RandomBf16ExactMatrix(3, 4, 1)), DimensionError);
}

// Covers row lengths that fill, split and straddle strip groups.
class OracleTest : public ::testing::TestWithParam<std::tuple<uint32_t, uint32_t>> {};

TEST_P(OracleTest, BothKernelsMatchOracle) {
  const auto [n, vlen] = GetParam();
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix a = RandomBf16ExactMatrix(n, n, seed * 7);
    const Matrix b = RandomBf16ExactMatrix(n, n, seed * 7 + 1);
    ASSERT_EQ(GemmUncompressed(a, b, Spec(n, vlen, GemmMode::kUncompressed)).c,
              ScalarGemmOracle(a, b));
    for (FillMode fill : {FillMode::kZeroPad, FillMode::kReplicate}) {
      const Matrix a16 = CompressMatrix(a), b16 = CompressMatrix(b);
      ASSERT_EQ(GemmCompressed(a16, b16, Spec(n, vlen, GemmMode::kCompressed, fill)).c,
                CompressedGemmOracle(a16, b16, fill));
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Shapes, OracleTest,
                         ::testing::Combine(::testing::Values(1u, 3u, 4u, 8u, 17u, 33u, 130u),
                                            ::testing::Values(128u, 512u, 4096u)));

TEST(GemmTest, AscendingOrderAlsoMatchesItsOracle) {
  KernelSpec spec = Spec(40, 512, GemmMode::kUncompressed);
  spec.order = AccumulationOrder::kAscending;
  const Matrix a = RandomBf16ExactMatrix(40, 40, 3);
  const Matrix b = RandomBf16ExactMatrix(40, 40, 4);
  EXPECT_EQ(GemmUncompressed(a, b, spec).c, ScalarGemmOracle(a, b, AccumulationOrder::kAscending));
}

TEST(GemmTest, OracleDependsOnOrder) {
  // Plain random data almost surely rounds differently in the two orders.
  const Matrix a = RandomBf16ExactMatrix(64, 64, 3);
  const Matrix b = RandomBf16ExactMatrix(64, 64, 4);
  EXPECT_NE(ScalarGemmOracle(a, b, AccumulationOrder::kAscending),
            ScalarGemmOracle(a, b, AccumulationOrder::kSerpentine));
  EXPECT_TRUE(RowAscending(AccumulationOrder::kSerpentine, 0));
  EXPECT_FALSE(RowAscending(AccumulationOrder::kSerpentine, 1));
  EXPECT_TRUE(RowAscending(AccumulationOrder::kAscending, 1));
}

TEST(FragmentTest, UnpackAndPackAreSingleInstructions) {
  Program p;
  AppendUnpack(p, 16, 8, FillMode::kZeroPad);
  AppendUnpack(p, 17, 9, FillMode::kReplicate);
  AppendPack(p, 10, 0);
  ASSERT_EQ(p.size(), 3u);
  EXPECT_EQ(p[0].op, Opcode::kVwmuluSc);
  EXPECT_EQ(p[0].imm, 65536u);
  EXPECT_EQ(p[1].imm, 65537u);
  EXPECT_EQ(p[2].op, Opcode::kVnsrlImm);
  EXPECT_EQ(p[2].imm, 16u);
}

TEST(CensusTest, EmptyTrace) { EXPECT_TRUE(InstructionCensus(Trace{}).empty()); }

class TrafficTest : public ::testing::TestWithParam<std::tuple<uint32_t, uint32_t>> {};

TEST_P(TrafficTest, CompressedHalvesBytesWithEqualOpCounts) {
  const auto [n, vlen] = GetParam();
  const Matrix a = RandomBf16ExactMatrix(n, n, 1);
  const Matrix b = RandomBf16ExactMatrix(n, n, 2);
  const Trace u = GemmUncompressed(a, b, Spec(n, vlen, GemmMode::kUncompressed)).trace;
  const Trace c = GemmCompressed(CompressMatrix(a), CompressMatrix(b),
                                 Spec(n, vlen, GemmMode::kCompressed))
                      .trace;
  EXPECT_EQ(2 * MemoryBytes(c, true), MemoryBytes(u, true));
  EXPECT_EQ(2 * MemoryBytes(c, false), MemoryBytes(u, false));
  const auto cc = InstructionCensus(c);
  const auto cu = InstructionCensus(u);
  EXPECT_EQ(Count(cc, "vle16"), Count(cu, "vle32"));
  EXPECT_EQ(Count(cc, "vse16"), Count(cu, "vse32"));
  EXPECT_EQ(Count(cc, "vle32") + Count(cc, "vse32"), 0u);
  EXPECT_EQ(Count(cu, "vle16") + Count(cu, "vse16"), 0u);
  EXPECT_GT(Count(cc, "vnsrl_imm"), 0u);
  EXPECT_GT(Count(cc, "vwmulu_sc"), 0u);
  EXPECT_GT(Count(cc, "vsetvli"), Count(cu, "vsetvli"));
  EXPECT_EQ(Count(cu, "vnsrl_imm"), 0u);
  EXPECT_EQ(Count(cu, "vwmulu_sc"), 0u);
  // Every memory op moves vl * element bytes.
  for (const auto& r : c.records) {
    if (IsMemory(r.op)) ASSERT_EQ(r.bytes, r.vl * r.sew / 8);
  }
}

INSTANTIATE_TEST_SUITE_P(Sizes, TrafficTest,
                         ::testing::Combine(::testing::Values(4u, 37u, 128u),
                                            ::testing::Values(512u, 4096u, 16384u)));

TEST(CensusTest, StableAcrossRunsAndData) {
  const KernelSpec spec = Spec(48, 1024, GemmMode::kCompressed);
  auto census = [&](uint64_t seed) {
    const Matrix a = CompressMatrix(RandomBf16ExactMatrix(48, 48, seed));
    const Matrix b = CompressMatrix(RandomBf16ExactMatrix(48, 48, seed + 1));
    return InstructionCensus(GemmCompressed(a, b, spec).trace);
  };
  EXPECT_EQ(census(1), census(1));
  EXPECT_EQ(census(1), census(99));
}

TEST(GemmTest, ProgramIndependentOfData) {
  const KernelSpec spec = Spec(16, 512, GemmMode::kUncompressed);
  const Trace t1 = GemmUncompressed(RandomBf16ExactMatrix(16, 16, 1),
                                    RandomBf16ExactMatrix(16, 16, 2), spec)
                       .trace;
  const Trace t2 = GemmUncompressed(RandomBf16ExactMatrix(16, 16, 5),
                                    RandomBf16ExactMatrix(16, 16, 6), spec)
                       .trace;
  EXPECT_EQ(t1, t2);
}

TEST(GemmTest, TraceCarriesScalarOps) {
  const KernelSpec spec = Spec(8, 512, GemmMode::kCompressed);
  const Matrix a = CompressMatrix(RandomBf16ExactMatrix(8, 8, 1));
  const Trace t = GemmCompressed(a, a, spec).trace;
  uint64_t scalar = 0;
  for (const auto& r : t.records) scalar += r.scalar_ops;
  EXPECT_GT(scalar, 0u);
}

TEST(GemmTest, Mode512HasConversionRecords) {
  const KernelSpec spec = Spec(512, 16384, GemmMode::kCompressed);
  const GemmLayout layout = GemmLayout::For(spec);
  const Program p = BuildGemmProgram(spec, layout);
  size_t vnsrl = 0, vwmulu = 0;
  for (const Instr& i : p) {
    vnsrl += i.op == Opcode::kVnsrlImm;
    vwmulu += i.op == Opcode::kVwmuluSc;
  }
  EXPECT_GT(vnsrl, 0u);
  EXPECT_GT(vwmulu, 0u);
  EXPECT_EQ(layout.b % 4096, 0u);
  EXPECT_EQ(layout.c % 4096, 0u);
}

}  // namespace
}  // namespace vcomp
