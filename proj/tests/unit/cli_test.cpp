#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "derand/cli/cli.hpp"
#include "derand/cli/format.hpp"
#include "support/oracles.hpp"

namespace derand::cli {
namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

bool contains(const std::string& text, const std::string& fragment) {
  return text.find(fragment) != std::string::npos;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = derand::testing::scratch_dir(
        std::string("cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::filesystem::path dir_;
};

TEST_F(CliTest, ConstructBiasThenVerify) {
  const std::string out = path("bias.txt");
  const auto c = run_cli({"construct", "bias", "--n", "12", "--eps", "0.3", "--out", out});
  ASSERT_EQ(c.code, kExitOk) << c.err;
  EXPECT_TRUE(contains(c.out, "trace.0=PASS"));
  const SampleFile file = read_sample_file(out);
  EXPECT_EQ(file.set.word_length, 12u);
  EXPECT_EQ(file.kind, "bias");
  const std::string header = read_file(out).substr(0, read_file(out).find('\n'));
  EXPECT_TRUE(contains(header, "alphabet=2 n=12 count=" + std::to_string(file.set.size())));
  EXPECT_TRUE(std::filesystem::exists(manifest_path(out)));
  const auto v = run_cli({"verify", "bias", "--in", out});
  EXPECT_EQ(v.code, kExitOk) << v.out << v.err;
  EXPECT_TRUE(contains(v.out, "PASS"));
}

TEST_F(CliTest, ConstructKwiseRoundTripsThroughVerify) {
  const std::string out = path("kwise.txt");
  const std::string trace = path("kwise.trace");
  const auto c = run_cli({"construct", "kwise", "--n", "8", "--k", "3", "--eps", "0.1", "--norm",
                          "linf", "--out", out, "--trace", trace});
  ASSERT_EQ(c.code, kExitOk) << c.err;
  EXPECT_TRUE(std::filesystem::exists(trace));
  EXPECT_TRUE(contains(read_file(trace), "# trace 0 method=conditional"));
  const auto v = run_cli({"verify", "kwise", "--in", out, "--format", "kv"});
  EXPECT_EQ(v.code, kExitOk) << v.out;
  EXPECT_TRUE(contains(v.out, "pass=true"));
  EXPECT_TRUE(contains(v.out, "threshold=1/10"));
}

TEST_F(CliTest, InvalidEpsilonIsUsageError) {
  const auto c = run_cli({"construct", "bias", "--n", "12", "--eps", "0.6", "--out", path("x")});
  EXPECT_EQ(c.code, kExitUsage);
  EXPECT_FALSE(c.err.empty());
  EXPECT_FALSE(std::filesystem::exists(path("x")));
}

TEST_F(CliTest, FullCubeVerifiesWithZeroDeviation) {
  auto cube = derand::testing::full_cube(5);
  const std::string file = path("cube.txt");
  write_file(file, serialize_sample(cube, "cube"));
  for (const char* k : {"1", "2", "3", "5"}) {
    const auto v = run_cli({"verify", "kwise", "--in", file, "--k", k, "--eps", "0", "--norm",
                            "linf", "--format", "kv"});
    EXPECT_EQ(v.code, kExitOk) << v.out << v.err;
    EXPECT_TRUE(contains(v.out, "max_deviation=0/1"));
  }
  EXPECT_EQ(run_cli({"verify", "bias", "--in", file, "--eps", "0"}).code, kExitOk);
}

TEST_F(CliTest, ConstantWordsFailWithWitness) {
  SampleMultiset s;
  s.word_length = 6;
  s.words = {Word(6, 0), Word(6, 1)};
  const std::string file = path("constant.txt");
  write_file(file, serialize_sample(s, "kwise"));
  const auto v = run_cli({"verify", "kwise", "--in", file, "--k", "2", "--eps", "0.2", "--norm",
                          "linf", "--format", "kv"});
  EXPECT_EQ(v.code, kExitVerifyFailed);
  EXPECT_TRUE(contains(v.out, "witness=I={1,2}"));
  EXPECT_TRUE(contains(v.out, "max_deviation=1/4"));
}

TEST_F(CliTest, PhfAndCodeRoundTrip) {
  const std::string phf = path("phf.txt");
  ASSERT_EQ(run_cli({"construct", "phf", "--n", "10", "--q", "37", "--k", "2", "--eps", "0.5",
                     "--out", phf})
                .code,
            kExitOk);
  const auto v = run_cli({"verify", "phf", "--in", phf, "--collisions", "--format", "kv"});
  EXPECT_EQ(v.code, kExitOk) << v.out;
  const std::string code = path("code.txt");
  ASSERT_EQ(run_cli({"construct", "code", "--q", "3", "--k", "2", "--eps", "0.5", "--out", code})
                .code,
            kExitOk);
  EXPECT_EQ(run_cli({"verify", "code", "--in", code}).code, kExitOk);
}

TEST_F(CliTest, ComposeMultipliesSizes) {
  SampleMultiset hash;
  hash.alphabet = 4;
  hash.word_length = 6;
  hash.words = {{0, 1, 2, 3, 0, 1}, {3, 2, 1, 0, 2, 3}};
  write_file(path("hash.txt"), serialize_sample(hash, "phf"));
  write_file(path("inner.txt"), serialize_sample(derand::testing::full_cube(4), "cube"));
  const std::string out = path("composed.txt");
  const auto c = run_cli({"compose", "--phf", path("hash.txt"), "--inner", path("inner.txt"),
                          "--out", out});
  ASSERT_EQ(c.code, kExitOk) << c.err;
  EXPECT_TRUE(contains(c.out, "size=32"));
  EXPECT_TRUE(contains(c.out, "size_bound=32"));
  EXPECT_EQ(read_sample_file(out).set.size(), 32u);
  EXPECT_TRUE(std::filesystem::exists(manifest_path(out)));
}

TEST_F(CliTest, ComposeRejectsDimensionMismatch) {
  SampleMultiset hash;
  hash.alphabet = 5;
  hash.word_length = 2;
  hash.words = {{0, 4}};
  write_file(path("hash.txt"), serialize_sample(hash, "phf"));
  write_file(path("inner.txt"), serialize_sample(derand::testing::full_cube(4), "cube"));
  const auto c = run_cli({"compose", "--phf", path("hash.txt"), "--inner", path("inner.txt"),
                          "--out", path("x.txt")});
  EXPECT_EQ(c.code, kExitUsage);
}

TEST_F(CliTest, BoundsTable) {
  const auto b = run_cli({"bounds", "--n", "1048576", "--k", "4", "--eps", "0.01"});
  EXPECT_EQ(b.code, kExitOk);
  EXPECT_TRUE(contains(b.out, "up to unspecified constants"));
  EXPECT_TRUE(contains(b.out, "7604.07"));
  const auto kv = run_cli({"bounds", "--n", "1048576", "--k", "4", "--eps", "0.01", "--format",
                           "kv", "--achieved", "999"});
  EXPECT_TRUE(contains(kv.out, "lb.l1=120412"));
  EXPECT_TRUE(contains(kv.out, "achieved=999"));
}

TEST_F(CliTest, ReplayReproducesOutput) {
  const std::string out = path("k.txt");
  ASSERT_EQ(run_cli({"construct", "kwise", "--n", "6", "--k", "2", "--eps", "0.2", "--out", out})
                .code,
            kExitOk);
  const auto r = run_cli({"replay", manifest_path(out).string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_TRUE(contains(r.out, "replay=identical"));
  EXPECT_EQ(read_file(out), read_file(out + ".replay"));

  RunManifest m = RunManifest::parse(read_file(manifest_path(out)));
  m.output_sha256 = std::string(64, '0');
  const std::string tampered = path("tampered.manifest");
  write_file(tampered, m.serialize());
  const auto bad = run_cli({"replay", tampered, "--out", path("again.txt")});
  EXPECT_EQ(bad.code, kExitVerifyFailed);
  EXPECT_TRUE(contains(bad.out, "replay=MISMATCH"));
}

TEST_F(CliTest, UsageAndInputErrors) {
  EXPECT_EQ(run_cli({}).code, kExitUsage);
  EXPECT_EQ(run_cli({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"construct", "bias", "--n", "4"}).code, kExitUsage);
  EXPECT_EQ(run_cli({"verify", "bias", "--in", path("missing.txt")}).code, kExitUsage);
  write_file(path("bad.txt"), "not a sample\n");
  EXPECT_EQ(run_cli({"verify", "bias", "--in", path("bad.txt")}).code, kExitUsage);
  EXPECT_EQ(run_cli({"--help"}).code, kExitOk);
}

TEST_F(CliTest, BudgetFromEnvironment) {
  ::setenv("DERAND_BUDGET", "10", 1);
  const auto small = run_cli({"construct", "kwise", "--n", "8", "--k", "3", "--eps", "0.1",
                              "--out", path("k.txt")});
  ::unsetenv("DERAND_BUDGET");
  EXPECT_EQ(small.code, kExitUsage);
  EXPECT_TRUE(contains(small.err, "budget"));
}

}  // namespace
}  // namespace derand::cli
