// End-to-end coverage of the command-line tool, invoking the real binary.

#include <cstdlib>
#include <fstream>
#include <gtest/gtest.h>
#include <sstream>

#include "cardioseg/volume_io.hpp"
#include "testutil.hpp"

using namespace cardioseg;
using testutil::TempDir;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

CliResult run_cli(const std::string& args, const std::filesystem::path& scratch) {
  const std::filesystem::path out_file = scratch / "cli_output.txt";
  const std::string cmd = std::string(CARDIOSEG_CLI_PATH) + " " + args + " > " +
                          out_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::stringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

const std::string kDeskConfig = std::string(CARDIOSEG_CONFIG_DIR) + "/desk.cfg";

}  // namespace

TEST(Cli, SynthWritesTriplesAndManifest) {
  TempDir tmp;
  const auto out = (tmp.path() / "data").string();
  const CliResult r =
      run_cli("synth --out " + out + " --count 4 --size 32 --seed 7", tmp.path());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  int mhd = 0, raw = 0;
  for (const auto& e : std::filesystem::directory_iterator(out)) {
    if (e.path().extension() == ".mhd") ++mhd;
    if (e.path().extension() == ".raw") ++raw;
  }
  EXPECT_EQ(mhd, 12);  // 4 triples
  EXPECT_EQ(raw, 12);
  ASSERT_TRUE(std::filesystem::exists(tmp.path() / "data" / "manifest.tsv"));
  std::ifstream manifest(tmp.path() / "data" / "manifest.tsv");
  int lines = 0;
  std::string line;
  while (std::getline(manifest, line)) ++lines;
  EXPECT_EQ(lines, 8);  // one CT + one MR entry per phantom
}

TEST(Cli, SynthIsByteDeterministicPerSeed) {
  TempDir tmp;
  const auto a = (tmp.path() / "a").string();
  const auto b = (tmp.path() / "b").string();
  ASSERT_EQ(run_cli("synth --out " + a + " --count 2 --size 16 --seed 9", tmp.path()).exit_code, 0);
  ASSERT_EQ(run_cli("synth --out " + b + " --count 2 --size 16 --seed 9", tmp.path()).exit_code, 0);
  for (const auto& e : std::filesystem::directory_iterator(a)) {
    const auto twin = std::filesystem::path(b) / e.path().filename();
    ASSERT_TRUE(std::filesystem::exists(twin));
    EXPECT_EQ(slurp(e.path()), slurp(twin)) << e.path().filename();
  }
}

TEST(Cli, TrainPredictEvaluateRoundTrip) {
  TempDir tmp;
  const auto data = (tmp.path() / "data").string();
  const auto ckpt = (tmp.path() / "ckpt").string();
  ASSERT_EQ(run_cli("synth --out " + data + " --count 2 --size 16 --seed 3", tmp.path()).exit_code,
            0);

  const CliResult train = run_cli("train --manifest " + data + "/manifest.tsv --config " +
                                      kDeskConfig + " --out " + ckpt + " --set iterations=8",
                                  tmp.path());
  ASSERT_EQ(train.exit_code, 0) << train.output;
  ASSERT_TRUE(std::filesystem::exists(tmp.path() / "ckpt" / "ckpt_final.ckpt"));

  const auto seg = (tmp.path() / "seg.mhd").string();
  const CliResult predict = run_cli("predict --checkpoints '" + ckpt + "/*' --input " + data +
                                        "/phantom_000_ct.mhd --out " + seg + " --crop 16",
                                    tmp.path());
  ASSERT_EQ(predict.exit_code, 0) << predict.output;
  ASSERT_TRUE(std::filesystem::exists(seg));
  const LabelMap labels = read_labels(seg);
  EXPECT_EQ(labels.dims, (Vec3i{16, 16, 16}));
  for (auto v : labels.data) ASSERT_LE(v, kMaxLabel);

  const CliResult eval = run_cli(
      "evaluate --pred " + seg + " --gt " + data + "/phantom_000_labels.mhd", tmp.path());
  ASSERT_EQ(eval.exit_code, 0) << eval.output;
  int lines = 0;
  for (char c : eval.output) lines += c == '\n';
  EXPECT_EQ(lines, 9);  // header + 7 classes + mean
  EXPECT_NE(eval.output.find("class,dsc,hd,assd"), std::string::npos);
  EXPECT_NE(eval.output.find("mean,"), std::string::npos);
}

TEST(Cli, PredictAutoDetectsModality) {
  TempDir tmp;
  const auto data = (tmp.path() / "data").string();
  const auto ckpt = (tmp.path() / "ckpt").string();
  ASSERT_EQ(run_cli("synth --out " + data + " --count 1 --size 16 --seed 5", tmp.path()).exit_code,
            0);
  ASSERT_EQ(run_cli("train --manifest " + data + "/manifest.tsv --config " + kDeskConfig +
                        " --out " + ckpt + " --set iterations=4",
                    tmp.path())
                .exit_code,
            0);
  const CliResult r = run_cli("predict --checkpoints " + ckpt + "/ckpt_final.ckpt --input " +
                                  data + "/phantom_000_mr.mhd --out " + (tmp.path() / "s.mhd").string() +
                                  " --crop 16",
                              tmp.path());
  ASSERT_EQ(r.exit_code, 0) << r.output;
  EXPECT_NE(r.output.find("MR"), std::string::npos);
}

TEST(Cli, ZeroIterationsRejectedWithExitOne) {
  TempDir tmp;
  const auto data = (tmp.path() / "data").string();
  ASSERT_EQ(run_cli("synth --out " + data + " --count 1 --size 16 --seed 2", tmp.path()).exit_code,
            0);
  const CliResult r = run_cli("train --manifest " + data + "/manifest.tsv --config " +
                                  kDeskConfig + " --out " + (tmp.path() / "c").string() +
                                  " --set iterations=0",
                              tmp.path());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("error:"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  TempDir tmp;
  EXPECT_EQ(run_cli("frobnicate", tmp.path()).exit_code, 2);
  EXPECT_EQ(run_cli("synth --no-such-flag 1", tmp.path()).exit_code, 2);
  EXPECT_EQ(run_cli("", tmp.path()).exit_code, 2);  // subcommand required
}

TEST(Cli, DomainErrorsExitOne) {
  TempDir tmp;
  const CliResult r = run_cli("evaluate --pred missing.mhd --gt missing.mhd", tmp.path());
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.output.find("error:"), std::string::npos);
}

TEST(Cli, TrainingIsByteDeterministicPerSeed) {
  TempDir tmp;
  const auto data = (tmp.path() / "data").string();
  ASSERT_EQ(run_cli("synth --out " + data + " --count 1 --size 16 --seed 4", tmp.path()).exit_code,
            0);
  const std::string base = "train --manifest " + data + "/manifest.tsv --config " + kDeskConfig +
                           " --set iterations=5 --out ";
  ASSERT_EQ(run_cli(base + (tmp.path() / "r1").string(), tmp.path()).exit_code, 0);
  ASSERT_EQ(run_cli(base + (tmp.path() / "r2").string(), tmp.path()).exit_code, 0);
  EXPECT_EQ(slurp(tmp.path() / "r1" / "ckpt_final.ckpt"),
            slurp(tmp.path() / "r2" / "ckpt_final.ckpt"));
}
