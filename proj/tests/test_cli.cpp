// Copyright 2026 The blvnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>

#include "blvnet/analyzer.hpp"
#include "blvnet/checkpoint.hpp"
#include "blvnet/dataio.hpp"
#include "blvnet/network.hpp"
#include "json.hpp"

namespace blvnet {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Run {
  int code = -1;
  std::string out;
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(BLVNET_CLI) + " " + args + " 2>/dev/null";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("blvnet_cli_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

TEST(Cli, SamplePlanFixture) {
  const auto r = cli("sample-plan --frames 100 --segments 4 --mode infer");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "12 37 62 87\n");
  const auto j = json::parse(cli("sample-plan --frames 2 --segments 4 --format json").out);
  EXPECT_EQ(j["indices"], json({0, 0, 1, 1}));
}

TEST(Cli, SummarizeRowsMatchTheAnalyzer) {
  const auto r = cli("summarize --arch blvnet-tam-50 --frames 8x2 --classes 174");
  ASSERT_EQ(r.code, 0);
  std::istringstream is(r.out);
  std::string line;
  std::size_t rows = 0;
  bool in_table = false;
  while (std::getline(is, line)) {
    if (line.rfind("name ", 0) == 0) {
      in_table = true;
      continue;
    }
    if (line.rfind("arch ", 0) == 0) break;
    if (in_table) ++rows;
  }
  ArchSpec spec = parse_arch("blvnet-tam-50");
  EXPECT_EQ(rows, analyzer::count_macs(spec).layers.size());
  EXPECT_NE(r.out.find("total params 25009390 (25.01M)"), std::string::npos);
  EXPECT_NE(r.out.find("(23.83G)"), std::string::npos);
}

TEST(Cli, TsnHasASingleBranch) {
  const auto r = cli("summarize --arch tsn-tiny");
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out.find("little"), std::string::npos);
  EXPECT_EQ(r.out.find("tam"), r.out.find("tam_params"));
}

TEST(Cli, FlopsTextAndJsonAgree) {
  const auto j = json::parse(cli("flops --arch blvnet-tam-101 --frames 32x2 --format json").out);
  const double macs = j["macs"].get<double>();
  EXPECT_NEAR(macs / 128.6e9, 1.0, 0.05);
  EXPECT_FALSE(j.contains("layers"));
  const auto text = cli("flops --arch blvnet-tam-101 --frames 32x2").out;
  EXPECT_NE(text.find("macs " + std::to_string(j["macs"].get<std::int64_t>())), std::string::npos);
  EXPECT_NE(text.find("total params " + std::to_string(j["params"].get<std::int64_t>())), std::string::npos);
  const auto doubled = json::parse(cli("flops --arch blvnet-tam-101 --frames 32x2 --double-flops --format json").out);
  EXPECT_EQ(doubled["flops"].get<std::int64_t>(), 2 * j["macs"].get<std::int64_t>());
}

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(cli("summarize --arch blvnet-tam-7").code, 2);
  EXPECT_EQ(cli("summarize --arch blvnet-tam-50 --bogus").code, 2);
  EXPECT_EQ(cli("summarize --arch blvnet-tam-50 --frames 8x3").code, 2);
  EXPECT_EQ(cli("summarize --arch blvnet-tam-50 --format yaml").code, 2);
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("infer --checkpoint /nonexistent.ckpt --manifest /nonexistent.tsv").code, 2);
}

TEST(Cli, MalformedCheckpointExitsWithThree) {
  const auto dir = scratch("badckpt");
  std::ofstream(dir / "bad.ckpt") << "blvnet-checkpoint v1\nspec nonsense\n";
  data::write_manifest(dir / "m.tsv", {});
  EXPECT_EQ(cli("infer --checkpoint " + (dir / "bad.ckpt").string() + " --manifest " + (dir / "m.tsv").string()).code, 3);
  fs::remove_all(dir);
}

TEST(Cli, InferOnIdenticalFramesGivesProbabilities) {
  const auto dir = scratch("infer");
  ArchSpec spec = parse_arch("tsn-tiny");
  spec.n_pairs = 4;
  spec.num_classes = 3;
  save_checkpoint(dir / "tsn.ckpt", build_network(spec));
  data::Clip clip;
  clip.id = "still";
  clip.label = 1;
  data::Image frame(40, 48, 90);
  clip.frames.assign(6, frame);
  data::write_clip_dir(dir / "clips", {clip});
  const auto r = cli("infer --checkpoint " + (dir / "tsn.ckpt").string() + " --manifest " +
                     (dir / "clips" / "manifest.tsv").string() + " --top-k 2 --format json");
  ASSERT_EQ(r.code, 0) << r.out;
  const auto j = json::parse(r.out);
  const auto probs = j["clips"][0]["probs"].get<std::vector<double>>();
  ASSERT_EQ(probs.size(), 3u);
  EXPECT_NEAR(std::accumulate(probs.begin(), probs.end(), 0.0), 1.0, 1e-5);
  EXPECT_EQ(j["clips"][0]["top"].size(), 2u);
  fs::remove_all(dir);
}

TEST(Cli, GradcheckReportsPerGroup) {
  const auto r = cli("gradcheck --module tam --dtype f64 --format json");
  EXPECT_EQ(r.code, 0);
  const auto j = json::parse(r.out);
  EXPECT_TRUE(j["passed"].get<bool>());
  EXPECT_EQ(j["suites"][0]["groups"].size(), 2u);
  EXPECT_LT(j["suites"][0]["max_rel_error"].get<double>(), 1e-4);
}

TEST(Cli, TrainToyIsDeterministic) {
  const auto dir = scratch("toy");
  const std::string args =
      "train-toy --train-clips 8 --val-clips 4 --clip-frames 4 --epochs 1 --milestones 5 --arch blvnet-tam-tiny "
      "--seed 3 --format json --out ";
  const auto a = cli(args + (dir / "a").string());
  const auto b = cli(args + (dir / "b").string());
  ASSERT_EQ(a.code, 0);
  ASSERT_EQ(b.code, 0);
  const auto ja = json::parse(a.out), jb = json::parse(b.out);
  EXPECT_EQ(ja["variants"].size(), 1u);
  EXPECT_EQ(ja["variants"][0]["first_batch_loss"], jb["variants"][0]["first_batch_loss"]);
  auto bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  EXPECT_EQ(bytes(dir / "a" / "blvnet-tam-tiny.ckpt"), bytes(dir / "b" / "blvnet-tam-tiny.ckpt"));
  EXPECT_EQ(cli("train-toy --arch resnet --epochs 1").code, 2);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace blvnet
