// Copyright 2026 The mpsl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cli_app.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mpsl");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = mpsl::cli::run(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("mpsl_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Small two-projector scene that simulates and decodes in about a second.
  std::string write_small_config() {
    const auto path = dir_ / "small.json";
    std::ofstream(path) << R"({
  "rig": {
    "cameras": [{"focal": 300, "width": 200, "height": 150, "position": [0, 0, 0], "target": [0, 0, 1]}],
    "projectors": [
      {"focal": 350, "width": 400, "height": 400, "position": [-0.25, 0, 0], "target": [0, 0, 1], "roll_deg": 0},
      {"focal": 350, "width": 400, "height": 400, "position": [0, -0.25, 0], "target": [0, 0, 1], "roll_deg": 90}
    ]
  },
  "scene": {"primitives": [{"type": "plane", "origin": [0, 0, 1.0], "normal": [0.15, 0, -1], "albedo": [0.8, 0.8, 0.8]}]},
  "pipeline": {"global_directions": true, "range_filter": {"min_segment": 50}}
})";
    return path.string();
  }

  fs::path dir_;
};

TEST_F(CliTest, PatternWritesTextAndRasters) {
  const auto r = run_cli({"--out", dir_.string(), "pattern", "--k", "7", "--colors", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(slurp(dir_ / "pattern_k7_n3.txt"), mpsl::to_text(mpsl::generate_pattern(7, 3)));
  EXPECT_TRUE(fs::exists(dir_ / "pattern_k7_n3.ppm"));
  EXPECT_TRUE(fs::exists(dir_ / "pattern_k7_n3_derivative.ppm"));
  EXPECT_NE(r.out.find("198 stripes"), std::string::npos);
}

TEST_F(CliTest, MissingOutputDirectoryFails) {
  const auto r = run_cli({"--out", (dir_ / "nope").string(), "pattern"});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("does not exist"), std::string::npos) << r.err;
  EXPECT_NE(r.err.find("pattern"), std::string::npos) << r.err;
}

TEST_F(CliTest, BadArgumentsAndConfigs) {
  EXPECT_EQ(run_cli({}).code, 2);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 2);
  std::ofstream(dir_ / "bad.json") << R"({"rig": {"cameras": []}})";
  const auto r = run_cli({"--out", dir_.string(), "simulate", "--config", (dir_ / "bad.json").string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: config:", 0), 0u) << r.err;
}

TEST_F(CliTest, AnalyzeCommandsWriteCsv) {
  auto r = run_cli({"--out", dir_.string(), "analyze", "coverage"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "coverage.csv"));
  EXPECT_NE(r.out.find("fitted per-triangulation loss"), std::string::npos);
  r = run_cli({"--out", dir_.string(), "analyze", "separability", "--phi1", "0", "--phi2", "60", "--samples", "36"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto csv = slurp(dir_ / "separability.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 37);
  EXPECT_NE(r.out.find("150"), std::string::npos) << r.out;
}

TEST_F(CliTest, SimulateReconstructIsDeterministic) {
  const auto cfg = write_small_config();
  const auto a = dir_ / "a", b = dir_ / "b";
  fs::create_directories(a);
  fs::create_directories(b);
  for (const auto& d : {a, b}) {
    auto r = run_cli({"--out", d.string(), "--seed", "5", "simulate", "--config", cfg});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run_cli({"--out", d.string(), "reconstruct", "--config", cfg});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  for (const char* f : {"cam0.ppm", "cam0_truth.pfm", "range_cam0_proj0.pfm", "range_cam0_proj1.pfm", "merged.pfm",
                        "metrics.json"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const auto metrics = nlohmann::json::parse(slurp(a / "metrics.json"));
  EXPECT_GT(metrics["pairs"][0]["accuracy"].get<double>(), 0.99);
  EXPECT_LT(metrics["merged"]["depth"]["rms"].get<double>(), 0.005);

  // A different seed changes the image.
  const auto c = dir_ / "c";
  fs::create_directories(c);
  ASSERT_EQ(run_cli({"--out", c.string(), "--seed", "6", "simulate", "--config", cfg}).code, 0);
  EXPECT_NE(slurp(a / "cam0.ppm"), slurp(c / "cam0.ppm"));
}

TEST_F(CliTest, MergeAndMetricsOnWrittenRanges) {
  const auto cfg = write_small_config();
  ASSERT_EQ(run_cli({"--out", dir_.string(), "simulate", "--config", cfg}).code, 0);
  ASSERT_EQ(run_cli({"--out", dir_.string(), "reconstruct", "--config", cfg}).code, 0);
  auto r = run_cli({"--out", dir_.string(), "merge", (dir_ / "range_cam0_proj0.pfm").string(),
                    (dir_ / "range_cam0_proj1.pfm").string(), "--policy", "windowed_two", "--name", "wt"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir_ / "wt.pfm"));
  r = run_cli({"--out", dir_.string(), "metrics", "--range", (dir_ / "wt.pfm").string(), "--truth",
               (dir_ / "cam0_truth.pfm").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto m = nlohmann::json::parse(slurp(dir_ / "metrics.json"));
  EXPECT_TRUE(m["overlap"].get<bool>());
  EXPECT_LT(m["rms"].get<double>(), 0.005);
}

TEST_F(CliTest, ReconstructWithoutImagesNamesTheStage) {
  const auto cfg = write_small_config();
  const auto r = run_cli({"--out", dir_.string(), "reconstruct", "--config", cfg});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u);
  EXPECT_NE(r.err.find("cam0.ppm"), std::string::npos) << r.err;
}

}  // namespace
