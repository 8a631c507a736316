// Copyright 2026 The mtgrasp Authors.
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

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mtgrasp/cli.hpp"

using namespace mtgrasp;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result run(const std::vector<std::string>& args, const std::string& input = "") {
  std::istringstream in(input);
  std::ostringstream out, err;
  Result r;
  r.code = cli::dispatch(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("mtgrasp_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name())) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string write(const std::string& name, const std::string& text) const {
    const fs::path p = path_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p.string();
  }

 private:
  fs::path path_;
};

std::string scene_doc() { return run({"gen-synth", "--seed", "7", "--objects", "3"}).out; }

std::string understanding_doc(const std::string& scene) {
  const SceneAnnotation ann = load_scene(scene);
  return run({"decode"}, save_bundle(render_targets(encode_targets(ann, default_layout())))).out;
}

}  // namespace

TEST(Cli, GenSynthEmitsSceneDocument) {
  const Result r = run({"gen-synth", "--seed", "7", "--objects", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(r.err.empty());
  EXPECT_EQ(load_scene(r.out).objects.size(), 3u);
  EXPECT_EQ(r.out, run({"gen-synth", "--seed", "7", "--objects", "3"}).out);
  EXPECT_NE(r.out, run({"gen-synth", "--seed", "8", "--objects", "3"}).out);
}

TEST(Cli, GenSynthTextFormat) {
  const Result r = run({"gen-synth", "--seed", "2", "--objects", "2", "--format", "text"});
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);
  EXPECT_EQ(r.out.rfind("object ", 0), 0u);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run({"frobnicate"}).code, 2);
  EXPECT_EQ(run({}).code, 2);
  const Result missing = run({"gen-synth"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_EQ(missing.err.rfind("error: Usage:", 0), 0u);
  EXPECT_EQ(run({"gen-synth", "--seed", "1", "--format", "yaml"}).code, 2);
  EXPECT_EQ(run({"plan"}, "{}").code, 2);
}

TEST(Cli, HelpExitsZero) {
  const Result r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("gen-synth"), std::string::npos);
}

TEST(Cli, BadDocumentIsOneLine) {
  const Result r = run({"plan", "--target", "1"}, "{not json");
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: BadDocument:", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  EXPECT_TRUE(r.out.empty());
}

TEST(Cli, InvalidConfigExitsTwo) {
  const Result r = run({"gen-synth", "--seed", "1", "--objects", "0"});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(r.err.rfind("error: InvalidConfig:", 0), 0u);
}

TEST(Cli, DecodeAndPlan) {
  const std::string scene = scene_doc();
  const std::string u = understanding_doc(scene);
  ASSERT_FALSE(u.empty());
  const SceneUnderstanding su = load_understanding(u);
  EXPECT_EQ(su.graph.nodes.size(), 3u);
  const SceneAnnotation ann = load_scene(scene);
  for (const auto& o : ann.objects) {
    const Result p = run({"plan", "--target", std::to_string(o.class_id)}, u);
    ASSERT_EQ(p.code, 0) << p.err;
    EXPECT_NE(p.out.find("\"status\""), std::string::npos);
  }
  const Result text = run({"plan", "--target", std::to_string(ann.objects[0].class_id), "--format", "text"}, u);
  EXPECT_EQ(text.out.rfind("status ", 0), 0u);
}

TEST(Cli, DecodeRejectsGarbageBundle) {
  const Result r = run({"decode"}, "nonsense");
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(r.err.rfind("error: BadMagic:", 0), 0u);
}

TEST(Cli, SimulateFindsTarget) {
  const std::string scene = scene_doc();
  const SceneAnnotation ann = load_scene(scene);
  const Result r = run({"simulate", "--seed", "3", "--target", std::to_string(ann.objects[0].class_id)}, scene);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"success\": true"), std::string::npos) << r.out;
  const Result t =
      run({"simulate", "--seed", "3", "--target", std::to_string(ann.objects[0].class_id), "--format", "text"}, scene);
  EXPECT_NE(t.out.find("result success"), std::string::npos) << t.out;
}

TEST(Cli, InputAndOutputFiles) {
  TempDir dir;
  const std::string scene_path = dir.write("scene.json", scene_doc());
  const std::string out_path = dir.write("out.json", "");
  const Result r = run({"gen-synth", "--seed", "7", "--objects", "3", "--output", out_path});
  ASSERT_EQ(r.code, 0);
  EXPECT_TRUE(r.out.empty());
  std::ifstream f(out_path);
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(f), {}), scene_doc());
  const SceneAnnotation ann = load_scene(scene_doc());
  EXPECT_EQ(run({"simulate", "--seed", "1", "--target", std::to_string(ann.objects[0].class_id), "--input", scene_path})
                .code,
            0);
  EXPECT_EQ(run({"simulate", "--seed", "1", "--target", "0", "--input", dir.write("x", "") + ".missing"}).code, 2);
}

TEST(Cli, EvalScenesPerfectPredictions) {
  TempDir dir;
  const std::string scene = scene_doc();
  const std::string s = dir.write("scene.json", scene), p = dir.write("pred.json", understanding_doc(scene));
  const Result r = run({"eval-scenes", s, "--predictions", p});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = parse_document(r.out);
  EXPECT_DOUBLE_EQ(j["mAP"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(j["mAPg"].get<double>(), 1.0);
  EXPECT_EQ(run({"eval-scenes", s, s, "--predictions", p}).code, 2);
}

TEST(Cli, EvalCornell) {
  TempDir dir;
  const std::string rect = "10 10\n10 30\n60 30\n60 10\nNaN NaN\nNaN NaN\nNaN NaN\nNaN NaN\n";
  const std::string cpos = dir.write("pcd0100cpos.txt", rect);
  const OrientedRect g = parse_cornell_rect_file(rect).rects.at(0);
  char buf[256];
  std::snprintf(buf, sizeof buf,
                R"({"images": [{"image": "pcd0100", "grasps": [{"x": %.17g, "y": %.17g, "w": %.17g, "h": %.17g, "theta": %.17g, "pr": 0.9}]}]})",
                g.x(), g.y(), g.w(), g.h(), g.theta());
  const Result hit = run({"eval-cornell", cpos, "--predictions", dir.write("pred.json", buf)});
  ASSERT_EQ(hit.code, 0) << hit.err;
  const Json j = parse_document(hit.out);
  EXPECT_EQ(j["n_success"].get<int>(), 1);
  EXPECT_DOUBLE_EQ(j["accuracy"].get<double>(), 1.0);
  ASSERT_EQ(j["notes"].size(), 1u);
  const Result none = run({"eval-cornell", cpos}, R"({"images": []})");
  ASSERT_EQ(none.code, 0) << none.err;
  EXPECT_DOUBLE_EQ(parse_document(none.out)["accuracy"].get<double>(), 0.0);
}

TEST(Cli, TrainToyShortRun) {
  const std::string scene = run({"gen-synth", "--seed", "4", "--objects", "1"}).out;
  const Result r = run({"train-toy", "--seed", "5", "--steps", "10"}, scene);
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = parse_document(r.out);
  EXPECT_EQ(j["trace"].size(), 10u);
  EXPECT_EQ(j["steps"].get<int>(), 10);
  EXPECT_LT(j["final_total"].get<double>(), j["initial_total"].get<double>());
  EXPECT_EQ(r.out, run({"train-toy", "--seed", "5", "--steps", "10"}, scene).out);
  EXPECT_EQ(run({"train-toy", "--seed", "5", "--steps", "0"}, scene).code, 2);
}

TEST(Cli, SelftestSubset) {
  const Result r = run({"selftest", "--only", "6", "10"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("criterion  6"), std::string::npos);
  EXPECT_NE(r.out.find("criterion 10"), std::string::npos);
  EXPECT_EQ(r.out.find("criterion  1 "), std::string::npos);
}
