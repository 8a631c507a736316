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

#include <random>

#include "mtgrasp/bundle.hpp"
#include "mtgrasp/cornell.hpp"
#include "mtgrasp/document.hpp"
#include "mtgrasp/synth.hpp"

using namespace mtgrasp;

namespace {

template <class Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::Usage;
}

const char* kMinimalScene = R"({
  "image": {"w": 640, "h": 480},
  "objects": [
    {"id": 1, "class": 4, "box": [100, 120, 220, 260], "on_top_of": [],
     "grasps": [{"x": 160, "y": 190, "w": 50, "h": 20, "theta": 0.5}]}
  ]
})";

HeadTensor float_valued_tensor(const HeadLayout& L, std::uint64_t seed) {
  HeadTensor h(L);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.0f, 2.0f);
  for (double& v : h.values()) v = n(rng);
  return h;
}

}  // namespace

TEST(CanonicalDump, SortedFixedAndStable) {
  const Json j = Json{{"b", 1.0 / 3.0}, {"a", -0.0000001}, {"n", 3}, {"list", {1.5, 2}}};
  EXPECT_EQ(canonical_dump(j), "{\n  \"a\": 0.000000,\n  \"b\": 0.333333,\n  \"list\": [1.500000, 2],\n  \"n\": 3\n}\n");
  EXPECT_EQ(canonical_dump(Json{{"x", 0.1}}, -1), "{\n  \"x\": 0.10000000000000001\n}\n");
  EXPECT_EQ(code_of([] { parse_document("{\"a\": "); }), ErrorCode::BadDocument);
}

TEST(SceneDocument, MinimalRoundTrip) {
  const SceneAnnotation s = load_scene(kMinimalScene);
  ASSERT_EQ(s.objects.size(), 1u);
  EXPECT_EQ(s.objects[0].class_id, 4);
  EXPECT_DOUBLE_EQ(s.objects[0].grasps[0].theta(), 0.5);
  const std::string once = save_scene(s);
  EXPECT_EQ(save_scene(load_scene(once)), once);
}

TEST(SceneDocument, SyntheticRoundTrips) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const SceneAnnotation s = synth_scene(seed, 1 + seed % 6).annotation;
    const std::string text = save_scene(s);
    const SceneAnnotation back = load_scene(text);
    ASSERT_EQ(back.objects.size(), s.objects.size());
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      EXPECT_NEAR(back.objects[i].box.x1(), s.objects[i].box.x1(), 1e-6);
      EXPECT_EQ(back.objects[i].on_top_of, s.objects[i].on_top_of);
      EXPECT_EQ(back.objects[i].grasps.size(), s.objects[i].grasps.size());
    }
    EXPECT_EQ(save_scene(back), text);
  }
}

TEST(SceneDocument, Errors) {
  auto with = [](const std::string& objects) {
    return "{\"image\": {\"w\": 100, \"h\": 100}, \"objects\": [" + objects + "]}";
  };
  const std::string a = R"({"id": 1, "class": 0, "box": [0, 0, 10, 10], "on_top_of": [2], "grasps": []})";
  const std::string b = R"({"id": 2, "class": 0, "box": [0, 0, 10, 10], "on_top_of": [1], "grasps": []})";
  const std::string c = R"({"id": 2, "class": 0, "box": [0, 0, 10, 10], "on_top_of": [], "grasps": []})";
  EXPECT_EQ(code_of([&] { load_scene(with(a)); }), ErrorCode::DanglingSupport);
  EXPECT_EQ(code_of([&] { load_scene(with(a + "," + b)); }), ErrorCode::CyclicSupport);
  EXPECT_EQ(code_of([&] { load_scene(with(c + "," + c)); }), ErrorCode::DuplicateId);
  EXPECT_EQ(code_of([&] { load_scene(with(R"({"id": 1, "class": 0, "box": [0, 0], "on_top_of": [], "grasps": []})")); }),
            ErrorCode::BadDocument);
  EXPECT_EQ(code_of([&] { load_scene(with(R"({"id": 1, "class": 0, "box": [5, 0, 1, 10], "on_top_of": [], "grasps": []})")); }),
            ErrorCode::InvalidRect);
  EXPECT_EQ(code_of([&] { load_scene(R"({"objects": []})"); }), ErrorCode::BadDocument);
}

TEST(UnderstandingDocument, RoundTripAndValidation) {
  const HeadLayout L = default_layout();
  const SynthScene s = synth_scene(4, 3);
  SceneUnderstanding u{608, 608, run_pipeline(render_targets(encode_targets(s.annotation, L)), PostConfig{})};
  const std::string text = save_understanding(u);
  const SceneUnderstanding back = load_understanding(text);
  EXPECT_EQ(back.graph.nodes.size(), u.graph.nodes.size());
  EXPECT_EQ(back.graph.edges.size(), u.graph.edges.size());
  EXPECT_EQ(back.graph.ord, u.graph.ord);
  EXPECT_EQ(save_understanding(back), text);

  Json j = parse_document(text);
  j["edges"].push_back(Json{{"child", 0}, {"parent", 99}, {"score", 1.0}});
  EXPECT_EQ(code_of([&] { understanding_from_json(j); }), ErrorCode::DanglingSupport);
  j = parse_document(text);
  j["objects"].push_back(j["objects"][0]);
  EXPECT_EQ(code_of([&] { understanding_from_json(j); }), ErrorCode::DuplicateId);
  j = parse_document(text);
  j["objects"][0]["cc_scores"] = Json::array({"x"});
  EXPECT_EQ(code_of([&] { understanding_from_json(j); }), ErrorCode::BadDocument);
}

TEST(UnderstandingDocument, CycleRejected) {
  const std::string doc = R"({"image": {"w": 100, "h": 100},
    "objects": [
      {"id": 0, "class": 1, "pr": 0.9, "box": [0, 0, 10, 10], "ord": 0, "grasp": null},
      {"id": 1, "class": 2, "pr": 0.9, "box": [5, 5, 15, 15], "ord": 0, "grasp": null}],
    "edges": [{"child": 0, "parent": 1, "score": 0.9}, {"child": 1, "parent": 0, "score": 0.8}]})";
  EXPECT_EQ(code_of([&] { load_understanding(doc); }), ErrorCode::CyclicSupport);
}

TEST(CornellParser, SingleRectangle) {
  const CornellRectFile f = parse_cornell_rect_file("2 1\n-2 1\n-2 -1\n2 -1\n");
  ASSERT_EQ(f.rects.size(), 1u);
  EXPECT_NEAR(f.rects[0].x(), 0.0, 1e-12);
  EXPECT_NEAR(f.rects[0].y(), 0.0, 1e-12);
  EXPECT_NEAR(f.rects[0].h(), 4.0, 1e-12);
  EXPECT_NEAR(f.rects[0].w(), 2.0, 1e-12);
}

TEST(CornellParser, NaNGroupSkipped) {
  const CornellRectFile f = parse_cornell_rect_file("NaN NaN\n3 0\n3 2\n0 2\n10 10\n14 10\n14 12\n10 12\n");
  EXPECT_EQ(f.rects.size(), 1u);
  EXPECT_EQ(f.skipped_groups, 1);
  EXPECT_EQ(parse_cornell_rect_file("").rects.size(), 0u);
  EXPECT_EQ(parse_cornell_rect_file("1 1\r\n4 1\r\n4 3\r\n1 3\r\n").rects.size(), 1u);
}

TEST(CornellParser, ErrorsCarryLines) {
  try {
    parse_cornell_rect_file("0 0\n3 0\n3 2\n0 2\n1 1\n2 2\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncatedFile);
    EXPECT_NE(std::string(e.what()).find("line 5"), std::string::npos);
  }
  try {
    parse_cornell_rect_file("0 0\n3 zz\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MalformedLine);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_EQ(code_of([] { parse_cornell_rect_file("0 0\n10 0\n10 3\n0 9\n"); }), ErrorCode::NotARectangle);
}

TEST(CornellIds, ImageIdAndGroups) {
  EXPECT_EQ(cornell_image_id("data/01/pcd0123cpos.txt"), "pcd0123");
  EXPECT_EQ(cornell_image_id("pcd0123cneg.txt"), "pcd0123");
  EXPECT_EQ(numeric_prefix_group_key("pcd0123cpos.txt"), "01");
  EXPECT_EQ(numeric_prefix_group_key("pcd1099cpos.txt"), "10");
  EXPECT_EQ(numeric_prefix_group_key("img7cpos.txt"), "img7");
  const CornellSample s = load_cornell_sample("pcd0101cpos.txt", "2 1\n-2 1\n-2 -1\n2 -1\n", "NaN 1\n1 1\n1 1\n1 1\n");
  EXPECT_EQ(s.positives.size(), 1u);
  EXPECT_EQ(s.skipped_groups, 1);
  EXPECT_EQ(s.group_key, "01");
  const CornellSample t = load_cornell_sample("pcd0101cpos.txt", "", "", [](std::string_view) { return "x"; });
  EXPECT_EQ(t.group_key, "x");
}

TEST(CornellPredictions, Load) {
  const auto p = load_cornell_predictions(
      R"({"images": [{"image": "pcd0100", "grasps": [{"x": 1, "y": 2, "w": 3, "h": 4, "theta": 0.1, "pr": 0.7}]}]})");
  ASSERT_EQ(p.at("pcd0100").size(), 1u);
  EXPECT_DOUBLE_EQ(p.at("pcd0100")[0].pr, 0.7);
  EXPECT_EQ(code_of([] { load_cornell_predictions(R"({"images": [{"image": 3, "grasps": []}]})"); }),
            ErrorCode::BadDocument);
}

TEST(Bundle, RoundTrip) {
  for (int input : {64, 128, 608}) {
    const HeadTensor h = float_valued_tensor(default_layout(input), static_cast<std::uint64_t>(input));
    const std::string bytes = save_bundle(h);
    const HeadTensor back = load_bundle(bytes);
    EXPECT_EQ(back, h);
    EXPECT_EQ(save_bundle(back), bytes);
  }
  const HeadLayout rect(7, 96, 64, {{1, 32, 3, 2, {{30, 20}}, {{10, 5}}, {0.0, 1.0}}});
  const HeadTensor r = float_valued_tensor(rect, 3);
  EXPECT_EQ(load_bundle(save_bundle(r)), r);
}

TEST(Bundle, Errors) {
  const std::string good = save_bundle(HeadTensor(default_layout(608, 31)));
  EXPECT_EQ(code_of([&] { load_bundle("XTGD1" + good.substr(5)); }), ErrorCode::BadMagic);
  EXPECT_EQ(code_of([&] { load_bundle(good.substr(0, good.size() - 4)); }), ErrorCode::TruncatedPayload);
  EXPECT_EQ(code_of([&] { load_bundle(good + "abcd"); }), ErrorCode::ShapeMismatch);

  // A 19x19 manifest followed by a payload sized for 18x18 grids.
  const HeadLayout small(31, 576, 576, default_scale_specs(576));
  const std::string payload = save_bundle(HeadTensor(small));
  const std::size_t nl = good.find('\n');
  const std::size_t header_len = std::stoul(good.substr(5, nl - 5));
  const std::size_t small_nl = payload.find('\n');
  const std::size_t small_header = std::stoul(payload.substr(5, small_nl - 5));
  const std::string forged = good.substr(0, nl + 1 + header_len) + payload.substr(small_nl + 1 + small_header);
  EXPECT_EQ(code_of([&] { load_bundle(forged); }), ErrorCode::TruncatedPayload);
}

TEST(Synth, BaseCaseAndDeterminism) {
  const SynthScene s = synth_scene(7, 1);
  ASSERT_EQ(s.annotation.objects.size(), 1u);
  EXPECT_TRUE(s.annotation.objects[0].on_top_of.empty());
  EXPECT_TRUE(s.state.visible(s.annotation.objects[0].id));
  EXPECT_EQ(save_scene(synth_scene(7, 3).annotation), save_scene(synth_scene(7, 3).annotation));
}

TEST(Synth, AlwaysValid) {
  const SynthScene five = synth_scene(11, 5);
  EXPECT_NO_THROW(load_scene(save_scene(five.annotation)));
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const SynthScene s = synth_scene(seed, 1 + seed % 8);
    EXPECT_NO_THROW(validate_scene(s.annotation));
    for (const auto& o : s.annotation.objects) {
      EXPECT_GE(o.grasps.size(), 1u);
      for (const auto& g : o.grasps) {
        for (const Point2& p : vertices(g)) EXPECT_TRUE(o.box.contains(p, 1e-9));
      }
    }
  }
  EXPECT_EQ(code_of([] { synth_scene(0, 0); }), ErrorCode::InvalidConfig);
}
