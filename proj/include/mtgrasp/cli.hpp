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

#pragma once

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mtgrasp/bundle.hpp"
#include "mtgrasp/cornell.hpp"
#include "mtgrasp/document.hpp"
#include "mtgrasp/error.hpp"
#include "mtgrasp/eval.hpp"
#include "mtgrasp/planner.hpp"
#include "mtgrasp/postprocess.hpp"
#include "mtgrasp/synth.hpp"
#include "mtgrasp/testing/acceptance.hpp"
#include "mtgrasp/toytrain.hpp"

namespace mtgrasp::cli {

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Usage, "cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline std::string read_input(const std::string& path, std::istream& in) {
  if (path.empty() || path == "-") return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return read_file(path);
}

/// Computation failures exit with 1; everything that stems from bad input,
/// flags or documents exits with 2.
inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::DivergenceDetected:
    case ErrorCode::CyclicGraph:
    case ErrorCode::ZeroGT:
    case ErrorCode::TooFewGroups:
      return 1;
    default:
      return 2;
  }
}

struct Options {
  std::string input;
  std::string output;
  std::string format = "document";
  double iou = 0.25;
  double angle_deg = 30.0;
  double od_iou = 0.5;
  std::optional<double> conf;
  std::uint64_t seed = 0;
  int objects = 3;
  int steps = 500;
  int target = 0;
  int top_k = 1;
  int max_steps = 0;
  double lr = 0.1;
  double momentum = 0.9;
  std::vector<std::string> files;
  std::vector<std::string> predictions;
  std::vector<int> only;
};

inline EvalConfig eval_config(const Options& o) {
  EvalConfig c;
  c.grasp_iou_threshold = o.iou;
  c.angle_threshold = o.angle_deg * std::numbers::pi / 180.0;
  c.od_iou_threshold = o.od_iou;
  c.top_k = o.top_k;
  c.validate();
  return c;
}

inline PostConfig post_config(const Options& o) {
  PostConfig c;
  if (o.conf) c.od_conf = c.gd_conf = *o.conf;
  c.validate();
  return c;
}

inline std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string understanding_text(const SceneUnderstanding& u) {
  std::string s;
  for (std::size_t i = 0; i < u.graph.nodes.size(); ++i) {
    const auto& n = u.graph.nodes[i];
    const auto& b = n.detection.box;
    s += "object " + std::to_string(n.id) + " class " + std::to_string(n.detection.class_id) + " pr " +
         fmt("%.6f", n.detection.pr) + " box " + fmt("%.2f", b.x1()) + " " + fmt("%.2f", b.y1()) + " " +
         fmt("%.2f", b.x2()) + " " + fmt("%.2f", b.y2()) + " ord " + std::to_string(u.graph.ord[i]);
    if (n.best_grasp) {
      const auto& r = n.best_grasp->rect;
      s += " grasp " + fmt("%.2f", r.x()) + " " + fmt("%.2f", r.y()) + " " + fmt("%.2f", r.w()) + " " +
           fmt("%.2f", r.h()) + " " + fmt("%.6f", r.theta());
    }
    s += "\n";
  }
  for (const auto& e : u.graph.edges) {
    s += "edge " + std::to_string(e.child) + " on " + std::to_string(e.parent) + " score " + fmt("%.6f", e.score) + "\n";
  }
  return s;
}

inline std::string ids_text(const std::vector<int>& ids) {
  std::string s;
  for (std::size_t i = 0; i < ids.size(); ++i) s += (i ? " " : "") + std::to_string(ids[i]);
  return s;
}

inline std::string run_decode(const Options& o, std::istream& in) {
  const HeadTensor h = load_bundle(read_input(o.input, in));
  SceneUnderstanding u{h.layout().input_w(), h.layout().input_h(), run_pipeline(h, post_config(o))};
  return o.format == "text" ? understanding_text(u) : save_understanding(u) + "\n";
}

inline std::string run_eval_cornell(const Options& o, std::istream& in) {
  if (o.files.empty()) throw Error(ErrorCode::Usage, "eval-cornell needs at least one rectangle file");
  const EvalConfig cfg = eval_config(o);
  const std::string pred_text = o.predictions.empty() ? read_input("", in) : read_file(o.predictions.front());
  const auto preds = load_cornell_predictions(pred_text);
  std::vector<std::vector<ScoredGrasp>> p;
  std::vector<std::vector<OrientedRect>> g;
  int skipped = 0;
  for (const auto& f : o.files) {
    const CornellRectFile rf = parse_cornell_rect_file(read_file(f));
    skipped += rf.skipped_groups;
    g.push_back(rf.rects);
    const auto it = preds.find(cornell_image_id(f));
    p.push_back(it == preds.end() ? std::vector<ScoredGrasp>{} : it->second);
  }
  EvalReport r = cornell_accuracy(p, g, cfg);
  if (skipped) r.notes.push_back(std::to_string(skipped) + " rectangle groups with NaN coordinates skipped");
  return o.format == "text" ? report_to_text(r) : canonical_dump(report_to_json(r)) + "\n";
}

inline std::string run_eval_scenes(const Options& o) {
  if (o.files.empty()) throw Error(ErrorCode::Usage, "eval-scenes needs at least one scene document");
  if (o.predictions.size() != o.files.size()) {
    throw Error(ErrorCode::Usage, "eval-scenes needs one --predictions document per scene document");
  }
  const EvalConfig cfg = eval_config(o);
  std::vector<SceneAnnotation> scenes;
  std::vector<std::vector<PairedObject>> preds;
  for (std::size_t i = 0; i < o.files.size(); ++i) {
    scenes.push_back(load_scene(read_file(o.files[i])));
    preds.push_back(load_understanding(read_file(o.predictions[i])).graph.nodes);
  }
  const EvalReport r = mapg(preds, scenes, cfg);
  return o.format == "text" ? report_to_text(r) : canonical_dump(report_to_json(r)) + "\n";
}

inline std::string run_plan(const Options& o, std::istream& in) {
  const SceneUnderstanding u = load_understanding(read_input(o.input, in));
  const GraspPlan p = plan_target(u.graph, o.target);
  if (o.format == "text") return "status " + std::string(to_string(p.status)) + "\nplan " + ids_text(p.ids) + "\n";
  return canonical_dump(plan_to_json(p, o.target)) + "\n";
}

inline std::string run_simulate(const Options& o, std::istream& in) {
  const SceneAnnotation scene = load_scene(read_input(o.input, in));
  const int max_steps = o.max_steps > 0 ? o.max_steps : std::max<int>(1, static_cast<int>(scene.objects.size()));
  const EpisodeRecord r = simulate(scene_state_from(scene), o.target, oracle_detector(o.seed), max_steps);
  if (o.format != "text") return canonical_dump(episode_to_json(r)) + "\n";
  std::string s;
  for (const auto& st : r.log) {
    s += "step " + std::to_string(st.step) + " node " + std::to_string(st.node_id) + " object " +
         std::to_string(st.object_id) + " " + st.outcome + (st.target_visible ? " (target visible)" : "") + "\n";
  }
  s += std::string("result ") + (r.success ? "success" : "failure") + " " + std::string(to_string(r.status)) +
       " after " + std::to_string(r.steps) + " steps\n";
  return s;
}

inline std::string run_gen_synth(const Options& o) {
  const SynthScene s = synth_scene(o.seed, o.objects);
  if (o.format != "text") return save_scene(s.annotation) + "\n";
  std::string out;
  for (const auto& obj : s.annotation.objects) {
    out += "object " + std::to_string(obj.id) + " class " + std::to_string(obj.class_id) + " on [" +
           ids_text(obj.on_top_of) + "] grasps " + std::to_string(obj.grasps.size()) + "\n";
  }
  return out;
}

inline std::string run_train_toy(const Options& o, std::istream& in) {
  const SceneAnnotation scene = load_scene(read_input(o.input, in));
  if (scene.image_w != scene.image_h) throw Error(ErrorCode::BadInputSize, "toy training needs a square image");
  const HeadLayout layout = default_layout(scene.image_w);
  TrainConfig tc;
  tc.steps = o.steps;
  tc.seed = o.seed;
  tc.learning_rate = o.lr;
  tc.momentum = o.momentum;
  const TargetAssignment a = encode_targets(scene, layout);
  const TrainTrace t = train_direct(a, tc);
  const RecoveryReport rr = verify_recovery(t, scene, eval_config(o), post_config(o));
  if (o.format == "text") {
    std::string s = trace_to_text(t);
    for (const auto& r : rr.objects) {
      s += "# object " + std::to_string(r.object_id) + " od_iou " + fmt("%.6f", r.od_iou) + " grasp " +
           (r.grasp_ok ? "ok" : "fail") + (r.success ? " success" : " failure") + "\n";
    }
    return s;
  }
  Json objs = Json::array();
  for (const auto& r : rr.objects) {
    objs.push_back(Json{{"id", r.object_id}, {"od_iou", r.od_iou}, {"grasp_ok", r.grasp_ok}, {"success", r.success}});
  }
  Json j{{"steps", tc.steps},
         {"seed", tc.seed},
         {"initial_total", t.totals.front()},
         {"final_total", t.totals.back()},
         {"trace", t.totals},
         {"recovery", Json{{"objects", objs}, {"success_rate", rr.success_rate()}}}};
  return canonical_dump(j, -1) + "\n";
}

}  // namespace detail

/// Entry point shared by the executable and the tests. Returns the exit
/// status; documents go to `out`, diagnostics to `err`.
inline int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

namespace detail {

inline int run_selftest(const Options& o, std::ostream& out) {
  const std::set<int> only(o.only.begin(), o.only.end());
  const auto results = testing::run_acceptance(
      [](const std::vector<std::string>& a, std::istream& i, std::ostream& so, std::ostream& se) {
        return dispatch(a, i, so, se);
      },
      only, &out);
  bool ok = true;
  for (const auto& r : results) ok = ok && r.passed;
  out << (ok ? "selftest: all criteria passed\n" : "selftest: FAILED\n");
  return ok ? 0 : 1;
}

}  // namespace detail

inline int dispatch(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  using detail::Options;
  Options o;
  CLI::App app{"Multi-object grasp detection toolkit", "mtgrasp"};
  app.require_subcommand(1);
  const std::vector<std::string> formats{"text", "document"};

  auto add_io = [&](CLI::App* c) {
    c->add_option("--input", o.input, "Input file (default: standard input)");
    c->add_option("--output", o.output, "Output file (default: standard output)");
    c->add_option("--format", o.format, "Output format")->check(CLI::IsMember(formats));
  };
  auto add_metric = [&](CLI::App* c) {
    c->add_option("--iou", o.iou, "Rectangle metric IOU threshold")->capture_default_str();
    c->add_option("--angle-deg", o.angle_deg, "Rectangle metric angle threshold in degrees")->capture_default_str();
    c->add_option("--od-iou", o.od_iou, "Object box IOU threshold")->capture_default_str();
  };

  auto* decode = app.add_subcommand("decode", "Tensor bundle to scene-understanding document");
  add_io(decode);
  decode->add_option("--conf", o.conf, "Confidence threshold for object and grasp candidates");

  auto* ec = app.add_subcommand("eval-cornell", "Rectangle-metric accuracy of grasp predictions");
  add_io(ec);
  add_metric(ec);
  ec->add_option("--top-k", o.top_k, "Predictions considered per image")->capture_default_str();
  ec->add_option("--predictions", o.predictions, "Prediction document (default: standard input)")->expected(1);
  ec->add_option("files", o.files, "Cornell positive rectangle files")->required();

  auto* es = app.add_subcommand("eval-scenes", "mAP and mAPg of scene-understanding predictions");
  add_io(es);
  add_metric(es);
  es->add_option("--predictions", o.predictions, "Scene-understanding documents, one per scene")->required();
  es->add_option("files", o.files, "Scene documents")->required();

  auto* plan = app.add_subcommand("plan", "Grasp plan for a target class");
  add_io(plan);
  plan->add_option("--target", o.target, "Target class id")->required();

  auto* sim = app.add_subcommand("simulate", "Grasping episode with an oracle detector");
  add_io(sim);
  sim->add_option("--target", o.target, "Target class id")->required();
  sim->add_option("--seed", o.seed, "Random seed")->required();
  sim->add_option("--max-steps", o.max_steps, "Step budget (default: number of objects)");

  auto* gen = app.add_subcommand("gen-synth", "Synthetic stacked scene document");
  add_io(gen);
  gen->add_option("--seed", o.seed, "Random seed")->required();
  gen->add_option("--objects", o.objects, "Object count")->capture_default_str();

  auto* tt = app.add_subcommand("train-toy", "Optimize a head tensor directly against a scene");
  add_io(tt);
  add_metric(tt);
  tt->add_option("--seed", o.seed, "Random seed")->required();
  tt->add_option("--steps", o.steps, "Optimizer steps")->capture_default_str();
  tt->add_option("--lr", o.lr, "Learning rate")->capture_default_str();
  tt->add_option("--momentum", o.momentum, "Momentum")->capture_default_str();
  tt->add_option("--conf", o.conf, "Confidence threshold used for recovery");

  auto* st = app.add_subcommand("selftest", "Run the acceptance criteria");
  st->add_option("--only", o.only, "Criterion ids to run");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: Usage: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    std::string doc;
    if (decode->parsed()) {
      doc = detail::run_decode(o, in);
    } else if (ec->parsed()) {
      doc = detail::run_eval_cornell(o, in);
    } else if (es->parsed()) {
      doc = detail::run_eval_scenes(o);
    } else if (plan->parsed()) {
      doc = detail::run_plan(o, in);
    } else if (sim->parsed()) {
      doc = detail::run_simulate(o, in);
    } else if (gen->parsed()) {
      doc = detail::run_gen_synth(o);
    } else if (tt->parsed()) {
      doc = detail::run_train_toy(o, in);
    } else {
      return detail::run_selftest(o, out);
    }
    if (o.output.empty() || o.output == "-") {
      out << doc;
    } else {
      std::ofstream f(o.output, std::ios::binary);
      if (!(f << doc)) throw Error(ErrorCode::Usage, "cannot write '" + o.output + "'");
    }
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return detail::exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mtgrasp::cli
