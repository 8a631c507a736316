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

#include <cmath>
#include <cstdio>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "mtgrasp/error.hpp"
#include "mtgrasp/eval.hpp"
#include "mtgrasp/geometry.hpp"
#include "mtgrasp/planner.hpp"
#include "mtgrasp/postprocess.hpp"
#include "mtgrasp/scene.hpp"

namespace mtgrasp {

using Json = nlohmann::json;

/// Canonical text form of a document tree: sorted keys, two-space indent,
/// integers verbatim and floating values with a fixed number of decimals
/// (or 17 significant digits when decimals < 0). Identical trees always
/// produce identical bytes.
inline std::string canonical_dump(const Json& j, int decimals = 6) {
  std::string out;
  auto number = [&](double v) {
    char buf[64];
    if (decimals < 0) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
    } else {
      std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    }
    std::string s = buf;
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
    // keep a decimal point so the value reloads as floating
    if (decimals < 0 && s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
  };
  auto rec = [&](auto& self, const Json& v, int depth) -> void {
    const std::string pad(static_cast<std::size_t>(2 * (depth + 1)), ' ');
    const std::string close_pad(static_cast<std::size_t>(2 * depth), ' ');
    switch (v.type()) {
      case Json::value_t::object: {
        if (v.empty()) {
          out += "{}";
          return;
        }
        out += "{\n";
        bool first = true;
        for (auto it = v.begin(); it != v.end(); ++it) {
          if (!first) out += ",\n";
          first = false;
          out += pad + Json(it.key()).dump() + ": ";
          self(self, it.value(), depth + 1);
        }
        out += "\n" + close_pad + "}";
        return;
      }
      case Json::value_t::array: {
        if (v.empty()) {
          out += "[]";
          return;
        }
        bool scalars = true;
        for (const auto& e : v) scalars = scalars && !e.is_structured();
        if (scalars) {
          out += "[";
          for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += ", ";
            self(self, v[i], depth + 1);
          }
          out += "]";
          return;
        }
        out += "[\n";
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i) out += ",\n";
          out += pad;
          self(self, v[i], depth + 1);
        }
        out += "\n" + close_pad + "]";
        return;
      }
      case Json::value_t::number_float:
        out += number(v.get<double>());
        return;
      default:
        out += v.dump();
        return;
    }
  };
  rec(rec, j, 0);
  out += "\n";
  return out;
}

inline Json parse_document(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::BadDocument, std::string("not a well-formed document: ") + e.what());
  }
}

namespace doc_detail {

inline const Json& field(const Json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw Error(ErrorCode::BadDocument, where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

inline double number(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (!v.is_number()) throw Error(ErrorCode::BadDocument, where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

inline int integer(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (!v.is_number_integer()) throw Error(ErrorCode::BadDocument, where + ": field '" + key + "' must be an integer");
  return v.get<int>();
}

inline const Json& array(const Json& obj, const char* key, const std::string& where) {
  const Json& v = field(obj, key, where);
  if (!v.is_array()) throw Error(ErrorCode::BadDocument, where + ": field '" + key + "' must be a list");
  return v;
}

inline std::vector<double> numbers(const Json& obj, const char* key, const std::string& where) {
  std::vector<double> out;
  for (const auto& v : array(obj, key, where)) {
    if (!v.is_number()) throw Error(ErrorCode::BadDocument, where + ": '" + key + "' must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

/// Theta as written: rounded to the output precision and kept inside [0, pi)
/// so that a reload reproduces the same text.
inline double canonical_theta(double theta) {
  double t = std::round(theta * 1e6) / 1e6;
  if (t >= std::numbers::pi) t -= std::numbers::pi;
  return t;
}

inline Json rect_json(const OrientedRect& r) {
  return Json{{"x", r.x()}, {"y", r.y()}, {"w", r.w()}, {"h", r.h()}, {"theta", canonical_theta(r.theta())}};
}

inline Json box_json(const AxisRect& b) { return Json::array({b.x1(), b.y1(), b.x2(), b.y2()}); }

template <class Fn>
auto wrap(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BadDocument) throw;
    throw Error(e.code(), where + ": " + e.what());
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::BadDocument, where + ": " + e.what());
  }
}

inline OrientedRect rect_from(const Json& g, const std::string& where) {
  return wrap(where, [&] {
    return OrientedRect(number(g, "x", where), number(g, "y", where), number(g, "w", where), number(g, "h", where),
                        number(g, "theta", where));
  });
}

inline AxisRect box_from(const Json& obj, const std::string& where) {
  const Json& b = array(obj, "box", where);
  if (b.size() != 4) throw Error(ErrorCode::BadDocument, where + ": box needs four corners");
  for (const auto& v : b) {
    if (!v.is_number()) throw Error(ErrorCode::BadDocument, where + ": box corners must be numbers");
  }
  return wrap(where, [&] { return AxisRect(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()); });
}

}  // namespace doc_detail

// ---------------------------------------------------------------------------
// Scene annotation document
//   image{w,h}, objects[]{id, class, box[x1,y1,x2,y2], on_top_of[], grasps[]{x,y,w,h,theta}}

inline Json scene_to_json(const SceneAnnotation& s) {
  Json objs = Json::array();
  for (const auto& o : s.objects) {
    Json grasps = Json::array();
    for (const auto& g : o.grasps) grasps.push_back(doc_detail::rect_json(g));
    objs.push_back(Json{{"id", o.id},
                        {"class", o.class_id},
                        {"box", doc_detail::box_json(o.box)},
                        {"on_top_of", o.on_top_of},
                        {"grasps", grasps}});
  }
  return Json{{"image", {{"w", s.image_w}, {"h", s.image_h}}}, {"objects", objs}};
}

inline std::string save_scene(const SceneAnnotation& s) { return canonical_dump(scene_to_json(s)); }

inline SceneAnnotation scene_from_json(const Json& j) {
  using namespace doc_detail;
  SceneAnnotation s;
  const Json& img = field(j, "image", "document");
  s.image_w = integer(img, "w", "image");
  s.image_h = integer(img, "h", "image");
  const Json& objs = array(j, "objects", "document");
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const Json& o = objs[i];
    std::string where = "object #" + std::to_string(i);
    SceneObject so;
    so.id = integer(o, "id", where);
    where = "object " + std::to_string(so.id);
    so.class_id = integer(o, "class", where);
    if (so.class_id < 0) throw Error(ErrorCode::BadDocument, where + ": class must be non-negative");
    so.box = box_from(o, where);
    for (const auto& s_id : array(o, "on_top_of", where)) {
      if (!s_id.is_number_integer()) throw Error(ErrorCode::BadDocument, where + ": on_top_of entries must be ids");
      so.on_top_of.push_back(s_id.get<int>());
    }
    for (const auto& g : array(o, "grasps", where)) so.grasps.push_back(rect_from(g, where));
    s.objects.push_back(std::move(so));
  }
  validate_scene(s);
  return s;
}

inline SceneAnnotation load_scene(std::string_view text) { return scene_from_json(parse_document(text)); }

// ---------------------------------------------------------------------------
// Scene-understanding document (pipeline output)

struct SceneUnderstanding {
  int image_w = 0;
  int image_h = 0;
  RelationGraph graph;
};

inline Json understanding_to_json(const SceneUnderstanding& u) {
  using doc_detail::box_json;
  Json objs = Json::array();
  for (std::size_t i = 0; i < u.graph.nodes.size(); ++i) {
    const auto& n = u.graph.nodes[i];
    Json grasp = nullptr;
    if (n.best_grasp) {
      grasp = doc_detail::rect_json(n.best_grasp->rect);
      grasp["pr"] = n.best_grasp->pr;
      grasp["class"] = n.best_grasp->class_id;
    }
    objs.push_back(Json{{"id", n.id},
                        {"class", n.detection.class_id},
                        {"pr", n.detection.pr},
                        {"box", box_json(n.detection.box)},
                        {"fc_scores", n.detection.fc_scores},
                        {"cc_scores", n.detection.cc_scores},
                        {"ord", i < u.graph.ord.size() ? u.graph.ord[i] : 0},
                        {"grasp", grasp}});
  }
  Json edges = Json::array();
  for (const auto& e : u.graph.edges) edges.push_back(Json{{"child", e.child}, {"parent", e.parent}, {"score", e.score}});
  return Json{{"image", {{"w", u.image_w}, {"h", u.image_h}}},
              {"objects", objs},
              {"edges", edges},
              {"order", grasp_order(u.graph)}};
}

inline std::string save_understanding(const SceneUnderstanding& u) { return canonical_dump(understanding_to_json(u)); }

inline SceneUnderstanding understanding_from_json(const Json& j) {
  using namespace doc_detail;
  SceneUnderstanding u;
  const Json& img = field(j, "image", "document");
  u.image_w = integer(img, "w", "image");
  u.image_h = integer(img, "h", "image");
  for (const auto& o : array(j, "objects", "document")) {
    PairedObject p;
    p.id = integer(o, "id", "object");
    const std::string where = "object " + std::to_string(p.id);
    if (u.graph.index_of(p.id)) throw Error(ErrorCode::DuplicateId, where + " appears twice");
    p.detection.class_id = integer(o, "class", where);
    p.detection.pr = number(o, "pr", where);
    p.detection.box = box_from(o, where);
    if (o.contains("fc_scores")) p.detection.fc_scores = numbers(o, "fc_scores", where);
    if (o.contains("cc_scores")) p.detection.cc_scores = numbers(o, "cc_scores", where);
    const Json& g = field(o, "grasp", where);
    if (!g.is_null()) {
      GraspCandidate gc;
      gc.rect = rect_from(g, where);
      gc.pr = number(g, "pr", where);
      gc.class_id = g.contains("class") ? integer(g, "class", where) : p.detection.class_id;
      p.best_grasp = gc;
    }
    u.graph.nodes.push_back(std::move(p));
  }
  for (const auto& e : array(j, "edges", "document")) {
    RelationEdge re{integer(e, "child", "edge"), integer(e, "parent", "edge"), number(e, "score", "edge")};
    if (!u.graph.index_of(re.child) || !u.graph.index_of(re.parent)) {
      throw Error(ErrorCode::DanglingSupport, "edge " + std::to_string(re.child) + " -> " + std::to_string(re.parent) +
                                                  " names a missing object");
    }
    u.graph.edges.push_back(re);
  }
  if (!detail::find_cycle([&] {
         std::vector<int> ids;
         for (const auto& n : u.graph.nodes) ids.push_back(n.id);
         return ids;
       }(), u.graph.edges).empty()) {
    throw Error(ErrorCode::CyclicSupport, "relation edges form a cycle");
  }
  u.graph.ord = compute_ord(u.graph.nodes, u.graph.edges);
  return u;
}

inline SceneUnderstanding load_understanding(std::string_view text) {
  return understanding_from_json(parse_document(text));
}

// ---------------------------------------------------------------------------
// Plans, episodes and reports

inline Json plan_to_json(const GraspPlan& p, int target_class) {
  return Json{{"target", target_class}, {"status", std::string(to_string(p.status))}, {"plan", p.ids}};
}

inline Json episode_to_json(const EpisodeRecord& r) {
  Json log = Json::array();
  for (const auto& s : r.log) {
    log.push_back(Json{{"step", s.step},
                       {"target_visible", s.target_visible},
                       {"node", s.node_id},
                       {"object", s.object_id},
                       {"outcome", s.outcome}});
  }
  return Json{{"target", r.target_class},
              {"success", r.success},
              {"steps", r.steps},
              {"status", std::string(to_string(r.status))},
              {"removed", r.removed},
              {"log", log}};
}

inline Json report_to_json(const EvalReport& r) {
  Json ap = Json::object(), ap_od = Json::object();
  for (const auto& [c, v] : r.per_class_ap) ap[std::to_string(c)] = v;
  for (const auto& [c, v] : r.per_class_ap_od) ap_od[std::to_string(c)] = v;
  return Json{{"ap_method", r.ap_method},
              {"n_images", r.n_images},
              {"n_success", r.n_success},
              {"accuracy", r.accuracy},
              {"per_class_ap", ap},
              {"per_class_ap_od", ap_od},
              {"mAP", r.mAP},
              {"mAPg", r.mAPg},
              {"tp", r.tp},
              {"fp", r.fp},
              {"n_gt", r.n_gt},
              {"tp_od", r.tp_od},
              {"fp_od", r.fp_od},
              {"notes", r.notes}};
}

inline std::string report_to_text(const EvalReport& r) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof buf, "%-12s %d\n%-12s %d\n%-12s %.6f\n", "images", r.n_images, "successes", r.n_success,
                "accuracy", r.accuracy);
  out += buf;
  if (!r.per_class_ap.empty()) {
    out += "class        AP(box)    AP(box+grasp)\n";
    for (const auto& [c, v] : r.per_class_ap) {
      std::snprintf(buf, sizeof buf, "%-12d %-10.6f %.6f\n", c, r.per_class_ap_od.at(c), v);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "%-12s %.6f\n%-12s %.6f\n", "mAP", r.mAP, "mAPg", r.mAPg);
    out += buf;
  }
  for (const auto& n : r.notes) out += "note: " + n + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Cornell prediction document: images[]{image, grasps[]{x,y,w,h,theta,pr}}

inline std::map<std::string, std::vector<ScoredGrasp>> load_cornell_predictions(std::string_view text) {
  using namespace doc_detail;
  const Json j = parse_document(text);
  std::map<std::string, std::vector<ScoredGrasp>> out;
  for (const auto& img : array(j, "images", "document")) {
    const Json& id = field(img, "image", "image entry");
    if (!id.is_string()) throw Error(ErrorCode::BadDocument, "image entry: 'image' must be a string");
    const std::string where = "image " + id.get<std::string>();
    auto& list = out[id.get<std::string>()];
    for (const auto& g : array(img, "grasps", where)) list.push_back({rect_from(g, where), number(g, "pr", where)});
  }
  return out;
}

}  // namespace mtgrasp
