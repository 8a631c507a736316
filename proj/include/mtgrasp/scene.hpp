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

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mtgrasp/error.hpp"
#include "mtgrasp/geometry.hpp"

namespace mtgrasp {

/// One annotated object: its box, the objects it rests on, and its grasps.
struct SceneObject {
  int id = 0;
  int class_id = 0;
  AxisRect box;
  std::vector<int> on_top_of;
  std::vector<OrientedRect> grasps;
};

struct SceneAnnotation {
  int image_w = 0;
  int image_h = 0;
  std::vector<SceneObject> objects;

  const SceneObject* find(int id) const {
    for (const auto& o : objects) {
      if (o.id == id) return &o;
    }
    return nullptr;
  }
};

inline std::string class_name(int class_id) { return "class_" + std::to_string(class_id); }

/// Checks id uniqueness and that on_top_of references exist and are acyclic.
inline void validate_scene(const SceneAnnotation& scene) {
  if (scene.image_w <= 0 || scene.image_h <= 0) {
    throw Error(ErrorCode::BadDocument, "image size must be positive");
  }
  std::set<int> ids;
  for (const auto& o : scene.objects) {
    if (!ids.insert(o.id).second) {
      throw Error(ErrorCode::DuplicateId, "object id " + std::to_string(o.id) + " appears twice");
    }
  }
  std::map<int, const SceneObject*> by_id;
  for (const auto& o : scene.objects) by_id[o.id] = &o;
  for (const auto& o : scene.objects) {
    for (int s : o.on_top_of) {
      if (!by_id.count(s)) {
        throw Error(ErrorCode::DanglingSupport, "object " + std::to_string(o.id) +
                                                    " rests on missing id " + std::to_string(s));
      }
      if (s == o.id) {
        throw Error(ErrorCode::CyclicSupport, "object " + std::to_string(o.id) + " rests on itself");
      }
    }
  }
  // 0 = unvisited, 1 = on stack, 2 = done
  std::map<int, int> mark;
  auto visit = [&](auto& self, int id) -> void {
    mark[id] = 1;
    for (int s : by_id[id]->on_top_of) {
      if (mark[s] == 1) {
        throw Error(ErrorCode::CyclicSupport,
                    "support cycle through object " + std::to_string(s) + " and " + std::to_string(id));
      }
      if (mark[s] == 0) self(self, s);
    }
    mark[id] = 2;
  };
  for (const auto& o : scene.objects) {
    if (mark[o.id] == 0) visit(visit, o.id);
  }
}

}  // namespace mtgrasp
