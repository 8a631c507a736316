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

#include "mtgrasp/anchor_codec.hpp"
#include "mtgrasp/bundle.hpp"
#include "mtgrasp/cornell.hpp"
#include "mtgrasp/document.hpp"
#include "mtgrasp/error.hpp"
#include "mtgrasp/eval.hpp"
#include "mtgrasp/geometry.hpp"
#include "mtgrasp/loss.hpp"
#include "mtgrasp/planner.hpp"
#include "mtgrasp/postprocess.hpp"
#include "mtgrasp/scene.hpp"
#include "mtgrasp/synth.hpp"
#include "mtgrasp/toytrain.hpp"
