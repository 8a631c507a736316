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

#include <stdexcept>
#include <string>
#include <string_view>

namespace mtgrasp {

enum class ErrorCode {
  NotARectangle,
  NonFinite,
  InvalidRect,
  BadInputSize,
  ShapeMismatch,
  OutOfBounds,
  OrphanGrasp,
  DimensionMismatch,
  CyclicGraph,
  BadScene,
  ZeroGT,
  TooFewGroups,
  MalformedLine,
  TruncatedFile,
  DanglingSupport,
  CyclicSupport,
  DuplicateId,
  BadMagic,
  TruncatedPayload,
  BadDocument,
  DivergenceDetected,
  InvalidConfig,
  Usage,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotARectangle: return "NotARectangle";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::InvalidRect: return "InvalidRect";
    case ErrorCode::BadInputSize: return "BadInputSize";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::OrphanGrasp: return "OrphanGrasp";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::CyclicGraph: return "CyclicGraph";
    case ErrorCode::BadScene: return "BadScene";
    case ErrorCode::ZeroGT: return "ZeroGT";
    case ErrorCode::TooFewGroups: return "TooFewGroups";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::DanglingSupport: return "DanglingSupport";
    case ErrorCode::CyclicSupport: return "CyclicSupport";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::BadDocument: return "BadDocument";
    case ErrorCode::DivergenceDetected: return "DivergenceDetected";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

/// Single exception type for the library. The code is the machine-readable
/// reason; what() carries "<Code>: <detail>".
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mtgrasp
