// Copyright 2026 The flex Authors
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

#include "flex/errors.h"

namespace flex {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedProblem: return "MalformedProblem";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kEmptyInner: return "EmptyInner";
    case ErrorCode::kMixedBases: return "MixedBases";
    case ErrorCode::kUnboundedDirection: return "UnboundedDirection";
    case ErrorCode::kInfeasibleTask: return "InfeasibleTask";
    case ErrorCode::kBadProfile: return "BadProfile";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kValidationError: return "ValidationError";
    case ErrorCode::kTooLarge: return "TooLarge";
    case ErrorCode::kEmptyUnit: return "EmptyUnit";
    case ErrorCode::kEmptyOrDegenerate: return "EmptyOrDegenerate";
    case ErrorCode::kNotInBattery: return "NotInBattery";
    case ErrorCode::kDispatchInfeasible: return "DispatchInfeasible";
    case ErrorCode::kEmptyBattery: return "EmptyBattery";
    case ErrorCode::kTargetOutOfRange: return "TargetOutOfRange";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace flex
