// Copyright 2026 The maskctc Authors. All Rights Reserved.
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

#include "maskctc/error.hpp"

namespace maskctc {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidLattice: return "InvalidLattice";
    case ErrorCode::kInvalidInput: return "InvalidInput";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kOracleTooLarge: return "OracleTooLarge";
    case ErrorCode::kDegenerateInstance: return "DegenerateInstance";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kFillLengthMismatch: return "FillLengthMismatch";
    case ErrorCode::kSampleSkipped: return "SampleSkipped";
    case ErrorCode::kTrainingDiverged: return "TrainingDiverged";
    case ErrorCode::kDegenerateReference: return "DegenerateReference";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace maskctc
