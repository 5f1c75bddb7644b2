// Copyright 2026 The Sitpose Authors
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

#ifndef SITPOSE_ERROR_HPP_
#define SITPOSE_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace sitpose {

enum class ErrorKind {
  kDegenerateInput,
  kNonUnitQuaternion,
  kNonOrthonormalInput,
  kSequenceTooShort,
  kShapeMismatch,
  kEmptyDataset,
  kNonFiniteLoss,
  kSingularMassMatrix,
  kInfeasibleProblem,
  kMaxIterations,
  kIllPosedProblem,
  kZeroVariance,
  kLengthMismatch,
  kParseError,
  kIoError,
  kConfigError,
};

inline std::string_view ErrorName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDegenerateInput: return "DegenerateInput";
    case ErrorKind::kNonUnitQuaternion: return "NonUnitQuaternion";
    case ErrorKind::kNonOrthonormalInput: return "NonOrthonormalInput";
    case ErrorKind::kSequenceTooShort: return "SequenceTooShort";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kEmptyDataset: return "EmptyDataset";
    case ErrorKind::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::kSingularMassMatrix: return "SingularMassMatrix";
    case ErrorKind::kInfeasibleProblem: return "InfeasibleProblem";
    case ErrorKind::kMaxIterations: return "MaxIterations";
    case ErrorKind::kIllPosedProblem: return "IllPosedProblem";
    case ErrorKind::kZeroVariance: return "ZeroVariance";
    case ErrorKind::kLengthMismatch: return "LengthMismatch";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kIoError: return "IoError";
    case ErrorKind::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

// Exit status used by the command line tool: 2 config, 3 data, 4 numeric.
inline int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfigError:
      return 2;
    case ErrorKind::kNonFiniteLoss:
    case ErrorKind::kSingularMassMatrix:
    case ErrorKind::kInfeasibleProblem:
    case ErrorKind::kMaxIterations:
    case ErrorKind::kIllPosedProblem:
      return 4;
    default:
      return 3;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(ErrorName(kind)) + ": " + message),
        kind_(kind),
        detail_(message) {}

  ErrorKind kind() const { return kind_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace sitpose

#endif  // SITPOSE_ERROR_HPP_
