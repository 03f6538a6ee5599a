// Copyright 2026 The priormix Authors. All Rights Reserved.
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

#ifndef PRIORMIX_ERROR_HPP_
#define PRIORMIX_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace priormix {

enum class ErrorCode {
  kInvalidArgument,
  kRankDeficient,
  kInvalidSimplex,
  kGenerationFailed,
  kInsufficientClassSamples,
  kParseError,
  kLabelRangeError,
  kMagicMismatch,
  kCountMismatch,
  kDimensionMismatch,
  kNonFiniteLoss,
  kEmptyTrajectory,
  kConfigError,
  kIoError,
};

inline const char *to_string(ErrorCode code) {
  switch (code) {
  case ErrorCode::kInvalidArgument:
    return "InvalidArgument";
  case ErrorCode::kRankDeficient:
    return "RankDeficient";
  case ErrorCode::kInvalidSimplex:
    return "InvalidSimplex";
  case ErrorCode::kGenerationFailed:
    return "GenerationFailed";
  case ErrorCode::kInsufficientClassSamples:
    return "InsufficientClassSamples";
  case ErrorCode::kParseError:
    return "ParseError";
  case ErrorCode::kLabelRangeError:
    return "LabelRangeError";
  case ErrorCode::kMagicMismatch:
    return "MagicMismatch";
  case ErrorCode::kCountMismatch:
    return "CountMismatch";
  case ErrorCode::kDimensionMismatch:
    return "DimensionMismatch";
  case ErrorCode::kNonFiniteLoss:
    return "NonFiniteLoss";
  case ErrorCode::kEmptyTrajectory:
    return "EmptyTrajectory";
  case ErrorCode::kConfigError:
    return "ConfigError";
  case ErrorCode::kIoError:
    return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so the
/// CLI can map it onto an exit status without string matching.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string &message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

} // namespace priormix

#endif // PRIORMIX_ERROR_HPP_
