// Copyright 2026 The ldpfeat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace ldpfeat {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kAllDegenerate,
  kInsufficientDatabase,
  kSpanFailure,
  kEmptyDictionary,
  kDomainTooLarge,
  kDegenerateData,
  kCorruptFile,
  kVersionUnsupported,
  kInsufficientNeighbors,
  kNoIntersectingAux,
  kInsufficientCandidates,
  kConfigError,
  kIoError,
};

inline std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kAllDegenerate: return "AllDegenerate";
    case ErrorCode::kInsufficientDatabase: return "InsufficientDatabase";
    case ErrorCode::kSpanFailure: return "SpanFailure";
    case ErrorCode::kEmptyDictionary: return "EmptyDictionary";
    case ErrorCode::kDomainTooLarge: return "DomainTooLarge";
    case ErrorCode::kDegenerateData: return "DegenerateData";
    case ErrorCode::kCorruptFile: return "CorruptFile";
    case ErrorCode::kVersionUnsupported: return "VersionUnsupported";
    case ErrorCode::kInsufficientNeighbors: return "InsufficientNeighbors";
    case ErrorCode::kNoIntersectingAux: return "NoIntersectingAux";
    case ErrorCode::kInsufficientCandidates: return "InsufficientCandidates";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message), code_(code), message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

inline void Require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

inline void RequireSameDim(Eigen::Index a, Eigen::Index b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::kDimensionMismatch,
                std::string(what) + ": " + std::to_string(a) + " vs " + std::to_string(b));
  }
}

// Round every entry through float32 so the value survives a float32 encode exactly.
template <typename Derived>
auto RoundToFloat(const Eigen::MatrixBase<Derived>& x) {
  using Plain = typename Derived::PlainObject;
  return Plain(x.template cast<float>().template cast<double>());
}

}  // namespace ldpfeat
