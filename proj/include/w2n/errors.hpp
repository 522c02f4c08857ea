// Copyright 2026 The w2n Authors
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

namespace w2n {

// Exit codes used by the command-line tool. Every exception below maps to one.
enum class ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what, ExitCode code)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Tensor shapes or feature dimensions that do not line up.
class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error("dimension error: " + what, ExitCode::kData) {}
};

/// A scalar argument outside its admissible range.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error("parameter error: " + what, ExitCode::kUsage) {}
};

/// A caller broke an API contract (e.g. non-scalar function handed to grad_check).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& what) : Error("contract error: " + what, ExitCode::kUsage) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config error: " + what, ExitCode::kUsage) {}
};

/// Malformed input data: bad labels, frame-count mismatches, empty corpora.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error("data error: " + what, ExitCode::kData) {}
};

/// Unreadable or corrupt file containers (WAV, feature, checkpoint, shard).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("format error: " + what, ExitCode::kData) {}
};

class AlignmentError : public Error {
 public:
  explicit AlignmentError(const std::string& what) : Error("alignment error: " + what, ExitCode::kData) {}
};

/// Non-finite losses or gradients during optimisation.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error("training error: " + what, ExitCode::kNumerical) {}
};

/// Failures in the statistical estimators (LPC, GMM, KL).
class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& what) : Error("estimation error: " + what, ExitCode::kNumerical) {}
};

class MetricError : public Error {
 public:
  explicit MetricError(const std::string& what) : Error("metric error: " + what, ExitCode::kData) {}
};

}  // namespace w2n
