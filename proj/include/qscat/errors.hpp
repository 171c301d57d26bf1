// Copyright 2026 The qscat Authors
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

namespace qscat {

enum class ErrorKind {
  Validation,
  SingularMatrix,
  NoOpenChannel,
  ThresholdEnergy,
  UnitarityViolation,
  AllGapsDegenerate,
  QuadratureNotConverged,
  NotStochastic,
  TraceDrift,
  DimensionMismatch,
  PopulationUnderflow,
  DetailedBalanceViolated,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return "Validation";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::NoOpenChannel: return "NoOpenChannel";
    case ErrorKind::ThresholdEnergy: return "ThresholdEnergy";
    case ErrorKind::UnitarityViolation: return "UnitarityViolation";
    case ErrorKind::AllGapsDegenerate: return "AllGapsDegenerate";
    case ErrorKind::QuadratureNotConverged: return "QuadratureNotConverged";
    case ErrorKind::NotStochastic: return "NotStochastic";
    case ErrorKind::TraceDrift: return "TraceDrift";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::PopulationUnderflow: return "PopulationUnderflow";
    case ErrorKind::DetailedBalanceViolated: return "DetailedBalanceViolated";
  }
  return "Unknown";
}

/// Single exception type for the library; `kind()` tells callers what went
/// wrong. Validation errors are caller mistakes, everything else is numeric.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  bool is_validation() const noexcept { return kind_ == ErrorKind::Validation; }

 private:
  ErrorKind kind_;
};

/// Re-throws `e` with extra context prepended, keeping its kind.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
  std::string msg = e.what();
  const std::string prefix = std::string(to_string(e.kind())) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
  throw Error(e.kind(), context + ": " + msg);
}

}  // namespace qscat
