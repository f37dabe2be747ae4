// Copyright 2026 The qrc-rydberg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace qrc {

// Error hierarchy. Each family maps onto one CLI exit code.

/// Invalid parameters, inconsistent configs, contract violations on inputs.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent data files (IDX, PGM, CSV, shot tables).
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Integrator/solver failures: non-finite values, norm drift, step underflow.
class NumericalError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Norm drift past the integrator tolerance; callers may retry with a smaller step.
class NormDriftError : public NumericalError {
  public:
    using NumericalError::NumericalError;
};

namespace exit_code {
inline constexpr int kSuccess = 0;
inline constexpr int kConfig = 2;
inline constexpr int kData = 3;
inline constexpr int kNumerical = 4;
}  // namespace exit_code

}  // namespace qrc
