/*
 Copyright 2025 The payload-mpc Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/
#pragma once

#include <stdexcept>
#include <string>

namespace payload_mpc {

/// Payload elevation angle too close to the mass-matrix singularity.
struct SingularConfiguration : std::runtime_error {
  explicit SingularConfiguration(const std::string& what) : std::runtime_error(what) {}
};

/// Inconsistent matrix/vector dimensions in a problem description.
struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

/// Innovation covariance is numerically singular.
struct IllConditionedInnovation : std::runtime_error {
  explicit IllConditionedInnovation(const std::string& what) : std::runtime_error(what) {}
};

/// QP solve did not produce a usable command/plan.
struct SolverFailed : std::runtime_error {
  explicit SolverFailed(const std::string& what) : std::runtime_error(what) {}
};

/// Metric requested on an empty sample set.
struct EmptyTrajectory : std::runtime_error {
  explicit EmptyTrajectory(const std::string& what) : std::runtime_error(what) {}
};

/// Relative metric with a zero baseline.
struct DivisionByZero : std::runtime_error {
  explicit DivisionByZero(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed configuration file or value.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace payload_mpc
