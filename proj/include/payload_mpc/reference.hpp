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

#include <cmath>
#include <vector>

#include "payload_mpc/errors.hpp"
#include "payload_mpc/types.hpp"

namespace payload_mpc {

/// Sparse timestamped payload waypoints with uniform temporal spacing.
struct SparseReference {
  std::vector<double> times;     // s, strictly increasing, uniform spacing
  std::vector<Vec3> positions;   // m

  size_t size() const { return times.size(); }

  void validate() const {
    if (times.size() != positions.size())
      throw DimensionMismatch("SparseReference: times/positions length mismatch");
    if (times.empty()) throw EmptyTrajectory("SparseReference: no waypoints");
    if (times.size() >= 2) {
      const double dt = times[1] - times[0];
      for (size_t i = 1; i < times.size(); ++i) {
        const double step = times[i] - times[i - 1];
        if (!(step > 0.0))
          throw DimensionMismatch("SparseReference: timestamps must strictly increase");
        if (std::abs(step - dt) > 1e-9)
          throw DimensionMismatch("SparseReference: waypoint spacing must be uniform");
      }
    }
  }

  /// Zero-order hold: value of the most recent waypoint (first one before
  /// the trajectory starts).
  Vec3 sample_zoh(double t) const {
    if (t <= times.front()) return positions.front();
    size_t i = 0;
    while (i + 1 < times.size() && times[i + 1] <= t) ++i;
    return positions[i];
  }

  /// Same waypoints re-spaced to a new uniform dt, keeping the start time.
  SparseReference retimed(double new_dt) const {
    SparseReference out = *this;
    for (size_t i = 0; i < out.times.size(); ++i)
      out.times[i] = times.front() + static_cast<double>(i) * new_dt;
    return out;
  }

  /// All waypoint times shifted by an offset.
  SparseReference shifted(double offset) const {
    SparseReference out = *this;
    for (double& t : out.times) t += offset;
    return out;
  }
};

/// Dense stage-aligned trajectory: payload positions plus the matching
/// absolute inputs, sampled every dt starting at start_time.
struct DenseReference {
  double start_time = 0.0;
  double dt = 0.0;
  std::vector<Vec3> positions;
  std::vector<ControlInput> inputs;

  size_t size() const { return positions.size(); }
  double end_time() const {
    return positions.empty() ? start_time
                             : start_time + dt * static_cast<double>(positions.size() - 1);
  }

  /// Linear interpolation, clamped to the first/last sample.
  Vec3 sample_position(double t) const {
    return interp(positions, t);
  }
  ControlInput sample_input(double t) const {
    return interp(inputs, t);
  }

 private:
  template <typename V>
  V interp(const std::vector<V>& values, double t) const {
    if (values.empty()) throw EmptyTrajectory("DenseReference: empty");
    if (values.size() == 1 || t <= start_time) return values.front();
    const double s = (t - start_time) / dt;
    const auto last = static_cast<double>(values.size() - 1);
    if (s >= last) return values.back();
    const auto i = static_cast<size_t>(s);
    const double a = s - static_cast<double>(i);
    return (1.0 - a) * values[i] + a * values[i + 1];
  }
};

/// The plan in force at time t: the most recently issued plan whose
/// timestamps have started (plans are absolutely timestamped).
inline const DenseReference& active_plan(const std::vector<DenseReference>& plans, double t) {
  if (plans.empty()) throw EmptyTrajectory("active_plan: no plans issued");
  const DenseReference* best = &plans.front();
  for (const DenseReference& p : plans)
    if (p.start_time <= t + 1e-9) best = &p;
  return *best;
}

}  // namespace payload_mpc
