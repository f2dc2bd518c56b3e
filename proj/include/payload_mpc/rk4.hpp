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

#include "payload_mpc/dynamics.hpp"
#include "payload_mpc/types.hpp"

namespace payload_mpc {

/// One classical Runge-Kutta step of the full nonlinear model with the input
/// held constant over the step.
inline FullState rk4_step(const FullState& x, const ControlInput& u, double dt,
                          const SystemParams& p) {
  const FullState k1 = nonlinear_dynamics(x, u, p);
  const FullState k2 = nonlinear_dynamics(x + 0.5 * dt * k1, u, p);
  const FullState k3 = nonlinear_dynamics(x + 0.5 * dt * k2, u, p);
  const FullState k4 = nonlinear_dynamics(x + dt * k3, u, p);
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Integrate over a duration with fixed substeps.
inline FullState rk4_integrate(FullState x, const ControlInput& u, double duration, int substeps,
                               const SystemParams& p) {
  const double dt = duration / substeps;
  for (int i = 0; i < substeps; ++i) x = rk4_step(x, u, dt, p);
  return x;
}

}  // namespace payload_mpc
