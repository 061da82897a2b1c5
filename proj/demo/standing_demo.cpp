// Copyright 2026 The Strider Authors
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

// Balance regression: hold a zero velocity command for five seconds on the
// perturbed-mass plant and report how far the base drifts from its starting
// pose.  A healthy controller keeps the drift under two centimeters.

#include <cstdio>

#include "strider/experiments.hpp"

int main() {
  using namespace strider;
  const RobotModel model =
      RobotModel::loadFromFile(std::string(STRIDER_MODELS_DIR) + "/biped_p1_like.json");

  ControllerConfig cfg;
  cfg.gait.type = "stand";
  const State s0 = standingState(model, cfg.gait.reference);
  const scalar_t duration = 5.0;
  auto ref = std::make_shared<const MotionReference>(model, cfg.referenceParams(), CommandSignal{},
                                                     s0.q, duration);
  const SimTrace trace = runClosedLoop(model, cfg, ref, s0, SimConfig{}, {duration});

  scalar_t maxDrift = 0.0;
  for (const auto& row : trace.rows) {
    maxDrift = std::max(maxDrift, (row.q.head(2) - s0.q.head(2)).norm());
  }
  const scalar_t heightDrift =
      trace.rows.empty() ? 0.0 : std::abs(trace.rows.back().q(2) - s0.q(2));

  std::printf("standing for %.1f s with a zero velocity command (plant masses +5%%)\n", duration);
  std::printf("  horizontal base drift: %.4f m (budget 0.020 m)\n", maxDrift);
  std::printf("  final height offset:   %.4f m\n", heightDrift);
  std::printf("  fell: %s, events: %zu\n", trace.fell ? "yes" : "no", trace.events.size());
  const bool ok = !trace.fell && maxDrift < 0.02;
  std::printf("%s\n", ok ? "OK" : "REGRESSION");
  return ok ? 0 : 1;
}
