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

// Walks the point-foot biped forward at 0.3 m/s for five seconds with the
// Riccati-gain controller and writes the full closed-loop trace to a csv.

#include <cstdio>

#include "strider/experiments.hpp"

int main(int argc, char** argv) {
  using namespace strider;
  const std::string out = argc > 1 ? argv[1] : "walk_trace.csv";

  const RobotModel model =
      RobotModel::loadFromFile(std::string(STRIDER_MODELS_DIR) + "/biped_p1_like.json");
  ControllerConfig cfg;
  const ExperimentRun run = runExperiment(model, cfg, 1, SimConfig{}, 5.0);

  run.trace.writeCsv(out);
  const auto& r = run.result;
  std::printf("walked preset 1 (0.3 m/s forward) for 5 s, %zu rows -> %s\n",
              run.trace.rows.size(), out.c_str());
  std::printf("  linear mse %.4f  angular mse %.4f  fell %s\n", r.linearMse, r.angularMse,
              r.fell ? "yes" : "no");
  std::printf("  mean base residual %.4f, wbc p95 %.3f ms, lqr p95 %.3f ms\n",
              r.meanBaseResidual, r.wbcMs.p95, r.lqrMs.p95);
  for (const auto& e : run.trace.events) {
    if (run.trace.events.size() <= 40) std::printf("  event %.3f %s\n", e.t, e.what.c_str());
  }
  return r.fell ? 1 : 0;
}
