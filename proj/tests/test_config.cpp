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

#include <catch2/catch_amalgamated.hpp>

#include "strider/config.hpp"

using namespace strider;

TEST_CASE("defaults round-trip through the shipped config file", "[config]") {
  const ControllerConfig fromFile =
      loadControllerConfig(std::string(STRIDER_CONFIG_DIR) + "/default.json");
  const ControllerConfig defaults;
  REQUIRE(fromFile.lqr.horizon == defaults.lqr.horizon);
  REQUIRE(fromFile.lqr.dt == defaults.lqr.dt);
  REQUIRE(fromFile.lqr.barrierWeight == defaults.lqr.barrierWeight);
  REQUIRE(fromFile.lqr.slackFloor == defaults.lqr.slackFloor);
  REQUIRE(fromFile.lqr.resolveHz == defaults.lqr.resolveHz);
  REQUIRE(fromFile.lqr.pScale == defaults.lqr.pScale);
  REQUIRE(fromFile.lqr.rDiag == defaults.lqr.rDiag);
  REQUIRE(fromFile.wbc.mode == defaults.wbc.mode);
  REQUIRE(fromFile.wbc.kp == defaults.wbc.kp);
  REQUIRE(fromFile.wbc.kd == defaults.wbc.kd);
  REQUIRE(fromFile.wbc.weights.base == defaults.wbc.weights.base);
  REQUIRE(fromFile.wbc.weights.force == defaults.wbc.weights.force);
  REQUIRE(fromFile.wbc.tickHz == defaults.wbc.tickHz);
  REQUIRE(fromFile.gait.type == defaults.gait.type);
  REQUIRE(fromFile.gait.reference.baseHeight == defaults.gait.reference.baseHeight);
  REQUIRE(fromFile.gait.reference.gait.startTime == defaults.gait.reference.gait.startTime);
}

TEST_CASE("partial configs keep defaults for missing keys", "[config]") {
  const nlohmann::json j = {{"wbc", {{"mode", "pd"}, {"kp", 40.0}}}};
  const ControllerConfig cfg = controllerConfigFromJson(j);
  REQUIRE(cfg.wbc.mode == "pd");
  REQUIRE(cfg.wbc.kp == 40.0);
  REQUIRE(cfg.wbc.kd == 1.0);          // untouched default
  REQUIRE(cfg.lqr.horizon == 20);      // untouched section
}

TEST_CASE("validation rejects inconsistent settings", "[config]") {
  SECTION("bad mode") {
    const nlohmann::json j = {{"wbc", {{"mode", "both"}}}};
    REQUIRE_THROWS_AS(controllerConfigFromJson(j), ConfigError);
  }
  SECTION("tick rate must divide evenly") {
    const nlohmann::json j = {{"wbc", {{"tick_hz", 950.0}}}};
    REQUIRE_THROWS_AS(controllerConfigFromJson(j), ConfigError);
  }
  SECTION("bad gait") {
    const nlohmann::json j = {{"gait", {{"type", "gallop"}}}};
    REQUIRE_THROWS_AS(controllerConfigFromJson(j), ConfigError);
  }
  SECTION("nonpositive horizon step") {
    const nlohmann::json j = {{"lqr", {{"dt", 0.0}}}};
    REQUIRE_THROWS_AS(controllerConfigFromJson(j), ConfigError);
  }
  SECTION("wrongly typed value") {
    const nlohmann::json j = {{"lqr", {{"horizon", "twenty"}}}};
    REQUIRE_THROWS_AS(controllerConfigFromJson(j), ConfigError);
  }
  SECTION("missing file") {
    REQUIRE_THROWS_AS(loadControllerConfig("/no/such/config.json"), ConfigError);
  }
}

TEST_CASE("stage weights lay out by base dimension", "[config]") {
  LqrSettings lqr;
  const matrix_t w6 = lqr.stageWeight(6);
  REQUIRE(w6.rows() == 12);
  REQUIRE(w6(0, 0) == 100.0);
  REQUIRE(w6(5, 5) == 100.0);
  REQUIRE(w6(6, 6) == 10.0);
  REQUIRE(w6(11, 11) == 10.0);
  const matrix_t w3 = lqr.stageWeight(3);
  REQUIRE(w3.rows() == 6);
  REQUIRE(w3(2, 2) == 100.0);  // pitch weight uses the orientation entry
  REQUIRE(w3(3, 3) == 10.0);
}

TEST_CASE("gait settings map to reference parameters", "[config]") {
  nlohmann::json j = {{"gait", {{"type", "quad_trot"}, {"base_height", 0.30}, {"trot_phase", 0.25}}}};
  const ControllerConfig cfg = controllerConfigFromJson(j);
  REQUIRE(cfg.gaitType() == GaitType::kQuadTrot);
  const ReferenceParams p = cfg.referenceParams();
  REQUIRE(p.gait.type == GaitType::kQuadTrot);
  REQUIRE(p.baseHeight == 0.30);
  REQUIRE(p.gait.trotPhase == 0.25);
}
