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

#pragma once

#include <fstream>

#include <json.hpp>

#include "strider/reference.hpp"
#include "strider/types.hpp"
#include "strider/wbc.hpp"

namespace strider {

struct LqrSettings {
  int horizon = 20;
  scalar_t dt = 0.02;
  scalar_t barrierWeight = 1e-2;
  scalar_t slackFloor = 1.0;       ///< [N] clamp margin before barrier expansion
  scalar_t resolveHz = 100.0;
  scalar_t pScale = 10.0;          ///< terminal weight P = pScale * Q
  scalar_t rDiag = 1e-3;
  scalar_t qPos = 100.0, qOri = 100.0, qLinVel = 10.0, qAngVel = 10.0;

  /// Stage weight over x = (pos, ori, linvel, angvel) for the given base dim.
  matrix_t stageWeight(int baseDim) const {
    vector_t d(2 * baseDim);
    if (baseDim == 6) {
      d << qPos, qPos, qPos, qOri, qOri, qOri, qLinVel, qLinVel, qLinVel, qAngVel, qAngVel, qAngVel;
    } else {
      d << qPos, qPos, qOri, qLinVel, qLinVel, qAngVel;
    }
    return d.asDiagonal();
  }
};

struct WbcSettings {
  std::string mode = "riccati";  ///< "riccati" or "pd"
  scalar_t kp = 20.0;
  scalar_t kd = 1.0;
  WbcWeights weights;
  scalar_t swingKp = 300.0;
  scalar_t swingKd = 20.0;
  scalar_t tickHz = 1000.0;
  scalar_t fzCapFactor = 2.0;  ///< normal-force cap as a multiple of total weight
};

struct GaitSettings {
  std::string type = "biped_walk";  ///< "stand", "biped_walk", "quad_trot"
  ReferenceParams reference;
};

struct ControllerConfig {
  LqrSettings lqr;
  WbcSettings wbc;
  GaitSettings gait;

  void validate() const {
    if (lqr.horizon < 1) throw ConfigError("lqr.horizon must be >= 1");
    if (!(lqr.dt > 0.0)) throw ConfigError("lqr.dt must be positive");
    if (!(lqr.resolveHz > 0.0) || !(wbc.tickHz > 0.0)) {
      throw ConfigError("lqr.resolve_hz and wbc.tick_hz must be positive");
    }
    const scalar_t ratio = wbc.tickHz / lqr.resolveHz;
    if (std::abs(ratio - std::round(ratio)) > 1e-9) {
      throw ConfigError("wbc.tick_hz must be an integer multiple of lqr.resolve_hz");
    }
    if (wbc.mode != "riccati" && wbc.mode != "pd") {
      throw ConfigError("wbc.mode must be 'riccati' or 'pd'");
    }
    if (gait.type != "stand" && gait.type != "biped_walk" && gait.type != "quad_trot") {
      throw ConfigError("gait.type must be stand, biped_walk or quad_trot");
    }
    if (!(gait.reference.baseHeight > 0.0)) throw ConfigError("gait.base_height must be positive");
    if (!(lqr.slackFloor > 0.0)) throw ConfigError("lqr.slack_floor must be positive");
    if (!(lqr.barrierWeight >= 0.0)) throw ConfigError("lqr.barrier_weight must be >= 0");
  }

  GaitType gaitType() const {
    if (gait.type == "stand") return GaitType::kStand;
    if (gait.type == "biped_walk") return GaitType::kBipedWalk;
    return GaitType::kQuadTrot;
  }

  ReferenceParams referenceParams() const {
    ReferenceParams p = gait.reference;
    p.gait.type = gaitType();
    return p;
  }
};

namespace detail {

template <typename T>
void maybeRead(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline ControllerConfig controllerConfigFromJson(const nlohmann::json& j) {
  ControllerConfig cfg;
  try {
    if (j.contains("lqr")) {
      const auto& l = j.at("lqr");
      detail::maybeRead(l, "horizon", cfg.lqr.horizon);
      detail::maybeRead(l, "dt", cfg.lqr.dt);
      detail::maybeRead(l, "barrier_weight", cfg.lqr.barrierWeight);
      detail::maybeRead(l, "slack_floor", cfg.lqr.slackFloor);
      detail::maybeRead(l, "resolve_hz", cfg.lqr.resolveHz);
      detail::maybeRead(l, "p_scale", cfg.lqr.pScale);
      detail::maybeRead(l, "r_diag", cfg.lqr.rDiag);
      detail::maybeRead(l, "q_pos", cfg.lqr.qPos);
      detail::maybeRead(l, "q_ori", cfg.lqr.qOri);
      detail::maybeRead(l, "q_lin_vel", cfg.lqr.qLinVel);
      detail::maybeRead(l, "q_ang_vel", cfg.lqr.qAngVel);
    }
    if (j.contains("wbc")) {
      const auto& w = j.at("wbc");
      detail::maybeRead(w, "mode", cfg.wbc.mode);
      detail::maybeRead(w, "kp", cfg.wbc.kp);
      detail::maybeRead(w, "kd", cfg.wbc.kd);
      detail::maybeRead(w, "base_weight", cfg.wbc.weights.base);
      detail::maybeRead(w, "swing_weight", cfg.wbc.weights.swing);
      detail::maybeRead(w, "force_weight", cfg.wbc.weights.force);
      detail::maybeRead(w, "reg_accel", cfg.wbc.weights.regAccel);
      detail::maybeRead(w, "reg_torque", cfg.wbc.weights.regTorque);
      detail::maybeRead(w, "swing_kp", cfg.wbc.swingKp);
      detail::maybeRead(w, "swing_kd", cfg.wbc.swingKd);
      detail::maybeRead(w, "tick_hz", cfg.wbc.tickHz);
      detail::maybeRead(w, "fz_cap_factor", cfg.wbc.fzCapFactor);
    }
    if (j.contains("gait")) {
      const auto& g = j.at("gait");
      detail::maybeRead(g, "type", cfg.gait.type);
      detail::maybeRead(g, "start_time", cfg.gait.reference.gait.startTime);
      detail::maybeRead(g, "swing_duration", cfg.gait.reference.gait.swingDuration);
      detail::maybeRead(g, "double_support", cfg.gait.reference.gait.doubleSupport);
      detail::maybeRead(g, "trot_phase", cfg.gait.reference.gait.trotPhase);
      detail::maybeRead(g, "base_height", cfg.gait.reference.baseHeight);
      detail::maybeRead(g, "swing_height", cfg.gait.reference.swingHeight);
      detail::maybeRead(g, "raibert_gain", cfg.gait.reference.raibertGain);
      detail::maybeRead(g, "max_step_length", cfg.gait.reference.maxStepLength);
      detail::maybeRead(g, "filter_tau", cfg.gait.reference.filterTau);
      detail::maybeRead(g, "accel_limit_lin", cfg.gait.reference.accelLimitLin);
      detail::maybeRead(g, "accel_limit_ang", cfg.gait.reference.accelLimitAng);
      detail::maybeRead(g, "max_path_speed", cfg.gait.reference.maxPathSpeed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed controller config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline ControllerConfig loadControllerConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
  }
  return controllerConfigFromJson(j);
}

}  // namespace strider
