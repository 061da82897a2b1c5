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

#include <cmath>
#include <string>
#include <vector>

#include "strider/experiments.hpp"
#include "strider/sim.hpp"

using namespace strider;

namespace {

std::string simModelPath(const std::string& name) {
  return std::string(STRIDER_MODELS_DIR) + "/" + name;
}

/// A single floating body with no joints or contact frames: the simplest
/// system the simulator can integrate, and the one with known closed-form
/// invariants.
RobotModel freeBodyModel() {
  const nlohmann::json j = {
      {"name", "free_body"},
      {"base",
       {{"type", "spatial"},
        {"name", "body"},
        {"mass", 2.5},
        {"com", {0.0, 0.0, 0.0}},
        {"inertia", {0.02, 0.06, 0.05}}}},
      {"bodies", nlohmann::json::array()},
      {"joints", nlohmann::json::array()},
      {"contacts", nlohmann::json::array()},
      {"limits", {{"torque", 1.0}}}};
  return RobotModel::loadFromJson(j);
}

SimConfig noFallConfig() {
  SimConfig cfg;
  cfg.fallHeight = -1e9;
  cfg.fallAngle = 1e9;
  return cfg;
}

GaitSchedule standSchedule(int numFeet) {
  GaitParams p;
  p.type = GaitType::kStand;
  return GaitSchedule(numFeet, p);
}

/// Exact torque that holds a static pose: contact forces solve the base rows
/// of the Newton-Euler balance, torques mop up the joint rows.
vector_t gravityCompensation(const RobotModel& m, const State& s,
                             const std::vector<std::string>& stanceFeet) {
  const Kinematics kin = m.kinematics(s.q, s.v);
  const vector_t bias = m.nonlinearEffects(kin);
  const int nb = m.baseDim();
  if (stanceFeet.empty()) return bias.tail(m.numJoints());
  const ContactSet cs = makeContactSet(m, stanceFeet);
  const ContactKinematics ck = stackContactKinematics(m, kin, cs);
  const matrix_t Jcb = ck.jacobian.leftCols(nb);
  const matrix_t Jca = ck.jacobian.rightCols(m.numJoints());
  const vector_t lambda =
      Jcb.transpose().colPivHouseholderQr().solve(bias.head(nb));
  return bias.tail(m.numJoints()) - Jca.transpose() * lambda;
}

std::vector<std::string> allFeet(const RobotModel& m) {
  std::vector<std::string> names;
  for (const auto& f : m.contactFrames()) names.push_back(f.name);
  return names;
}

}  // namespace

TEST_CASE("ballistic flight conserves the staggered energy to rounding") {
  const RobotModel body = freeBodyModel();
  Simulator sim(body, noFallConfig(), standSchedule(0));

  State s0;
  s0.q = vector_t::Zero(6);
  s0.q(2) = 2.0;
  s0.v = vector_t::Zero(6);
  s0.v(0) = 0.8;
  s0.v(1) = -0.3;
  s0.v(2) = 1.5;
  sim.reset(s0, 0.0);

  const scalar_t e0 = sim.discreteEnergy();
  const vector_t tau(0);
  scalar_t worst = 0.0;
  for (int k = 0; k < 600; ++k) {
    sim.step(tau);
    worst = std::max(worst, std::abs(sim.discreteEnergy() - e0));
  }
  // With zero angular velocity the semi-implicit update conserves the
  // staggered energy identically; only float rounding remains.
  REQUIRE(worst < 1e-9);
  REQUIRE(sim.events().empty());
  REQUIRE(sim.lastContacts().count() == 0);
}

TEST_CASE("principal-axis spin is an exact invariant of the integrator") {
  const RobotModel body = freeBodyModel();
  Simulator sim(body, noFallConfig(), standSchedule(0));

  // Pure pitch rotation with zero roll/yaw: a principal axis of the diagonal
  // inertia, so the gyroscopic bias vanishes along the whole trajectory and
  // the rate must stay constant while the body falls freely.
  State s0;
  s0.q = vector_t::Zero(6);
  s0.q(2) = 5.0;
  s0.v = vector_t::Zero(6);
  s0.v(4) = 2.0;  // pitch rate
  sim.reset(s0, 0.0);

  const scalar_t e0 = sim.discreteEnergy();
  const vector_t tau(0);
  for (int k = 0; k < 500; ++k) sim.step(tau);

  REQUIRE(std::abs(sim.discreteEnergy() - e0) < 1e-8);
  REQUIRE(sim.state().v(4) == Catch::Approx(2.0).margin(1e-12));
  REQUIRE(std::abs(sim.state().v(3)) < 1e-12);
  REQUIRE(std::abs(sim.state().v(5)) < 1e-12);
}

TEST_CASE("gravity-compensated stand stays put with pinned feet") {
  const RobotModel m = RobotModel::loadFromFile(simModelPath("biped_p1_like.json"));
  ReferenceParams rp;
  const State s0 = standingState(m, rp);

  SimConfig cfg;
  Simulator sim(m, cfg, standSchedule(2));
  sim.reset(s0, 0.0);

  // Anchors seeded from the actual foot positions at reset.
  REQUIRE(sim.anchors().size() == 2);
  const Kinematics kin0 = m.kinematics(s0.q, s0.v);
  for (const auto& [frame, anchor] : sim.anchors()) {
    const vector3_t p = m.pointKinematics(kin0, frame).position;
    REQUIRE((p - anchor).norm() < 1e-12);
  }

  const std::vector<std::string> feet = allFeet(m);
  for (int k = 0; k < 1000; ++k) {
    sim.step(gravityCompensation(m, sim.state(), feet));
  }

  REQUIRE_FALSE(sim.fallen());
  REQUIRE((sim.state().q - s0.q).lpNorm<Eigen::Infinity>() < 5e-3);
  REQUIRE(sim.state().v.lpNorm<Eigen::Infinity>() < 5e-2);

  // The contact solve carries the full weight through the feet.
  const vector_t lambda = sim.lastForces();
  REQUIRE(lambda.size() == 6);
  const scalar_t weight = m.totalMass() * kGravity;
  const scalar_t fz = lambda(2) + lambda(5);
  REQUIRE(fz == Catch::Approx(weight).epsilon(0.02));

  // Feet never leave their anchors.
  const Kinematics kin = m.kinematics(sim.state().q, sim.state().v);
  for (const auto& [frame, anchor] : sim.anchors()) {
    const vector3_t p = m.pointKinematics(kin, frame).position;
    REQUIRE((p - anchor).norm() < 1e-3);
  }
}

TEST_CASE("schedule-driven liftoff and touchdown emit events at the window edges") {
  const RobotModel m = RobotModel::loadFromFile(simModelPath("biped_p1_like.json"));
  ReferenceParams rp;
  const State s0 = standingState(m, rp);

  GaitParams gp;  // biped walk: foot 0 swings over [1.1, 1.45)
  gp.type = GaitType::kBipedWalk;
  Simulator sim(m, noFallConfig(), GaitSchedule(2, gp));
  sim.reset(s0, 0.0);

  const std::string foot0 = m.contactFrames()[0].name;
  // Joint damping only: dissipative, so the sim cannot diverge, and the
  // schedule-driven events fire regardless of balance quality.
  for (int k = 0; k < 1600; ++k) {
    sim.step(vector_t(-2.0 * sim.state().v.tail(m.numJoints())));
  }

  scalar_t tLift = -1.0, tTouch = -1.0;
  for (const auto& e : sim.events()) {
    if (e.what == "liftoff:" + foot0 && tLift < 0.0) tLift = e.t;
    if (e.what == "touchdown:" + foot0 && tTouch < 0.0) tTouch = e.t;
  }
  REQUIRE(tLift == Catch::Approx(1.10).margin(2e-3));
  REQUIRE(tTouch == Catch::Approx(1.45).margin(2e-3));
  REQUIRE(tLift < tTouch);
}

TEST_CASE("a shove past the friction cone releases a slipping foot") {
  const RobotModel m = RobotModel::loadFromFile(simModelPath("biped_p1_like.json"));
  ReferenceParams rp;
  const State s0 = standingState(m, rp);

  SimConfig cfg = noFallConfig();
  DisturbanceWindow push;
  push.start = 0.10;
  push.stop = 0.40;
  push.wrench = vector_t::Zero(m.baseDim());
  push.wrench(0) = 500.0;  // far beyond mu * m * g
  cfg.disturbances.push_back(push);

  Simulator sim(m, cfg, standSchedule(2));
  sim.reset(s0, 0.0);
  const std::vector<std::string> feet = allFeet(m);
  for (int k = 0; k < 500; ++k) {
    sim.step(gravityCompensation(m, sim.state(), feet));
  }

  scalar_t tSlip = -1.0;
  for (const auto& e : sim.events()) {
    if (e.what.rfind("slip_release:", 0) == 0) {
      tSlip = e.t;
      break;
    }
  }
  REQUIRE(tSlip >= 0.10);
  REQUIRE(tSlip < 0.40);
}

TEST_CASE("disturbances only act inside their window") {
  const RobotModel m = RobotModel::loadFromFile(simModelPath("biped_p1_like.json"));
  ReferenceParams rp;
  const State s0 = standingState(m, rp);

  SimConfig quiet = noFallConfig();
  SimConfig pushed = noFallConfig();
  DisturbanceWindow push;
  push.start = 0.20;
  push.stop = 0.25;
  push.wrench = vector_t::Zero(m.baseDim());
  push.wrench(1) = 15.0;
  pushed.disturbances.push_back(push);

  Simulator a(m, quiet, standSchedule(2));
  Simulator b(m, pushed, standSchedule(2));
  a.reset(s0, 0.0);
  b.reset(s0, 0.0);

  const std::vector<std::string> feet = allFeet(m);
  bool divergedEarly = false;
  for (int k = 0; k < 300; ++k) {
    const vector_t tau = gravityCompensation(m, a.state(), feet);
    a.step(tau);
    b.step(gravityCompensation(m, b.state(), feet));
    if (a.time() <= 0.2 + 1e-12) {
      // Identical code path with a zero-activity window: bitwise equal.
      if (a.state().q != b.state().q || a.state().v != b.state().v) divergedEarly = true;
    }
  }
  REQUIRE_FALSE(divergedEarly);
  REQUIRE((a.state().v - b.state().v).norm() > 1e-6);
}

TEST_CASE("unpowered collapse trips the fall detector and freezes the state") {
  const RobotModel m = RobotModel::loadFromFile(simModelPath("biped_p1_like.json"));
  ReferenceParams rp;
  const State s0 = standingState(m, rp);

  Simulator sim(m, SimConfig{}, standSchedule(2));
  sim.reset(s0, 0.0);
  const vector_t tau = vector_t::Zero(m.numJoints());
  for (int k = 0; k < 2000 && !sim.fallen(); ++k) sim.step(tau);

  REQUIRE(sim.fallen());
  bool sawFall = false;
  for (const auto& e : sim.events()) sawFall = sawFall || e.what == "fall";
  REQUIRE(sawFall);

  // After the fall the state is latched; only the clock advances.
  const vector_t qFrozen = sim.state().q;
  const scalar_t tBefore = sim.time();
  sim.step(tau);
  REQUIRE(sim.state().q == qFrozen);
  REQUIRE(sim.time() == Catch::Approx(tBefore + 1e-3).margin(1e-12));
}

TEST_CASE("two identical runs produce bitwise-identical trajectories") {
  const RobotModel m = RobotModel::loadFromFile(simModelPath("biped_p1_like.json"));
  ReferenceParams rp;
  const State s0 = standingState(m, rp);

  const auto run = [&](int steps) {
    Simulator sim(m, SimConfig{}, standSchedule(2));
    sim.reset(s0, 0.0);
    const std::vector<std::string> feet = allFeet(m);
    for (int k = 0; k < steps; ++k) {
      sim.step(gravityCompensation(m, sim.state(), feet));
    }
    return sim.state();
  };

  const State a = run(400);
  const State b = run(400);
  REQUIRE(a.q == b.q);
  REQUIRE(a.v == b.v);
}
