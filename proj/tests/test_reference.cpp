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

#include <algorithm>
#include <random>

#include "strider/reference.hpp"

using namespace strider;

namespace {

std::string modelPath(const std::string& name) {
  return std::string(STRIDER_MODELS_DIR) + "/" + name;
}

GaitParams bipedWalkParams() {
  GaitParams g;
  g.type = GaitType::kBipedWalk;
  g.startTime = 1.0;
  g.swingDuration = 0.35;
  g.doubleSupport = 0.10;
  return g;
}

}  // namespace

TEST_CASE("biped walk schedule alternates single and double support", "[reference]") {
  const GaitSchedule sched(2, bipedWalkParams());
  REQUIRE_THAT(sched.cycleDuration(), Catch::Matchers::WithinAbs(0.90, 1e-12));

  // Everything stands before the gait starts.
  REQUIRE(sched.inStance(0, 0.0));
  REQUIRE(sched.inStance(1, 0.999));
  REQUIRE(sched.stanceFeet(0.5).size() == 2);

  // Cycle layout from 1.0: DS [1.0,1.1) | foot0 swing [1.1,1.45) |
  // DS [1.45,1.55) | foot1 swing [1.55,1.9).
  REQUIRE(sched.stanceFeet(1.05).size() == 2);
  REQUIRE_FALSE(sched.inStance(0, 1.2));
  REQUIRE(sched.inStance(1, 1.2));
  REQUIRE(sched.stanceFeet(1.5).size() == 2);
  REQUIRE(sched.inStance(0, 1.7));
  REQUIRE_FALSE(sched.inStance(1, 1.7));
  // Periodicity.
  REQUIRE_FALSE(sched.inStance(0, 1.2 + 0.9));
  REQUIRE_FALSE(sched.inStance(1, 1.7 + 1.8));

  const auto [s0, e0] = sched.swingWindowAround(0, 1.2);
  REQUIRE_THAT(s0, Catch::Matchers::WithinAbs(1.10, 1e-12));
  REQUIRE_THAT(e0, Catch::Matchers::WithinAbs(1.45, 1e-12));
  // After its window the lookup rolls to the next cycle.
  const auto [s1, e1] = sched.swingWindowAround(0, 1.5);
  REQUIRE_THAT(s1, Catch::Matchers::WithinAbs(2.00, 1e-12));
  REQUIRE_THAT(e1, Catch::Matchers::WithinAbs(2.35, 1e-12));
}

TEST_CASE("trot schedule swings diagonal pairs together", "[reference]") {
  GaitParams g;
  g.type = GaitType::kQuadTrot;
  g.startTime = 1.0;
  g.trotPhase = 0.30;
  const GaitSchedule sched(4, g);
  REQUIRE_THAT(sched.cycleDuration(), Catch::Matchers::WithinAbs(0.60, 1e-12));
  // First phase: pair {1,2} swings while {0,3} stances.
  REQUIRE(sched.inStance(0, 1.15));
  REQUIRE_FALSE(sched.inStance(1, 1.15));
  REQUIRE_FALSE(sched.inStance(2, 1.15));
  REQUIRE(sched.inStance(3, 1.15));
  // Second phase: roles flip.
  REQUIRE_FALSE(sched.inStance(0, 1.45));
  REQUIRE(sched.inStance(1, 1.45));
  REQUIRE(sched.inStance(2, 1.45));
  REQUIRE_FALSE(sched.inStance(3, 1.45));
  // Never fewer than two feet down.
  for (scalar_t t = 0.0; t < 4.0; t += 0.01) {
    REQUIRE(sched.stanceFeet(t).size() >= 2);
  }
}

TEST_CASE("gait constructors reject mismatched foot counts", "[reference]") {
  REQUIRE_THROWS_AS(GaitSchedule(4, bipedWalkParams()), ConfigError);
  GaitParams trot;
  trot.type = GaitType::kQuadTrot;
  REQUIRE_THROWS_AS(GaitSchedule(2, trot), ConfigError);
  GaitParams stand;
  stand.type = GaitType::kStand;
  const GaitSchedule s(2, stand);
  REQUIRE(s.inStance(0, 100.0));
  REQUIRE_THROWS_AS(s.swingWindowAround(0, 1.0), ConfigError);
}

TEST_CASE("swing spline hits its boundary conditions and apex", "[reference]") {
  const vector3_t from(0.1, 0.05, 0.0);
  const vector3_t to(0.25, 0.02, 0.01);
  const scalar_t t0 = 2.0, t1 = 2.35, apexH = 0.06;
  const SwingTrajectory sw = SwingTrajectory::make(from, to, t0, t1, apexH);

  vector3_t p, v, a;
  sw.eval(t0, p, v, a);
  REQUIRE((p - from).norm() < 1e-12);
  REQUIRE(v.norm() < 1e-12);
  sw.eval(t1, p, v, a);
  REQUIRE((p - to).norm() < 1e-12);
  REQUIRE(v.norm() < 1e-12);

  // Apex at mid-swing: max(z) + apexHeight, with zero vertical rate.
  sw.eval(0.5 * (t0 + t1), p, v, a);
  REQUIRE_THAT(p.z(), Catch::Matchers::WithinAbs(std::max(from.z(), to.z()) + apexH, 1e-12));
  REQUIRE_THAT(v.z(), Catch::Matchers::WithinAbs(0.0, 1e-9));

  // Outside the window the pose clamps and rates vanish.
  sw.eval(t0 - 0.1, p, v, a);
  REQUIRE((p - from).norm() < 1e-12);
  REQUIRE(v.norm() == 0.0);
  REQUIRE(a.norm() == 0.0);

  // z is continuous across the segment handoff.
  vector3_t pl, vl, al, pr, vr, ar;
  const scalar_t mid = 0.5 * (t0 + t1);
  sw.eval(mid - 1e-9, pl, vl, al);
  sw.eval(mid + 1e-9, pr, vr, ar);
  REQUIRE(std::abs(pl.z() - pr.z()) < 1e-7);
  REQUIRE(std::abs(vl.z() - vr.z()) < 1e-6);

  REQUIRE_THROWS_AS(SwingTrajectory::make(from, to, 1.0, 1.0, apexH), ConfigError);
}

TEST_CASE("analytic pendulum propagation matches numerical integration", "[reference]") {
  const scalar_t omega = std::sqrt(kGravity / 0.40);
  LipState s0;
  s0.pos << 0.05, -0.02;
  s0.vel << 0.30, 0.10;
  const Eigen::Vector2d support(0.10, 0.03);

  // RK4 on xddot = omega^2 (x - p), fine steps.
  LipState num = s0;
  const scalar_t T = 0.45, h = 1e-5;
  const int n = static_cast<int>(T / h);
  for (int i = 0; i < n; ++i) {
    const auto acc = [&](const LipState& s) {
      return Eigen::Vector2d(omega * omega * (s.pos - support));
    };
    const Eigen::Vector2d k1v = acc(num), k1p = num.vel;
    LipState s2{num.pos + 0.5 * h * k1p, num.vel + 0.5 * h * k1v};
    const Eigen::Vector2d k2v = acc(s2), k2p = s2.vel;
    LipState s3{num.pos + 0.5 * h * k2p, num.vel + 0.5 * h * k2v};
    const Eigen::Vector2d k3v = acc(s3), k3p = s3.vel;
    LipState s4{num.pos + h * k3p, num.vel + h * k3v};
    const Eigen::Vector2d k4v = acc(s4), k4p = s4.vel;
    num.pos += (h / 6.0) * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
    num.vel += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  }
  const LipState ana = lipPropagate(s0, support, omega, T);
  REQUIRE((ana.pos - num.pos).norm() < 1e-9);
  REQUIRE((ana.vel - num.vel).norm() < 1e-8);
  REQUIRE((lipAcceleration(ana, support, omega) -
           omega * omega * (ana.pos - support)).norm() == 0.0);
}

TEST_CASE("touchdown rule composes hip, travel and velocity correction", "[reference]") {
  const Eigen::Vector2d hip(0.3, 0.1), vel(0.4, 0.0), cmd(0.3, 0.0);
  const Eigen::Vector2d p = raibertFoothold(hip, vel, cmd, 0.45, 0.03);
  REQUIRE_THAT(p.x(), Catch::Matchers::WithinAbs(0.3 + 0.5 * 0.45 * 0.4 + 0.03 * 0.1, 1e-12));
  REQUIRE_THAT(p.y(), Catch::Matchers::WithinAbs(0.1, 1e-12));
}

TEST_CASE("joint IK reproduces forward kinematics", "[reference]") {
  std::mt19937 rng(61);
  std::normal_distribution<scalar_t> g(0.0, 0.15);
  const RobotModel m = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  const int nb = m.baseDim();
  const int nj = m.numJoints();

  for (int trial = 0; trial < 10; ++trial) {
    vector_t q = m.neutralConfiguration(0.40);
    for (int i = nb; i < q.size(); ++i) q(i) += g(rng);
    for (int j = 0; j < nj; ++j) {
      q(nb + j) = std::clamp(q(nb + j), m.joints()[j].positionLower + 0.05,
                             m.joints()[j].positionUpper - 0.05);
    }
    const Kinematics kin = m.kinematics(q, vector_t::Zero(m.nv()));
    std::vector<std::pair<int, vector3_t>> targets;
    for (int f = 0; f < 2; ++f) targets.push_back({f, m.pointKinematics(kin, f).position});

    const vector_t joints = solveJointIk(m, q.head(nb), targets, m.neutralJoints());
    vector_t qSol = q;
    qSol.tail(nj) = joints;
    const Kinematics kinSol = m.kinematics(qSol, vector_t::Zero(m.nv()));
    for (int f = 0; f < 2; ++f) {
      REQUIRE((m.pointKinematics(kinSol, f).position - targets[f].second).norm() < 1e-7);
    }
  }

  // Unreachable target.
  std::vector<std::pair<int, vector3_t>> far = {{0, vector3_t(5.0, 0.0, 0.0)}};
  REQUIRE_THROWS_AS(
      solveJointIk(m, m.neutralConfiguration(0.40).head(nb), far, m.neutralJoints()),
      NumericalError);
}

TEST_CASE("velocity IK realizes requested foot velocities", "[reference]") {
  std::mt19937 rng(62);
  std::normal_distribution<scalar_t> g(0.0, 0.4);
  const RobotModel m = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  const vector_t q = m.neutralConfiguration(0.40);
  const int nb = m.baseDim();

  vector_t v = vector_t::Zero(m.nv());
  for (int i = 0; i < v.size(); ++i) v(i) = g(rng);
  const Kinematics kin = m.kinematics(q, v);
  std::vector<std::pair<int, vector3_t>> velTargets;
  for (int f = 0; f < 2; ++f) velTargets.push_back({f, m.pointKinematics(kin, f).velocity});

  const vector_t joints = solveJointIkVelocity(m, q, v.head(nb), velTargets);
  vector_t vSol = v;
  vSol.tail(m.numJoints()) = joints;
  const Kinematics kinSol = m.kinematics(q, vSol);
  for (int f = 0; f < 2; ++f) {
    REQUIRE((m.pointKinematics(kinSol, f).velocity - velTargets[f].second).norm() < 1e-7);
  }
}

TEST_CASE("command filter settles on the commanded velocity", "[reference]") {
  const RobotModel m = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  ReferenceParams params;
  params.gait = bipedWalkParams();
  CommandSignal cmd;
  cmd.vx = [](scalar_t) { return 0.3; };
  const MotionReference ref(m, params, cmd, m.neutralConfiguration(0.40), 6.0);

  // Zero before the gait starts.
  REQUIRE(ref.commandVelocity(0.5).norm() == 0.0);
  // First-order response toward 0.3: several time constants later the filter
  // is numerically settled.
  REQUIRE(ref.commandVelocity(1.2)(0) > 0.2);
  REQUIRE(ref.commandVelocity(1.2)(0) < 0.3);
  REQUIRE_THAT(ref.commandVelocity(3.5)(0), Catch::Matchers::WithinAbs(0.3, 1e-6));
  // Only the commanded channels are populated.
  const vector_t vc = ref.commandVelocity(3.5);
  REQUIRE(std::abs(vc(1)) < 1e-9);
  REQUIRE(std::abs(vc(5)) < 1e-9);
}

TEST_CASE("rate limit caps the filtered acceleration", "[reference]") {
  const RobotModel m = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  ReferenceParams params;
  params.gait = bipedWalkParams();
  CommandSignal cmd;
  cmd.vx = [](scalar_t) { return 100.0; };  // absurd step command
  const MotionReference ref(m, params, cmd, m.neutralConfiguration(0.40), 3.0);
  // With the limit at 1.5 m/s^2 the filtered velocity can only ramp linearly.
  const scalar_t v1 = ref.commandVelocity(1.5)(0);
  REQUIRE(v1 <= 1.5 * 0.5 + 1e-6);
  REQUIRE(v1 >= 1.5 * 0.5 - 0.01);
}

TEST_CASE("base reference rides the pendulum path at constant height", "[reference]") {
  const RobotModel m = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  ReferenceParams params;
  params.gait = bipedWalkParams();
  CommandSignal cmd;
  cmd.vx = [](scalar_t) { return 0.3; };
  const MotionReference ref(m, params, cmd, m.neutralConfiguration(0.40), 5.0);

  for (scalar_t t : {0.5, 1.3, 2.2, 3.7, 4.4}) {
    const BaseReference br = ref.base(t);
    REQUIRE(br.y.size() == 6);
    REQUIRE_THAT(br.y(2), Catch::Matchers::WithinAbs(0.40, 1e-12));
    REQUIRE(br.yd(2) == 0.0);
    REQUIRE(br.y(3) == 0.0);  // flat roll/pitch reference
    REQUIRE(br.y(4) == 0.0);
  }

  // Position/velocity consistency along the path (mid single-support, away
  // from window edges).
  const scalar_t t = 1.30, h = 1e-4;
  const vector_t yP = ref.base(t + h).y;
  const vector_t yM = ref.base(t - h).y;
  const vector_t yd = ref.base(t).yd;
  REQUIRE(std::abs((yP(0) - yM(0)) / (2.0 * h) - yd(0)) < 1e-3);

  // The walk actually progresses forward.
  REQUIRE(ref.base(5.0).y(0) > ref.base(1.0).y(0) + 0.5);
}

TEST_CASE("foot references are continuous at liftoff and touchdown", "[reference]") {
  const RobotModel m = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  ReferenceParams params;
  params.gait = bipedWalkParams();
  CommandSignal cmd;
  cmd.vx = [](scalar_t) { return 0.3; };
  const MotionReference ref(m, params, cmd, m.neutralConfiguration(0.40), 5.0);

  // Foot 0 swings over [2.0, 2.35] in the second cycle.
  const auto [s, e] = ref.schedule().swingWindowAround(0, 1.95);
  REQUIRE_THAT(s, Catch::Matchers::WithinAbs(2.00, 1e-12));
  const FootReference beforeLift = ref.foot(0, s - 1e-6);
  const FootReference afterLift = ref.foot(0, s + 1e-6);
  REQUIRE(beforeLift.stance);
  REQUIRE_FALSE(afterLift.stance);
  REQUIRE((beforeLift.position - afterLift.position).norm() < 1e-4);

  const FootReference beforeLand = ref.foot(0, e - 1e-6);
  const FootReference afterLand = ref.foot(0, e + 1e-6);
  REQUIRE_FALSE(beforeLand.stance);
  REQUIRE(afterLand.stance);
  REQUIRE((beforeLand.position - afterLand.position).norm() < 1e-4);
  // Swing lands on the planned target, on the floor.
  REQUIRE((beforeLand.position - beforeLand.swingTarget).norm() < 1e-4);
  REQUIRE(std::abs(afterLand.position.z()) < 1e-9);

  // Forward walking pushes the step ahead of the last anchor.
  REQUIRE(afterLand.position.x() > beforeLift.position.x() + 0.02);

  // Mid-swing the foot is airborne.
  const FootReference mid = ref.foot(0, 0.5 * (s + e));
  REQUIRE(mid.position.z() > 0.02);
}

TEST_CASE("reference state queries are pure functions of time", "[reference]") {
  const RobotModel m = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  ReferenceParams params;
  params.gait = bipedWalkParams();
  CommandSignal cmd;
  cmd.vx = [](scalar_t) { return 0.3; };
  const vector_t q0 = m.neutralConfiguration(0.40);

  const MotionReference refA(m, params, cmd, q0, 4.0);
  const MotionReference refB(m, params, cmd, q0, 4.0);

  std::vector<scalar_t> times;
  for (int i = 0; i <= 40; ++i) times.push_back(0.1 * i);
  std::vector<scalar_t> shuffled = times;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937(63));

  std::map<long, State> fromShuffled;
  for (scalar_t t : shuffled) fromShuffled.emplace(std::lround(t * 1e6), refA.referenceState(t));
  for (scalar_t t : times) {
    const State s = refB.referenceState(t);
    const State& o = fromShuffled.at(std::lround(t * 1e6));
    REQUIRE((s.q - o.q).norm() == 0.0);
    REQUIRE((s.v - o.v).norm() == 0.0);
  }
}

TEST_CASE("reference state pins feet where the plan says", "[reference]") {
  const RobotModel m = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  ReferenceParams params;
  params.gait = bipedWalkParams();
  CommandSignal cmd;
  cmd.vx = [](scalar_t) { return 0.3; };
  const MotionReference ref(m, params, cmd, m.neutralConfiguration(0.40), 4.0);

  for (scalar_t t : {0.5, 1.25, 1.5, 2.1, 3.3}) {
    const State st = ref.referenceState(t);
    const Kinematics kin = m.kinematics(st.q, st.v);
    for (int f = 0; f < 2; ++f) {
      const FootReference fr = ref.foot(f, t);
      REQUIRE((m.pointKinematics(kin, f).position - fr.position).norm() < 1e-6);
    }
  }

  // Active contacts mirror the schedule.
  REQUIRE(ref.activeContacts(0.5).count() == 2);
  REQUIRE(ref.activeContacts(1.2).count() == 1);
  REQUIRE(ref.activeContacts(1.2).names[0] == "right_foot");
}
