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

#include "strider/experiments.hpp"
#include "strider/reduction.hpp"
#include "strider/wbc.hpp"

using namespace strider;

namespace {

std::string modelPath(const std::string& name) {
  return std::string(STRIDER_MODELS_DIR) + "/" + name;
}

struct Stance {
  RobotModel model;
  vector_t q;
  vector_t v;
  Kinematics kin;
  matrix_t M;
  vector_t b;
};

// Balanced standing fixture: the CoM sits over the feet, so a zero base
// acceleration is statically achievable (point feet at a common x have no
// pitch authority otherwise).
Stance makeStance() {
  Stance s{RobotModel::loadFromFile(modelPath("biped_p1_like.json")), {}, {}, {}, {}, {}};
  const State st = standingState(s.model, ReferenceParams{});
  s.q = st.q;
  s.v = st.v;
  s.kin = s.model.kinematics(s.q, s.v);
  s.M = s.model.massMatrix(s.kin);
  s.b = s.model.nonlinearEffects(s.kin);
  return s;
}

}  // namespace

TEST_CASE("hand-tuned base feedback law", "[wbc]") {
  BaseReference ref;
  ref.y = vector_t::Zero(6);
  ref.yd = vector_t::Zero(6);
  ref.ydd = vector_t::Zero(6);
  ref.y(0) = 1.0;
  ref.ydd(2) = 0.5;

  vector_t y = vector_t::Zero(6);
  vector_t yd = vector_t::Zero(6);
  y(5) = 2.0 * M_PI - 0.2;  // wrapped yaw error of -0.2
  yd(1) = 0.3;

  const vector_t a = pdBaseAcceleration(y, yd, ref, 20.0, 1.0, {3, 4, 5});
  REQUIRE_THAT(a(0), Catch::Matchers::WithinAbs(20.0, 1e-12));          // -kp*(0-1)
  REQUIRE_THAT(a(1), Catch::Matchers::WithinAbs(-0.3, 1e-12));          // -kd*0.3
  REQUIRE_THAT(a(2), Catch::Matchers::WithinAbs(0.5, 1e-12));           // feedforward
  REQUIRE_THAT(a(5), Catch::Matchers::WithinAbs(20.0 * 0.2, 1e-9));     // wrapped
}

TEST_CASE("double-support stance realizes a feasible base task exactly", "[wbc]") {
  const Stance s = makeStance();
  const ContactSet ds = makeContactSet(s.model, {"left_foot", "right_foot"});
  const ContactKinematics ck = stackContactKinematics(s.model, s.kin, ds);
  const FrictionPyramid pyr = frictionPyramid(s.model, ds);
  const int nb = s.model.baseDim();

  // Static force distribution for the force task, from the base rows.
  const vector_t lambdaStatic =
      ck.jacobian.leftCols(nb).transpose().colPivHouseholderQr().solve(s.b.head(nb));

  WbcWeights w;
  w.regAccel = 1e-6;
  w.regTorque = 1e-10;
  QpSolver solver;
  const WbcProblem prob = buildWbcProblem(s.model, s.kin, s.M, s.b, ck, pyr,
                                          vector_t::Zero(nb), {}, lambdaStatic, w);
  const WbcSolution sol = solveWbc(prob, solver);

  REQUIRE(sol.status == WbcStatus::kOk);
  REQUIRE(sol.baseResidual < 1e-8);
  REQUIRE(sol.eqResidual < 1e-8);
  // The stance forces carry the weight.
  REQUIRE_THAT(sol.lambda(2) + sol.lambda(5),
               Catch::Matchers::WithinRel(s.model.totalMass() * kGravity, 1e-6));
  // Torques stay inside their limits.
  REQUIRE((sol.tau.cwiseAbs().array() <= s.model.torqueLimits().array() + 1e-9).all());
}

TEST_CASE("single support cannot realize an out-of-span base demand", "[wbc]") {
  const Stance s = makeStance();
  const ContactSet ss = makeContactSet(s.model, {"left_foot"});
  const ContactKinematics ck = stackContactKinematics(s.model, s.kin, ss);
  const FrictionPyramid pyr = frictionPyramid(s.model, ss);
  const int nb = s.model.baseDim();

  vector_t aBad = vector_t::Zero(nb);
  aBad(3) = 5.0;
  aBad(4) = 5.0;
  aBad(5) = 5.0;

  WbcWeights w;
  w.regAccel = 1e-6;
  w.regTorque = 1e-10;
  QpSolver solver;
  const WbcProblem prob = buildWbcProblem(s.model, s.kin, s.M, s.b, ck, pyr, aBad, {},
                                          vector_t::Zero(3), w);
  const WbcSolution sol = solveWbc(prob, solver);

  REQUIRE(sol.status != WbcStatus::kEmergency);
  // Hard constraints hold to tight tolerance while the task is left short.
  REQUIRE(sol.eqResidual < 1e-8);
  REQUIRE((pyr.n - pyr.C * sol.lambda).minCoeff() > -1e-8);
  REQUIRE((sol.tau.cwiseAbs().array() <= s.model.torqueLimits().array() + 1e-8).all());
  REQUIRE(sol.baseResidual > 1e-2);
}

TEST_CASE("swing task drives the free foot while stance stays pinned", "[wbc]") {
  const Stance s = makeStance();
  const ContactSet stance = makeContactSet(s.model, {"right_foot"});
  const ContactKinematics ck = stackContactKinematics(s.model, s.kin, stance);
  const FrictionPyramid pyr = frictionPyramid(s.model, stance);
  const int nb = s.model.baseDim();

  SwingTarget sw;
  sw.frame = 0;  // left foot
  sw.accel = vector3_t(1.0, 0.0, 2.0);

  // Base demand that single support can actually deliver: the acceleration
  // produced by a plain vertical-weight contact force.  An unreachable base
  // demand would steal the solution budget from the swing task.
  const FloatingBaseBlocks fb = extractFloatingBase(s.model, s.M, s.b, ck);
  const ReducedModel rm = reduceModel(fb);
  vector_t lambda0 = vector_t::Zero(3);
  lambda0(2) = s.model.totalMass() * kGravity;
  const vector_t aBase = rm.Blambda * lambda0 - rm.c;
  REQUIRE(aBase.size() == nb);

  WbcWeights w;
  QpSolver solver;
  const WbcProblem prob =
      buildWbcProblem(s.model, s.kin, s.M, s.b, ck, pyr, aBase, {sw}, lambda0, w);
  const WbcSolution sol = solveWbc(prob, solver);
  REQUIRE(sol.status == WbcStatus::kOk);

  // The swing foot's achieved acceleration approaches the request.
  const FramePointData fd = s.model.pointKinematics(s.kin, 0);
  const vector3_t aFoot = fd.jacobian * sol.vdot + fd.jdotV;
  REQUIRE((aFoot - sw.accel).norm() < 0.05);
  REQUIRE(sol.swingResidual == Catch::Approx((aFoot - sw.accel).norm()).margin(1e-12));

  // The stance foot does not accelerate.
  const FramePointData fs = s.model.pointKinematics(s.kin, 1);
  REQUIRE((fs.jacobian * sol.vdot + fs.jdotV).norm() < 1e-8);
}

TEST_CASE("force weight pulls stance forces toward the reference split", "[wbc]") {
  const Stance s = makeStance();
  const ContactSet ds = makeContactSet(s.model, {"left_foot", "right_foot"});
  const ContactKinematics ck = stackContactKinematics(s.model, s.kin, ds);
  const FrictionPyramid pyr = frictionPyramid(s.model, ds);
  const int nb = s.model.baseDim();
  const scalar_t weight = s.model.totalMass() * kGravity;

  // Ask for a lopsided split: 80/20.
  vector_t lambdaRef = vector_t::Zero(6);
  lambdaRef(2) = 0.8 * weight;
  lambdaRef(5) = 0.2 * weight;

  WbcWeights w;
  QpSolver solver;
  const WbcProblem prob = buildWbcProblem(s.model, s.kin, s.M, s.b, ck, pyr,
                                          vector_t::Zero(nb), {}, lambdaRef, w);
  const WbcSolution sol = solveWbc(prob, solver);
  REQUIRE(sol.status == WbcStatus::kOk);
  // The solution leans the same way the reference does.
  REQUIRE(sol.lambda(2) > sol.lambda(5) + 0.3 * weight);
}

TEST_CASE("unmeetable torque limits surface as emergency", "[wbc]") {
  Stance s = makeStance();
  // Degenerate problem: no contacts at all, so supporting the base against
  // gravity is impossible and the dynamics equality plus a zero-acceleration
  // demand cannot be combined with tiny torque bounds.  Force infeasibility
  // through contradictory inequality rows instead: lambda_z <= -1 (pyramid
  // says lambda_z >= 0).
  const ContactSet ds = makeContactSet(s.model, {"left_foot", "right_foot"});
  const ContactKinematics ck = stackContactKinematics(s.model, s.kin, ds);
  FrictionPyramid pyr = frictionPyramid(s.model, ds);
  const int nb = s.model.baseDim();

  WbcWeights w;
  QpSolver solver;
  WbcProblem prob = buildWbcProblem(s.model, s.kin, s.M, s.b, ck, pyr,
                                    vector_t::Zero(nb), {}, vector_t::Zero(6), w);
  // Append the contradictory row.
  const int n = prob.qp.n();
  matrix_t extra = matrix_t::Zero(1, n);
  extra(0, n - 4) = 1.0;  // left foot z force column
  matrix_t Ain(prob.qp.Ain.rows() + 1, n);
  Ain << prob.qp.Ain, extra;
  vector_t bin(prob.qp.bin.size() + 1);
  bin << prob.qp.bin, -1.0;
  prob.qp.Ain = Ain;
  prob.qp.bin = bin;

  const WbcSolution sol = solveWbc(prob, solver);
  REQUIRE(sol.status == WbcStatus::kEmergency);
  REQUIRE(sol.qpStatus == QpStatus::kInfeasible);
  REQUIRE(sol.tau.isZero(0.0));
}
