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

#include <random>

#include "strider/robot_model.hpp"

using namespace strider;

namespace {

std::string modelPath(const std::string& name) {
  return std::string(STRIDER_MODELS_DIR) + "/" + name;
}

vector_t randomState(const RobotModel& m, std::mt19937& rng, scalar_t scale) {
  std::normal_distribution<scalar_t> g(0.0, scale);
  vector_t q = m.neutralConfiguration(0.45);
  for (int i = 0; i < q.size(); ++i) q(i) += g(rng);
  return q;
}

vector_t randomVelocity(const RobotModel& m, std::mt19937& rng, scalar_t scale) {
  std::normal_distribution<scalar_t> g(0.0, scale);
  return vector_t::NullaryExpr(m.nv(), [&](Eigen::Index) { return g(rng); });
}

/// Kinetic energy summed per body from world-frame body kinematics; shares no
/// code with the composite-rigid-body mass matrix.
scalar_t kineticEnergyOracle(const RobotModel& m, const Kinematics& kin) {
  scalar_t ke = 0.0;
  for (size_t i = 0; i < m.bodies().size(); ++i) {
    const RigidBody& rb = m.bodies()[i];
    const BodyKinematics& bk = kin.body[i];
    const vector3_t vCom = bk.vO + bk.w.cross(bk.R * rb.com);
    const matrix3_t Iw = bk.R * rb.inertia * bk.R.transpose();
    ke += 0.5 * rb.mass * vCom.squaredNorm() + 0.5 * bk.w.dot(Iw * bk.w);
  }
  return ke;
}

scalar_t potentialEnergyOracle(const RobotModel& m, const vector_t& q) {
  const Kinematics kin = m.kinematics(q, vector_t::Zero(m.nv()));
  scalar_t pe = 0.0;
  for (size_t i = 0; i < m.bodies().size(); ++i) {
    const RigidBody& rb = m.bodies()[i];
    const vector3_t com = kin.body[i].p + kin.body[i].R * rb.com;
    pe += rb.mass * kGravity * com.z();
  }
  return pe;
}

}  // namespace

TEST_CASE("model loading fixes structure and totals", "[robot_model]") {
  const RobotModel biped = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  REQUIRE(biped.baseDim() == 6);
  REQUIRE(biped.numJoints() == 6);
  REQUIRE(biped.nv() == 12);
  REQUIRE(biped.nq() == 12);
  REQUIRE(biped.contactFrames().size() == 2);
  REQUIRE_THAT(biped.totalMass(), Catch::Matchers::WithinAbs(11.6, 1e-12));
  REQUIRE(biped.torqueLimits().size() == 6);
  REQUIRE(biped.torqueLimits().minCoeff() == 30.0);

  const RobotModel planar = RobotModel::loadFromFile(modelPath("planar_biped.json"));
  REQUIRE(planar.baseDim() == 3);
  REQUIRE(planar.numJoints() == 4);
  REQUIRE(planar.nv() == 7);

  const RobotModel quad = RobotModel::loadFromFile(modelPath("quadruped_a1_like.json"));
  REQUIRE(quad.baseDim() == 6);
  REQUIRE(quad.numJoints() == 12);
  REQUIRE(quad.contactFrames().size() == 4);
  // Contact order fixes the diagonal trot pairs {0,3} and {1,2}.
  REQUIRE(quad.contactFrames()[0].name == "fl_foot");
  REQUIRE(quad.contactFrames()[3].name == "rr_foot");
}

TEST_CASE("joint chains run base to leaf", "[robot_model]") {
  const RobotModel biped = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  const int shank = biped.contactFrames()[0].body;
  const auto chain = biped.jointChain(shank);
  REQUIRE(chain.size() == 3);
  REQUIRE(biped.joints()[chain[0]].name == "left_hip_roll");
  REQUIRE(biped.joints()[chain[1]].name == "left_hip_pitch");
  REQUIRE(biped.joints()[chain[2]].name == "left_knee");
}

TEST_CASE("mass matrix equals the kinetic-energy quadratic form", "[robot_model]") {
  std::mt19937 rng(11);
  for (const char* file : {"biped_p1_like.json", "planar_biped.json", "quadruped_a1_like.json"}) {
    const RobotModel m = RobotModel::loadFromFile(modelPath(file));
    for (int trial = 0; trial < 20; ++trial) {
      const vector_t q = randomState(m, rng, 0.3);
      const vector_t v = randomVelocity(m, rng, 1.0);
      const Kinematics kin = m.kinematics(q, v);
      const matrix_t M = m.massMatrix(kin);
      REQUIRE((M - M.transpose()).norm() < 1e-10 * M.norm());
      Eigen::LLT<matrix_t> llt(M);
      REQUIRE(llt.info() == Eigen::Success);
      const scalar_t keOracle = kineticEnergyOracle(m, kin);
      const scalar_t keM = 0.5 * v.dot(M * v);
      REQUIRE_THAT(keM, Catch::Matchers::WithinRel(keOracle, 1e-10));
    }
  }
}

TEST_CASE("translational mass block is the total mass identity", "[robot_model]") {
  std::mt19937 rng(12);
  const RobotModel m = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  const vector_t q = randomState(m, rng, 0.4);
  const matrix_t M = m.massMatrix(q);
  // Base translational coordinates move the whole robot rigidly.
  REQUIRE((M.topLeftCorner(3, 3) - m.totalMass() * matrix3_t::Identity()).norm() < 1e-10);

  const RobotModel planar = RobotModel::loadFromFile(modelPath("planar_biped.json"));
  const matrix_t Mp = planar.massMatrix(randomState(planar, rng, 0.4));
  REQUIRE((Mp.topLeftCorner(2, 2) - planar.totalMass() * matrix_t::Identity(2, 2)).norm() < 1e-10);
}

TEST_CASE("nonlinear effects match the Lagrangian finite-difference oracle", "[robot_model]") {
  std::mt19937 rng(13);
  const scalar_t h = 1e-6;
  for (const char* file : {"biped_p1_like.json", "planar_biped.json"}) {
    const RobotModel m = RobotModel::loadFromFile(modelPath(file));
    const int nv = m.nv();
    for (int trial = 0; trial < 8; ++trial) {
      const vector_t q = randomState(m, rng, 0.25);
      const vector_t v = randomVelocity(m, rng, 0.8);
      const vector_t b = m.nonlinearEffects(q, v);

      // b = Mdot v - 1/2 d(v^T M v)/dq + dPE/dq, with qdot = v exactly.
      vector_t oracle = vector_t::Zero(nv);
      matrix_t Mdot = matrix_t::Zero(nv, nv);
      for (int k = 0; k < nv; ++k) {
        vector_t qp = q, qm = q;
        qp(k) += h;
        qm(k) -= h;
        Mdot += ((m.massMatrix(qp) - m.massMatrix(qm)) / (2.0 * h)) * v(k);
      }
      oracle += Mdot * v;
      for (int i = 0; i < nv; ++i) {
        vector_t qp = q, qm = q;
        qp(i) += h;
        qm(i) -= h;
        const scalar_t kep = 0.5 * v.dot(m.massMatrix(qp) * v);
        const scalar_t kem = 0.5 * v.dot(m.massMatrix(qm) * v);
        oracle(i) -= (kep - kem) / (2.0 * h);
        oracle(i) += (potentialEnergyOracle(m, qp) - potentialEnergyOracle(m, qm)) / (2.0 * h);
      }
      REQUIRE((b - oracle).norm() < 1e-5 * std::max(scalar_t(1.0), oracle.norm()));
    }
  }
}

TEST_CASE("gravity terms at rest have closed-form rows", "[robot_model]") {
  std::mt19937 rng(14);
  const RobotModel m = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  const vector_t q = randomState(m, rng, 0.3);
  const vector_t b = m.nonlinearEffects(q, vector_t::Zero(m.nv()));
  REQUIRE_THAT(b(0), Catch::Matchers::WithinAbs(0.0, 1e-10));
  REQUIRE_THAT(b(1), Catch::Matchers::WithinAbs(0.0, 1e-10));
  REQUIRE_THAT(b(2), Catch::Matchers::WithinRel(m.totalMass() * kGravity, 1e-10));
}

TEST_CASE("point kinematics agree with finite differences", "[robot_model]") {
  std::mt19937 rng(15);
  const scalar_t h = 1e-6;
  for (const char* file : {"biped_p1_like.json", "planar_biped.json"}) {
    const RobotModel m = RobotModel::loadFromFile(modelPath(file));
    const vector_t q = randomState(m, rng, 0.3);
    const vector_t v = randomVelocity(m, rng, 0.7);
    const Kinematics kin = m.kinematics(q, v);
    for (int f = 0; f < static_cast<int>(m.contactFrames().size()); ++f) {
      const FramePointData pd = m.pointKinematics(kin, f);

      // Jacobian columns: qdot = v, so J = dp/dq.
      matrix_t jFd(3, m.nv());
      for (int i = 0; i < m.nv(); ++i) {
        vector_t qp = q, qm = q;
        qp(i) += h;
        qm(i) -= h;
        const vector3_t pp = m.pointKinematics(m.kinematics(qp, v), f).position;
        const vector3_t pm = m.pointKinematics(m.kinematics(qm, v), f).position;
        jFd.col(i) = (pp - pm) / (2.0 * h);
      }
      REQUIRE((pd.jacobian - jFd).norm() < 1e-6);

      // Velocity: directional derivative of position along v.
      const vector3_t pPlus = m.pointKinematics(m.kinematics(q + h * v, v), f).position;
      const vector3_t pMinus = m.pointKinematics(m.kinematics(q - h * v, v), f).position;
      REQUIRE((pd.velocity - (pPlus - pMinus) / (2.0 * h)).norm() < 1e-6);
      REQUIRE((pd.velocity - pd.jacobian * v).norm() < 1e-10);

      // Drift: Jdot*v from differencing J along the flow.
      const matrix_t jP = m.pointKinematics(m.kinematics(q + h * v, v), f).jacobian;
      const matrix_t jM = m.pointKinematics(m.kinematics(q - h * v, v), f).jacobian;
      const vector3_t jdotVFd = ((jP - jM) / (2.0 * h)) * v;
      REQUIRE((pd.jdotV - jdotVFd).norm() < 1e-5);
    }
  }
}

TEST_CASE("mass perturbation scales the plant, not the schema", "[robot_model]") {
  const RobotModel m = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  ModelPerturbation pert;
  for (const auto& rb : m.bodies()) pert.massScale[rb.name] = 1.05;
  const RobotModel plant = m.perturbed(pert);
  REQUIRE_THAT(plant.totalMass(), Catch::Matchers::WithinRel(1.05 * m.totalMass(), 1e-12));
  REQUIRE_THAT(m.totalMass(), Catch::Matchers::WithinAbs(11.6, 1e-12));  // original untouched

  ModelPerturbation bad;
  bad.massScale["trunk"] = 1.5;
  REQUIRE_THROWS_AS(m.perturbed(bad), ModelError);
  ModelPerturbation unknown;
  unknown.massScale["no_such_body"] = 1.1;
  REQUIRE_THROWS_AS(m.perturbed(unknown), ModelError);
}

TEST_CASE("loader rejects malformed descriptions", "[robot_model]") {
  nlohmann::json base = {
      {"base",
       {{"type", "spatial"},
        {"name", "trunk"},
        {"mass", 1.0},
        {"com", {0.0, 0.0, 0.0}},
        {"inertia", {0.01, 0.01, 0.01}}}},
      {"bodies", nlohmann::json::array()},
      {"joints", nlohmann::json::array()},
      {"contacts", nlohmann::json::array()},
      {"limits", {{"torque", 10.0}}}};

  SECTION("negative inertia") {
    nlohmann::json j = base;
    j["base"]["inertia"] = {0.01, -0.01, 0.01};
    REQUIRE_THROWS_AS(RobotModel::loadFromJson(j), ModelError);
  }
  SECTION("planar base rejects off-plane joints") {
    nlohmann::json j = base;
    j["base"]["type"] = "planar";
    j["bodies"] = {{{"name", "b1"}, {"mass", 0.5}, {"com", {0, 0, 0}}, {"inertia", {1e-3, 1e-3, 1e-3}}}};
    j["joints"] = {{{"name", "j1"},
                    {"type", "revolute"},
                    {"parent", "trunk"},
                    {"child", "b1"},
                    {"origin", {0, 0, 0}},
                    {"axis", {1, 0, 0}}}};
    REQUIRE_THROWS_AS(RobotModel::loadFromJson(j), ModelError);
  }
  SECTION("unknown parent body") {
    nlohmann::json j = base;
    j["bodies"] = {{{"name", "b1"}, {"mass", 0.5}, {"com", {0, 0, 0}}, {"inertia", {1e-3, 1e-3, 1e-3}}}};
    j["joints"] = {{{"name", "j1"},
                    {"type", "revolute"},
                    {"parent", "nowhere"},
                    {"child", "b1"},
                    {"origin", {0, 0, 0}},
                    {"axis", {0, 1, 0}}}};
    REQUIRE_THROWS_AS(RobotModel::loadFromJson(j), ModelError);
  }
  SECTION("neutral outside position limits") {
    nlohmann::json j = base;
    j["bodies"] = {{{"name", "b1"}, {"mass", 0.5}, {"com", {0, 0, 0}}, {"inertia", {1e-3, 1e-3, 1e-3}}}};
    j["joints"] = {{{"name", "j1"},
                    {"type", "revolute"},
                    {"parent", "trunk"},
                    {"child", "b1"},
                    {"origin", {0, 0, 0}},
                    {"axis", {0, 1, 0}},
                    {"position_limits", {-1.0, 1.0}},
                    {"neutral", 2.0}}};
    REQUIRE_THROWS_AS(RobotModel::loadFromJson(j), ModelError);
  }
}

TEST_CASE("neutral configuration stands at the requested height", "[robot_model]") {
  const RobotModel m = RobotModel::loadFromFile(modelPath("biped_p1_like.json"));
  const vector_t q = m.neutralConfiguration(0.40);
  REQUIRE(q(2) == 0.40);
  REQUIRE(q.tail(m.numJoints()).isApprox(m.neutralJoints()));
  // The bent-knee neutral puts both feet essentially on the floor.
  const Kinematics kin = m.kinematics(q, vector_t::Zero(m.nv()));
  for (int f = 0; f < 2; ++f) {
    REQUIRE(std::abs(m.pointKinematics(kin, f).position.z()) < 5e-3);
  }
}
