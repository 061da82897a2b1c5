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
#include <map>
#include <optional>
#include <set>
#include <vector>

#include <json.hpp>

#include "strider/types.hpp"

namespace strider {

// ---------------------------------------------------------------------------
// Euler ZYX utilities.  Angles are stored as (roll, pitch, yaw) and compose as
// R = Rz(yaw) * Ry(pitch) * Rx(roll).  Generalized base velocities are the
// Euler-angle rates themselves, so dq/dt == v holds for every coordinate.
// ---------------------------------------------------------------------------

inline matrix3_t rotX(scalar_t a) {
  matrix3_t r;
  r << 1, 0, 0, 0, std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a);
  return r;
}

inline matrix3_t rotY(scalar_t a) {
  matrix3_t r;
  r << std::cos(a), 0, std::sin(a), 0, 1, 0, -std::sin(a), 0, std::cos(a);
  return r;
}

inline matrix3_t rotZ(scalar_t a) {
  matrix3_t r;
  r << std::cos(a), -std::sin(a), 0, std::sin(a), std::cos(a), 0, 0, 0, 1;
  return r;
}

inline matrix3_t eulerZyxToRotation(const vector3_t& rpy) {
  return rotZ(rpy.z()) * rotY(rpy.y()) * rotX(rpy.x());
}

/// Maps Euler-angle rates (roll_dot, pitch_dot, yaw_dot) to the world-frame
/// angular velocity: w = E(rpy) * rpy_dot.
inline matrix3_t eulerRatesToWorldAngular(const vector3_t& rpy) {
  const scalar_t ct = std::cos(rpy.y()), st = std::sin(rpy.y());
  const scalar_t cp = std::cos(rpy.z()), sp = std::sin(rpy.z());
  matrix3_t e;
  e << ct * cp, -sp, 0.0, ct * sp, cp, 0.0, -st, 0.0, 1.0;
  return e;
}

/// Time derivative of eulerRatesToWorldAngular along rpy_dot.
inline matrix3_t eulerRatesToWorldAngularDot(const vector3_t& rpy, const vector3_t& rpyDot) {
  const scalar_t ct = std::cos(rpy.y()), st = std::sin(rpy.y());
  const scalar_t cp = std::cos(rpy.z()), sp = std::sin(rpy.z());
  const scalar_t td = rpyDot.y(), pd = rpyDot.z();
  matrix3_t e;
  e << -st * td * cp - ct * sp * pd, -cp * pd, 0.0,  //
      -st * td * sp + ct * cp * pd, -sp * pd, 0.0,   //
      -ct * td, 0.0, 0.0;
  return e;
}

// ---------------------------------------------------------------------------
// Model description
// ---------------------------------------------------------------------------

enum class BaseType { kSpatial, kPlanar };
enum class JointType { kRevolute, kPrismatic };

struct RigidBody {
  std::string name;
  scalar_t mass = 0.0;
  vector3_t com = vector3_t::Zero();     ///< CoM offset in the body frame.
  matrix3_t inertia = matrix3_t::Zero(); ///< Rotational inertia about the CoM, body frame.
  int parentJoint = -1;                  ///< -1 for the base.
};

struct Joint {
  std::string name;
  JointType type = JointType::kRevolute;
  int parentBody = 0;
  int childBody = -1;
  vector3_t origin = vector3_t::Zero();  ///< Anchor point in the parent body frame.
  vector3_t axis = vector3_t::UnitZ();   ///< Unit axis in the local joint frame.
  scalar_t positionLower = -1e9;
  scalar_t positionUpper = 1e9;
  scalar_t velocityLimit = 1e9;
  scalar_t neutral = 0.0;  ///< Nominal posture angle, used as IK seed.
};

struct ContactFrame {
  std::string name;
  int body = 0;
  vector3_t point = vector3_t::Zero();   ///< Point in the body frame.
  scalar_t mu = 0.6;
};

/// Multiplicative mass scaling and additive CoM shifts used to build the
/// "real" plant model that differs from the controller's nominal model.
struct ModelPerturbation {
  std::map<std::string, scalar_t> massScale;   ///< body name -> factor in [0.8, 1.2]
  std::map<std::string, vector3_t> comOffset;  ///< body name -> offset [m]
};

struct BodyKinematics {
  matrix3_t R;          ///< body orientation in world
  vector3_t p;          ///< body-frame origin in world
  vector3_t w;          ///< angular velocity, world frame
  vector3_t vO;         ///< linear velocity of the body-frame origin, world frame
  vector3_t alphaBias;  ///< angular acceleration when generalized accel is zero
  vector3_t aOBias;     ///< origin acceleration when generalized accel is zero (no gravity)
};

struct Kinematics {
  std::vector<BodyKinematics> body;
  matrix_t gamma;  ///< (6 + n_j) x n_v map from generalized to world base/joint rates
};

struct FramePointData {
  vector3_t position;
  vector3_t velocity;
  matrix_t jacobian;   ///< 3 x n_v
  vector3_t jdotV;     ///< drift acceleration J_dot * v
};

// ---------------------------------------------------------------------------
// RobotModel
// ---------------------------------------------------------------------------

/// Floating-base rigid-body tree with either a 6-DoF (position + Euler ZYX)
/// or a 3-DoF planar (x, z, pitch) base.  All algorithms work in world-frame
/// quantities referenced at body origins; the Euler-rate parameterization is
/// applied through a single velocity map, so the planar and spatial variants
/// share every code path.
class RobotModel {
 public:
  static RobotModel loadFromFile(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ModelError("cannot open model file: " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw ModelError("model file is not valid JSON: " + std::string(e.what()));
    }
    return loadFromJson(j);
  }

  static RobotModel loadFromJson(const nlohmann::json& j);

  // -- structure ----------------------------------------------------------
  const std::string& name() const { return name_; }
  BaseType baseType() const { return baseType_; }
  int baseDim() const { return baseType_ == BaseType::kSpatial ? 6 : 3; }
  int numJoints() const { return static_cast<int>(joints_.size()); }
  int nv() const { return baseDim() + numJoints(); }
  int nq() const { return nv(); }
  int numBodies() const { return static_cast<int>(bodies_.size()); }
  const std::vector<RigidBody>& bodies() const { return bodies_; }
  const std::vector<Joint>& joints() const { return joints_; }
  const std::vector<ContactFrame>& contactFrames() const { return contactFrames_; }
  const vector_t& torqueLimits() const { return torqueLimits_; }
  scalar_t totalMass() const {
    scalar_t m = 0.0;
    for (const auto& b : bodies_) m += b.mass;
    return m;
  }

  int contactFrameIndex(const std::string& frameName) const {
    for (int i = 0; i < static_cast<int>(contactFrames_.size()); ++i) {
      if (contactFrames_[i].name == frameName) return i;
    }
    throw ModelError("unknown contact frame: " + frameName);
  }

  int jointIndex(const std::string& jointName) const {
    for (int i = 0; i < numJoints(); ++i) {
      if (joints_[i].name == jointName) return i;
    }
    throw ModelError("unknown joint: " + jointName);
  }

  /// Joints on the path from the base to the given body, in tree order.
  std::vector<int> jointChain(int body) const {
    std::vector<int> chain;
    int b = body;
    while (b != 0) {
      const int j = bodies_[b].parentJoint;
      chain.push_back(j);
      b = joints_[j].parentBody;
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
  }

  /// True when the pitch angle is within `margin` of the Euler-rate map
  /// singularity at +-pi/2 (spatial base only).
  bool nearEulerSingularity(const vector_t& q, scalar_t margin = 0.05) const {
    if (baseType_ != BaseType::kSpatial) return false;
    return std::abs(q(4)) > M_PI / 2.0 - margin;
  }

  // -- kinematics and dynamics -------------------------------------------

  Kinematics kinematics(const vector_t& q, const vector_t& v) const;

  /// Joint-space mass matrix (symmetric positive definite, n_v x n_v).
  matrix_t massMatrix(const Kinematics& kin) const;
  matrix_t massMatrix(const vector_t& q) const {
    return massMatrix(kinematics(q, vector_t::Zero(nv())));
  }

  /// Coriolis, centrifugal and gravity forces: M * vdot + b = S^T tau + J_c^T f.
  vector_t nonlinearEffects(const Kinematics& kin) const;
  vector_t nonlinearEffects(const vector_t& q, const vector_t& v) const {
    return nonlinearEffects(kinematics(q, v));
  }

  /// Position, velocity, Jacobian and drift acceleration of a contact frame.
  FramePointData pointKinematics(const Kinematics& kin, int contactFrame) const;
  FramePointData pointKinematics(const Kinematics& kin, const std::string& frameName) const {
    return pointKinematics(kin, contactFrameIndex(frameName));
  }

  /// Pose-task Jacobian of the floating base.  The base coordinates are the
  /// task coordinates, so J = [I 0] and the drift term vanishes.
  matrix_t baseTaskJacobian() const {
    matrix_t J = matrix_t::Zero(baseDim(), nv());
    J.leftCols(baseDim()).setIdentity();
    return J;
  }

  /// Actuation selector S with S^T tau entering the joint rows only.
  matrix_t selectionMatrix() const {
    matrix_t S = matrix_t::Zero(numJoints(), nv());
    S.rightCols(numJoints()).setIdentity();
    return S;
  }

  /// Copy of this model with per-body mass scaling / CoM shifts applied.
  RobotModel perturbed(const ModelPerturbation& pert) const;

  /// Nominal-posture joint angles (the models' bent-knee stance).
  vector_t neutralJoints() const {
    vector_t qj(numJoints());
    for (int j = 0; j < numJoints(); ++j) qj(j) = joints_[j].neutral;
    return qj;
  }

  /// Neutral configuration: base level at the given height, joints at their
  /// nominal posture.
  vector_t neutralConfiguration(scalar_t baseHeight) const {
    vector_t q = vector_t::Zero(nv());
    q(baseType_ == BaseType::kSpatial ? 2 : 1) = baseHeight;
    q.tail(numJoints()) = neutralJoints();
    return q;
  }

  // Base coordinate helpers --------------------------------------------------
  vector3_t basePosition(const vector_t& q) const {
    if (baseType_ == BaseType::kSpatial) return q.head<3>();
    return vector3_t(q(0), 0.0, q(1));
  }
  vector3_t baseRpy(const vector_t& q) const {
    if (baseType_ == BaseType::kSpatial) return q.segment<3>(3);
    return vector3_t(0.0, q(2), 0.0);
  }

 private:
  /// World base-velocity map: [p_dot; w] = baseMap * v_base.
  Eigen::Matrix<scalar_t, 6, Eigen::Dynamic> baseMap(const vector_t& q) const {
    Eigen::Matrix<scalar_t, 6, Eigen::Dynamic> B(6, baseDim());
    B.setZero();
    if (baseType_ == BaseType::kSpatial) {
      B.topLeftCorner<3, 3>().setIdentity();
      B.bottomRightCorner<3, 3>() = eulerRatesToWorldAngular(q.segment<3>(3));
    } else {
      B(0, 0) = 1.0;  // x
      B(2, 1) = 1.0;  // z
      B(4, 2) = 1.0;  // pitch rate about world y
    }
    return B;
  }

  /// 6x6 spatial inertia about the body origin, world axes, [ang; lin] rows.
  matrix6_t spatialInertiaAtOrigin(int body, const matrix3_t& R) const {
    const RigidBody& rb = bodies_[body];
    const vector3_t c = R * rb.com;
    const matrix3_t Icw = R * rb.inertia * R.transpose();
    const matrix3_t cx = skew(c);
    matrix6_t I;
    I.topLeftCorner<3, 3>() = Icw - rb.mass * cx * cx;
    I.topRightCorner<3, 3>() = rb.mass * cx;
    I.bottomLeftCorner<3, 3>() = -rb.mass * cx;
    I.bottomRightCorner<3, 3>() = rb.mass * matrix3_t::Identity();
    return I;
  }

  /// Shift a spatial inertia referenced at point A to point B, r = p_A - p_B.
  static matrix6_t shiftInertia(const matrix6_t& I, const vector3_t& r) {
    const matrix3_t rx = skew(r);
    const matrix3_t J = I.topLeftCorner<3, 3>();
    const matrix3_t H = I.topRightCorner<3, 3>();
    const scalar_t m = I(5, 5);
    matrix6_t out;
    const matrix3_t rxHt = rx * H.transpose();
    out.topLeftCorner<3, 3>() = J + rxHt + rxHt.transpose() - m * rx * rx;
    out.topRightCorner<3, 3>() = H + m * rx;
    out.bottomLeftCorner<3, 3>() = (H + m * rx).transpose();
    out.bottomRightCorner<3, 3>() = m * matrix3_t::Identity();
    return out;
  }

  /// Motion subspace of joint j referenced at its child-body origin.
  vector6_t jointSubspace(int j, const matrix3_t& parentR) const {
    const vector3_t aw = parentR * joints_[j].axis;
    vector6_t s = vector6_t::Zero();
    if (joints_[j].type == JointType::kRevolute) {
      s.head<3>() = aw;
    } else {
      s.tail<3>() = aw;
    }
    return s;
  }

  std::string name_;
  BaseType baseType_ = BaseType::kSpatial;
  std::vector<RigidBody> bodies_;  ///< bodies_[0] is the base; child of joint j is body j+1
  std::vector<Joint> joints_;      ///< topologically ordered
  std::vector<ContactFrame> contactFrames_;
  vector_t torqueLimits_;
};

// ---------------------------------------------------------------------------
// Implementation
// ---------------------------------------------------------------------------

inline Kinematics RobotModel::kinematics(const vector_t& q, const vector_t& v) const {
  if (q.size() != nv() || v.size() != nv()) {
    throw ModelError("kinematics: state dimension mismatch");
  }
  Kinematics kin;
  kin.body.resize(numBodies());
  const int nb = baseDim();
  const int nj = numJoints();

  kin.gamma = matrix_t::Zero(6 + nj, nv());
  kin.gamma.topLeftCorner(6, nb) = baseMap(q);
  kin.gamma.bottomRightCorner(nj, nj).setIdentity();

  BodyKinematics& base = kin.body[0];
  if (baseType_ == BaseType::kSpatial) {
    base.p = q.head<3>();
    base.R = eulerZyxToRotation(q.segment<3>(3));
    base.w = eulerRatesToWorldAngular(q.segment<3>(3)) * v.segment<3>(3);
    base.vO = v.head<3>();
    base.alphaBias = eulerRatesToWorldAngularDot(q.segment<3>(3), v.segment<3>(3)) * v.segment<3>(3);
  } else {
    base.p = vector3_t(q(0), 0.0, q(1));
    base.R = rotY(q(2));
    base.w = vector3_t(0.0, v(2), 0.0);
    base.vO = vector3_t(v(0), 0.0, v(1));
    base.alphaBias.setZero();
  }
  base.aOBias.setZero();

  for (int j = 0; j < nj; ++j) {
    const Joint& jt = joints_[j];
    const BodyKinematics& par = kin.body[jt.parentBody];
    BodyKinematics& child = kin.body[jt.childBody];
    const scalar_t qj = q(nb + j);
    const scalar_t vj = v(nb + j);
    const vector3_t aw = par.R * jt.axis;

    if (jt.type == JointType::kRevolute) {
      const vector3_t r = par.R * jt.origin;
      child.p = par.p + r;
      child.R = par.R * Eigen::AngleAxisd(qj, jt.axis).toRotationMatrix();
      child.w = par.w + aw * vj;
      child.vO = par.vO + par.w.cross(r);
      child.alphaBias = par.alphaBias + par.w.cross(aw) * vj;
      child.aOBias = par.aOBias + par.alphaBias.cross(r) + par.w.cross(par.w.cross(r));
    } else {
      const vector3_t r = par.R * (jt.origin + jt.axis * qj);
      child.p = par.p + r;
      child.R = par.R;
      child.w = par.w;
      child.vO = par.vO + par.w.cross(r) + aw * vj;
      child.alphaBias = par.alphaBias;
      child.aOBias = par.aOBias + par.alphaBias.cross(r) + par.w.cross(par.w.cross(r)) +
                     2.0 * par.w.cross(aw * vj);
    }
  }
  return kin;
}

inline matrix_t RobotModel::massMatrix(const Kinematics& kin) const {
  const int nj = numJoints();
  const int nu = 6 + nj;

  // Composite rigid-body inertias about each body origin, world axes.
  std::vector<matrix6_t> Ic(numBodies());
  for (int i = 0; i < numBodies(); ++i) {
    Ic[i] = spatialInertiaAtOrigin(i, kin.body[i].R);
  }
  for (int j = nj - 1; j >= 0; --j) {
    const int c = joints_[j].childBody;
    const int p = joints_[j].parentBody;
    Ic[p] += shiftInertia(Ic[c], kin.body[c].p - kin.body[p].p);
  }

  matrix_t Mu = matrix_t::Zero(nu, nu);

  // Base block.  Twist at the base origin is [w; vO] while base velocity
  // coordinates are (p_dot, w), so the subspace swaps the two halves.
  matrix6_t Sb = matrix6_t::Zero();
  Sb.topRightCorner<3, 3>().setIdentity();
  Sb.bottomLeftCorner<3, 3>().setIdentity();
  Mu.topLeftCorner<6, 6>() = Sb.transpose() * Ic[0] * Sb;

  for (int j = 0; j < nj; ++j) {
    const int cj = joints_[j].childBody;
    const vector6_t Sj = jointSubspace(j, kin.body[joints_[j].parentBody].R);
    vector6_t F = Ic[cj] * Sj;  // [moment; force] at the child origin
    Mu(6 + j, 6 + j) = Sj.dot(F);

    int b = cj;
    while (b != 0) {
      const int jj = bodies_[b].parentJoint;
      const int pb = joints_[jj].parentBody;
      const vector3_t r = kin.body[b].p - kin.body[pb].p;
      F.head<3>() += r.cross(F.tail<3>());
      b = pb;
      if (b != 0) {
        const int jp = bodies_[b].parentJoint;
        const vector6_t Sp = jointSubspace(jp, kin.body[joints_[jp].parentBody].R);
        Mu(6 + jp, 6 + j) = Sp.dot(F);
        Mu(6 + j, 6 + jp) = Mu(6 + jp, 6 + j);
      }
    }
    // Base rows: generalized force on (p_dot, w) coordinates is [f; n].
    Mu.block<3, 1>(0, 6 + j) = F.tail<3>();
    Mu.block<3, 1>(3, 6 + j) = F.head<3>();
    Mu.block<1, 3>(6 + j, 0) = F.tail<3>().transpose();
    Mu.block<1, 3>(6 + j, 3) = F.head<3>().transpose();
  }

  matrix_t M = kin.gamma.transpose() * Mu * kin.gamma;
  return 0.5 * (M + M.transpose());
}

inline vector_t RobotModel::nonlinearEffects(const Kinematics& kin) const {
  const int nj = numJoints();
  const vector3_t gUp(0.0, 0.0, kGravity);  // fictitious upward base acceleration

  // Per-body Newton-Euler wrenches at body origins, then accumulate up the tree.
  std::vector<vector6_t> wrench(numBodies());
  for (int i = 0; i < numBodies(); ++i) {
    const RigidBody& rb = bodies_[i];
    const BodyKinematics& bk = kin.body[i];
    const vector3_t c = bk.R * rb.com;
    const matrix3_t Icw = bk.R * rb.inertia * bk.R.transpose();
    const vector3_t aC = bk.aOBias + gUp + bk.alphaBias.cross(c) + bk.w.cross(bk.w.cross(c));
    const vector3_t f = rb.mass * aC;
    const vector3_t n = Icw * bk.alphaBias + bk.w.cross(Icw * bk.w) + c.cross(f);
    wrench[i] << n, f;
  }
  for (int j = nj - 1; j >= 0; --j) {
    const int c = joints_[j].childBody;
    const int p = joints_[j].parentBody;
    const vector3_t r = kin.body[c].p - kin.body[p].p;
    vector6_t w = wrench[c];
    w.head<3>() += r.cross(w.tail<3>());
    wrench[p] += w;
  }

  vector_t bu = vector_t::Zero(6 + nj);
  bu.head<3>() = wrench[0].tail<3>();
  bu.segment<3>(3) = wrench[0].head<3>();
  for (int j = 0; j < nj; ++j) {
    const vector6_t Sj = jointSubspace(j, kin.body[joints_[j].parentBody].R);
    bu(6 + j) = Sj.dot(wrench[joints_[j].childBody]);
  }
  return kin.gamma.transpose() * bu;
}

inline FramePointData RobotModel::pointKinematics(const Kinematics& kin, int contactFrame) const {
  if (contactFrame < 0 || contactFrame >= static_cast<int>(contactFrames_.size())) {
    throw ModelError("pointKinematics: contact frame index out of range");
  }
  const ContactFrame& cf = contactFrames_[contactFrame];
  const BodyKinematics& bk = kin.body[cf.body];
  const vector3_t r = bk.R * cf.point;

  FramePointData out;
  out.position = bk.p + r;
  out.velocity = bk.vO + bk.w.cross(r);
  out.jdotV = bk.aOBias + bk.alphaBias.cross(r) + bk.w.cross(bk.w.cross(r));

  const int nj = numJoints();
  matrix_t Ju = matrix_t::Zero(3, 6 + nj);
  Ju.leftCols<3>().setIdentity();
  Ju.middleCols<3>(3) = -skew(out.position - kin.body[0].p);
  for (const int j : jointChain(cf.body)) {
    const Joint& jt = joints_[j];
    const vector3_t aw = kin.body[jt.parentBody].R * jt.axis;
    if (jt.type == JointType::kRevolute) {
      Ju.col(6 + j) = aw.cross(out.position - kin.body[jt.childBody].p);
    } else {
      Ju.col(6 + j) = aw;
    }
  }
  out.jacobian = Ju * kin.gamma;
  return out;
}

inline RobotModel RobotModel::perturbed(const ModelPerturbation& pert) const {
  RobotModel out = *this;
  for (const auto& [bodyName, factor] : pert.massScale) {
    if (factor < 0.8 || factor > 1.2) {
      throw ModelError("perturbation factor for '" + bodyName + "' outside [0.8, 1.2]");
    }
    bool found = false;
    for (auto& b : out.bodies_) {
      if (b.name == bodyName) {
        b.mass *= factor;
        b.inertia *= factor;  // same shape, scaled density
        found = true;
      }
    }
    if (!found) throw ModelError("perturbation names unknown body: " + bodyName);
  }
  for (const auto& [bodyName, offset] : pert.comOffset) {
    bool found = false;
    for (auto& b : out.bodies_) {
      if (b.name == bodyName) {
        b.com += offset;
        found = true;
      }
    }
    if (!found) throw ModelError("perturbation names unknown body: " + bodyName);
  }
  return out;
}

// ---------------------------------------------------------------------------
// JSON loading
// ---------------------------------------------------------------------------

namespace detail {

inline vector3_t readVec3(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ModelError(where + ": expected an array of 3 numbers");
  vector3_t v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ModelError(where + ": expected an array of 3 numbers");
    v(i) = j[i].get<scalar_t>();
  }
  return v;
}

inline matrix3_t readInertia(const nlohmann::json& j, const std::string& where) {
  matrix3_t I = matrix3_t::Zero();
  if (j.is_array() && j.size() == 3 && j[0].is_number()) {
    I.diagonal() = readVec3(j, where);
  } else if (j.is_array() && j.size() == 3 && j[0].is_array()) {
    for (int r = 0; r < 3; ++r) I.row(r) = readVec3(j[r], where).transpose();
  } else {
    throw ModelError(where + ": inertia must be a 3-vector (diagonal) or 3x3 matrix");
  }
  if ((I - I.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw ModelError(where + ": inertia must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<matrix3_t> es(I);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw ModelError(where + ": inertia must be positive definite");
  }
  return I;
}

inline void requireKeys(const nlohmann::json& j, const std::vector<std::string>& keys,
                        const std::string& where) {
  for (const auto& k : keys) {
    if (!j.contains(k)) throw ModelError(where + ": missing key '" + k + "'");
  }
}

}  // namespace detail

inline RobotModel RobotModel::loadFromJson(const nlohmann::json& j) {
  using nlohmann::json;
  detail::requireKeys(j, {"base", "bodies", "joints", "contacts", "limits"}, "model");

  RobotModel m;
  m.name_ = j.value("name", "unnamed");

  const json& jb = j.at("base");
  detail::requireKeys(jb, {"type", "name", "mass", "com", "inertia"}, "base");
  const std::string baseTypeStr = jb.at("type").get<std::string>();
  if (baseTypeStr == "spatial") {
    m.baseType_ = BaseType::kSpatial;
  } else if (baseTypeStr == "planar") {
    m.baseType_ = BaseType::kPlanar;
  } else {
    throw ModelError("base.type must be 'spatial' or 'planar', got '" + baseTypeStr + "'");
  }

  struct BodySpec {
    RigidBody body;
    bool used = false;
  };
  std::map<std::string, BodySpec> bodySpecs;
  auto readBody = [](const json& bj, const std::string& where) {
    detail::requireKeys(bj, {"name", "mass", "com", "inertia"}, where);
    RigidBody b;
    b.name = bj.at("name").get<std::string>();
    b.mass = bj.at("mass").get<scalar_t>();
    if (!(b.mass > 0.0)) throw ModelError(where + " '" + b.name + "': mass must be positive");
    b.com = detail::readVec3(bj.at("com"), where + " '" + b.name + "' com");
    b.inertia = detail::readInertia(bj.at("inertia"), where + " '" + b.name + "'");
    return b;
  };

  RigidBody base = readBody(jb, "base");
  for (const json& bj : j.at("bodies")) {
    RigidBody b = readBody(bj, "body");
    if (b.name == base.name || bodySpecs.count(b.name)) {
      throw ModelError("duplicate body name: " + b.name);
    }
    bodySpecs[b.name] = {b, false};
  }

  struct JointSpec {
    Joint joint;
    std::string parentName, childName;
  };
  std::vector<JointSpec> jointSpecs;
  std::set<std::string> jointNames, childNames;
  for (const json& jj : j.at("joints")) {
    detail::requireKeys(jj, {"name", "type", "parent", "child", "origin", "axis"}, "joint");
    JointSpec s;
    s.joint.name = jj.at("name").get<std::string>();
    if (!jointNames.insert(s.joint.name).second) {
      throw ModelError("duplicate joint name: " + s.joint.name);
    }
    const std::string type = jj.at("type").get<std::string>();
    if (type == "revolute") {
      s.joint.type = JointType::kRevolute;
    } else if (type == "prismatic") {
      s.joint.type = JointType::kPrismatic;
    } else {
      throw ModelError("joint '" + s.joint.name + "': type must be revolute or prismatic");
    }
    s.parentName = jj.at("parent").get<std::string>();
    s.childName = jj.at("child").get<std::string>();
    if (!childNames.insert(s.childName).second) {
      throw ModelError("body '" + s.childName + "' has more than one parent joint");
    }
    if (s.childName == base.name) throw ModelError("the base cannot be a joint child");
    if (!bodySpecs.count(s.childName)) {
      throw ModelError("joint '" + s.joint.name + "' child body unknown: " + s.childName);
    }
    s.joint.origin = detail::readVec3(jj.at("origin"), "joint '" + s.joint.name + "' origin");
    s.joint.axis = detail::readVec3(jj.at("axis"), "joint '" + s.joint.name + "' axis");
    const scalar_t axisNorm = s.joint.axis.norm();
    if (axisNorm < 1e-9) throw ModelError("joint '" + s.joint.name + "': axis must be nonzero");
    s.joint.axis /= axisNorm;
    if (jj.contains("position_limits")) {
      const json& pl = jj.at("position_limits");
      if (!pl.is_array() || pl.size() != 2 || !(pl[0].get<scalar_t>() < pl[1].get<scalar_t>())) {
        throw ModelError("joint '" + s.joint.name + "': position_limits must be [lower, upper]");
      }
      s.joint.positionLower = pl[0].get<scalar_t>();
      s.joint.positionUpper = pl[1].get<scalar_t>();
    }
    if (jj.contains("velocity_limit")) {
      s.joint.velocityLimit = jj.at("velocity_limit").get<scalar_t>();
      if (!(s.joint.velocityLimit > 0.0)) {
        throw ModelError("joint '" + s.joint.name + "': velocity_limit must be positive");
      }
    }
    if (jj.contains("neutral")) {
      s.joint.neutral = jj.at("neutral").get<scalar_t>();
      if (s.joint.neutral < s.joint.positionLower || s.joint.neutral > s.joint.positionUpper) {
        throw ModelError("joint '" + s.joint.name + "': neutral outside position limits");
      }
    }
    if (m.baseType_ == BaseType::kPlanar) {
      // In the sagittal plane only pitch rotations and in-plane translations exist.
      if (s.joint.type == JointType::kRevolute &&
          (std::abs(s.joint.axis.x()) > 1e-9 || std::abs(s.joint.axis.z()) > 1e-9)) {
        throw ModelError("joint '" + s.joint.name + "': planar models allow only y-axis revolutes");
      }
      if (s.joint.type == JointType::kPrismatic && std::abs(s.joint.axis.y()) > 1e-9) {
        throw ModelError("joint '" + s.joint.name + "': planar prismatic axes must lie in the x-z plane");
      }
    }
    jointSpecs.push_back(std::move(s));
  }

  // Topological ordering from the base outward.
  m.bodies_.push_back(base);
  std::map<std::string, int> bodyIndex{{base.name, 0}};
  std::vector<bool> placed(jointSpecs.size(), false);
  bool progress = true;
  while (progress) {
    progress = false;
    for (size_t k = 0; k < jointSpecs.size(); ++k) {
      if (placed[k]) continue;
      auto it = bodyIndex.find(jointSpecs[k].parentName);
      if (it == bodyIndex.end()) continue;
      Joint jt = jointSpecs[k].joint;
      jt.parentBody = it->second;
      jt.childBody = static_cast<int>(m.bodies_.size());
      RigidBody child = bodySpecs.at(jointSpecs[k].childName).body;
      child.parentJoint = static_cast<int>(m.joints_.size());
      bodySpecs.at(jointSpecs[k].childName).used = true;
      bodyIndex[child.name] = jt.childBody;
      m.bodies_.push_back(child);
      m.joints_.push_back(jt);
      placed[k] = true;
      progress = true;
    }
  }
  for (size_t k = 0; k < jointSpecs.size(); ++k) {
    if (!placed[k]) {
      throw ModelError("joint '" + jointSpecs[k].joint.name +
                       "' is not connected to the base (unknown parent or cycle)");
    }
  }
  for (const auto& [bodyName, spec] : bodySpecs) {
    if (!spec.used) throw ModelError("body '" + bodyName + "' is not attached to any joint");
  }

  std::set<std::string> contactNames;
  for (const json& cj : j.at("contacts")) {
    detail::requireKeys(cj, {"name", "body", "point", "mu"}, "contact");
    ContactFrame cf;
    cf.name = cj.at("name").get<std::string>();
    if (!contactNames.insert(cf.name).second) throw ModelError("duplicate contact name: " + cf.name);
    const std::string bodyName = cj.at("body").get<std::string>();
    auto it = bodyIndex.find(bodyName);
    if (it == bodyIndex.end()) throw ModelError("contact '" + cf.name + "' on unknown body: " + bodyName);
    cf.body = it->second;
    cf.point = detail::readVec3(cj.at("point"), "contact '" + cf.name + "' point");
    cf.mu = cj.at("mu").get<scalar_t>();
    if (!(cf.mu > 0.0)) throw ModelError("contact '" + cf.name + "': mu must be positive");
    m.contactFrames_.push_back(cf);
  }

  const json& jl = j.at("limits");
  detail::requireKeys(jl, {"torque"}, "limits");
  m.torqueLimits_ = vector_t::Zero(m.numJoints());
  const json& jt = jl.at("torque");
  if (jt.is_object()) {
    for (int i = 0; i < m.numJoints(); ++i) {
      if (!jt.contains(m.joints_[i].name)) {
        throw ModelError("limits.torque: missing joint '" + m.joints_[i].name + "'");
      }
      m.torqueLimits_(i) = jt.at(m.joints_[i].name).get<scalar_t>();
    }
  } else if (jt.is_number()) {
    m.torqueLimits_.setConstant(jt.get<scalar_t>());
  } else {
    throw ModelError("limits.torque must be a number or a joint-name map");
  }
  if ((m.torqueLimits_.array() <= 0.0).any()) {
    throw ModelError("limits.torque entries must be positive");
  }
  return m;
}

}  // namespace strider
