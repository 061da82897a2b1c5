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

#include <functional>
#include <unordered_map>

#include "strider/contact.hpp"
#include "strider/robot_model.hpp"
#include "strider/types.hpp"

namespace strider {

// ---------------------------------------------------------------------------
// Gait schedule
// ---------------------------------------------------------------------------

enum class GaitType { kStand, kBipedWalk, kQuadTrot };

struct GaitParams {
  GaitType type = GaitType::kBipedWalk;
  scalar_t startTime = 1.0;            ///< stand (all feet down) before this
  scalar_t swingDuration = 0.35;       ///< biped walk
  scalar_t doubleSupport = 0.10;       ///< biped walk
  scalar_t trotPhase = 0.30;           ///< trot half-cycle
};

/// Periodic stance/swing windows for every contact frame.  The biped cycle is
///   DS | frame0 swing | DS | frame1 swing
/// and the trot alternates the diagonal pairs (0,3) and (1,2) with no overlap.
class GaitSchedule {
 public:
  GaitSchedule(int numFeet, const GaitParams& params) : nFeet_(numFeet), p_(params) {
    if (p_.type == GaitType::kBipedWalk && nFeet_ != 2) {
      throw ConfigError("biped walk gait needs exactly 2 contact frames");
    }
    if (p_.type == GaitType::kQuadTrot && nFeet_ != 4) {
      throw ConfigError("trot gait needs exactly 4 contact frames");
    }
  }

  int numFeet() const { return nFeet_; }
  const GaitParams& params() const { return p_; }

  scalar_t cycleDuration() const {
    switch (p_.type) {
      case GaitType::kStand: return 1.0;
      case GaitType::kBipedWalk: return 2.0 * (p_.swingDuration + p_.doubleSupport);
      case GaitType::kQuadTrot: return 2.0 * p_.trotPhase;
    }
    return 1.0;
  }

  /// Swing window [start, end) of `foot` within one cycle, or nullopt when the
  /// foot never swings.
  std::optional<std::pair<scalar_t, scalar_t>> swingWindowInCycle(int foot) const {
    switch (p_.type) {
      case GaitType::kStand: return std::nullopt;
      case GaitType::kBipedWalk: {
        const scalar_t ds = p_.doubleSupport, sw = p_.swingDuration;
        if (foot == 0) return std::make_pair(ds, ds + sw);
        return std::make_pair(2.0 * ds + sw, 2.0 * (ds + sw));
      }
      case GaitType::kQuadTrot: {
        // pair A = {0, 3} stances first, so it swings in the second phase
        const bool pairA = (foot == 0 || foot == 3);
        if (pairA) return std::make_pair(p_.trotPhase, 2.0 * p_.trotPhase);
        return std::make_pair(0.0, p_.trotPhase);
      }
    }
    return std::nullopt;
  }

  bool inStance(int foot, scalar_t t) const {
    if (t < p_.startTime) return true;
    const auto win = swingWindowInCycle(foot);
    if (!win) return true;
    const scalar_t phase = cyclePhase(t);
    return !(phase >= win->first && phase < win->second);
  }

  std::vector<int> stanceFeet(scalar_t t) const {
    std::vector<int> out;
    for (int f = 0; f < nFeet_; ++f) {
      if (inStance(f, t)) out.push_back(f);
    }
    return out;
  }

  /// Current or next swing window of `foot` as absolute times (start >= t - cycle).
  std::pair<scalar_t, scalar_t> swingWindowAround(int foot, scalar_t t) const {
    const auto win = swingWindowInCycle(foot);
    if (!win) throw ConfigError("foot never swings in this gait");
    const scalar_t tRef = std::max(t, p_.startTime);
    const scalar_t cyc = cycleDuration();
    scalar_t k = std::floor((tRef - p_.startTime) / cyc);
    scalar_t start = p_.startTime + k * cyc + win->first;
    scalar_t end = p_.startTime + k * cyc + win->second;
    if (tRef >= end) {
      start += cyc;
      end += cyc;
    }
    return {start, end};
  }

 private:
  scalar_t cyclePhase(scalar_t t) const {
    const scalar_t u = std::fmod(t - p_.startTime, cycleDuration());
    return u < 0.0 ? u + cycleDuration() : u;
  }

  int nFeet_;
  GaitParams p_;
};

// ---------------------------------------------------------------------------
// Cubic segments and swing trajectories
// ---------------------------------------------------------------------------

/// p(u) = a0 + a1 u + a2 u^2 + a3 u^3 on u in [0, T].
struct CubicSegment {
  scalar_t a0 = 0, a1 = 0, a2 = 0, a3 = 0, T = 1;

  static CubicSegment fromBoundary(scalar_t p0, scalar_t v0, scalar_t p1, scalar_t v1, scalar_t T) {
    CubicSegment c;
    c.T = T;
    c.a0 = p0;
    c.a1 = v0;
    c.a2 = 3.0 * (p1 - p0) / (T * T) - (2.0 * v0 + v1) / T;
    c.a3 = -2.0 * (p1 - p0) / (T * T * T) + (v0 + v1) / (T * T);
    return c;
  }
  scalar_t pos(scalar_t u) const { return a0 + u * (a1 + u * (a2 + u * a3)); }
  scalar_t vel(scalar_t u) const { return a1 + u * (2.0 * a2 + 3.0 * u * a3); }
  scalar_t acc(scalar_t u) const { return 2.0 * a2 + 6.0 * u * a3; }
};

/// Point-foot swing: single cubics in x/y with zero boundary velocities and a
/// two-segment z profile through an apex at mid-swing.
struct SwingTrajectory {
  scalar_t tStart = 0, tEnd = 0;
  CubicSegment x, y, zUp, zDown;
  vector3_t target = vector3_t::Zero();

  static SwingTrajectory make(const vector3_t& from, const vector3_t& to, scalar_t tStart,
                              scalar_t tEnd, scalar_t apexHeight) {
    SwingTrajectory s;
    s.tStart = tStart;
    s.tEnd = tEnd;
    s.target = to;
    const scalar_t T = tEnd - tStart;
    if (!(T > 0.0)) throw ConfigError("swing trajectory needs tEnd > tStart");
    s.x = CubicSegment::fromBoundary(from.x(), 0.0, to.x(), 0.0, T);
    s.y = CubicSegment::fromBoundary(from.y(), 0.0, to.y(), 0.0, T);
    const scalar_t apex = std::max(from.z(), to.z()) + apexHeight;
    s.zUp = CubicSegment::fromBoundary(from.z(), 0.0, apex, 0.0, 0.5 * T);
    s.zDown = CubicSegment::fromBoundary(apex, 0.0, to.z(), 0.0, 0.5 * T);
    return s;
  }

  void eval(scalar_t t, vector3_t& pos, vector3_t& vel, vector3_t& acc) const {
    const scalar_t u = std::clamp(t - tStart, 0.0, tEnd - tStart);
    pos.x() = x.pos(u); vel.x() = x.vel(u); acc.x() = x.acc(u);
    pos.y() = y.pos(u); vel.y() = y.vel(u); acc.y() = y.acc(u);
    const scalar_t half = 0.5 * (tEnd - tStart);
    if (u < half) {
      pos.z() = zUp.pos(u); vel.z() = zUp.vel(u); acc.z() = zUp.acc(u);
    } else {
      pos.z() = zDown.pos(u - half); vel.z() = zDown.vel(u - half); acc.z() = zDown.acc(u - half);
    }
    if (t < tStart || t > tEnd) {
      vel.setZero();
      acc.setZero();
    }
  }
};

// ---------------------------------------------------------------------------
// Linear inverted pendulum
// ---------------------------------------------------------------------------

/// Analytic LIP propagation: x(t) = p + (x0 - p) cosh(w t) + (v0 / w) sinh(w t).
struct LipState {
  Eigen::Vector2d pos = Eigen::Vector2d::Zero();
  Eigen::Vector2d vel = Eigen::Vector2d::Zero();
};

inline LipState lipPropagate(const LipState& s0, const Eigen::Vector2d& support, scalar_t omega,
                             scalar_t dt) {
  const scalar_t ch = std::cosh(omega * dt), sh = std::sinh(omega * dt);
  LipState s;
  s.pos = support + (s0.pos - support) * ch + s0.vel * (sh / omega);
  s.vel = (s0.pos - support) * (omega * sh) + s0.vel * ch;
  return s;
}

inline Eigen::Vector2d lipAcceleration(const LipState& s, const Eigen::Vector2d& support,
                                       scalar_t omega) {
  return omega * omega * (s.pos - support);
}

/// Raibert touchdown rule: hip projection plus half-stance travel plus a
/// velocity-error correction.
inline Eigen::Vector2d raibertFoothold(const Eigen::Vector2d& hip, const Eigen::Vector2d& vel,
                                       const Eigen::Vector2d& velCmd, scalar_t stanceDuration,
                                       scalar_t gain) {
  return hip + 0.5 * stanceDuration * vel + gain * (vel - velCmd);
}

// ---------------------------------------------------------------------------
// Inverse kinematics
// ---------------------------------------------------------------------------

/// Damped Gauss-Newton position IK for the joints, with the base pose held
/// fixed (the base coordinates are already the task pose).  Targets are world
/// points for contact frames.  Throws when a target is out of reach or the
/// iteration fails to converge.
inline vector_t solveJointIk(const RobotModel& model, const vector_t& qBase,
                             const std::vector<std::pair<int, vector3_t>>& targets,
                             const vector_t& seedJoints, scalar_t tol = 1e-8, int maxIter = 50) {
  const int nb = model.baseDim();
  const int nj = model.numJoints();
  vector_t q = vector_t::Zero(model.nv());
  q.head(nb) = qBase;
  q.tail(nj) = seedJoints;
  const vector_t zero = vector_t::Zero(model.nv());

  // Reach pre-check: compare each target distance from the chain root with the
  // total chain length.
  {
    const Kinematics kin = model.kinematics(q, zero);
    for (const auto& [frame, target] : targets) {
      const ContactFrame& cf = model.contactFrames()[frame];
      const auto chain = model.jointChain(cf.body);
      if (chain.empty()) continue;
      const int rootJoint = chain.front();
      const int rootParent = model.joints()[rootJoint].parentBody;
      const vector3_t rootAnchor =
          kin.body[rootParent].p + kin.body[rootParent].R * model.joints()[rootJoint].origin;
      scalar_t reach = 0.0;
      for (size_t i = 1; i < chain.size(); ++i) reach += model.joints()[chain[i]].origin.norm();
      reach += cf.point.norm();
      if ((target - rootAnchor).norm() > reach + 1e-9) {
        throw NumericalError("solveJointIk: target for frame '" + cf.name + "' is out of reach");
      }
    }
  }

  const int m = static_cast<int>(targets.size());
  for (int iter = 0; iter < maxIter; ++iter) {
    const Kinematics kin = model.kinematics(q, zero);
    vector_t r(3 * m);
    matrix_t J(3 * m, nj);
    for (int i = 0; i < m; ++i) {
      const FramePointData fd = model.pointKinematics(kin, targets[i].first);
      r.segment<3>(3 * i) = fd.position - targets[i].second;
      J.middleRows<3>(3 * i) = fd.jacobian.rightCols(nj);
    }
    if (r.cwiseAbs().maxCoeff() < tol) return q.tail(nj);
    const matrix_t JtJ = J.transpose() * J + 1e-10 * matrix_t::Identity(nj, nj);
    const vector_t step = JtJ.ldlt().solve(J.transpose() * r);
    q.tail(nj) -= step;
    for (int j = 0; j < nj; ++j) {
      q(nb + j) = std::clamp(q(nb + j), model.joints()[j].positionLower, model.joints()[j].positionUpper);
    }
  }
  throw NumericalError("solveJointIk: no convergence within iteration limit");
}

/// Joint rates that realize the given world-frame target velocities of the
/// contact frames for a fixed base velocity (damped least squares).
inline vector_t solveJointIkVelocity(const RobotModel& model, const vector_t& q,
                                     const vector_t& vBase,
                                     const std::vector<std::pair<int, vector3_t>>& velTargets) {
  const int nb = model.baseDim();
  const int nj = model.numJoints();
  const Kinematics kin = model.kinematics(q, vector_t::Zero(model.nv()));
  const int m = static_cast<int>(velTargets.size());
  vector_t rhs(3 * m);
  matrix_t J(3 * m, nj);
  for (int i = 0; i < m; ++i) {
    const FramePointData fd = model.pointKinematics(kin, velTargets[i].first);
    rhs.segment<3>(3 * i) = velTargets[i].second - fd.jacobian.leftCols(nb) * vBase;
    J.middleRows<3>(3 * i) = fd.jacobian.rightCols(nj);
  }
  const matrix_t JtJ = J.transpose() * J + 1e-10 * matrix_t::Identity(nj, nj);
  return JtJ.ldlt().solve(J.transpose() * rhs);
}

// ---------------------------------------------------------------------------
// Motion reference
// ---------------------------------------------------------------------------

/// Commanded planar twist in the heading frame as a function of time since
/// the gait start (commands are zero while standing).
struct CommandSignal {
  std::function<scalar_t(scalar_t)> vx = [](scalar_t) { return 0.0; };
  std::function<scalar_t(scalar_t)> vy = [](scalar_t) { return 0.0; };
  std::function<scalar_t(scalar_t)> yawRate = [](scalar_t) { return 0.0; };
};

struct ReferenceParams {
  GaitParams gait;
  scalar_t baseHeight = 0.40;
  scalar_t swingHeight = 0.06;
  scalar_t raibertGain = 0.03;
  scalar_t maxStepLength = 0.30;       ///< foothold clamp around the hip projection
  scalar_t filterTau = 0.10;           ///< command low-pass time constant
  scalar_t accelLimitLin = 1.5;        ///< rate limit on filtered linear commands
  scalar_t accelLimitAng = 3.0;        ///< rate limit on filtered yaw-rate command
  /// Planar speed ceiling of the realizable base path.  A foot anchored for a
  /// stance interval sweeps +-(stance/2)*speed relative to the hip, so speed
  /// is bounded by the leg's planar workspace at standing height; commands
  /// beyond the ceiling stay in the scored command signal but the path the
  /// footholds and base reference hang off saturates at it.
  scalar_t maxPathSpeed = 0.55;
};

struct BaseReference {
  vector_t y;    ///< base pose reference (baseDim)
  vector_t yd;   ///< velocity
  vector_t ydd;  ///< acceleration
};

struct FootReference {
  bool stance = true;
  vector3_t position = vector3_t::Zero();
  vector3_t velocity = vector3_t::Zero();
  vector3_t acceleration = vector3_t::Zero();
  scalar_t swingStart = 0.0;
  scalar_t swingEnd = 0.0;
  vector3_t swingTarget = vector3_t::Zero();  ///< planned foothold for the enclosing/next swing
};

/// Deterministic open-loop motion plan for one run: filtered commands, the
/// command-integrated base path with closed-form pendulum sway, path-anchored
/// footholds, swing splines, and full-state reference reconstruction through
/// IK.  All queries are pure functions of time, so results do not depend on
/// query order.
class MotionReference {
 public:
  MotionReference(const RobotModel& model, const ReferenceParams& params, const CommandSignal& cmd,
                  const vector_t& q0, scalar_t duration)
      : model_(model),
        p_(params),
        schedule_(static_cast<int>(model.contactFrames().size()), params.gait),
        horizonEnd_(duration + 1.0) {
    if (q0.size() != model.nv()) throw ConfigError("MotionReference: q0 dimension mismatch");
    spatial_ = model.baseType() == BaseType::kSpatial;
    omega_ = std::sqrt(kGravity / p_.baseHeight);
    seedJoints_ = q0.tail(model.numJoints());
    buildCommandGrid(cmd);
    buildFootholdPlan(q0);
  }

  const GaitSchedule& schedule() const { return schedule_; }
  scalar_t omega() const { return omega_; }

  /// Active contact frames at time t, in model frame order.
  ContactSet activeContacts(scalar_t t) const {
    std::vector<std::string> names;
    for (int f : schedule_.stanceFeet(t)) names.push_back(model_.contactFrames()[f].name);
    return makeContactSet(model_, names);
  }

  /// Filtered command velocity in world coordinates (the tracking-error
  /// reference for scoring): linear x/y and yaw rate, other channels zero.
  vector_t commandVelocity(scalar_t t) const {
    const GridSample g = sample(t);
    vector_t v = vector_t::Zero(model_.baseDim());
    if (spatial_) {
      v(0) = g.cmdWorld.x();
      v(1) = g.cmdWorld.y();
      v(5) = g.yawRate;
    } else {
      v(0) = g.cmdWorld.x();
    }
    return v;
  }

  BaseReference base(scalar_t t) const {
    const GridSample g = sample(t);
    Eigen::Vector2d pos, vel, acc;
    lipAt(t, pos, vel, acc);

    BaseReference out;
    const int nb = model_.baseDim();
    out.y = vector_t::Zero(nb);
    out.yd = vector_t::Zero(nb);
    out.ydd = vector_t::Zero(nb);
    if (spatial_) {
      out.y << pos.x(), pos.y(), p_.baseHeight, 0.0, 0.0, g.yaw;
      out.yd << vel.x(), vel.y(), 0.0, 0.0, 0.0, g.yawRate;
      out.ydd << acc.x(), acc.y(), 0.0, 0.0, 0.0, g.yawAcc;
    } else {
      out.y << pos.x(), p_.baseHeight, 0.0;
      out.yd << vel.x(), 0.0, 0.0;
      out.ydd << acc.x(), 0.0, 0.0;
    }
    return out;
  }

  FootReference foot(int f, scalar_t t) const {
    FootReference out;
    out.stance = schedule_.inStance(f, t);
    if (schedule_.params().type != GaitType::kStand) {
      const auto [s, e] = schedule_.swingWindowAround(f, t);
      out.swingStart = s;
      out.swingEnd = e;
      out.swingTarget = plannedFootholdForLanding(f, e);
    }
    if (out.stance) {
      out.position = anchorAt(f, t);
    } else {
      const SwingTrajectory& sw = swingFor(f, t);
      sw.eval(t, out.position, out.velocity, out.acceleration);
    }
    return out;
  }

  /// Full-state reference (q*, v*) with stance feet pinned to their planned
  /// footholds and swing feet on their splines.
  State referenceState(scalar_t t) const {
    const long key = std::lround(t * 1e6);
    auto it = stateCache_.find(key);
    if (it != stateCache_.end()) return it->second;

    const BaseReference br = base(t);
    std::vector<std::pair<int, vector3_t>> posTargets, velTargets;
    for (int f = 0; f < schedule_.numFeet(); ++f) {
      const FootReference fr = foot(f, t);
      posTargets.push_back({f, fr.position});
      velTargets.push_back({f, fr.velocity});
    }
    State st;
    st.q = vector_t::Zero(model_.nv());
    st.q.head(model_.baseDim()) = br.y;
    st.q.tail(model_.numJoints()) = solveJointIk(model_, br.y, posTargets, seedJoints_);
    st.v = vector_t::Zero(model_.nv());
    st.v.head(model_.baseDim()) = br.yd;
    st.v.tail(model_.numJoints()) = solveJointIkVelocity(model_, st.q, br.yd, velTargets);
    stateCache_.emplace(key, st);
    return st;
  }

  scalar_t latestQueryTime() const { return horizonEnd_; }

 private:
  struct GridSample {
    // Scored command: the filtered raw command, no speed ceiling.
    Eigen::Vector2d cmdHeading = Eigen::Vector2d::Zero();  // filtered (vx, vy)
    Eigen::Vector2d cmdWorld = Eigen::Vector2d::Zero();
    // Realizable path: a parallel filter chasing the speed-capped command;
    // footholds and the base reference all hang off these.
    Eigen::Vector2d velHeading = Eigen::Vector2d::Zero();
    Eigen::Vector2d velWorld = Eigen::Vector2d::Zero();
    Eigen::Vector2d posWorld = Eigen::Vector2d::Zero();    // integral of velWorld
    scalar_t yawRate = 0.0;  // shared: yaw consumes no leg reach
    scalar_t yaw = 0.0;
    scalar_t yawAcc = 0.0;
    Eigen::Vector2d accWorld = Eigen::Vector2d::Zero();
  };

  /// One single-support interval of the biped walk, extended by half a
  /// double-support on each side so consecutive windows tile the timeline.
  struct SupportWindow {
    scalar_t start = 0.0, end = 0.0;
    int supportFoot = 0;
  };

  struct PlannedSwing {
    int foot = 0;
    scalar_t tStart = 0.0, tEnd = 0.0;
    SwingTrajectory traj;
  };

  void buildCommandGrid(const CommandSignal& cmd) {
    const scalar_t t0 = schedule_.params().startTime;
    const int n = static_cast<int>(std::ceil(horizonEnd_ / kGridDt)) + 2;
    grid_.resize(n);
    GridSample s;
    for (int i = 0; i < n; ++i) {
      const scalar_t t = i * kGridDt;
      const scalar_t tc = t - t0;  // command clock starts at the gait start
      const scalar_t vxCmd = (tc >= 0.0) ? cmd.vx(tc) : 0.0;
      const scalar_t vyCmd = (tc >= 0.0 && spatial_) ? cmd.vy(tc) : 0.0;
      const scalar_t wzCmd = (tc >= 0.0 && spatial_) ? cmd.yawRate(tc) : 0.0;

      auto rate = [&](scalar_t target, scalar_t current, scalar_t limit) {
        return std::clamp((target - current) / p_.filterTau, -limit, limit);
      };
      const scalar_t axC = rate(vxCmd, s.cmdHeading.x(), p_.accelLimitLin);
      const scalar_t ayC = rate(vyCmd, s.cmdHeading.y(), p_.accelLimitLin);

      Eigen::Vector2d pathCmd(vxCmd, vyCmd);
      const scalar_t speed = pathCmd.norm();
      if (speed > p_.maxPathSpeed) pathCmd *= p_.maxPathSpeed / speed;
      const scalar_t axH = rate(pathCmd.x(), s.velHeading.x(), p_.accelLimitLin);
      const scalar_t ayH = rate(pathCmd.y(), s.velHeading.y(), p_.accelLimitLin);
      const scalar_t aw = rate(wzCmd, s.yawRate, p_.accelLimitAng);

      const Eigen::Rotation2D<scalar_t> Rz(s.yaw);
      s.cmdWorld = Rz * s.cmdHeading;
      s.velWorld = Rz * s.velHeading;
      s.accWorld = Rz * Eigen::Vector2d(axH, ayH) +
                   s.yawRate * Eigen::Vector2d(-s.velWorld.y(), s.velWorld.x());
      s.yawAcc = aw;
      grid_[i] = s;

      // Advance to the next grid point (semi-implicit: rates first).
      s.cmdHeading.x() += kGridDt * axC;
      s.cmdHeading.y() += kGridDt * ayC;
      s.velHeading.x() += kGridDt * axH;
      s.velHeading.y() += kGridDt * ayH;
      s.yawRate += kGridDt * aw;
      s.yaw += kGridDt * s.yawRate;
      const Eigen::Rotation2D<scalar_t> RzNext(s.yaw);
      s.posWorld += kGridDt * (RzNext * s.velHeading);
    }
  }

  GridSample sample(scalar_t t) const {
    const scalar_t u = std::clamp(t, 0.0, (grid_.size() - 1) * kGridDt) / kGridDt;
    const int i = std::min(static_cast<int>(u), static_cast<int>(grid_.size()) - 2);
    const scalar_t a = u - i;
    const GridSample& g0 = grid_[i];
    const GridSample& g1 = grid_[i + 1];
    GridSample out;
    out.cmdHeading = (1 - a) * g0.cmdHeading + a * g1.cmdHeading;
    out.cmdWorld = (1 - a) * g0.cmdWorld + a * g1.cmdWorld;
    out.velHeading = (1 - a) * g0.velHeading + a * g1.velHeading;
    out.velWorld = (1 - a) * g0.velWorld + a * g1.velWorld;
    out.posWorld = (1 - a) * g0.posWorld + a * g1.posWorld;
    out.yawRate = (1 - a) * g0.yawRate + a * g1.yawRate;
    out.yaw = (1 - a) * g0.yaw + a * g1.yaw;
    out.yawAcc = (1 - a) * g0.yawAcc + a * g1.yawAcc;
    out.accWorld = (1 - a) * g0.accWorld + a * g1.accWorld;
    return out;
  }

  /// Anchor of the first joint of the foot's chain (the hip) in the base
  /// frame.  Legs are expected to root directly at the base.
  Eigen::Vector2d hipOffset(int foot) const {
    const ContactFrame& cf = model_.contactFrames()[foot];
    const auto chain = model_.jointChain(cf.body);
    vector3_t o = vector3_t::Zero();
    if (!chain.empty()) o = model_.joints()[chain.front()].origin;
    return {o.x(), spatial_ ? o.y() : 0.0};
  }

  void buildFootholdPlan(const vector_t& q0) {
    pathOrigin_ = basePos0_(q0);
    const Kinematics kin0 = model_.kinematics(q0, vector_t::Zero(model_.nv()));
    initialFootPos_.resize(schedule_.numFeet());
    for (int f = 0; f < schedule_.numFeet(); ++f) {
      initialFootPos_[f] = model_.pointKinematics(kin0, f).position;
    }
    if (schedule_.params().type == GaitType::kStand) return;

    const bool biped = schedule_.params().type == GaitType::kBipedWalk;
    const scalar_t tG = schedule_.params().startTime;

    // Landing-event roll-out: every swing end is a landing; supports switch at
    // the middle of the following double-support (biped) or immediately (trot).
    struct Landing {
      int foot;
      scalar_t touchdown;
    };
    std::vector<Landing> landings;
    for (scalar_t cycleStart = tG; cycleStart < horizonEnd_ + schedule_.cycleDuration();
         cycleStart += schedule_.cycleDuration()) {
      for (int f = 0; f < schedule_.numFeet(); ++f) {
        const auto win = schedule_.swingWindowInCycle(f);
        if (win) landings.push_back({f, cycleStart + win->second});
      }
    }
    std::sort(landings.begin(), landings.end(),
              [](const Landing& a, const Landing& b) { return a.touchdown < b.touchdown; });

    // Per-foot landing history starts from the initial stance positions.
    lastLanding_.assign(schedule_.numFeet(), std::vector<Foothold>());
    for (int f = 0; f < schedule_.numFeet(); ++f) {
      lastLanding_[f].push_back({-1.0, initialFootPos_[f]});
    }

    // Raibert horizon = the stance interval the anchored foot must cover;
    // placing the foothold half of it ahead centers the hip's sweep over the
    // anchor, which is what maximizes the reachable path speed.
    const scalar_t T_raibert = schedule_.cycleDuration() -
                               (biped ? schedule_.params().swingDuration
                                      : schedule_.params().trotPhase);

    // Footholds are placed from the command-integrated path alone (hip
    // projection plus half-stance travel), never from a propagated pendulum
    // state.  Feeding the pendulum state back into foot placement couples an
    // unstable open-loop chain to itself; anchoring everything to the bounded
    // path keeps every foothold within leg reach by construction.  The
    // pendulum dynamics reappear as closed-form per-window deviations of the
    // base reference (see deviationAt), which vanish at the window joins and
    // therefore cannot accumulate.
    scalar_t windowStart = biped ? tG + 0.5 * schedule_.params().doubleSupport : tG;
    for (const Landing& land : landings) {
      if (land.touchdown > horizonEnd_ + schedule_.cycleDuration()) break;
      const auto [swStart, swEnd] = std::make_pair(
          land.touchdown - (biped ? schedule_.params().swingDuration : schedule_.params().trotPhase),
          land.touchdown);

      const GridSample gTd = sample(swEnd);
      if (biped) {
        // Single-support window (the other foot carries the robot), extended
        // by half a double-support on each side; used only for the base sway.
        SupportWindow w;
        w.start = windowStart;
        w.end = swEnd + 0.5 * schedule_.params().doubleSupport;
        w.supportFoot = 1 - land.foot;
        windows_.push_back(w);
        windowStart = w.end;
      }
      const Eigen::Rotation2D<scalar_t> Rz(gTd.yaw);
      const Eigen::Vector2d hipWorld = basePathAt(swEnd) + Rz * hipOffset(land.foot);

      Eigen::Vector2d fh =
          raibertFoothold(hipWorld, gTd.velWorld, gTd.velWorld, T_raibert, p_.raibertGain);
      const Eigen::Vector2d rel = fh - hipWorld;
      const scalar_t relNorm = rel.norm();
      if (relNorm > p_.maxStepLength) fh = hipWorld + rel * (p_.maxStepLength / relNorm);

      const vector3_t target(fh.x(), spatial_ ? fh.y() : 0.0, 0.0);
      const vector3_t from = lastLanding_[land.foot].back().pos;

      PlannedSwing ps;
      ps.foot = land.foot;
      ps.tStart = swStart;
      ps.tEnd = swEnd;
      ps.traj = SwingTrajectory::make(from, target, swStart, swEnd, p_.swingHeight);
      swings_.push_back(ps);
      lastLanding_[land.foot].push_back({swEnd, target});
    }
  }

  Eigen::Vector2d basePos0_(const vector_t& q0) const {
    const vector3_t p = model_.basePosition(q0);
    return {p.x(), p.y()};
  }

  /// Command-integrated base path, anchored at the origin of the initial
  /// pose.  Footholds for every gait hang off this path.
  Eigen::Vector2d basePathAt(scalar_t t) const {
    return pathOrigin_ + sample(t).posWorld;
  }

  // Planar base reference: the command-integrated path plus, for the biped
  // walk, a closed-form pendulum deviation inside each support window.
  //
  // Within a window of length T the support foot sits (in path frame) at
  // lateral offset s = hipOffset(supportFoot).y and the base must orbit it.
  // Two independent components of the same linear pendulum are superposed:
  //
  //  * Lateral mirror orbit.  delta(tau) = s (1 - cosh w tau) + v0 sinh(w
  //    tau)/w with v0 = s w S/(C+1), C = cosh wT, S = sinh wT.  This choice
  //    gives delta(0) = delta(T) = 0 and delta'(T) = -v0; since the next
  //    window mirrors the support side (s flips sign), its own v0 equals
  //    -this v0, so position and velocity are both continuous across the
  //    support exchange.
  //
  //  * Sagittal in-window orbit.  With L the path travel over the window,
  //    u(tau) = u0 cosh + du0 sinh/w from u0 = -L/2, du0 = L w S/(2(C-1))
  //    is the symmetric pendulum arc from -L/2 to +L/2 in time T; the
  //    deviation from uniform progress, zeta(tau) = u(tau) - (u0 + L tau/T),
  //    vanishes at both ends and repeats identically each window.
  //
  // Both components come out of one pendulum propagation by stacking them as
  // the x/y coordinates of a local state whose support point is (0, s).
  void lipAt(scalar_t t, Eigen::Vector2d& pos, Eigen::Vector2d& vel, Eigen::Vector2d& acc) const {
    const GridSample g = sample(t);
    pos = pathOrigin_ + g.posWorld;
    vel = g.velWorld;
    acc = g.accWorld;
    if (schedule_.params().type != GaitType::kBipedWalk || windows_.empty() ||
        t <= windows_.front().start) {
      return;
    }
    const SupportWindow* w = &windows_.back();
    for (const auto& win : windows_) {
      if (t < win.end) {
        w = &win;
        break;
      }
    }
    const scalar_t T = w->end - w->start;
    if (T <= 1e-9) return;
    const scalar_t tau = std::clamp(t - w->start, 0.0, T);
    const scalar_t C = std::cosh(omega_ * T);
    const scalar_t S = std::sinh(omega_ * T);
    const scalar_t sLat = hipOffset(w->supportFoot).y();
    const scalar_t v0 = sLat * omega_ * S / (C + 1.0);

    const Eigen::Vector2d delta = sample(w->end).posWorld - sample(w->start).posWorld;
    const scalar_t L = delta.norm();
    const Eigen::Vector2d eHat = L > 1e-9 ? Eigen::Vector2d(delta / L) : Eigen::Vector2d::Zero();
    const scalar_t u0 = -0.5 * L;
    const scalar_t du0 = L * omega_ * S / (2.0 * (C - 1.0));

    LipState loc0;
    loc0.pos << u0, 0.0;
    loc0.vel << du0, v0;
    const Eigen::Vector2d support(0.0, sLat);
    const LipState loc = lipPropagate(loc0, support, omega_, tau);
    const Eigen::Vector2d locAcc = lipAcceleration(loc, support, omega_);

    const Eigen::Rotation2D<scalar_t> Rz(g.yaw);
    const Eigen::Vector2d nLat = Rz * Eigen::Vector2d(0.0, 1.0);
    pos += nLat * loc.pos.y() + eHat * (loc.pos.x() - (u0 + L * tau / T));
    vel += nLat * loc.vel.y() + eHat * (loc.vel.x() - L / T);
    acc += nLat * locAcc.y() + eHat * locAcc.x();
  }

  vector3_t anchorAt(int f, scalar_t t) const {
    // Most recent landing at or before t (the planned stance location).
    if (lastLanding_.empty() || lastLanding_[f].empty()) return initialFootPos_[f];
    const auto& hist = lastLanding_[f];
    vector3_t pos = hist.front().pos;
    for (const auto& fh : hist) {
      if (fh.touchdown <= t + 1e-9) pos = fh.pos;
    }
    return pos;
  }

  vector3_t plannedFootholdForLanding(int f, scalar_t touchdown) const {
    for (const auto& sw : swings_) {
      if (sw.foot == f && std::abs(sw.tEnd - touchdown) < 1e-6) return sw.traj.target;
    }
    // Beyond the planned horizon: hold the last known landing.
    return lastLanding_.empty() || lastLanding_[f].empty() ? initialFootPos_[f]
                                                          : lastLanding_[f].back().pos;
  }

  const SwingTrajectory& swingFor(int f, scalar_t t) const {
    for (const auto& sw : swings_) {
      if (sw.foot == f && t >= sw.tStart - 1e-9 && t <= sw.tEnd + 1e-9) return sw.traj;
    }
    throw NumericalError("MotionReference: no swing trajectory covers the query");
  }

  struct Foothold {
    scalar_t touchdown;
    vector3_t pos;
  };

  static constexpr scalar_t kGridDt = 1e-3;

  const RobotModel& model_;
  ReferenceParams p_;
  GaitSchedule schedule_;
  scalar_t horizonEnd_;
  bool spatial_ = true;
  scalar_t omega_ = 1.0;
  vector_t seedJoints_;
  std::vector<GridSample> grid_;
  std::vector<SupportWindow> windows_;
  std::vector<PlannedSwing> swings_;
  std::vector<std::vector<Foothold>> lastLanding_;
  std::vector<vector3_t> initialFootPos_;
  Eigen::Vector2d pathOrigin_ = Eigen::Vector2d::Zero();
  mutable std::unordered_map<long, State> stateCache_;
};

}  // namespace strider
