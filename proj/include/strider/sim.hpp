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

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <future>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "strider/contact.hpp"
#include "strider/controller.hpp"
#include "strider/qp.hpp"
#include "strider/reference.hpp"
#include "strider/robot_model.hpp"

namespace strider {

/// External wrench applied to the floating-base rows over a time window.
struct DisturbanceWindow {
  scalar_t start = 0.0;
  scalar_t stop = 0.0;
  vector_t wrench;  ///< base-dimension generalized force, world frame
};

struct SimConfig {
  scalar_t dt = 1e-3;
  scalar_t mu = 0.6;                ///< ground friction for the contact solve
  scalar_t baumgarteAlpha = 10.0;   ///< velocity-error stabilization gain [1/s]
  scalar_t baumgarteBeta = 10.0;    ///< position-error stabilization gain [1/s]
  scalar_t fallHeight = 0.15;       ///< base height below this is a fall [m]
  scalar_t fallAngle = 0.8;         ///< |roll| or |pitch| beyond this is a fall [rad]
  scalar_t slipSpeed = 0.5;         ///< tangential anchor speed treated as slip [m/s]
  scalar_t massScale = 1.05;        ///< plant-vs-nominal link-mass factor in closed loop
  std::vector<DisturbanceWindow> disturbances;
};

/// Uniform per-body mass scaling, used to make the simulated plant differ
/// from the controller's nominal model.
inline ModelPerturbation uniformMassPerturbation(const RobotModel& model, scalar_t factor) {
  ModelPerturbation p;
  for (const auto& b : model.bodies()) p.massScale[b.name] = factor;
  return p;
}

struct SimEvent {
  scalar_t t = 0.0;
  std::string what;
};

/// One record per control tick.  Columns are fixed so traces from different
/// runs of the same model diff cleanly.
struct TraceRow {
  scalar_t t = 0.0;
  vector_t q, v, tau;
  vector_t refCmdVel;       ///< filtered velocity command in world coordinates
  vector_t basePoseRef;     ///< reference base pose
  vector_t lambda;          ///< simulator ground reaction forces, stacked
  std::vector<std::string> contactNames;
  scalar_t baseResidual = 0.0;  ///< floating-base acceleration gap in the WBC
  int wbcStatus = 0;
  int pdFallback = 0;
};

struct SimTrace {
  std::vector<TraceRow> rows;
  std::vector<SimEvent> events;
  bool fell = false;
  scalar_t fallTime = -1.0;
  // Timing side channel: deliberately not part of the CSV so traces stay
  // byte-comparable across scheduling modes and machines.
  std::vector<scalar_t> wbcMs;
  std::vector<scalar_t> lqrMs;

  void write(std::ostream& os) const {
    if (rows.empty()) return;
    const int nq = static_cast<int>(rows.front().q.size());
    const int nu = static_cast<int>(rows.front().tau.size());
    const int nc = static_cast<int>(rows.front().refCmdVel.size());
    os << "t";
    for (int i = 0; i < nq; ++i) os << ",q" << i;
    for (int i = 0; i < nq; ++i) os << ",v" << i;
    for (int i = 0; i < nu; ++i) os << ",tau" << i;
    for (int i = 0; i < nc; ++i) os << ",cmd" << i;
    os << ",base_residual,wbc_status,pd_fallback,contacts,lambda\n";
    char buf[40];
    const auto put = [&](scalar_t x) {
      std::snprintf(buf, sizeof(buf), "%.17g", x);
      os << buf;
    };
    for (const auto& r : rows) {
      put(r.t);
      for (int i = 0; i < nq; ++i) { os << ','; put(r.q(i)); }
      for (int i = 0; i < nq; ++i) { os << ','; put(r.v(i)); }
      for (int i = 0; i < nu; ++i) { os << ','; put(r.tau(i)); }
      for (int i = 0; i < nc; ++i) { os << ','; put(r.refCmdVel(i)); }
      os << ',';
      put(r.baseResidual);
      os << ',' << r.wbcStatus << ',' << r.pdFallback << ',';
      for (size_t i = 0; i < r.contactNames.size(); ++i) {
        if (i) os << '|';
        os << r.contactNames[i];
      }
      os << ',';
      for (int i = 0; i < r.lambda.size(); ++i) {
        if (i) os << '|';
        put(r.lambda(i));
      }
      os << '\n';
    }
    for (const auto& e : events) os << "# event," << e.t << ',' << e.what << '\n';
  }

  void writeCsv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw ConfigError("cannot open trace output: " + path);
    write(os);
  }

  std::string csvString() const {
    std::ostringstream ss;
    write(ss);
    return ss.str();
  }
};

/// Rigid-body simulator with gait-prescribed contact states.  Feet the gait
/// declares in stance are pinned to their touchdown anchors through a
/// constraint-force solve; declared-swing feet are simply unconstrained.
/// There is no impact model: touchdown re-anchors the constraint at the
/// foot's actual position.
class Simulator {
 public:
  Simulator(RobotModel model, const SimConfig& cfg, GaitSchedule schedule)
      : model_(std::move(model)), cfg_(cfg), schedule_(std::move(schedule)) {}

  const RobotModel& model() const { return model_; }
  const State& state() const { return state_; }
  scalar_t time() const { return t_; }
  bool fallen() const { return fallen_; }
  const std::vector<SimEvent>& events() const { return events_; }
  const vector_t& lastForces() const { return lastLambda_; }
  const ContactSet& lastContacts() const { return lastContacts_; }
  const std::map<int, vector3_t>& anchors() const { return anchors_; }

  void reset(const State& s0, scalar_t t0 = 0.0) {
    state_ = s0;
    t_ = t0;
    fallen_ = false;
    events_.clear();
    anchors_.clear();
    stanceBefore_.clear();
    slipReleased_.clear();
    const Kinematics kin = model_.kinematics(s0.q, s0.v);
    for (int f = 0; f < static_cast<int>(model_.contactFrames().size()); ++f) {
      const bool st = schedule_.inStance(f, t0);
      stanceBefore_[f] = st;
      if (st) anchors_[f] = model_.pointKinematics(kin, f).position;
    }
    lastLambda_.resize(0);
    lastContacts_ = ContactSet{};
  }

  /// Advances one step under joint torques `tau` (semi-implicit Euler).
  void step(const vector_t& tau) {
    if (fallen_) { t_ += cfg_.dt; return; }
    const int nv = model_.nv();
    const int nb = model_.baseDim();

    refreshAnchors();
    std::vector<std::string> names;
    std::vector<int> frames;
    for (int f = 0; f < static_cast<int>(model_.contactFrames().size()); ++f) {
      if (stanceBefore_[f] && !slipReleased_.count(f)) {
        names.push_back(model_.contactFrames()[f].name);
        frames.push_back(f);
      }
    }

    const Kinematics kin = model_.kinematics(state_.q, state_.v);
    const matrix_t M = model_.massMatrix(kin);
    vector_t rhs = -model_.nonlinearEffects(kin);
    rhs.tail(model_.numJoints()) += tau;
    for (const auto& d : cfg_.disturbances) {
      if (t_ >= d.start && t_ < d.stop) rhs.head(nb) += d.wrench;
    }

    Eigen::LLT<matrix_t> Mllt(M);
    if (Mllt.info() != Eigen::Success) throw NumericalError("sim mass matrix not positive definite");

    vector_t lambda;
    ContactSet cs;
    if (!names.empty()) {
      cs = makeContactSet(model_, names);
      const ContactKinematics ck = stackContactKinematics(model_, kin, cs);
      const int m = 3 * cs.count();
      // Constraint-space dynamics: a_c = G lambda + r0 with G = Jc M^-1 Jc^T.
      const matrix_t MinvJt = Mllt.solve(ck.jacobian.transpose());
      matrix_t G = ck.jacobian * MinvJt;
      G.diagonal().array() += 1e-10;
      // Baumgarte-stabilized target acceleration against the anchors.
      vector_t target(m);
      for (int i = 0; i < cs.count(); ++i) {
        const int f = frames[static_cast<size_t>(i)];
        const vector3_t phi = ck.positions.segment<3>(3 * i) - anchors_.at(f);
        target.segment<3>(3 * i) = -2.0 * cfg_.baumgarteAlpha * ck.velocities.segment<3>(3 * i) -
                                   cfg_.baumgarteBeta * cfg_.baumgarteBeta * phi;
      }
      const vector_t r0 = ck.jacobian * Mllt.solve(rhs) + ck.jdotV;
      // min || G lambda + r0 - target ||^2 over the friction pyramid.
      QpProblem qp;
      qp.H = 2.0 * (G.transpose() * G);
      qp.g = 2.0 * G.transpose() * (r0 - target);
      const FrictionPyramid pyr = groundPyramid(cs);
      qp.Ain = pyr.C;
      qp.bin = pyr.n;
      qp.Aeq.resize(0, m);
      qp.beq.resize(0);
      const QpSolution sol = contactQp_.solve(qp);
      if (sol.status == QpStatus::kOptimal || sol.status == QpStatus::kMaxIter) {
        lambda = sol.x;
      } else {
        lambda = vector_t::Zero(m);
        events_.push_back({t_, "contact_qp_failed"});
      }
      releaseWorstSlip(cs, frames, ck, lambda);
      rhs += ck.jacobian.transpose() * lambda;
    } else {
      lambda.resize(0);
    }

    const vector_t vdot = Mllt.solve(rhs);
    state_.v += cfg_.dt * vdot;
    state_.q += cfg_.dt * state_.v;
    for (int i = (model_.baseType() == BaseType::kSpatial) ? 3 : 2; i < nb; ++i) {
      state_.q(i) = wrapAngle(state_.q(i));
    }
    t_ += cfg_.dt;
    lastLambda_ = lambda;
    lastContacts_ = cs;
    checkFall();
  }

  /// Total mechanical energy with the staggered (leapfrog-consistent)
  /// convention: kinetic at the current velocity, potential at the position
  /// half a step behind the velocity update.  Exactly conserved (to rounding)
  /// for force-free flight under the semi-implicit integrator.
  scalar_t discreteEnergy() const {
    const vector_t qMid = state_.q - 0.5 * cfg_.dt * state_.v;
    const Kinematics kin = model_.kinematics(state_.q, state_.v);
    const matrix_t M = model_.massMatrix(kin);
    return 0.5 * state_.v.dot(M * state_.v) + potentialEnergy(qMid);
  }

  scalar_t potentialEnergy(const vector_t& q) const {
    const Kinematics kin = model_.kinematics(q, vector_t::Zero(model_.nv()));
    scalar_t pe = 0.0;
    for (size_t i = 0; i < model_.bodies().size(); ++i) {
      const vector3_t com = kin.body[i].p + kin.body[i].R * model_.bodies()[i].com;
      pe += model_.bodies()[i].mass * kGravity * com.z();
    }
    return pe;
  }

 private:
  FrictionPyramid groundPyramid(const ContactSet& cs) const {
    // Same facet geometry as the controller-side pyramid but with the
    // ground's friction coefficient and no force cap: the simulator imposes
    // physics, not policy.
    const scalar_t muEff = cfg_.mu / std::sqrt(2.0);
    const int m = cs.count();
    FrictionPyramid pyr;
    pyr.rowsPerContact = 5;
    pyr.C = matrix_t::Zero(5 * m, 3 * m);
    pyr.n = vector_t::Zero(5 * m);
    for (int i = 0; i < m; ++i) {
      const int r = 5 * i, c = 3 * i;
      pyr.C(r + 0, c + 0) = 1.0;  pyr.C(r + 0, c + 2) = -muEff;
      pyr.C(r + 1, c + 0) = -1.0; pyr.C(r + 1, c + 2) = -muEff;
      pyr.C(r + 2, c + 1) = 1.0;  pyr.C(r + 2, c + 2) = -muEff;
      pyr.C(r + 3, c + 1) = -1.0; pyr.C(r + 3, c + 2) = -muEff;
      pyr.C(r + 4, c + 2) = -1.0;
    }
    return pyr;
  }

  void refreshAnchors() {
    const Kinematics kin = model_.kinematics(state_.q, state_.v);
    for (int f = 0; f < static_cast<int>(model_.contactFrames().size()); ++f) {
      const bool st = schedule_.inStance(f, t_);
      if (st && !stanceBefore_[f]) {
        // Touchdown: pin where the foot actually is, projected to the ground.
        vector3_t p = model_.pointKinematics(kin, f).position;
        p.z() = 0.0;
        anchors_[f] = p;
        slipReleased_.erase(f);
        events_.push_back({t_, "touchdown:" + model_.contactFrames()[f].name});
      } else if (!st && stanceBefore_[f]) {
        anchors_.erase(f);
        slipReleased_.erase(f);
        events_.push_back({t_, "liftoff:" + model_.contactFrames()[f].name});
      }
      stanceBefore_[f] = st;
    }
  }

  /// A pinned contact whose foot point moves tangentially faster than the
  /// slip threshold loses its anchor for the rest of the stance window (the
  /// worst offender per step, to keep the event stream readable).
  void releaseWorstSlip(const ContactSet& cs, const std::vector<int>& frames,
                        const ContactKinematics& ck, vector_t& lambda) {
    int worst = -1;
    scalar_t worstSpeed = cfg_.slipSpeed;
    for (int i = 0; i < cs.count(); ++i) {
      const scalar_t sp = ck.velocities.segment<2>(3 * i).norm();
      if (sp > worstSpeed) { worstSpeed = sp; worst = i; }
    }
    if (worst < 0) return;
    const int f = frames[static_cast<size_t>(worst)];
    slipReleased_.insert(f);
    lambda.segment<3>(3 * worst).setZero();
    events_.push_back({t_, "slip_release:" + model_.contactFrames()[f].name});
  }

  void checkFall() {
    bool bad = model_.basePosition(state_.q).z() < cfg_.fallHeight;
    const vector3_t rpy = model_.baseRpy(state_.q);
    bad = bad || std::abs(rpy.x()) > cfg_.fallAngle || std::abs(rpy.y()) > cfg_.fallAngle;
    if (bad && !fallen_) {
      fallen_ = true;
      events_.push_back({t_, "fall"});
    }
  }

  RobotModel model_;
  SimConfig cfg_;
  GaitSchedule schedule_;
  State state_;
  scalar_t t_ = 0.0;
  bool fallen_ = false;
  std::map<int, vector3_t> anchors_;
  std::map<int, bool> stanceBefore_;
  std::set<int> slipReleased_;
  std::vector<SimEvent> events_;
  QpSolver contactQp_;
  vector_t lastLambda_;
  ContactSet lastContacts_;
};

enum class ResolveMode { kInterleaved, kAsync };

struct ClosedLoopOptions {
  scalar_t duration = 10.0;
  ResolveMode mode = ResolveMode::kInterleaved;
  bool recordTiming = true;
};

/// Runs controller and simulator in lock-step at the control tick rate: on
/// each tick the controller computes torques from the current state, then the
/// physics integrates.  The slow horizon re-solve runs either inline
/// (kInterleaved) or on a helper thread that is joined before the tick that
/// would first observe the published policy (kAsync).  Both schedules hand
/// the controller identical inputs in an identical order, so the traces they
/// produce are bit-identical; only wall-clock timing differs.
///
/// The plant uses link masses scaled by SimConfig::massScale while the
/// controller keeps the nominal model, so closed-loop results do not assume a
/// perfect model.
inline SimTrace runClosedLoop(const RobotModel& model, const ControllerConfig& cfg,
                              std::shared_ptr<const MotionReference> ref, const State& s0,
                              const SimConfig& simCfg, const ClosedLoopOptions& opt) {
  if (std::abs(simCfg.dt - 1.0 / cfg.wbc.tickHz) > 1e-12) {
    throw ConfigError("simulator step must equal the controller tick period");
  }
  TickController ctrl(model, cfg, ref);
  RobotModel plant = (simCfg.massScale == 1.0)
                         ? model
                         : model.perturbed(uniformMassPerturbation(model, simCfg.massScale));
  Simulator sim(std::move(plant), simCfg, ref->schedule());
  sim.reset(s0, 0.0);

  const int nTicks = static_cast<int>(std::llround(opt.duration / simCfg.dt));
  const int ticksPerResolve = static_cast<int>(cfg.wbc.tickHz) / static_cast<int>(cfg.lqr.resolveHz);
  SimTrace trace;
  trace.rows.reserve(static_cast<size_t>(nTicks));

  for (int k = 0; k < nTicks; ++k) {
    const scalar_t t = k * simCfg.dt;
    if (k % ticksPerResolve == 0) {
      const State snap = sim.state();
      if (opt.mode == ResolveMode::kInterleaved) {
        ctrl.resolvePolicy(snap, t);
      } else {
        // The future is joined before this tick runs, so the tick observes
        // exactly what the interleaved schedule would.
        std::async(std::launch::async, [&ctrl, snap, t] { ctrl.resolvePolicy(snap, t); }).get();
      }
    }
    TickOutput out;
    try {
      out = ctrl.tick(sim.state(), t);
    } catch (const NumericalError& e) {
      trace.events.push_back({t, std::string("controller_abort: ") + e.what()});
      trace.fell = true;
      trace.fallTime = t;
      break;
    }
    sim.step(out.tau);

    TraceRow row;
    row.t = t;
    row.q = sim.state().q;
    row.v = sim.state().v;
    row.tau = out.tau;
    row.refCmdVel = ref->commandVelocity(t);
    row.basePoseRef = ref->base(t).y;
    row.lambda = sim.lastForces();
    row.contactNames = sim.lastContacts().names;
    row.baseResidual = out.diag.baseResidual;
    row.wbcStatus = static_cast<int>(out.diag.wbcStatus);
    row.pdFallback = out.diag.pdFallback ? 1 : 0;
    trace.rows.push_back(std::move(row));
    if (opt.recordTiming) {
      trace.wbcMs.push_back(out.diag.wbcSolveMs);
      if (out.diag.lqrSolveMs > 0.0) trace.lqrMs.push_back(out.diag.lqrSolveMs);
    }
    for (const auto& ev : out.diag.events) trace.events.push_back({t, ev});
    if (sim.fallen()) {
      trace.fell = true;
      trace.fallTime = sim.time();
      break;
    }
  }
  for (const auto& ev : sim.events()) trace.events.push_back(ev);
  std::stable_sort(trace.events.begin(), trace.events.end(),
                   [](const SimEvent& a, const SimEvent& b) { return a.t < b.t; });
  return trace;
}

}  // namespace strider
