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

#include <chrono>
#include <map>
#include <memory>

#include "strider/config.hpp"
#include "strider/contact.hpp"
#include "strider/lqr.hpp"
#include "strider/qp.hpp"
#include "strider/reduction.hpp"
#include "strider/reference.hpp"
#include "strider/robot_model.hpp"
#include "strider/wbc.hpp"

namespace strider {

struct TickDiagnostics {
  WbcStatus wbcStatus = WbcStatus::kEmergency;
  QpStatus refQpStatus = QpStatus::kMaxIter;
  scalar_t baseResidual = 0.0;
  bool pdFallback = false;      ///< Riccati mode degraded to the PD law this tick
  scalar_t wbcSolveMs = 0.0;
  scalar_t lqrSolveMs = 0.0;    ///< nonzero only on re-solve ticks
  int wbcIterations = 0;
  std::vector<std::string> events;
};

struct TickOutput {
  vector_t tau;
  TickDiagnostics diag;
};

/// Whole-body control loop: a 100 Hz horizon re-solve producing either a
/// Riccati force policy or a force plan for the PD mode, and a 1 kHz
/// inverse-dynamics tick.  The controller plans on its own nominal model and
/// the open-loop motion reference; feedback enters through the measured state
/// at the re-solve, the policy's state feedback, the base PD law, and
/// measured-liftoff swing re-planning.
class TickController {
 public:
  TickController(const RobotModel& model, const ControllerConfig& cfg,
                 std::shared_ptr<const MotionReference> reference)
      : model_(model), cfg_(cfg), ref_(std::move(reference)) {
    cfg_.validate();
    riccatiMode_ = cfg_.wbc.mode == "riccati";
    fzCap_ = cfg_.wbc.fzCapFactor * model_.totalMass() * kGravity;
    if (model_.baseType() == BaseType::kSpatial) {
      poseAngleIdx_ = {3, 4, 5};
      stateAngleIdx_ = {3, 4, 5};
    } else {
      poseAngleIdx_ = {2};
      stateAngleIdx_ = {2};
    }
    lastTau_ = vector_t::Zero(model_.numJoints());
  }

  const PolicyBuffer& policyBuffer() const { return buffer_; }

  /// Horizon re-solve at the slow cadence.  Publishes a fresh policy (Riccati
  /// mode) or force plan (PD mode); on numerical trouble the previous policy
  /// stays in place and an event is recorded into the next tick diagnostics.
  void resolvePolicy(const State& measured, scalar_t t) {
    const auto tic = std::chrono::steady_clock::now();
    try {
      const LinearModelSequence seq = buildSequence(measured, t);
      const LqrCost cost = horizonCost();
      const ReferenceQpResult refSol = solveReferenceQp(seq, cost, refQpSolver_);
      lastRefQpStatus_ = refSol.status;
      if (refSol.status == QpStatus::kInfeasible) {
        pendingEvents_.push_back("reference_qp_infeasible");
        return;
      }

      auto policy = std::make_shared<RiccatiPolicy>();
      if (riccatiMode_) {
        std::vector<BarrierExpansion> barriers(seq.N());
        for (int i = 0; i < seq.N(); ++i) {
          const auto& step = seq.steps[i];
          const vector_t clamped = clampIntoPyramid(model_, step.contacts, refSol.lambda[i],
                                                    cfg_.lqr.slackFloor, fzCap_);
          const BarrierExpansion atClamped =
              expandLogBarrier(step.pyramid.C, step.pyramid.n, clamped, cfg_.lqr.barrierWeight);
          barriers[i] = recenterExpansion(atClamped, refSol.lambda[i] - clamped);
        }
        *policy = riccatiBackwardPass(seq, refSol.xbar, refSol.lambda, cost, barriers);
      } else {
        // PD mode only needs the planned forces as a soft target.
        policy->validFrom = seq.t0;
        policy->dt = seq.dt;
        policy->lambdaBar = refSol.lambda;
        policy->xbar = refSol.xbar;
        policy->F.resize(seq.N());
        policy->f.resize(seq.N());
        policy->contacts.resize(seq.N());
        for (int i = 0; i < seq.N(); ++i) {
          const int nf = static_cast<int>(refSol.lambda[i].size());
          policy->F[i] = matrix_t::Zero(nf, seq.stateDim());
          policy->f[i] = vector_t::Zero(nf);
          policy->contacts[i] = seq.steps[i].contacts;
        }
      }
      buffer_.publish(policy);
    } catch (const NumericalError& e) {
      pendingEvents_.push_back(std::string("resolve_failed: ") + e.what());
    }
    lastLqrMs_ = std::chrono::duration<scalar_t, std::milli>(std::chrono::steady_clock::now() - tic).count();
  }

  TickOutput tick(const State& measured, scalar_t t) {
    TickOutput out;
    out.diag.events = std::move(pendingEvents_);
    pendingEvents_.clear();
    out.diag.lqrSolveMs = lastLqrMs_;
    out.diag.refQpStatus = lastRefQpStatus_;
    lastLqrMs_ = 0.0;

    if (model_.nearEulerSingularity(measured.q)) {
      throw NumericalError("controller abort: base pitch near the Euler-rate singularity");
    }

    const int nb = model_.baseDim();
    const Kinematics kin = model_.kinematics(measured.q, measured.v);
    const matrix_t M = model_.massMatrix(kin);
    const vector_t b = model_.nonlinearEffects(kin);
    const ContactSet contacts = ref_->activeContacts(t);
    const ContactKinematics ck = stackContactKinematics(model_, kin, contacts);
    const FrictionPyramid pyr = frictionPyramid(model_, contacts, fzCap_);
    const BaseReference baseRef = ref_->base(t);

    // Floating-base acceleration command and the force-tracking target.
    vector_t aBase;
    vector_t lambdaRef = vector_t::Zero(contacts.forceDim());
    bool usedPd = !riccatiMode_;
    const auto policy = buffer_.get();

    if (riccatiMode_) {
      bool ok = policy && policy->covers(t);
      if (ok) {
        try {
          const State refState = ref_->referenceState(t);
          const Kinematics kinRef = model_.kinematics(refState.q, refState.v);
          const ContactKinematics ckRef = stackContactKinematics(model_, kinRef, contacts);
          const FloatingBaseBlocks fb = extractFloatingBase(
              model_, model_.massMatrix(kinRef), model_.nonlinearEffects(kinRef), ckRef);
          const ReducedModel rm = reduceModel(fb);
          vector_t x(2 * nb);
          x.head(nb) = measured.q.head(nb);
          x.tail(nb) = measured.v.head(nb);
          const AssembledFeedback fbk =
              assembleFeedback(*policy, t, x, contacts, rm.Blambda, rm.c, stateAngleIdx_);
          aBase = fbk.aBase;
          lambdaRef = fbk.lambda;
        } catch (const NumericalError& e) {
          out.diag.events.push_back(std::string("riccati_fallback: ") + e.what());
          ok = false;
        }
      } else {
        out.diag.events.push_back("policy_stale");
      }
      if (!ok) {
        usedPd = true;
        aBase = pdBaseAcceleration(measured.q.head(nb), measured.v.head(nb), baseRef, cfg_.wbc.kp,
                                   cfg_.wbc.kd, poseAngleIdx_);
      }
    } else {
      aBase = pdBaseAcceleration(measured.q.head(nb), measured.v.head(nb), baseRef, cfg_.wbc.kp,
                                 cfg_.wbc.kd, poseAngleIdx_);
      // Planned forces from the last horizon solve, matched by frame name.
      if (policy && policy->covers(t)) {
        const int k = policy->stepIndex(t);
        for (int i = 0; i < contacts.count(); ++i) {
          const int j = policy->contacts[k].localIndex(contacts.names[i]);
          if (j >= 0) lambdaRef.segment<3>(3 * i) = policy->lambdaBar[k].segment<3>(3 * j);
        }
      } else {
        // Static share of the weight until the first solve lands.
        for (int i = 0; i < contacts.count(); ++i) {
          lambdaRef(3 * i + 2) = model_.totalMass() * kGravity / std::max(1, contacts.count());
        }
      }
    }
    out.diag.pdFallback = riccatiMode_ && usedPd;

    // Swing tasks with measured-liftoff re-planning.
    std::vector<SwingTarget> swing;
    for (int f = 0; f < static_cast<int>(model_.contactFrames().size()); ++f) {
      if (ref_->schedule().inStance(f, t)) continue;
      const auto [s, e] = ref_->schedule().swingWindowAround(f, t);
      const FramePointData fd = model_.pointKinematics(kin, f);
      SwingPlan& plan = swingPlans_[f];
      if (std::abs(plan.start - s) > 1e-9) {
        plan.start = s;
        const FootReference fr = ref_->foot(f, t);
        vector3_t target = fr.swingTarget;
        if (nb >= 3) {
          // Raibert correction from the measured base velocity error, clamped.
          const vector_t cmdVel = ref_->commandVelocity(t);
          Eigen::Vector2d corr;
          if (model_.baseType() == BaseType::kSpatial) {
            corr = cfg_.gait.reference.raibertGain *
                   (measured.v.head<2>() - cmdVel.head<2>());
          } else {
            corr = {cfg_.gait.reference.raibertGain * (measured.v(0) - cmdVel(0)), 0.0};
          }
          const scalar_t cl = 0.08;
          corr.x() = std::clamp(corr.x(), -cl, cl);
          corr.y() = std::clamp(corr.y(), -cl, cl);
          target.x() += corr.x();
          if (model_.baseType() == BaseType::kSpatial) target.y() += corr.y();
        }
        plan.traj = SwingTrajectory::make(fd.position, target, s, e, cfg_.gait.reference.swingHeight);
      }
      vector3_t pRef, vRef, aRef;
      plan.traj.eval(t, pRef, vRef, aRef);
      SwingTarget st;
      st.frame = f;
      st.accel = aRef + cfg_.wbc.swingKp * (pRef - fd.position) + cfg_.wbc.swingKd * (vRef - fd.velocity);
      swing.push_back(st);
    }

    const auto tic = std::chrono::steady_clock::now();
    const WbcProblem prob =
        buildWbcProblem(model_, kin, M, b, ck, pyr, aBase, swing, lambdaRef, cfg_.wbc.weights);
    const WbcSolution sol = solveWbc(prob, wbcSolver_);
    out.diag.wbcSolveMs =
        std::chrono::duration<scalar_t, std::milli>(std::chrono::steady_clock::now() - tic).count();

    out.diag.wbcStatus = sol.status;
    out.diag.baseResidual = sol.baseResidual;
    out.diag.wbcIterations = sol.qpIterations;
    if (sol.status == WbcStatus::kEmergency) {
      out.diag.events.push_back("wbc_infeasible_hold_torque");
      out.tau = lastTau_;
    } else {
      out.tau = sol.tau;
      lastTau_ = sol.tau;
    }
    return out;
  }

  /// Builds the piecewise-linear horizon model about the motion reference,
  /// starting from the measured base state.
  LinearModelSequence buildSequence(const State& measured, scalar_t t) const {
    const int nb = model_.baseDim();
    LinearModelSequence seq;
    seq.t0 = t;
    seq.dt = cfg_.lqr.dt;
    seq.x0 = vector_t(2 * nb);
    seq.x0.head(nb) = measured.q.head(nb);
    seq.x0.tail(nb) = measured.v.head(nb);
    seq.steps.resize(cfg_.lqr.horizon);
    seq.xref.resize(cfg_.lqr.horizon + 1);
    for (int i = 0; i <= cfg_.lqr.horizon; ++i) {
      const scalar_t ti = t + i * cfg_.lqr.dt;
      const BaseReference br = ref_->base(ti);
      seq.xref[i] = vector_t(2 * nb);
      seq.xref[i].head(nb) = br.y;
      seq.xref[i].tail(nb) = br.yd;
      if (i == cfg_.lqr.horizon) break;

      LinearModelStep& step = seq.steps[i];
      step.contacts = ref_->activeContacts(ti);
      const State rs = ref_->referenceState(ti);
      const Kinematics kin = model_.kinematics(rs.q, rs.v);
      const ContactKinematics ck = stackContactKinematics(model_, kin, step.contacts);
      const FloatingBaseBlocks fb = extractFloatingBase(model_, model_.massMatrix(kin),
                                                        model_.nonlinearEffects(kin), ck);
      const ReducedModel rm = reduceModel(fb);
      step.Blambda = rm.Blambda;
      step.c = rm.c;
      step.dyn = discretizeReducedModel(rm, cfg_.lqr.dt);
      step.pyramid = frictionPyramid(model_, step.contacts, fzCap_);
    }
    return seq;
  }

  LqrCost horizonCost() const {
    LqrCost cost;
    cost.Q = cfg_.lqr.stageWeight(model_.baseDim());
    cost.P = cfg_.lqr.pScale * cost.Q;
    cost.rDiag = cfg_.lqr.rDiag;
    return cost;
  }

 private:
  struct SwingPlan {
    scalar_t start = -1.0;
    SwingTrajectory traj;
  };

  RobotModel model_;
  ControllerConfig cfg_;
  std::shared_ptr<const MotionReference> ref_;
  bool riccatiMode_ = true;
  scalar_t fzCap_ = 0.0;
  std::vector<int> poseAngleIdx_, stateAngleIdx_;

  PolicyBuffer buffer_;
  QpSolver refQpSolver_;
  QpSolver wbcSolver_;
  std::map<int, SwingPlan> swingPlans_;
  vector_t lastTau_;
  std::vector<std::string> pendingEvents_;
  scalar_t lastLqrMs_ = 0.0;
  QpStatus lastRefQpStatus_ = QpStatus::kMaxIter;
};

}  // namespace strider
