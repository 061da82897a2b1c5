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

#include "strider/contact.hpp"
#include "strider/qp.hpp"
#include "strider/reference.hpp"
#include "strider/robot_model.hpp"
#include "strider/types.hpp"

namespace strider {

/// Hand-tuned floating-base feedback: a_b = -Kp (y - y*) - Kd (yd - yd*) + ydd*.
/// Orientation errors listed in `angleIndices` are wrapped to (-pi, pi].
inline vector_t pdBaseAcceleration(const vector_t& y, const vector_t& yd, const BaseReference& ref,
                                   scalar_t kp, scalar_t kd, const std::vector<int>& angleIndices) {
  vector_t ey = y - ref.y;
  for (int i : angleIndices) ey(i) = wrapAngle(ey(i));
  return -kp * ey - kd * (yd - ref.yd) + ref.ydd;
}

struct WbcWeights {
  scalar_t base = 100.0;
  scalar_t swing = 100.0;
  scalar_t force = 30.0;
  scalar_t regAccel = 1e-4;
  scalar_t regTorque = 1e-6;
};

/// Desired world acceleration of one swing foot (feedback already folded in).
struct SwingTarget {
  int frame = 0;
  vector3_t accel = vector3_t::Zero();
};

/// Inverse-dynamics QP over (vdot, tau, lambda):
///   minimize   w_b ||vdot_b - a_b||^2 + w_sw sum ||J vdot + drift - a_des||^2
///            + w_f ||lambda - lambda_ref||^2 + regularization
///   subject to M vdot + b = S^T tau + Jc^T lambda      (full dynamics)
///              Jc vdot = -Jcdot v                       (contacts stay still)
///              |tau| <= tau_max,  C lambda <= n         (actuation and friction)
struct WbcProblem {
  QpProblem qp;
  int nv = 0, nu = 0, nf = 0;
  vector_t aBase;
  std::vector<SwingTarget> swing;
  std::vector<matrix_t> swingJ;
  std::vector<vector3_t> swingDrift;
};

inline WbcProblem buildWbcProblem(const RobotModel& model, const Kinematics& kin, const matrix_t& M,
                                  const vector_t& b, const ContactKinematics& ck,
                                  const FrictionPyramid& pyr, const vector_t& aBase,
                                  const std::vector<SwingTarget>& swing, const vector_t& lambdaRef,
                                  const WbcWeights& w) {
  const int nv = model.nv();
  const int nu = model.numJoints();
  const int nf = static_cast<int>(ck.jacobian.rows());
  const int nb = model.baseDim();
  const int n = nv + nu + nf;
  if (lambdaRef.size() != nf) throw std::invalid_argument("buildWbcProblem: lambdaRef size");

  WbcProblem out;
  out.nv = nv;
  out.nu = nu;
  out.nf = nf;
  out.aBase = aBase;
  out.swing = swing;

  QpProblem& qp = out.qp;
  qp.H = matrix_t::Zero(n, n);
  qp.g = vector_t::Zero(n);

  // Floating-base task: the base coordinates are the task coordinates, so the
  // task Jacobian is [I 0] and the drift term vanishes.
  qp.H.topLeftCorner(nb, nb) += 2.0 * w.base * matrix_t::Identity(nb, nb);
  qp.g.head(nb) -= 2.0 * w.base * aBase;

  for (const auto& sw : swing) {
    const FramePointData fd = model.pointKinematics(kin, sw.frame);
    out.swingJ.push_back(fd.jacobian);
    out.swingDrift.push_back(fd.jdotV);
    qp.H.topLeftCorner(nv, nv) += 2.0 * w.swing * fd.jacobian.transpose() * fd.jacobian;
    qp.g.head(nv) += 2.0 * w.swing * fd.jacobian.transpose() * (fd.jdotV - sw.accel);
  }

  qp.H.topLeftCorner(nv, nv) += 2.0 * w.regAccel * matrix_t::Identity(nv, nv);
  qp.H.block(nv, nv, nu, nu) += 2.0 * w.regTorque * matrix_t::Identity(nu, nu);
  if (nf > 0) {
    qp.H.block(nv + nu, nv + nu, nf, nf) += 2.0 * w.force * matrix_t::Identity(nf, nf);
    qp.g.tail(nf) -= 2.0 * w.force * lambdaRef;
  }
  qp.H = 0.5 * (qp.H + qp.H.transpose());

  qp.Aeq = matrix_t::Zero(nv + nf, n);
  qp.beq = vector_t::Zero(nv + nf);
  qp.Aeq.topLeftCorner(nv, nv) = M;
  qp.Aeq.block(0, nv, nv, nu) = -model.selectionMatrix().transpose();
  if (nf > 0) qp.Aeq.topRightCorner(nv, nf) = -ck.jacobian.transpose();
  qp.beq.head(nv) = -b;
  if (nf > 0) {
    qp.Aeq.bottomLeftCorner(nf, nv) = ck.jacobian;
    qp.beq.tail(nf) = -ck.jdotV;
  }

  const int nIneq = 2 * nu + static_cast<int>(pyr.C.rows());
  qp.Ain = matrix_t::Zero(nIneq, n);
  qp.bin = vector_t::Zero(nIneq);
  qp.Ain.block(0, nv, nu, nu) = matrix_t::Identity(nu, nu);
  qp.bin.head(nu) = model.torqueLimits();
  qp.Ain.block(nu, nv, nu, nu) = -matrix_t::Identity(nu, nu);
  qp.bin.segment(nu, nu) = model.torqueLimits();
  if (pyr.C.rows() > 0) {
    qp.Ain.bottomRightCorner(pyr.C.rows(), nf) = pyr.C;
    qp.bin.tail(pyr.C.rows()) = pyr.n;
  }
  return out;
}

enum class WbcStatus { kOk, kDegraded, kEmergency };

struct WbcSolution {
  vector_t vdot;
  vector_t tau;
  vector_t lambda;
  WbcStatus status = WbcStatus::kEmergency;
  QpStatus qpStatus = QpStatus::kMaxIter;
  scalar_t baseResidual = 0.0;   ///< || vdot_b - a_b ||, the convergence-condition gap
  scalar_t swingResidual = 0.0;  ///< worst swing-task residual norm
  scalar_t eqResidual = 0.0;     ///< worst dynamics/contact equality violation
  int qpIterations = 0;
};

inline WbcSolution solveWbc(const WbcProblem& prob, QpSolver& solver) {
  const QpSolution qs = solver.solve(prob.qp);
  WbcSolution out;
  out.qpStatus = qs.status;
  out.qpIterations = qs.iterations;
  if (qs.status == QpStatus::kInfeasible) {
    out.status = WbcStatus::kEmergency;
    out.vdot = vector_t::Zero(prob.nv);
    out.tau = vector_t::Zero(prob.nu);
    out.lambda = vector_t::Zero(prob.nf);
    return out;
  }
  out.vdot = qs.x.head(prob.nv);
  out.tau = qs.x.segment(prob.nv, prob.nu);
  out.lambda = qs.x.tail(prob.nf);
  out.status = (qs.status == QpStatus::kOptimal) ? WbcStatus::kOk : WbcStatus::kDegraded;

  const int nb = static_cast<int>(prob.aBase.size());
  out.baseResidual = (out.vdot.head(nb) - prob.aBase).norm();
  for (size_t i = 0; i < prob.swingJ.size(); ++i) {
    const vector3_t r =
        prob.swingJ[i] * out.vdot + prob.swingDrift[i] - prob.swing[i].accel;
    out.swingResidual = std::max(out.swingResidual, r.norm());
  }
  out.eqResidual = (prob.qp.Aeq * qs.x - prob.qp.beq).cwiseAbs().maxCoeff();
  return out;
}

}  // namespace strider
