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
#include "strider/robot_model.hpp"
#include "strider/types.hpp"

namespace strider {

/// Floating-base rows of the constrained dynamics: with v = (v_b, v_a),
///   Mb vdot_b + Da vdot_a + bb = Jcb^T lambda,
/// and the contact-consistency condition Jcb vdot_b + Jca vdot_a = -jdotV.
struct FloatingBaseBlocks {
  matrix_t Mb;
  matrix_t Da;
  vector_t bb;
  matrix_t Jcb;
  matrix_t Jca;
  vector_t jdotV;
};

inline FloatingBaseBlocks extractFloatingBase(const RobotModel& model, const matrix_t& M,
                                              const vector_t& b, const ContactKinematics& ck) {
  const int nb = model.baseDim();
  const int nj = model.numJoints();
  if (M.rows() != nb + nj || b.size() != nb + nj || ck.jacobian.cols() != nb + nj) {
    throw std::invalid_argument("extractFloatingBase: dimension mismatch");
  }
  FloatingBaseBlocks out;
  out.Mb = M.topLeftCorner(nb, nb);
  out.Da = M.topRightCorner(nb, nj);
  out.bb = b.head(nb);
  out.Jcb = ck.jacobian.leftCols(nb);
  out.Jca = ck.jacobian.rightCols(nj);
  out.jdotV = ck.jdotV;
  return out;
}

struct ReductionSettings {
  scalar_t svdCutoffRel = 1e-8;    ///< singular values below cutoff*sigma_max are dropped
  scalar_t damping = 1e-6;         ///< damped least squares near the cutoff
  scalar_t conditionLimit = 1e8;   ///< reject reductions with cond(Mb_hat) above this
};

/// Base acceleration as an affine function of the contact forces:
///   vdot_b = Blambda * lambda - c.
/// Joint accelerations follow the minimum-norm branch
///   vdot_a = -Jca^+ (Jcb vdot_b + jdotV).
struct ReducedModel {
  matrix_t Blambda;    ///< nb x 3k
  vector_t c;          ///< nb
  matrix_t MbHat;      ///< apparent base inertia
  matrix_t JcaPinv;    ///< nj x 3k, the pseudo-inverse used in the elimination
  scalar_t condition;  ///< cond(MbHat)
};

/// Truncated/damped SVD pseudo-inverse with the library's pinned policy.
inline matrix_t pseudoInverse(const matrix_t& A, scalar_t cutoffRel = 1e-8,
                              scalar_t damping = 1e-6) {
  if (A.rows() == 0 || A.cols() == 0) return matrix_t::Zero(A.cols(), A.rows());
  Eigen::JacobiSVD<matrix_t> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const vector_t& sv = svd.singularValues();
  const scalar_t cutoff = cutoffRel * (sv.size() > 0 ? sv(0) : 0.0);
  vector_t inv = vector_t::Zero(sv.size());
  for (int i = 0; i < sv.size(); ++i) {
    const scalar_t s = sv(i);
    if (s < cutoff || s == 0.0) {
      inv(i) = 0.0;
    } else if (s < 2.0 * cutoff) {
      inv(i) = s / (s * s + damping * damping);
    } else {
      inv(i) = 1.0 / s;
    }
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

inline ReducedModel reduceModel(const FloatingBaseBlocks& fb,
                                const ReductionSettings& settings = ReductionSettings()) {
  ReducedModel out;
  out.JcaPinv = pseudoInverse(fb.Jca, settings.svdCutoffRel, settings.damping);
  const matrix_t DaJcaPinv = fb.Da * out.JcaPinv;
  out.MbHat = fb.Mb - DaJcaPinv * fb.Jcb;
  const vector_t bbHat = fb.bb - DaJcaPinv * fb.jdotV;

  Eigen::JacobiSVD<matrix_t> svd(out.MbHat);
  const vector_t& sv = svd.singularValues();
  const scalar_t smin = sv(sv.size() - 1);
  out.condition = (smin > 0.0) ? sv(0) / smin : std::numeric_limits<scalar_t>::infinity();
  if (!(out.condition < settings.conditionLimit)) {
    throw NumericalError("reduceModel: apparent base inertia is ill-conditioned (cond = " +
                         std::to_string(out.condition) + ")");
  }

  Eigen::PartialPivLU<matrix_t> lu(out.MbHat);
  out.Blambda = lu.solve(fb.Jcb.transpose());
  out.c = lu.solve(bbHat);
  return out;
}

/// Minimum-norm joint accelerations consistent with the contacts for a given
/// base acceleration.
inline vector_t jointAccelFromBase(const FloatingBaseBlocks& fb, const ReducedModel& rm,
                                   const vector_t& vdotB) {
  return -rm.JcaPinv * (fb.Jcb * vdotB + fb.jdotV);
}

/// One step of the discrete double-integrator model of the base task state
/// x = (y_b, ydot_b):
///   x' = A x + B lambda + d,
///   A = [[I, dt I], [0, I]],  B = [[0], [dt Blambda]],  d = [[0], [-dt c]].
struct DiscreteBaseStep {
  matrix_t A;
  matrix_t B;
  vector_t d;
  scalar_t dt = 0.0;
};

inline DiscreteBaseStep discretizeReducedModel(const ReducedModel& rm, scalar_t dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("discretizeReducedModel: dt must be positive");
  const int nb = static_cast<int>(rm.Blambda.rows());
  const int nf = static_cast<int>(rm.Blambda.cols());
  DiscreteBaseStep s;
  s.dt = dt;
  s.A = matrix_t::Identity(2 * nb, 2 * nb);
  s.A.topRightCorner(nb, nb) = dt * matrix_t::Identity(nb, nb);
  s.B = matrix_t::Zero(2 * nb, nf);
  s.B.bottomRows(nb) = dt * rm.Blambda;
  s.d = vector_t::Zero(2 * nb);
  s.d.tail(nb) = -dt * rm.c;
  return s;
}

}  // namespace strider
