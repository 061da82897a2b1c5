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

#include <memory>
#include <mutex>
#include <vector>

#include "strider/contact.hpp"
#include "strider/qp.hpp"
#include "strider/reduction.hpp"
#include "strider/types.hpp"

namespace strider {

/// One interval of the piecewise-linear base model along the horizon.
struct LinearModelStep {
  DiscreteBaseStep dyn;
  ContactSet contacts;
  FrictionPyramid pyramid;   ///< force constraints C lambda <= n for this interval
  matrix_t Blambda;          ///< continuous-time force-to-acceleration map
  vector_t c;                ///< continuous-time drift acceleration
};

/// Horizon model: N intervals starting at t0, plus the measured initial state
/// and the task-space reference samples x*_k .. x*_{k+N}.
struct LinearModelSequence {
  scalar_t t0 = 0.0;
  scalar_t dt = 0.0;
  std::vector<LinearModelStep> steps;
  vector_t x0;
  std::vector<vector_t> xref;  ///< N+1 samples

  int N() const { return static_cast<int>(steps.size()); }
  int stateDim() const { return static_cast<int>(x0.size()); }
};

/// Horizon tracking cost: stage state weight Q, terminal weight P and a
/// uniform diagonal force weight r (R_i = rDiag * I).
struct LqrCost {
  matrix_t Q;
  matrix_t P;
  scalar_t rDiag = 1e-3;
};

struct ReferenceQpResult {
  std::vector<vector_t> lambda;  ///< N force vectors
  std::vector<vector_t> xbar;    ///< N+1 states from an exact rollout
  scalar_t objective = 0.0;      ///< full horizon cost including constant terms
  QpStatus status = QpStatus::kMaxIter;
  int qpIterations = 0;
};

/// Solves the horizon tracking problem over the stacked forces with the
/// friction pyramids as hard constraints (a condensed QP: the states are
/// eliminated through the dynamics).  lambda = 0 is always feasible, so the
/// solve cannot require a feasibility phase.
inline ReferenceQpResult solveReferenceQp(const LinearModelSequence& seq, const LqrCost& cost,
                                          QpSolver& solver) {
  const int N = seq.N();
  const int nx = seq.stateDim();
  if (N == 0) throw std::invalid_argument("solveReferenceQp: empty horizon");
  if (static_cast<int>(seq.xref.size()) != N + 1) {
    throw std::invalid_argument("solveReferenceQp: xref must have N+1 samples");
  }

  std::vector<int> offset(N + 1, 0);
  for (int i = 0; i < N; ++i) offset[i + 1] = offset[i] + static_cast<int>(seq.steps[i].dyn.B.cols());
  const int nu = offset[N];

  // Free response and input-to-state map, built incrementally:
  //   x_i = freeResp_i + rowMap_i * u.
  std::vector<matrix_t> rowMap(N + 1);
  std::vector<vector_t> freeResp(N + 1);
  rowMap[0] = matrix_t::Zero(nx, nu);
  freeResp[0] = seq.x0;
  for (int i = 0; i < N; ++i) {
    const auto& st = seq.steps[i].dyn;
    rowMap[i + 1] = st.A * rowMap[i];
    rowMap[i + 1].middleCols(offset[i], st.B.cols()) += st.B;
    freeResp[i + 1] = st.A * freeResp[i] + st.d;
  }

  QpProblem qp;
  qp.H = matrix_t::Zero(nu, nu);
  qp.g = vector_t::Zero(nu);
  scalar_t constant = (seq.x0 - seq.xref[0]).dot(cost.Q * (seq.x0 - seq.xref[0]));
  for (int i = 1; i <= N; ++i) {
    const matrix_t& W = (i == N) ? cost.P : cost.Q;
    const vector_t eFree = freeResp[i] - seq.xref[i];
    qp.H += 2.0 * rowMap[i].transpose() * W * rowMap[i];
    qp.g += 2.0 * rowMap[i].transpose() * (W * eFree);
    constant += eFree.dot(W * eFree);
  }
  for (int i = 0; i < N; ++i) {
    const int nf = offset[i + 1] - offset[i];
    qp.H.block(offset[i], offset[i], nf, nf) += 2.0 * cost.rDiag * matrix_t::Identity(nf, nf);
  }
  qp.H = 0.5 * (qp.H + qp.H.transpose());

  int rows = 0;
  for (int i = 0; i < N; ++i) rows += static_cast<int>(seq.steps[i].pyramid.C.rows());
  qp.Aeq = matrix_t::Zero(0, nu);
  qp.beq = vector_t::Zero(0);
  qp.Ain = matrix_t::Zero(rows, nu);
  qp.bin = vector_t::Zero(rows);
  int r0 = 0;
  for (int i = 0; i < N; ++i) {
    const auto& pyr = seq.steps[i].pyramid;
    const int m = static_cast<int>(pyr.C.rows());
    qp.Ain.block(r0, offset[i], m, pyr.C.cols()) = pyr.C;
    qp.bin.segment(r0, m) = pyr.n;
    r0 += m;
  }

  const QpSolution qs = solver.solve(qp);

  ReferenceQpResult out;
  out.status = qs.status;
  out.qpIterations = qs.iterations;
  out.lambda.resize(N);
  for (int i = 0; i < N; ++i) out.lambda[i] = qs.x.segment(offset[i], offset[i + 1] - offset[i]);
  out.xbar.resize(N + 1);
  out.xbar[0] = seq.x0;
  for (int i = 0; i < N; ++i) {
    const auto& st = seq.steps[i].dyn;
    out.xbar[i + 1] = st.A * out.xbar[i] + st.B * out.lambda[i] + st.d;
  }
  out.objective = qp.objective(qs.x) + constant;
  return out;
}

// ---------------------------------------------------------------------------
// Log-barrier expansion
// ---------------------------------------------------------------------------

/// Second-order model of beta(lambda) = -mu * sum_j ln(n_j - C_j lambda)
/// about an interior point.
struct BarrierExpansion {
  scalar_t value = 0.0;
  vector_t grad;
  matrix_t hess;
};

inline BarrierExpansion expandLogBarrier(const matrix_t& C, const vector_t& n,
                                         const vector_t& lambda, scalar_t mu) {
  if (C.rows() != n.size() || C.cols() != lambda.size()) {
    throw std::invalid_argument("expandLogBarrier: dimension mismatch");
  }
  BarrierExpansion out;
  out.grad = vector_t::Zero(lambda.size());
  out.hess = matrix_t::Zero(lambda.size(), lambda.size());
  const vector_t s = n - C * lambda;
  if (C.rows() > 0 && s.minCoeff() <= 1e-9) {
    throw NumericalError("expandLogBarrier: point is not strictly interior");
  }
  out.value = -mu * s.array().log().sum();
  const vector_t sInv = s.cwiseInverse();
  out.grad = mu * C.transpose() * sInv;
  out.hess = mu * C.transpose() * sInv.array().square().matrix().asDiagonal() * C;
  return out;
}

/// Re-centers a quadratic expansion from its point a to the point a + delta,
/// keeping the same underlying quadratic model.
inline BarrierExpansion recenterExpansion(const BarrierExpansion& e, const vector_t& delta) {
  BarrierExpansion out;
  out.value = e.value + e.grad.dot(delta) + 0.5 * delta.dot(e.hess * delta);
  out.grad = e.grad + e.hess * delta;
  out.hess = e.hess;
  return out;
}

// ---------------------------------------------------------------------------
// Riccati backward pass
// ---------------------------------------------------------------------------

/// Affine force policy lambda(t, x) = lambdaBar_k + f_k + F_k (x - xbar_k)
/// over the horizon the backward pass was run on.
struct RiccatiPolicy {
  scalar_t validFrom = 0.0;
  scalar_t dt = 0.0;
  std::vector<matrix_t> F;
  std::vector<vector_t> f;
  std::vector<vector_t> lambdaBar;
  std::vector<vector_t> xbar;          ///< N+1 nominal states
  std::vector<ContactSet> contacts;    ///< active frames per interval
  std::vector<matrix_t> costToGo;      ///< N+1 matrices, value = e^T costToGo e + ...

  int N() const { return static_cast<int>(F.size()); }
  bool covers(scalar_t t) const {
    return t >= validFrom - 1e-9 && t < validFrom + dt * N() + 1e-9;
  }
  int stepIndex(scalar_t t) const {
    const int k = static_cast<int>(std::floor((t - validFrom) / dt + 1e-9));
    return std::clamp(k, 0, N() - 1);
  }
};

/// Backward pass over the horizon about (xbar, lambdaBar) with per-interval
/// quadratic barrier terms (already centered on lambdaBar).  The nominal
/// trajectory must satisfy the dynamics exactly, so the recursion runs in
/// pure difference coordinates.
inline RiccatiPolicy riccatiBackwardPass(const LinearModelSequence& seq,
                                         const std::vector<vector_t>& xbar,
                                         const std::vector<vector_t>& lambdaBar,
                                         const LqrCost& cost,
                                         const std::vector<BarrierExpansion>& barrier) {
  const int N = seq.N();
  const int nx = seq.stateDim();
  if (static_cast<int>(xbar.size()) != N + 1 || static_cast<int>(lambdaBar.size()) != N) {
    throw std::invalid_argument("riccatiBackwardPass: trajectory size mismatch");
  }
  if (!barrier.empty() && static_cast<int>(barrier.size()) != N) {
    throw std::invalid_argument("riccatiBackwardPass: barrier size mismatch");
  }

  RiccatiPolicy pol;
  pol.validFrom = seq.t0;
  pol.dt = seq.dt;
  pol.F.resize(N);
  pol.f.resize(N);
  pol.lambdaBar = lambdaBar;
  pol.xbar = xbar;
  pol.contacts.resize(N);
  pol.costToGo.resize(N + 1);

  matrix_t S = 2.0 * cost.P;
  vector_t s = 2.0 * cost.P * (xbar[N] - seq.xref[N]);
  pol.costToGo[N] = cost.P;

  for (int i = N - 1; i >= 0; --i) {
    const auto& st = seq.steps[i];
    pol.contacts[i] = st.contacts;
    const matrix_t& A = st.dyn.A;
    const matrix_t& B = st.dyn.B;
    const int nf = static_cast<int>(B.cols());

    matrix_t Rhat = 2.0 * cost.rDiag * matrix_t::Identity(nf, nf);
    vector_t rhat = 2.0 * cost.rDiag * lambdaBar[i];
    if (!barrier.empty()) {
      Rhat += barrier[i].hess;
      rhat += barrier[i].grad;
    }

    const matrix_t SB = S * B;
    const matrix_t Quu = Rhat + B.transpose() * SB;
    const matrix_t Qux = B.transpose() * S * A;
    const vector_t qu = rhat + B.transpose() * s;

    Eigen::LLT<matrix_t> llt(Quu);
    if (llt.info() != Eigen::Success) {
      throw NumericalError("riccatiBackwardPass: Quu is not positive definite");
    }
    pol.F[i] = -llt.solve(Qux);
    pol.f[i] = -llt.solve(qu);

    matrix_t Qhat = matrix_t::Zero(nx, nx);
    vector_t qhat = vector_t::Zero(nx);
    if (i >= 1) {
      Qhat = 2.0 * cost.Q;
      qhat = 2.0 * cost.Q * (xbar[i] - seq.xref[i]);
    }
    matrix_t Snew = Qhat + A.transpose() * S * A + Qux.transpose() * pol.F[i];
    S = 0.5 * (Snew + Snew.transpose());
    s = qhat + A.transpose() * s + Qux.transpose() * pol.f[i];
    pol.costToGo[i] = 0.5 * S;
  }
  return pol;
}

// ---------------------------------------------------------------------------
// Feedback assembly
// ---------------------------------------------------------------------------

struct AssembledFeedback {
  vector_t lambda;  ///< forces in the frame layout of `frames`
  vector_t aBase;   ///< commanded base acceleration
  int step = 0;
};

/// Evaluates the stored policy at time t against the measured base state and
/// maps the force through the current reduced model:
///   a_b = Blambda(t) * (lambdaBar_k + f_k + F_k dx) - c(t).
///
/// `currentContacts` describes the frame layout of `Blambda`; forces are
/// matched between the policy interval's frames and the current frames by
/// name (a frame missing on either side contributes zero).
/// `angleIndices` lists the state components that must be compared on the
/// circle (Euler angles of the base).
inline AssembledFeedback assembleFeedback(const RiccatiPolicy& pol, scalar_t t, const vector_t& x,
                                          const ContactSet& currentContacts,
                                          const matrix_t& Blambda, const vector_t& c,
                                          const std::vector<int>& angleIndices) {
  if (pol.N() == 0 || !pol.covers(t)) {
    throw NumericalError("assembleFeedback: policy does not cover the query time");
  }
  const int k = pol.stepIndex(t);
  vector_t dx = x - pol.xbar[k];
  for (int idx : angleIndices) dx(idx) = wrapAngle(dx(idx));

  const vector_t lambdaPolicy = pol.lambdaBar[k] + pol.f[k] + pol.F[k] * dx;

  AssembledFeedback out;
  out.step = k;
  out.lambda = vector_t::Zero(currentContacts.forceDim());
  for (int i = 0; i < currentContacts.count(); ++i) {
    const int j = pol.contacts[k].localIndex(currentContacts.names[i]);
    if (j >= 0) out.lambda.segment<3>(3 * i) = lambdaPolicy.segment<3>(3 * j);
  }
  out.aBase = Blambda * out.lambda - c;
  return out;
}

/// Shared handoff point between the policy producer (re-solve cadence) and
/// the consumer (control ticks).  A mutex-guarded shared_ptr swap: readers
/// always see a complete, immutable policy.
class PolicyBuffer {
 public:
  void publish(std::shared_ptr<const RiccatiPolicy> pol) {
    std::lock_guard<std::mutex> lock(mutex_);
    policy_ = std::move(pol);
  }
  std::shared_ptr<const RiccatiPolicy> get() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return policy_;
  }
  void clear() {
    std::lock_guard<std::mutex> lock(mutex_);
    policy_.reset();
  }

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const RiccatiPolicy> policy_;
};

}  // namespace strider
