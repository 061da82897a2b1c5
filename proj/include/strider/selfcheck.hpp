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
#include <random>

#include "strider/experiments.hpp"

namespace strider {

/// Outcome of one verification routine.  Each routine is an independent
/// oracle: it recomputes the quantity under test by a different method
/// (finite differences, batch condensation, exhaustive enumeration, stacked
/// linear solves) and compares against the library implementation.
struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

namespace check_detail {

inline std::string num(scalar_t x) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.3e", x);
  return buf;
}

/// Exact rollout of a horizon model under a stacked force sequence.
inline std::vector<vector_t> rollout(const LinearModelSequence& seq,
                                     const std::vector<vector_t>& lambda) {
  std::vector<vector_t> x(seq.N() + 1);
  x[0] = seq.x0;
  for (int i = 0; i < seq.N(); ++i) {
    const auto& d = seq.steps[i].dyn;
    x[i + 1] = d.A * x[i] + d.B * lambda[i] + d.d;
  }
  return x;
}

/// Horizon objective: terminal + stage tracking, force effort, and the
/// quadratic barrier models centered on lambdaBar.
inline scalar_t horizonObjective(const LinearModelSequence& seq, const LqrCost& cost,
                                 const std::vector<BarrierExpansion>& barrier,
                                 const std::vector<vector_t>& lambdaBar,
                                 const std::vector<vector_t>& lambda) {
  const auto x = rollout(seq, lambda);
  scalar_t J = 0.0;
  for (int i = 0; i < seq.N(); ++i) {
    const vector_t e = x[i] - seq.xref[i];
    J += e.dot(cost.Q * e) + cost.rDiag * lambda[i].squaredNorm();
    const vector_t dl = lambda[i] - lambdaBar[i];
    J += barrier[i].value + barrier[i].grad.dot(dl) + 0.5 * dl.dot(barrier[i].hess * dl);
  }
  const vector_t eN = x[seq.N()] - seq.xref[seq.N()];
  J += eN.dot(cost.P * eN);
  return J;
}

/// A synthetic horizon model with double-integrator structure and random
/// force maps, rolled out about a random interior nominal force sequence.
struct SyntheticProblem {
  LinearModelSequence seq;
  LqrCost cost;
  std::vector<BarrierExpansion> barrier;
  std::vector<vector_t> lambdaBar;
  std::vector<vector_t> xbar;
};

inline SyntheticProblem makeSyntheticProblem(std::mt19937& rng, int nb, int N, int nContacts) {
  std::normal_distribution<scalar_t> gauss(0.0, 1.0);
  std::uniform_real_distribution<scalar_t> uni(0.0, 1.0);
  const int nx = 2 * nb;
  const int nf = 3 * nContacts;
  const scalar_t dt = 0.02;

  SyntheticProblem p;
  p.seq.t0 = 0.0;
  p.seq.dt = dt;
  p.seq.x0 = vector_t::NullaryExpr(nx, [&](Eigen::Index) { return 0.3 * gauss(rng); });
  p.seq.steps.resize(N);
  p.seq.xref.resize(N + 1);
  p.lambdaBar.resize(N);
  p.barrier.resize(N);

  for (int i = 0; i <= N; ++i) {
    p.seq.xref[i] = vector_t::NullaryExpr(nx, [&](Eigen::Index) { return 0.2 * gauss(rng); });
  }
  const scalar_t muEff = 0.6 / std::sqrt(2.0);
  for (int i = 0; i < N; ++i) {
    auto& s = p.seq.steps[i];
    s.Blambda = matrix_t::NullaryExpr(nb, nf, [&](Eigen::Index, Eigen::Index) { return gauss(rng); });
    s.c = vector_t::NullaryExpr(nb, [&](Eigen::Index) { return gauss(rng); });
    ReducedModel rm;
    rm.Blambda = s.Blambda;
    rm.c = s.c;
    s.dyn = discretizeReducedModel(rm, dt);
    // Interior nominal forces and the matching pyramid.
    s.pyramid.rowsPerContact = 5;
    s.pyramid.C = matrix_t::Zero(5 * nContacts, nf);
    s.pyramid.n = vector_t::Zero(5 * nContacts);
    vector_t lb = vector_t::Zero(nf);
    for (int k = 0; k < nContacts; ++k) {
      const int r = 5 * k, c = 3 * k;
      s.pyramid.C(r + 0, c + 0) = 1.0;  s.pyramid.C(r + 0, c + 2) = -muEff;
      s.pyramid.C(r + 1, c + 0) = -1.0; s.pyramid.C(r + 1, c + 2) = -muEff;
      s.pyramid.C(r + 2, c + 1) = 1.0;  s.pyramid.C(r + 2, c + 2) = -muEff;
      s.pyramid.C(r + 3, c + 1) = -1.0; s.pyramid.C(r + 3, c + 2) = -muEff;
      s.pyramid.C(r + 4, c + 2) = -1.0;
      const scalar_t fz = 20.0 + 30.0 * uni(rng);
      lb(c + 2) = fz;
      lb(c + 0) = 0.5 * muEff * fz * (2.0 * uni(rng) - 1.0);
      lb(c + 1) = 0.5 * muEff * fz * (2.0 * uni(rng) - 1.0);
    }
    p.lambdaBar[i] = lb;
    p.barrier[i] = expandLogBarrier(s.pyramid.C, s.pyramid.n, lb, 1e-2);
  }
  p.xbar = rollout(p.seq, p.lambdaBar);

  vector_t qd(nx);
  qd.head(nb).setConstant(100.0);
  qd.tail(nb).setConstant(10.0);
  p.cost.Q = qd.asDiagonal();
  p.cost.P = 10.0 * p.cost.Q;
  p.cost.rDiag = 1e-3;
  return p;
}

/// Batch optimum of the barrier-augmented horizon objective by direct
/// condensation over the stacked force increments (independent of the
/// Riccati recursion).
inline scalar_t condensedOptimum(const SyntheticProblem& p) {
  const int N = p.seq.N();
  const int nx = p.seq.stateDim();
  const int nf = static_cast<int>(p.lambdaBar[0].size());
  const int nz = N * nf;

  // Delta-state response: dx_{i} = sum_j Phi_{ij} dlambda_j  (dx_0 = 0).
  std::vector<std::vector<matrix_t>> resp(N + 1, std::vector<matrix_t>(N));
  for (int i = 0; i <= N; ++i) {
    for (int j = 0; j < N; ++j) resp[i][j] = matrix_t::Zero(nx, nf);
  }
  for (int j = 0; j < N; ++j) {
    resp[j + 1][j] = p.seq.steps[j].dyn.B;
    for (int i = j + 1; i < N; ++i) resp[i + 1][j] = p.seq.steps[i].dyn.A * resp[i][j];
  }

  matrix_t H = matrix_t::Zero(nz, nz);
  vector_t g = vector_t::Zero(nz);
  scalar_t c0 = 0.0;

  const auto addStateTerm = [&](int i, const matrix_t& W) {
    const vector_t e = p.xbar[i] - p.seq.xref[i];
    c0 += e.dot(W * e);
    for (int a = 0; a < N; ++a) {
      if (resp[i][a].isZero(0)) continue;
      g.segment(a * nf, nf) += 2.0 * resp[i][a].transpose() * (W * e);
      for (int b = 0; b < N; ++b) {
        if (resp[i][b].isZero(0)) continue;
        H.block(a * nf, b * nf, nf, nf) += 2.0 * resp[i][a].transpose() * W * resp[i][b];
      }
    }
  };
  for (int i = 0; i < N; ++i) addStateTerm(i, p.cost.Q);
  addStateTerm(N, p.cost.P);

  for (int i = 0; i < N; ++i) {
    c0 += p.cost.rDiag * p.lambdaBar[i].squaredNorm() + p.barrier[i].value;
    g.segment(i * nf, nf) += 2.0 * p.cost.rDiag * p.lambdaBar[i] + p.barrier[i].grad;
    H.block(i * nf, i * nf, nf, nf) +=
        2.0 * p.cost.rDiag * matrix_t::Identity(nf, nf) + p.barrier[i].hess;
  }

  const vector_t z = -H.ldlt().solve(g);
  return c0 + g.dot(z) + 0.5 * z.dot(H * z);
}

}  // namespace check_detail

// ---------------------------------------------------------------------------
// Criterion checks
// ---------------------------------------------------------------------------

/// Policy-rollout cost equals the condensed batch optimum on random
/// barrier-augmented horizon problems, and the whole batch stays under the
/// time budget.
inline CheckResult checkRiccatiBatchEquivalence(int problems = 50, scalar_t relTol = 1e-6,
                                                scalar_t budgetSec = 5.0, unsigned seed = 71) {
  using namespace check_detail;
  std::mt19937 rng(seed);
  const auto tic = std::chrono::steady_clock::now();
  scalar_t worst = 0.0;
  for (int p = 0; p < problems; ++p) {
    const int nContacts = (p % 2 == 0) ? 1 : 2;
    SyntheticProblem prob = makeSyntheticProblem(rng, 6, 20, nContacts);
    const RiccatiPolicy pol =
        riccatiBackwardPass(prob.seq, prob.xbar, prob.lambdaBar, prob.cost, prob.barrier);

    // Roll the affine policy forward and accumulate the true objective.
    std::vector<vector_t> lam(prob.seq.N());
    vector_t x = prob.seq.x0;
    for (int i = 0; i < prob.seq.N(); ++i) {
      lam[i] = prob.lambdaBar[i] + pol.f[i] + pol.F[i] * (x - prob.xbar[i]);
      const auto& d = prob.seq.steps[i].dyn;
      x = d.A * x + d.B * lam[i] + d.d;
    }
    const scalar_t rolled = horizonObjective(prob.seq, prob.cost, prob.barrier, prob.lambdaBar, lam);
    const scalar_t batch = condensedOptimum(prob);
    const scalar_t rel = std::abs(rolled - batch) / std::max(scalar_t(1.0), std::abs(batch));
    worst = std::max(worst, rel);
  }
  const scalar_t sec = std::chrono::duration<scalar_t>(std::chrono::steady_clock::now() - tic).count();
  CheckResult r;
  r.name = "riccati vs condensed batch optimum";
  r.pass = worst <= relTol && sec < budgetSec;
  r.detail = std::to_string(problems) + " problems, worst rel gap " + check_detail::num(worst) +
             ", " + check_detail::num(sec) + " s";
  return r;
}

/// Tiny horizon problems with hard force constraints: the condensed QP result
/// must match exhaustive active-set enumeration.
inline CheckResult checkBruteForceCrossCheck(int problems = 25, scalar_t tol = 1e-7,
                                             unsigned seed = 72) {
  std::mt19937 rng(seed);
  std::normal_distribution<scalar_t> gauss(0.0, 1.0);
  scalar_t worst = 0.0;
  bool ok = true;
  std::string note;
  for (int p = 0; p < problems && ok; ++p) {
    // One-dimensional base, two intervals, one force channel, two constraint
    // rows per interval (a box on the force).
    const int nb = 1, N = 2, nf = 1;
    LinearModelSequence seq;
    seq.t0 = 0.0;
    seq.dt = 0.05;
    seq.x0 = vector_t::NullaryExpr(2 * nb, [&](Eigen::Index) { return gauss(rng); });
    seq.steps.resize(N);
    seq.xref.assign(N + 1, vector_t::Zero(2 * nb));
    for (int i = 0; i < N; ++i) {
      auto& s = seq.steps[i];
      ReducedModel rm;
      rm.Blambda = matrix_t::Constant(nb, nf, 1.0 + 0.2 * gauss(rng));
      rm.c = vector_t::Constant(nb, 0.5 * gauss(rng));
      s.Blambda = rm.Blambda;
      s.c = rm.c;
      s.dyn = discretizeReducedModel(rm, seq.dt);
      s.pyramid.rowsPerContact = 2;
      s.pyramid.C = matrix_t::Zero(2, nf);
      s.pyramid.C(0, 0) = 1.0;
      s.pyramid.C(1, 0) = -1.0;
      s.pyramid.n = vector_t::Constant(2, 2.0);  // |lambda| <= 2
      seq.xref[i + 1] = vector_t::NullaryExpr(2 * nb, [&](Eigen::Index) { return gauss(rng); });
    }
    LqrCost cost;
    cost.Q = 10.0 * matrix_t::Identity(2 * nb, 2 * nb);
    cost.P = 100.0 * matrix_t::Identity(2 * nb, 2 * nb);
    cost.rDiag = 1e-2;

    QpSolver solver;
    const ReferenceQpResult res = solveReferenceQp(seq, cost, solver);
    if (res.status != QpStatus::kOptimal) {
      ok = false;
      note = "reference QP not optimal";
      break;
    }

    // Independent condensation of the same problem for the enumerator.
    const matrix_t A0 = seq.steps[0].dyn.A, B0 = seq.steps[0].dyn.B;
    const matrix_t A1 = seq.steps[1].dyn.A, B1 = seq.steps[1].dyn.B;
    const vector_t d0 = seq.steps[0].dyn.d, d1 = seq.steps[1].dyn.d;
    // x1 = A0 x0 + B0 u0 + d0 ; x2 = A1 x1 + B1 u1 + d1.
    QpProblem qp;
    qp.H = matrix_t::Zero(2, 2);
    qp.g = vector_t::Zero(2);
    scalar_t c0 = 0.0;
    const auto addQuad = [&](const matrix_t& W, const vector_t& base, const matrix_t& J0,
                             const matrix_t& J1) {
      c0 += base.dot(W * base);
      qp.g.head(1) += 2.0 * J0.transpose() * (W * base);
      qp.g.tail(1) += 2.0 * J1.transpose() * (W * base);
      qp.H.topLeftCorner(1, 1) += 2.0 * J0.transpose() * W * J0;
      qp.H.topRightCorner(1, 1) += 2.0 * J0.transpose() * W * J1;
      qp.H.bottomLeftCorner(1, 1) += 2.0 * J1.transpose() * W * J0;
      qp.H.bottomRightCorner(1, 1) += 2.0 * J1.transpose() * W * J1;
    };
    const vector_t x1free = A0 * seq.x0 + d0;
    const vector_t x2free = A1 * x1free + d1;
    const matrix_t zero = matrix_t::Zero(2, 1);
    addQuad(cost.Q, x1free - seq.xref[1], B0, zero);
    addQuad(cost.P, x2free - seq.xref[2], A1 * B0, B1);
    qp.H(0, 0) += 2.0 * cost.rDiag;
    qp.H(1, 1) += 2.0 * cost.rDiag;
    qp.Aeq.resize(0, 2);
    qp.beq.resize(0);
    qp.Ain = matrix_t::Zero(4, 2);
    qp.Ain.topLeftCorner(2, 1) = seq.steps[0].pyramid.C;
    qp.Ain.bottomRightCorner(2, 1) = seq.steps[1].pyramid.C;
    qp.bin = vector_t::Constant(4, 2.0);
    const QpSolution brute = bruteForceQp(qp);

    const scalar_t stage0 = (seq.x0 - seq.xref[0]).dot(cost.Q * (seq.x0 - seq.xref[0]));
    const scalar_t bruteObjective = brute.x.size() > 0 ? qp.objective(brute.x) + c0 + stage0
                                                       : std::numeric_limits<scalar_t>::quiet_NaN();
    const scalar_t gap = std::abs(res.objective - bruteObjective) /
                         std::max(scalar_t(1.0), std::abs(bruteObjective));
    worst = std::max(worst, gap);
    if (!(gap <= tol)) {
      ok = false;
      note = "objective gap " + check_detail::num(gap);
    }
  }
  CheckResult r;
  r.name = "horizon QP vs exhaustive enumeration";
  r.pass = ok && worst <= tol;
  r.detail = ok ? ("worst rel gap " + check_detail::num(worst)) : note;
  return r;
}

/// Barrier gradient and Hessian against central finite differences at random
/// interior points.
inline CheckResult checkBarrierDerivatives(int points = 100, scalar_t tol = 1e-5,
                                           unsigned seed = 73) {
  std::mt19937 rng(seed);
  std::normal_distribution<scalar_t> gauss(0.0, 1.0);
  std::uniform_real_distribution<scalar_t> uni(0.0, 1.0);
  scalar_t worstG = 0.0, worstH = 0.0;
  int tested = 0;
  while (tested < points) {
    const int nf = (tested % 2 == 0) ? 3 : 6;
    const int rows = 2 * nf;
    matrix_t C = matrix_t::NullaryExpr(rows, nf, [&](Eigen::Index, Eigen::Index) { return gauss(rng); });
    vector_t lambda = vector_t::NullaryExpr(nf, [&](Eigen::Index) { return gauss(rng); });
    vector_t n = C * lambda;
    for (int i = 0; i < rows; ++i) n(i) += 0.2 + uni(rng);  // slack in [0.2, 1.2]
    const scalar_t mu = 1e-2;
    const BarrierExpansion e = expandLogBarrier(C, n, lambda, mu);

    const auto value = [&](const vector_t& l) {
      const vector_t s = n - C * l;
      return -mu * s.array().log().sum();
    };
    const scalar_t h = 1e-5;
    vector_t gFd(nf);
    matrix_t hFd(nf, nf);
    for (int i = 0; i < nf; ++i) {
      vector_t lp = lambda, lm = lambda;
      lp(i) += h;
      lm(i) -= h;
      gFd(i) = (value(lp) - value(lm)) / (2.0 * h);
      for (int j = 0; j < nf; ++j) {
        vector_t lpp = lambda, lpm = lambda, lmp = lambda, lmm = lambda;
        lpp(i) += h; lpp(j) += h;
        lpm(i) += h; lpm(j) -= h;
        lmp(i) -= h; lmp(j) += h;
        lmm(i) -= h; lmm(j) -= h;
        hFd(i, j) = (value(lpp) - value(lpm) - value(lmp) + value(lmm)) / (4.0 * h * h);
      }
    }
    worstG = std::max(worstG, (e.grad - gFd).norm() / std::max(scalar_t(1.0), gFd.norm()));
    worstH = std::max(worstH, (e.hess - hFd).norm() / std::max(scalar_t(1.0), hFd.norm()));
    ++tested;
  }
  CheckResult r;
  r.name = "barrier derivatives vs finite differences";
  r.pass = worstG <= tol && worstH <= tol;
  r.detail = "grad " + check_detail::num(worstG) + ", hess " + check_detail::num(worstH);
  return r;
}

/// Reduced base dynamics against an independently assembled stacked linear
/// system.  The oracle solves for (vdot_base, vdot_joints) from the base rows
/// of the full dynamics, the contact constraint, and rows pinning the joint
/// accelerations to the minimum-norm representative; the reduced model must
/// reproduce the base acceleration for arbitrary forces.
inline CheckResult checkReducedDynamics(const RobotModel& model, const State& nominal,
                                        int statesPerPhase = 100, scalar_t tol = 1e-8,
                                        unsigned seed = 74) {
  std::mt19937 rng(seed);
  std::normal_distribution<scalar_t> gauss(0.0, 1.0);
  const int nb = model.baseDim();
  const int na = model.numJoints();

  std::vector<std::vector<std::string>> phases;
  const auto& frames = model.contactFrames();
  std::vector<std::string> all;
  for (const auto& f : frames) all.push_back(f.name);
  phases.push_back(all);
  for (const auto& f : frames) phases.push_back({f.name});

  scalar_t worst = 0.0;
  for (const auto& names : phases) {
    const ContactSet cs = makeContactSet(model, names);
    for (int s = 0; s < statesPerPhase; ++s) {
      State st = nominal;
      for (int i = 0; i < st.q.size(); ++i) st.q(i) += 0.05 * gauss(rng);
      for (int i = 0; i < st.v.size(); ++i) st.v(i) = 0.3 * gauss(rng);

      const Kinematics kin = model.kinematics(st.q, st.v);
      const matrix_t M = model.massMatrix(kin);
      const vector_t b = model.nonlinearEffects(kin);
      const ContactKinematics ck = stackContactKinematics(model, kin, cs);
      const FloatingBaseBlocks fb = extractFloatingBase(model, M, b, ck);
      const ReducedModel rm = reduceModel(fb);

      const vector_t lambda =
          vector_t::NullaryExpr(cs.forceDim(), [&](Eigen::Index) { return 30.0 * gauss(rng); });

      // Oracle: stacked system over (vdot_b, vdot_a).
      const int nc = cs.forceDim();
      const matrix_t Jca = ck.jacobian.rightCols(na);
      const matrix_t Jcb = ck.jacobian.leftCols(nb);
      // Null-space basis of the joint contact Jacobian, via SVD so the oracle
      // shares no factorization code with the library path.
      Eigen::JacobiSVD<matrix_t> svd(Jca, Eigen::ComputeFullV);
      int rank = 0;
      const scalar_t svTol = 1e-10 * svd.singularValues()(0);
      for (int i = 0; i < svd.singularValues().size(); ++i) {
        if (svd.singularValues()(i) > svTol) ++rank;
      }
      const int nullDim = na - rank;
      const matrix_t Z = svd.matrixV().rightCols(nullDim);

      matrix_t S(nb + nc + nullDim, nb + na);
      vector_t rhs(nb + nc + nullDim);
      S.topLeftCorner(nb, nb) = M.topLeftCorner(nb, nb);
      S.topRightCorner(nb, na) = M.topRightCorner(nb, na);
      rhs.head(nb) = Jcb.transpose() * lambda - b.head(nb);
      S.block(nb, 0, nc, nb) = Jcb;
      S.block(nb, nb, nc, na) = Jca;
      rhs.segment(nb, nc) = -ck.jdotV;
      if (nullDim > 0) {
        S.bottomLeftCorner(nullDim, nb).setZero();
        S.bottomRightCorner(nullDim, na) = Z.transpose();
        rhs.tail(nullDim).setZero();
      }
      const vector_t sol = S.colPivHouseholderQr().solve(rhs);
      const vector_t vdotBOracle = sol.head(nb);
      const vector_t vdotBReduced = rm.Blambda * lambda - rm.c;
      const scalar_t err = (vdotBOracle - vdotBReduced).norm() /
                           std::max(scalar_t(1.0), vdotBOracle.norm());
      worst = std::max(worst, err);
    }
  }
  CheckResult r;
  r.name = "reduced dynamics vs stacked-system oracle";
  r.pass = worst <= tol;
  r.detail = "worst rel err " + check_detail::num(worst) + " over " +
             std::to_string(static_cast<int>(phases.size()) * statesPerPhase) + " states";
  return r;
}

/// Static double support is exactly feasible; single support with an
/// out-of-range base-acceleration demand leaves a strictly positive residual
/// while every hard constraint still holds.
inline CheckResult checkStanceResiduals(const RobotModel& model, const State& standing,
                                        scalar_t feasTol = 1e-8) {
  WbcWeights w;
  w.regAccel = 1e-6;
  w.regTorque = 1e-10;

  const Kinematics kin = model.kinematics(standing.q, standing.v);
  const matrix_t M = model.massMatrix(kin);
  const vector_t b = model.nonlinearEffects(kin);
  const int nb = model.baseDim();
  const int na = model.numJoints();

  std::vector<std::string> all;
  for (const auto& f : model.contactFrames()) all.push_back(f.name);

  // --- double support, zero commanded base acceleration -------------------
  const ContactSet ds = makeContactSet(model, all);
  const ContactKinematics ckDs = stackContactKinematics(model, kin, ds);
  // Static force distribution: base rows of the dynamics at vdot = 0.
  const matrix_t JcbT = ckDs.jacobian.leftCols(nb).transpose();
  const vector_t lambdaStatic = JcbT.colPivHouseholderQr().solve(b.head(nb));
  const FrictionPyramid pyrDs = frictionPyramid(model, ds);
  QpSolver solver;
  const WbcProblem pDs = buildWbcProblem(model, kin, M, b, ckDs, pyrDs, vector_t::Zero(nb), {},
                                         lambdaStatic, w);
  const WbcSolution sDs = solveWbc(pDs, solver);

  // --- single support, unreachable demand ----------------------------------
  const ContactSet ss = makeContactSet(model, {all.front()});
  const ContactKinematics ckSs = stackContactKinematics(model, kin, ss);
  const FrictionPyramid pyrSs = frictionPyramid(model, ss);
  vector_t aBad = vector_t::Zero(nb);
  aBad.tail(nb - 3).setConstant(5.0);  // spin demands no single contact can realize
  QpSolver solver2;
  const WbcProblem pSs =
      buildWbcProblem(model, kin, M, b, ckSs, pyrSs, aBad, {}, vector_t::Zero(ss.forceDim()), w);
  const WbcSolution sSs = solveWbc(pSs, solver2);

  // Hard-constraint audit of the single-support solution.
  scalar_t hardViolation = sSs.eqResidual;
  for (int i = 0; i < na; ++i) {
    hardViolation = std::max(hardViolation, std::abs(sSs.tau(i)) - model.torqueLimits()(i));
  }
  const vector_t pyrSlack = pyrSs.n - pyrSs.C * sSs.lambda;
  hardViolation = std::max(hardViolation, -pyrSlack.minCoeff());

  CheckResult r;
  r.name = "stance feasibility and underactuation residuals";
  const bool dsOk = sDs.status == WbcStatus::kOk && sDs.baseResidual < feasTol;
  const bool ssOk = sSs.status != WbcStatus::kEmergency && sSs.baseResidual > 1e-3 &&
                    hardViolation <= feasTol;
  r.pass = dsOk && ssOk;
  r.detail = "double-support residual " + check_detail::num(sDs.baseResidual) +
             ", single-support residual " + check_detail::num(sSs.baseResidual) +
             ", hard-constraint violation " + check_detail::num(hardViolation);
  return r;
}

/// Energy conservation in force-free flight of a floating body.
inline CheckResult checkBallisticEnergy(scalar_t driftTol = 1e-6) {
  const nlohmann::json j = {
      {"name", "free_body"},
      {"base",
       {{"type", "spatial"},
        {"name", "body"},
        {"mass", 3.0},
        {"com", {0.0, 0.0, 0.0}},
        {"inertia", {0.03, 0.05, 0.04}}}},
      {"bodies", nlohmann::json::array()},
      {"joints", nlohmann::json::array()},
      {"contacts", nlohmann::json::array()},
      {"limits", {{"torque", 1.0}}}};
  const RobotModel body = RobotModel::loadFromJson(j);

  SimConfig cfg;
  cfg.fallHeight = -1e9;
  cfg.fallAngle = 1e9;
  GaitParams stand;
  stand.type = GaitType::kStand;
  Simulator sim(body, cfg, GaitSchedule(0, stand));
  State s0;
  s0.q = vector_t::Zero(6);
  s0.q(2) = 1.0;
  s0.v = vector_t::Zero(6);
  s0.v(0) = 0.7;
  s0.v(2) = 2.0;
  sim.reset(s0, 0.0);
  const scalar_t e0 = sim.discreteEnergy();
  scalar_t worstDrift = 0.0;
  const vector_t tau(0);
  for (int k = 0; k < 400; ++k) {
    sim.step(tau);
    const scalar_t drift = std::abs(sim.discreteEnergy() - e0) / sim.time();
    worstDrift = std::max(worstDrift, drift);
  }
  CheckResult r;
  r.name = "ballistic energy conservation";
  r.pass = worstDrift < driftTol;
  r.detail = "worst drift " + check_detail::num(worstDrift) + " J/s over 0.4 s flight";
  return r;
}

/// Pinned feet stay on their anchors through a long standing run in the
/// perturbed closed loop.
inline CheckResult checkStanceDrift(const RobotModel& model, scalar_t duration = 10.0,
                                    scalar_t tol = 1e-3) {
  ControllerConfig cfg;
  cfg.gait.type = "stand";
  const State s0 = standingState(model, cfg.gait.reference);
  auto ref = std::make_shared<const MotionReference>(model, cfg.referenceParams(), CommandSignal{},
                                                     s0.q, duration);
  SimConfig simCfg;
  const SimTrace tr = runClosedLoop(model, cfg, ref, s0, simCfg, {duration});

  const RobotModel plant = model.perturbed(uniformMassPerturbation(model, simCfg.massScale));
  const Kinematics kin0 = plant.kinematics(s0.q, s0.v);
  std::vector<vector3_t> feet0;
  for (int f = 0; f < static_cast<int>(plant.contactFrames().size()); ++f) {
    feet0.push_back(plant.pointKinematics(kin0, f).position);
  }
  scalar_t worst = 0.0;
  for (const auto& row : tr.rows) {
    const Kinematics kin = plant.kinematics(row.q, row.v);
    for (int f = 0; f < static_cast<int>(plant.contactFrames().size()); ++f) {
      worst = std::max(worst, (plant.pointKinematics(kin, f).position - feet0[f]).norm());
    }
  }
  CheckResult r;
  r.name = "stance anchor drift";
  r.pass = !tr.fell && worst < tol;
  r.detail = (tr.fell ? std::string("fell; ") : std::string()) + "worst drift " +
             check_detail::num(worst) + " m over " + check_detail::num(duration) + " s";
  return r;
}

/// Reruns and the two re-solve schedules produce byte-identical traces.
inline CheckResult checkDeterminism(const RobotModel& model, scalar_t duration = 2.0) {
  ControllerConfig cfg;
  cfg.gait.type = "biped_walk";
  const State s0 = standingState(model, cfg.gait.reference);
  auto ref = std::make_shared<const MotionReference>(model, cfg.referenceParams(),
                                                     presetCommand(1), s0.q, duration);
  SimConfig simCfg;
  const std::string a =
      runClosedLoop(model, cfg, ref, s0, simCfg, {duration, ResolveMode::kInterleaved}).csvString();
  const std::string b =
      runClosedLoop(model, cfg, ref, s0, simCfg, {duration, ResolveMode::kInterleaved}).csvString();
  const std::string c =
      runClosedLoop(model, cfg, ref, s0, simCfg, {duration, ResolveMode::kAsync}).csvString();
  CheckResult r;
  r.name = "trace determinism (rerun and schedule)";
  r.pass = !a.empty() && a == b && a == c;
  r.detail = "rerun " + std::string(a == b ? "identical" : "DIFFERS") + ", threaded schedule " +
             std::string(a == c ? "identical" : "DIFFERS");
  return r;
}

/// Published-table arithmetic: the improvement percentages recomputed from
/// the quoted MSE pairs.
inline CheckResult checkImprovementArithmetic() {
  const int a = improvementPercent(0.0499, 0.0361);
  const int b = improvementPercent(0.2036, 0.1246);
  CheckResult r;
  r.name = "improvement percentage arithmetic";
  r.pass = (a == 27) && (b == 38);
  r.detail = "0.0499 -> 0.0361 gives " + std::to_string(a) + "%, 0.2036 -> 0.1246 gives " +
             std::to_string(b) + "%";
  return r;
}

/// Solver timing on the shipped biped: horizon re-solve p95 and WBC tick p95.
inline CheckResult checkTiming(const RobotModel& model, scalar_t lqrP95Ms = 10.0,
                               scalar_t wbcP95Ms = 1.0, scalar_t duration = 5.0) {
  ControllerConfig cfg;
  const ExperimentRun run = runExperiment(model, cfg, 1, SimConfig{}, duration);
  CheckResult r;
  r.name = "solver timing percentiles";
  r.pass = !run.result.fell && run.result.lqrMs.p95 < lqrP95Ms && run.result.wbcMs.p95 < wbcP95Ms;
  r.detail = "lqr p95 " + check_detail::num(run.result.lqrMs.p95) + " ms (" +
             std::to_string(run.result.lqrMs.samples) + " solves), wbc p95 " +
             check_detail::num(run.result.wbcMs.p95) + " ms (" +
             std::to_string(run.result.wbcMs.samples) + " ticks)";
  return r;
}

/// The headline ordering: Riccati MSE below every hand-tuned baseline in at
/// least `minWins` of the six presets, per channel.
inline CheckResult checkHeadlineComparison(const RobotModel& model, int minWins = 5,
                                           scalar_t duration = 10.0) {
  ControllerConfig cfg;
  SuiteOptions opt;
  opt.tests = {1, 2, 3, 4, 5, 6};
  opt.duration = duration;
  const SuiteReport rep = runSuite(model, cfg, opt);

  int linWins = 0, angWins = 0;
  std::string perTest;
  for (int test : opt.tests) {
    const ExperimentResult* ric = rep.find(test, "riccati");
    bool linWin = ric && !ric->fell;
    bool angWin = linWin;
    for (const auto& g : userTunedBaselines()) {
      const ExperimentResult* pd = rep.find(test, g.label);
      if (!pd) { linWin = angWin = false; break; }
      if (!pd->fell) {
        linWin = linWin && ric->linearMse < pd->linearMse;
        angWin = angWin && ric->angularMse < pd->angularMse;
      }
    }
    linWins += linWin ? 1 : 0;
    angWins += angWin ? 1 : 0;
    perTest += std::to_string(test) + (linWin ? "L" : "-") + (angWin ? "A" : "-") + " ";
  }
  CheckResult r;
  r.name = "headline Riccati-vs-hand-tuned ordering";
  r.pass = linWins >= minWins && angWins >= minWins && !rep.anyFailure;
  r.detail = "linear wins " + std::to_string(linWins) + "/6, angular wins " +
             std::to_string(angWins) + "/6 [" + perTest + "]" +
             (rep.anyFailure ? " with failures" : "");
  return r;
}

}  // namespace strider
