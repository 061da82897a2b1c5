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
#include <cstdint>
#include <limits>
#include <vector>

#include "strider/types.hpp"

namespace strider {

/// Dense convex quadratic program
///   min 0.5 x^T H x + g^T x
///   s.t. Aeq x = beq,  Ain x <= bin.
/// H must be positive definite on the nullspace of the active rows.
struct QpProblem {
  matrix_t H;
  vector_t g;
  matrix_t Aeq;
  vector_t beq;
  matrix_t Ain;
  vector_t bin;

  int n() const { return static_cast<int>(H.rows()); }
  int numEq() const { return static_cast<int>(Aeq.rows()); }
  int numIn() const { return static_cast<int>(Ain.rows()); }

  void validate() const {
    if (H.rows() != H.cols()) throw std::invalid_argument("QpProblem: H must be square");
    if (g.size() != H.rows()) throw std::invalid_argument("QpProblem: g size mismatch");
    if (Aeq.rows() != beq.size() || (Aeq.rows() > 0 && Aeq.cols() != H.rows())) {
      throw std::invalid_argument("QpProblem: equality dimensions mismatch");
    }
    if (Ain.rows() != bin.size() || (Ain.rows() > 0 && Ain.cols() != H.rows())) {
      throw std::invalid_argument("QpProblem: inequality dimensions mismatch");
    }
  }

  scalar_t objective(const vector_t& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
};

enum class QpStatus { kOptimal, kMaxIter, kInfeasible };

inline const char* toString(QpStatus s) {
  switch (s) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kMaxIter: return "max_iter";
    case QpStatus::kInfeasible: return "infeasible";
  }
  return "?";
}

struct QpSolution {
  vector_t x;
  vector_t eqDuals;
  vector_t inDuals;
  QpStatus status = QpStatus::kMaxIter;
  scalar_t kktResidual = std::numeric_limits<scalar_t>::infinity();
  int iterations = 0;
  std::vector<int> activeSet;
};

struct QpSettings {
  scalar_t tol = 1e-8;
  int maxIter = 200;
};

namespace detail {

/// Max-norm KKT residual: stationarity, primal feasibility, dual feasibility
/// and complementarity.
inline scalar_t qpKktResidual(const QpProblem& p, const vector_t& x, const vector_t& nu,
                              const vector_t& mu) {
  vector_t stat = p.H * x + p.g;
  if (p.numEq() > 0) stat += p.Aeq.transpose() * nu;
  if (p.numIn() > 0) stat += p.Ain.transpose() * mu;
  scalar_t r = stat.cwiseAbs().maxCoeff();
  if (p.numEq() > 0) r = std::max(r, (p.Aeq * x - p.beq).cwiseAbs().maxCoeff());
  if (p.numIn() > 0) {
    const vector_t slack = p.bin - p.Ain * x;
    r = std::max(r, std::max(0.0, -slack.minCoeff()));
    r = std::max(r, std::max(0.0, -mu.minCoeff()));
    r = std::max(r, (mu.array() * slack.array()).abs().maxCoeff());
  }
  return r;
}

/// Solves the KKT system [H A^T; A 0] z = rhs with an LU fallback chain.
inline vector_t solveKkt(const matrix_t& H, const matrix_t& A, const vector_t& rhs, bool* ok) {
  const int n = static_cast<int>(H.rows());
  const int m = static_cast<int>(A.rows());
  matrix_t K = matrix_t::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = H;
  if (m > 0) {
    K.topRightCorner(n, m) = A.transpose();
    K.bottomLeftCorner(m, n) = A;
  }
  Eigen::PartialPivLU<matrix_t> lu(K);
  vector_t z = lu.solve(rhs);
  const scalar_t scale = 1.0 + rhs.cwiseAbs().maxCoeff() + K.cwiseAbs().maxCoeff();
  if (!z.allFinite() || (K * z - rhs).cwiseAbs().maxCoeff() > 1e-8 * scale) {
    Eigen::FullPivLU<matrix_t> flu(K);
    if (!flu.isInvertible()) {
      *ok = false;
      return vector_t::Zero(n + m);
    }
    z = flu.solve(rhs);
    if (!z.allFinite() || (K * z - rhs).cwiseAbs().maxCoeff() > 1e-6 * scale) {
      *ok = false;
      return z;
    }
  }
  *ok = true;
  return z;
}

/// Indices of a maximal independent subset of the rows of A.
inline std::vector<int> independentRows(const matrix_t& A) {
  std::vector<int> keep;
  if (A.rows() == 0) return keep;
  Eigen::ColPivHouseholderQR<matrix_t> qr(A.transpose());
  qr.setThreshold(1e-10);
  const int r = static_cast<int>(qr.rank());
  for (int i = 0; i < r; ++i) keep.push_back(static_cast<int>(qr.colsPermutation().indices()(i)));
  std::sort(keep.begin(), keep.end());
  return keep;
}

}  // namespace detail

/// Primal active-set solver for dense convex QPs.
///
/// Equality constraints stay in the working set permanently; inequality rows
/// are added when they block a step and removed when their multiplier turns
/// negative (most negative first, lowest index on ties).  Each iteration
/// re-solves the working-set KKT system directly; at the problem sizes this
/// library produces (tens to a couple hundred variables) refactorization is
/// cheaper than bookkeeping for incremental updates.
///
/// The solver keeps the final active set and iterate between calls and uses
/// them to warm-start the next solve when the dimensions match.
class QpSolver {
 public:
  QpSettings settings;

  void reset() {
    warmX_.resize(0);
    warmActive_.clear();
  }

  QpSolution solve(const QpProblem& p) {
    p.validate();
    const int n = p.n();
    const int mi = p.numIn();

    // Reduce the equalities to an independent row set (planar models produce
    // identically-zero rows) and remember the map for dual recovery.
    eqKeep_ = detail::independentRows(p.Aeq);

    QpSolution sol;
    sol.eqDuals = vector_t::Zero(p.numEq());
    sol.inDuals = vector_t::Zero(mi);

    // Starting point: project the previous solution (or zero) onto the
    // equality manifold, then repair inequality violations if needed.
    vector_t x = (warmX_.size() == n) ? warmX_ : vector_t::Zero(n);
    if (!projectOntoEqualities(p, x)) {
      sol.status = QpStatus::kInfeasible;
      sol.x = x;
      return sol;
    }
    const scalar_t feasTol =
        settings.tol * (1.0 + (mi > 0 ? p.bin.cwiseAbs().maxCoeff() : 0.0));
    if (mi > 0 && (p.Ain * x - p.bin).maxCoeff() > feasTol) {
      if (!phase1(p, x)) {
        sol.status = QpStatus::kInfeasible;
        sol.x = x;
        return sol;
      }
    }

    std::vector<int> working;
    if (static_cast<int>(warmMi_) == mi && mi > 0) {
      const vector_t res = p.Ain * x - p.bin;
      for (int i : warmActive_) {
        if (i < mi && std::abs(res(i)) <= 10.0 * feasTol) working.push_back(i);
      }
    }

    const bool ok = iterate(p, x, working, sol);
    warmX_ = x;
    warmActive_ = sol.activeSet;
    warmMi_ = mi;
    if (!ok && sol.status == QpStatus::kOptimal) sol.status = QpStatus::kMaxIter;
    return sol;
  }

 private:
  bool projectOntoEqualities(const QpProblem& p, vector_t& x) const {
    if (p.numEq() == 0) return true;
    Eigen::CompleteOrthogonalDecomposition<matrix_t> cod(p.Aeq);
    const vector_t dx = cod.solve(p.beq - p.Aeq * x);
    x += dx;
    const scalar_t scale = 1.0 + p.beq.cwiseAbs().maxCoeff();
    return (p.Aeq * x - p.beq).cwiseAbs().maxCoeff() <= 1e-7 * scale;
  }

  /// Minimizes the squared inequality violation over (x, s) with feasible
  /// slacks; succeeds when the optimum drives the slack to (numerical) zero.
  bool phase1(const QpProblem& p, vector_t& x) {
    const int n = p.n();
    const int mi = p.numIn();
    QpProblem aug;
    aug.H = matrix_t::Zero(n + mi, n + mi);
    aug.H.topLeftCorner(n, n) = 1e-8 * matrix_t::Identity(n, n);
    aug.H.bottomRightCorner(mi, mi).setIdentity();
    aug.g = vector_t::Zero(n + mi);
    aug.Aeq = matrix_t::Zero(p.numEq(), n + mi);
    aug.Aeq.leftCols(n) = p.Aeq;
    aug.beq = p.beq;
    aug.Ain = matrix_t::Zero(2 * mi, n + mi);
    aug.Ain.topLeftCorner(mi, n) = p.Ain;
    aug.Ain.topRightCorner(mi, mi) = -matrix_t::Identity(mi, mi);
    aug.Ain.bottomRightCorner(mi, mi) = -matrix_t::Identity(mi, mi);
    aug.bin = vector_t::Zero(2 * mi);
    aug.bin.head(mi) = p.bin;

    vector_t xs = vector_t::Zero(n + mi);
    xs.head(n) = x;
    xs.tail(mi) = (p.Ain * x - p.bin).cwiseMax(0.0);

    QpSolution sol;
    sol.eqDuals = vector_t::Zero(aug.numEq());
    sol.inDuals = vector_t::Zero(aug.numIn());
    const std::vector<int> eqKeepSave = eqKeep_;
    eqKeep_ = detail::independentRows(aug.Aeq);
    std::vector<int> working;
    iterate(aug, xs, working, sol);
    eqKeep_ = eqKeepSave;

    const scalar_t feasTol = settings.tol * (1.0 + p.bin.cwiseAbs().maxCoeff());
    x = xs.head(n);
    return xs.tail(mi).maxCoeff() <= 100.0 * feasTol && sol.status == QpStatus::kOptimal;
  }

  bool iterate(const QpProblem& p, vector_t& x, std::vector<int>& working, QpSolution& sol) const {
    const int n = p.n();
    const int me = static_cast<int>(eqKeep_.size());
    const scalar_t tol = settings.tol;

    for (sol.iterations = 0; sol.iterations < settings.maxIter; ++sol.iterations) {
      const int mw = static_cast<int>(working.size());
      matrix_t A(me + mw, n);
      for (int i = 0; i < me; ++i) A.row(i) = p.Aeq.row(eqKeep_[i]);
      for (int i = 0; i < mw; ++i) A.row(me + i) = p.Ain.row(working[i]);

      vector_t rhs = vector_t::Zero(n + me + mw);
      rhs.head(n) = -(p.H * x + p.g);
      bool ok = false;
      const vector_t z = detail::solveKkt(p.H, A, rhs, &ok);
      if (!ok) {
        sol.x = x;
        sol.activeSet = working;
        sol.status = QpStatus::kMaxIter;
        sol.kktResidual = detail::qpKktResidual(p, x, sol.eqDuals, sol.inDuals);
        return false;
      }
      const vector_t step = z.head(n);
      const vector_t duals = z.tail(me + mw);

      if (step.cwiseAbs().maxCoeff() <= tol * (1.0 + x.cwiseAbs().maxCoeff())) {
        // Stationary on the working set: check multipliers of the inequalities.
        int dropLocal = -1;
        scalar_t worst = -tol;
        for (int i = 0; i < mw; ++i) {
          if (duals(me + i) < worst) {
            worst = duals(me + i);
            dropLocal = i;
          }
        }
        if (dropLocal < 0) {
          sol.x = x;
          sol.activeSet = working;
          for (int i = 0; i < me; ++i) sol.eqDuals(eqKeep_[i]) = duals(i);
          sol.inDuals.setZero();
          for (int i = 0; i < mw; ++i) sol.inDuals(working[i]) = std::max(0.0, duals(me + i));
          sol.status = QpStatus::kOptimal;
          sol.kktResidual = detail::qpKktResidual(p, sol.x, sol.eqDuals, sol.inDuals);
          return true;
        }
        working.erase(working.begin() + dropLocal);
        continue;
      }

      // Ratio test against the non-working inequalities.
      scalar_t alpha = 1.0;
      int blocker = -1;
      for (int i = 0; i < p.numIn(); ++i) {
        if (std::find(working.begin(), working.end(), i) != working.end()) continue;
        const scalar_t d = p.Ain.row(i).dot(step);
        if (d <= 1e-12 * (1.0 + p.Ain.row(i).cwiseAbs().maxCoeff())) continue;
        const scalar_t ai = std::max(0.0, (p.bin(i) - p.Ain.row(i).dot(x)) / d);
        if (ai < alpha - 1e-12) {
          alpha = ai;
          blocker = i;
        }
      }
      x += alpha * step;
      if (blocker >= 0) working.push_back(blocker);
    }

    sol.x = x;
    sol.activeSet = working;
    sol.status = QpStatus::kMaxIter;
    sol.kktResidual = detail::qpKktResidual(p, x, sol.eqDuals, sol.inDuals);
    return false;
  }

  mutable std::vector<int> eqKeep_;
  vector_t warmX_;
  std::vector<int> warmActive_;
  int warmMi_ = -1;
};

/// Reference QP solver by exhaustive active-set enumeration.  Intended as a
/// test oracle: requires at most 20 inequality rows and an H that is positive
/// definite on the equality nullspace (so a bounded minimum exists whenever
/// the problem is feasible).
inline QpSolution bruteForceQp(const QpProblem& p, scalar_t tol = 1e-8) {
  p.validate();
  const int n = p.n();
  const int mi = p.numIn();
  if (mi > 20) throw std::invalid_argument("bruteForceQp: more than 20 inequality rows");

  const std::vector<int> eqKeep = detail::independentRows(p.Aeq);
  const int me = static_cast<int>(eqKeep.size());

  // Consistency of the (possibly dependent) equalities.
  if (p.numEq() > 0) {
    Eigen::CompleteOrthogonalDecomposition<matrix_t> cod(p.Aeq);
    const vector_t x0 = cod.solve(p.beq);
    if ((p.Aeq * x0 - p.beq).cwiseAbs().maxCoeff() > 1e-7 * (1.0 + p.beq.cwiseAbs().maxCoeff())) {
      QpSolution sol;
      sol.status = QpStatus::kInfeasible;
      return sol;
    }
  }

  const scalar_t feasTol = tol * (1.0 + (mi > 0 ? p.bin.cwiseAbs().maxCoeff() : 0.0));
  QpSolution best;
  best.status = QpStatus::kInfeasible;
  scalar_t bestObj = std::numeric_limits<scalar_t>::infinity();

  for (std::uint32_t mask = 0; mask < (1u << mi); ++mask) {
    std::vector<int> active;
    for (int i = 0; i < mi; ++i) {
      if (mask & (1u << i)) active.push_back(i);
    }
    if (me + static_cast<int>(active.size()) > n) continue;

    matrix_t A(me + active.size(), n);
    vector_t b(me + active.size());
    for (int i = 0; i < me; ++i) {
      A.row(i) = p.Aeq.row(eqKeep[i]);
      b(i) = p.beq(eqKeep[i]);
    }
    for (size_t i = 0; i < active.size(); ++i) {
      A.row(me + i) = p.Ain.row(active[i]);
      b(me + i) = p.bin(active[i]);
    }

    const int m = static_cast<int>(A.rows());
    matrix_t K = matrix_t::Zero(n + m, n + m);
    K.topLeftCorner(n, n) = p.H;
    if (m > 0) {
      K.topRightCorner(n, m) = A.transpose();
      K.bottomLeftCorner(m, n) = A;
    }
    vector_t rhs(n + m);
    rhs.head(n) = -p.g;
    rhs.tail(m) = b;
    Eigen::FullPivLU<matrix_t> lu(K);
    if (!lu.isInvertible()) continue;
    const vector_t z = lu.solve(rhs);
    if (!z.allFinite()) continue;
    const vector_t x = z.head(n);
    const vector_t duals = z.tail(m);

    if (mi > 0 && (p.Ain * x - p.bin).maxCoeff() > feasTol) continue;
    bool dualOk = true;
    for (size_t i = 0; i < active.size(); ++i) {
      if (duals(me + i) < -tol) dualOk = false;
    }
    if (!dualOk) continue;

    const scalar_t obj = p.objective(x);
    const bool better = best.status != QpStatus::kOptimal ||
                        obj < bestObj - 1e-12 * (1.0 + std::abs(bestObj));
    if (better) {
      bestObj = obj;
      best.x = x;
      best.status = QpStatus::kOptimal;
      best.activeSet = active;
      best.eqDuals = vector_t::Zero(p.numEq());
      for (int i = 0; i < me; ++i) best.eqDuals(eqKeep[i]) = duals(i);
      best.inDuals = vector_t::Zero(mi);
      for (size_t i = 0; i < active.size(); ++i) {
        best.inDuals(active[i]) = std::max(0.0, duals(me + i));
      }
      best.kktResidual = detail::qpKktResidual(p, best.x, best.eqDuals, best.inDuals);
    }
  }
  return best;
}

}  // namespace strider
