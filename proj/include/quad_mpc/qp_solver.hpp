#pragma once

// Dense primal active-set solver for strictly convex QPs
//
//   min 1/2 u^T H u + u^T G   s.t.   A u <= b
//
// Equality-constrained subproblems on the working set are solved in range
// space: with H = L L^T and V = L^{-1} A_W^T, the multipliers satisfy
// (V^T V) lambda = -V^T L^{-1} g. The Cholesky factor of V^T V is extended in
// place when a row enters the working set and rebuilt when one leaves.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "quad_mpc/common.hpp"

namespace quad_mpc {

enum class QpStatus { Optimal, MaxIterations, Infeasible, NonConvex };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::MaxIterations: return "max_iterations";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::NonConvex: return "nonconvex";
  }
  return "unknown";
}

struct QpOptions {
  double tol = 1e-8;
  int max_iter = 0;  // 0 selects 10 * (n + m)
};

/// Initial primal point and working set. The point is used only if feasible.
struct WarmStart {
  VecX u;
  std::vector<int> working_set;
};

struct QpSolution {
  VecX u_star;
  QpStatus status = QpStatus::Infeasible;
  int iterations = 0;
  std::vector<int> active_set;  // sorted row indices
  VecX multipliers;             // one per inequality row, zero off the active set
  double objective = 0.0;
};

struct KktResiduals {
  double stationarity = 0.0;
  double primal = 0.0;
  double dual = 0.0;
  double complementarity = 0.0;

  double max() const { return std::max({stationarity, primal, dual, complementarity}); }
};

inline KktResiduals kkt_residuals(const MatX& H, const VecX& G, const MatX& A, const VecX& b,
                                  const QpSolution& sol) {
  KktResiduals r;
  const VecX& u = sol.u_star;
  VecX lambda = sol.multipliers.size() == A.rows() ? sol.multipliers : VecX::Zero(A.rows());
  VecX grad = H * u + G;
  if (A.rows() > 0) grad += A.transpose() * lambda;
  r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (A.rows() > 0) {
    const VecX slack = A * u - b;
    r.primal = std::max(0.0, slack.maxCoeff());
    r.dual = std::max(0.0, -lambda.minCoeff());
    r.complementarity = lambda.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  return r;
}

class ActiveSetSolver {
 public:
  explicit ActiveSetSolver(QpOptions opts = {}) : opts_(opts) {}

  const QpOptions& options() const { return opts_; }

  /// Solve from `warm` if it is feasible, otherwise from u = 0 if that is
  /// feasible, otherwise from a phase-1 feasibility point. Cold starts begin with an
  /// empty working set.
  QpSolution solve(const MatX& H, const VecX& G, const MatX& A, const VecX& b,
                   const std::optional<WarmStart>& warm = std::nullopt) const {
    const Eigen::Index n = H.rows();
    if (H.cols() != n || G.size() != n || A.cols() != n || A.rows() != b.size())
      throw DimensionMismatch("qp solve: inconsistent problem dimensions");

    QpSolution sol;
    sol.multipliers = VecX::Zero(A.rows());
    if (n == 0) {
      sol.u_star = VecX::Zero(0);
      const bool feasible = b.size() == 0 || b.minCoeff() >= -opts_.tol;
      sol.status = feasible ? QpStatus::Optimal : QpStatus::Infeasible;
      return sol;
    }

    Eigen::LLT<MatX> llt;
    if (!factorize(H, llt)) {
      sol.u_star = VecX::Zero(n);
      sol.status = QpStatus::NonConvex;
      return sol;
    }

    const double feas_tol = feasibility_tol(b);
    auto feasible = [&](const VecX& u) {
      return A.rows() == 0 || (A * u - b).maxCoeff() <= feas_tol;
    };

    if (warm && warm->u.size() == n && feasible(warm->u))
      return iterate(H, llt, G, A, b, warm->u, warm->working_set);

    const VecX zero = VecX::Zero(n);
    if (feasible(zero)) return iterate(H, llt, G, A, b, zero, {});

    const PhaseOne start = phase_one(A, b);
    if (start.status != QpStatus::Optimal) {
      sol.u_star = start.u;
      sol.status = start.status;
      sol.iterations = start.iterations;
      return sol;
    }
    QpSolution out = iterate(H, llt, G, A, b, start.u, {});
    out.iterations += start.iterations;
    return out;
  }

 private:
  QpOptions opts_;

  double feasibility_tol(const VecX& b) const {
    const double scale = b.size() ? b.cwiseAbs().maxCoeff() : 0.0;
    return opts_.tol * (1.0 + scale);
  }

  bool factorize(const MatX& H, Eigen::LLT<MatX>& llt) const {
    llt.compute(H);
    if (llt.info() == Eigen::Success) return true;
    Eigen::SelfAdjointEigenSolver<MatX> eig(H, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -opts_.tol) return false;
    // Positive semidefinite within tolerance: regularize.
    llt.compute(H + MatX::Identity(H.rows(), H.cols()) * opts_.tol);
    return llt.info() == Eigen::Success;
  }

  struct PhaseOne {
    QpStatus status = QpStatus::Infeasible;
    VecX u;
    int iterations = 0;
  };

  /// Feasible point from min eps/2 (|u|^2 + t^2) + t  s.t.  A u - t <= b, t >= 0.
  /// The Hessian is a scaled identity, so the subproblem is perfectly
  /// conditioned; t reaches zero exactly when the constraints are consistent
  /// and eps is small against their multipliers.
  PhaseOne phase_one(const MatX& A, const VecX& b) const {
    const Eigen::Index n = A.cols(), m = A.rows();
    PhaseOne out;
    out.u = VecX::Zero(n);
    const double scale = 1.0 + b.cwiseAbs().maxCoeff() + A.cwiseAbs().maxCoeff();
    double eps = 1e-3 / (scale * scale);
    for (int attempt = 0; attempt < 3; ++attempt, eps *= 1e-3) {
      const MatX Ha = MatX::Identity(n + 1, n + 1) * eps;
      VecX Ga = VecX::Zero(n + 1);
      Ga(n) = 1.0;
      MatX Aa = MatX::Zero(m + 1, n + 1);
      Aa.topLeftCorner(m, n) = A;
      Aa.col(n).head(m).setConstant(-1.0);
      Aa(m, n) = -1.0;
      VecX ba(m + 1);
      ba << b, 0.0;

      VecX start = VecX::Zero(n + 1);
      start(n) = std::max(0.0, -b.minCoeff());

      Eigen::LLT<MatX> llt(Ha);
      const QpSolution aug = iterate(Ha, llt, Ga, Aa, ba, start, {});
      out.iterations += aug.iterations;
      out.u = aug.u_star.head(n);
      if (aug.status == QpStatus::MaxIterations) {
        out.status = QpStatus::MaxIterations;
        return out;
      }
      if ((A * out.u - b).maxCoeff() <= feasibility_tol(b)) {
        out.status = QpStatus::Optimal;
        return out;
      }
    }
    out.status = QpStatus::Infeasible;
    return out;
  }

  /// Re-solve the KKT system of the final working set directly; the range-space
  /// updates accumulate rounding over many add/drop steps.
  void polish(const MatX& H, const VecX& G, const MatX& A, const VecX& b, QpSolution& sol) const {
    const Eigen::Index n = H.rows();
    const auto k = static_cast<Eigen::Index>(sol.active_set.size());
    MatX K = MatX::Zero(n + k, n + k);
    VecX rhs(n + k);
    K.topLeftCorner(n, n) = H;
    rhs.head(n) = -G;
    for (Eigen::Index j = 0; j < k; ++j) {
      const int row = sol.active_set[static_cast<std::size_t>(j)];
      K.block(0, n + j, n, 1) = A.row(row).transpose();
      K.block(n + j, 0, 1, n) = A.row(row);
      rhs(n + j) = b(row);
    }
    const VecX x = K.fullPivLu().solve(rhs);
    if (!x.allFinite()) return;

    QpSolution cand = sol;
    cand.u_star = x.head(n);
    cand.multipliers.setZero();
    for (Eigen::Index j = 0; j < k; ++j) cand.multipliers(sol.active_set[static_cast<std::size_t>(j)]) = x(n + j);
    const KktResiduals before = kkt_residuals(H, G, A, b, sol);
    const KktResiduals after = kkt_residuals(H, G, A, b, cand);
    if (after.primal <= feasibility_tol(b) && after.dual <= opts_.tol && after.max() < before.max()) {
      cand.objective = 0.5 * cand.u_star.dot(H * cand.u_star) + G.dot(cand.u_star);
      sol = std::move(cand);
    }
  }

  struct WorkingSet {
    std::vector<int> rows;
    MatX V;  // L^{-1} A_W^T, one column per working row
    MatX R;  // upper Cholesky factor of V^T V

    int size() const { return static_cast<int>(rows.size()); }
    bool contains(int i) const { return std::find(rows.begin(), rows.end(), i) != rows.end(); }
  };

  static bool try_add(WorkingSet& ws, int row, const VecX& v) {
    const int k = ws.size();
    VecX r = VecX::Zero(k);
    if (k > 0) {
      const VecX s = ws.V.leftCols(k).transpose() * v;
      r = ws.R.topLeftCorner(k, k).transpose().triangularView<Eigen::Lower>().solve(s);
    }
    const double vv = v.squaredNorm();
    const double d2 = vv - r.squaredNorm();
    if (!(d2 > 1e-12 * vv)) return false;  // linearly dependent on the working set

    MatX V(v.size(), k + 1);
    if (k > 0) V.leftCols(k) = ws.V.leftCols(k);
    V.col(k) = v;
    MatX R = MatX::Zero(k + 1, k + 1);
    if (k > 0) {
      R.topLeftCorner(k, k) = ws.R.topLeftCorner(k, k);
      R.col(k).head(k) = r;
    }
    R(k, k) = std::sqrt(d2);
    ws.V = std::move(V);
    ws.R = std::move(R);
    ws.rows.push_back(row);
    return true;
  }

  static void remove_at(WorkingSet& ws, int pos) {
    const int k = ws.size();
    MatX V(ws.V.rows(), k - 1);
    for (int j = 0, c = 0; j < k; ++j)
      if (j != pos) V.col(c++) = ws.V.col(j);
    ws.rows.erase(ws.rows.begin() + pos);
    ws.V = std::move(V);
    if (k - 1 == 0) {
      ws.R.resize(0, 0);
      return;
    }
    Eigen::LLT<MatX> llt(ws.V.transpose() * ws.V);
    ws.R = llt.matrixU();
  }

  static VecX multipliers(const WorkingSet& ws, const VecX& z) {
    const int k = ws.size();
    if (k == 0) return VecX(0);
    const VecX rhs = -(ws.V.transpose() * z);
    const auto R = ws.R.topLeftCorner(k, k);
    const VecX y = R.transpose().triangularView<Eigen::Lower>().solve(rhs);
    return R.triangularView<Eigen::Upper>().solve(y);
  }

  QpSolution iterate(const MatX& H, const Eigen::LLT<MatX>& llt, const VecX& G, const MatX& A,
                     const VecX& b, VecX u, const std::vector<int>& initial_ws) const {
    const Eigen::Index n = H.rows(), m = A.rows();
    const int max_iter = opts_.max_iter > 0 ? opts_.max_iter : 10 * static_cast<int>(n + m);
    const auto L = llt.matrixL();
    const auto LT = llt.matrixU();

    auto objective = [&](const VecX& x) { return 0.5 * x.dot(H * x) + G.dot(x); };
    auto row_vec = [&](int i) -> VecX { return L.solve(A.row(i).transpose()); };

    WorkingSet ws;
    ws.V.resize(n, 0);
    {
      std::vector<int> init = initial_ws;
      std::sort(init.begin(), init.end());
      init.erase(std::unique(init.begin(), init.end()), init.end());
      const double tol = feasibility_tol(b);
      for (int i : init) {
        if (i < 0 || i >= m) continue;
        if (std::abs(A.row(i).dot(u) - b(i)) > tol) continue;
        try_add(ws, i, row_vec(i));
      }
    }

    QpSolution sol;
    sol.multipliers = VecX::Zero(m);
    VecX Au = m > 0 ? VecX(A * u) : VecX(0);
    bool at_subproblem_minimum = false;
    [[maybe_unused]] double last_obj = objective(u);

    for (int iter = 0; iter < max_iter; ++iter) {
      sol.iterations = iter + 1;
      const VecX g = H * u + G;
      const VecX z = L.solve(g);
      const VecX lambda = multipliers(ws, z);

      VecX p;
      if (at_subproblem_minimum) {
        p = VecX::Zero(n);
      } else {
        VecX w = z;
        if (ws.size() > 0) w += ws.V * lambda;
        p = -LT.solve(w);
      }
      const double ptol = 1e-12 * (1.0 + u.cwiseAbs().maxCoeff());

      if (p.cwiseAbs().maxCoeff() <= ptol) {
        int drop = -1;
        double most_negative = -opts_.tol;
        for (int j = 0; j < ws.size(); ++j) {
          const double l = lambda(j);
          if (l < most_negative) {
            most_negative = l;
            drop = j;
          }
        }
        if (drop < 0) {
          sol.status = QpStatus::Optimal;
          for (int j = 0; j < ws.size(); ++j) sol.multipliers(ws.rows[j]) = lambda(j);
          break;
        }
        remove_at(ws, drop);
        at_subproblem_minimum = false;
        continue;
      }

      // Ratio test over rows outside the working set; ties keep the lowest index.
      double alpha = 1.0;
      int blocking = -1;
      if (m > 0) {
        const VecX Ap = A * p;
        const double pnorm = p.norm();
        for (Eigen::Index i = 0; i < m; ++i) {
          const double ap = Ap(i);
          if (ap <= 1e-12 * A.row(i).norm() * pnorm) continue;
          if (ws.contains(static_cast<int>(i))) continue;
          const double ratio = std::max(0.0, b(i) - Au(i)) / ap;
          if (ratio < alpha) {
            alpha = ratio;
            blocking = static_cast<int>(i);
          }
        }
        Au += alpha * Ap;
      }
      u += alpha * p;
#ifndef NDEBUG
      const double obj = objective(u);
      assert(obj <= last_obj + 1e-9 * (1.0 + std::abs(last_obj)));
      last_obj = obj;
#endif

      if (blocking < 0) {
        at_subproblem_minimum = true;
        continue;
      }
      at_subproblem_minimum = false;
      const VecX v = row_vec(blocking);
      if (!try_add(ws, blocking, v)) {
        // Degenerate: release the working row with the smallest multiplier magnitude.
        int weakest = 0;
        for (int j = 1; j < ws.size(); ++j)
          if (std::abs(lambda(j)) < std::abs(lambda(weakest))) weakest = j;
        if (ws.size() > 0) remove_at(ws, weakest);
        try_add(ws, blocking, v);
      }
    }
    if (sol.status != QpStatus::Optimal) sol.status = QpStatus::MaxIterations;

    sol.u_star = std::move(u);
    sol.active_set = ws.rows;
    std::sort(sol.active_set.begin(), sol.active_set.end());
    sol.objective = objective(sol.u_star);
    if (sol.status == QpStatus::Optimal && !sol.active_set.empty()) polish(H, G, A, b, sol);
    return sol;
  }
};

/// One-shot convenience wrapper.
inline QpSolution solve(const MatX& H, const VecX& G, const MatX& A, const VecX& b,
                        const QpOptions& opts = {},
                        const std::optional<WarmStart>& warm = std::nullopt) {
  return ActiveSetSolver(opts).solve(H, G, A, b, warm);
}

}  // namespace quad_mpc
