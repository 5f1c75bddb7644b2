// Copyright 2026 The Sitpose Authors
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

// Dense convex QP:  min 1/2 x^T H x + g^T x  s.t.  A x = b,  lo <= x <= hi.
//
// Equalities are eliminated through a rank-revealing QR of A^T (x = x0 + Z y);
// the reduced problem with the remaining bounds is solved by the dual
// active-set method of Goldfarb and Idnani, which needs no feasible start.

#ifndef SITPOSE_QP_HPP_
#define SITPOSE_QP_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sitpose/error.hpp"

namespace sitpose {

struct QpProblem {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd A;  // may have zero rows
  Eigen::VectorXd b;
  Eigen::VectorXd lower;  // -inf for unbounded
  Eigen::VectorXd upper;  // +inf for unbounded

  static QpProblem Unconstrained(Eigen::MatrixXd h, Eigen::VectorXd g) {
    QpProblem q;
    const auto n = g.size();
    q.H = std::move(h);
    q.g = std::move(g);
    q.A.resize(0, n);
    q.b.resize(0);
    q.lower = Eigen::VectorXd::Constant(n, -std::numeric_limits<double>::infinity());
    q.upper = Eigen::VectorXd::Constant(n, std::numeric_limits<double>::infinity());
    return q;
  }

  double Objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(H * x) + g.dot(x); }
};

struct QpOptions {
  int max_iterations = 200;
  double tolerance = 1e-8;
};

struct KktResiduals {
  double stationarity = 0.0;   // |H x + g - A^T nu - mu_lo + mu_hi|_inf
  double equality = 0.0;       // |A x - b|_inf
  double bounds = 0.0;         // largest bound violation
  double complementarity = 0.0;
  double dual = 0.0;           // most negative bound multiplier, as a positive number

  double Max() const {
    return std::max({stationarity, equality, bounds, complementarity, dual});
  }
};

struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd nu;        // equality multipliers
  Eigen::VectorXd mu_lower;  // >= 0
  Eigen::VectorXd mu_upper;  // >= 0
  double objective = 0.0;
  int iterations = 0;
  int active_bounds = 0;
  KktResiduals kkt;
};

inline KktResiduals ComputeKkt(const QpProblem& q, const QpSolution& s) {
  KktResiduals r;
  const Eigen::VectorXd grad = q.H * s.x + q.g;
  Eigen::VectorXd st = grad - s.mu_lower + s.mu_upper;
  if (q.A.rows() > 0) st -= q.A.transpose() * s.nu;
  r.stationarity = st.size() ? st.lpNorm<Eigen::Infinity>() : 0.0;
  r.equality = q.A.rows() ? (q.A * s.x - q.b).lpNorm<Eigen::Infinity>() : 0.0;
  for (Eigen::Index i = 0; i < s.x.size(); ++i) {
    r.bounds = std::max({r.bounds, q.lower(i) - s.x(i), s.x(i) - q.upper(i)});
    if (s.mu_lower(i) > 0.0) r.complementarity = std::max(r.complementarity, s.mu_lower(i) * std::abs(s.x(i) - q.lower(i)));
    if (s.mu_upper(i) > 0.0) r.complementarity = std::max(r.complementarity, s.mu_upper(i) * std::abs(q.upper(i) - s.x(i)));
    r.dual = std::max({r.dual, -s.mu_lower(i), -s.mu_upper(i)});
  }
  return r;
}

namespace qp_detail {

inline std::string Residual(double v) {
  return std::to_string(v);
}

// Goldfarb-Idnani on  min 1/2 y^T G y + c^T y  s.t.  C y >= d  (rows of C).
struct DualResult {
  Eigen::VectorXd y;
  std::vector<int> active;
  std::vector<double> u;
  int iterations = 0;
};

inline DualResult GoldfarbIdnani(const Eigen::MatrixXd& G, const Eigen::VectorXd& c, const Eigen::MatrixXd& C,
                                 const Eigen::VectorXd& d, const QpOptions& opts) {
  const Eigen::LLT<Eigen::MatrixXd> llt(G);
  DualResult r;
  r.y = c.size() ? Eigen::VectorXd(-llt.solve(c)) : Eigen::VectorXd();
  const Eigen::Index m = C.rows();
  if (m == 0) return r;
  const double scale = 1.0 + G.diagonal().cwiseAbs().maxCoeff();
  const double tol = opts.tolerance;

  for (;;) {
    // Most violated inactive constraint, with violations normalized by row size.
    Eigen::Index p = -1;
    double worst = -tol;
    for (Eigen::Index i = 0; i < m; ++i) {
      bool active = false;
      for (int a : r.active) active = active || a == i;
      if (active) continue;
      const double s = (C.row(i).dot(r.y) - d(i)) / (1.0 + C.row(i).norm());
      if (s < worst) {
        worst = s;
        p = i;
      }
    }
    if (p < 0) return r;

    const Eigen::VectorXd np = C.row(p).transpose();
    std::vector<double> u_plus = r.u;
    u_plus.push_back(0.0);
    for (;;) {
      if (++r.iterations > opts.max_iterations) {
        throw Error(ErrorKind::kMaxIterations, "QP exceeded " + std::to_string(opts.max_iterations) +
                                                   " iterations; worst violation " + Residual(-worst));
      }
      const auto q = static_cast<Eigen::Index>(r.active.size());
      Eigen::VectorXd z;
      Eigen::VectorXd rr(q);
      if (q == 0) {
        z = llt.solve(np);
      } else {
        Eigen::MatrixXd N(C.cols(), q);
        for (Eigen::Index k = 0; k < q; ++k) N.col(k) = C.row(r.active[static_cast<std::size_t>(k)]).transpose();
        const Eigen::MatrixXd ginv_n = llt.solve(N);
        const Eigen::MatrixXd s = N.transpose() * ginv_n;
        rr = s.ldlt().solve(ginv_n.transpose() * np);
        z = llt.solve(np - N * rr);
      }
      // Partial (dual) step limit.
      double t1 = std::numeric_limits<double>::infinity();
      Eigen::Index drop = -1;
      for (Eigen::Index k = 0; k < q; ++k) {
        if (rr(k) > 1e-14 * scale) {
          const double ratio = u_plus[static_cast<std::size_t>(k)] / rr(k);
          if (ratio < t1) {
            t1 = ratio;
            drop = k;
          }
        }
      }
      // Full (primal) step.
      double t2 = std::numeric_limits<double>::infinity();
      const double zn = z.dot(np);
      const double slack = np.dot(r.y) - d(p);
      if (z.norm() > 1e-12 * (1.0 + np.norm()) && zn > 0.0) t2 = -slack / zn;
      const double t = std::min(t1, t2);
      if (!std::isfinite(t)) {
        throw Error(ErrorKind::kInfeasibleProblem, "bound constraints are inconsistent with the equalities; "
                                                   "violation " + Residual(-slack));
      }
      if (!std::isfinite(t2)) {
        for (Eigen::Index k = 0; k < q; ++k) u_plus[static_cast<std::size_t>(k)] -= t * rr(k);
        u_plus.back() += t;
        r.active.erase(r.active.begin() + drop);
        u_plus.erase(u_plus.begin() + drop);
        continue;
      }
      r.y += t * z;
      for (Eigen::Index k = 0; k < q; ++k) u_plus[static_cast<std::size_t>(k)] -= t * rr(k);
      u_plus.back() += t;
      if (t2 <= t1) {
        r.active.push_back(static_cast<int>(p));
        r.u = u_plus;
        for (auto& v : r.u) v = std::max(v, 0.0);
        break;
      }
      r.active.erase(r.active.begin() + drop);
      u_plus.erase(u_plus.begin() + drop);
    }
  }
}

}  // namespace qp_detail

inline QpSolution SolveQp(const QpProblem& q, const QpOptions& opts = {}) {
  const Eigen::Index n = q.g.size();
  if (q.H.rows() != n || q.H.cols() != n || q.A.cols() != n || q.b.size() != q.A.rows() || q.lower.size() != n ||
      q.upper.size() != n) {
    throw Error(ErrorKind::kShapeMismatch, "QP matrices have inconsistent dimensions");
  }
  if (!q.H.allFinite() || !q.g.allFinite() || !q.A.allFinite() || !q.b.allFinite()) {
    throw Error(ErrorKind::kIllPosedProblem, "QP data is not finite");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(q.lower(i) <= q.upper(i))) throw Error(ErrorKind::kInfeasibleProblem, "empty bound interval");
  }

  // Null-space elimination of the equalities.
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(n);
  Eigen::MatrixXd Z;
  const Eigen::Index m = q.A.rows();
  Eigen::MatrixXd Q1;
  Eigen::MatrixXd R11;
  Eigen::VectorXi perm;
  Eigen::Index rank = 0;
  if (m > 0) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(q.A.transpose());
    qr.setThreshold(1e-10);
    rank = qr.rank();
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    Q1 = Q.leftCols(rank);
    Z = Q.rightCols(n - rank);
    R11 = qr.matrixR().topLeftCorner(rank, rank).triangularView<Eigen::Upper>();
    perm = qr.colsPermutation().indices();
    Eigen::VectorXd pb(rank);
    for (Eigen::Index i = 0; i < rank; ++i) pb(i) = q.b(perm(i));
    const Eigen::VectorXd w = R11.transpose().triangularView<Eigen::Lower>().solve(pb);
    x0 = Q1 * w;
    const double res = (q.A * x0 - q.b).lpNorm<Eigen::Infinity>();
    if (!(res <= 1e3 * opts.tolerance * (1.0 + q.b.lpNorm<Eigen::Infinity>()))) {
      throw Error(ErrorKind::kInfeasibleProblem, "equality constraints are inconsistent; residual " +
                                                     qp_detail::Residual(res));
    }
  } else {
    Z = Eigen::MatrixXd::Identity(n, n);
  }

  const Eigen::MatrixXd G = Z.transpose() * q.H * Z;
  const Eigen::VectorXd c = Z.transpose() * (q.H * x0 + q.g);
  if (G.size() > 0) {
    const Eigen::LLT<Eigen::MatrixXd> llt(G);
    bool ok = llt.info() == Eigen::Success;
    if (ok) {
      const auto diag = llt.matrixLLT().diagonal();
      ok = diag.minCoeff() > 1e-9 * std::max(1.0, diag.maxCoeff());
    }
    if (!ok) throw Error(ErrorKind::kIllPosedProblem, "reduced Hessian is not positive definite");
  }

  // Bounds in reduced coordinates.
  std::vector<Eigen::Index> var;
  std::vector<int> side;  // +1 lower, -1 upper
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zr = Z.cols() ? Z.row(i).norm() : 0.0;
    const bool free_row = zr > 1e-12;
    for (int s : {1, -1}) {
      const double bound = s > 0 ? q.lower(i) : q.upper(i);
      if (!std::isfinite(bound)) continue;
      if (!free_row) {
        if (s * (x0(i) - bound) < -1e3 * opts.tolerance * (1.0 + std::abs(bound))) {
          throw Error(ErrorKind::kInfeasibleProblem, "variable fixed by equalities violates its bound");
        }
        continue;
      }
      var.push_back(i);
      side.push_back(s);
    }
  }
  Eigen::MatrixXd C(static_cast<Eigen::Index>(var.size()), Z.cols());
  Eigen::VectorXd d(C.rows());
  for (Eigen::Index k = 0; k < C.rows(); ++k) {
    const auto i = var[static_cast<std::size_t>(k)];
    const int s = side[static_cast<std::size_t>(k)];
    C.row(k) = s * Z.row(i);
    d(k) = s * ((s > 0 ? q.lower(i) : q.upper(i)) - x0(i));
  }

  QpSolution sol;
  sol.mu_lower = Eigen::VectorXd::Zero(n);
  sol.mu_upper = Eigen::VectorXd::Zero(n);
  if (Z.cols() > 0) {
    const auto dual = qp_detail::GoldfarbIdnani(G, c, C, d, opts);
    sol.x = x0 + Z * dual.y;
    sol.iterations = dual.iterations;
    sol.active_bounds = static_cast<int>(dual.active.size());
    for (std::size_t k = 0; k < dual.active.size(); ++k) {
      const auto row = static_cast<std::size_t>(dual.active[k]);
      (side[row] > 0 ? sol.mu_lower : sol.mu_upper)(var[row]) = dual.u[k];
    }
  } else {
    sol.x = x0;
  }

  // Equality multipliers from A^T nu = H x + g - mu_lo + mu_hi.
  if (m > 0) {
    const Eigen::VectorXd rhs = q.H * sol.x + q.g - sol.mu_lower + sol.mu_upper;
    const Eigen::VectorXd w = R11.triangularView<Eigen::Upper>().solve(Q1.transpose() * rhs);
    sol.nu = Eigen::VectorXd::Zero(m);
    for (Eigen::Index i = 0; i < rank; ++i) sol.nu(perm(i)) = w(i);
  } else {
    sol.nu.resize(0);
  }
  sol.objective = q.Objective(sol.x);
  sol.kkt = ComputeKkt(q, sol);
  return sol;
}

}  // namespace sitpose

#endif  // SITPOSE_QP_HPP_
