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

#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "qp_oracle.hpp"
#include "sitpose/qp.hpp"

namespace sitpose {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ErrorKind KindOf(const QpProblem& q, const QpOptions& o = {}) {
  try {
    SolveQp(q, o);
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::kConfigError;
}

TEST(Qp, UnconstrainedMinimum) {
  Eigen::Matrix3d h;
  h << 4, 1, 0, 1, 3, 0.5, 0, 0.5, 2;
  const Eigen::Vector3d g(1, -2, 0.5);
  const QpSolution s = SolveQp(QpProblem::Unconstrained(h, g));
  EXPECT_LT((s.x - h.ldlt().solve(-g)).norm(), 1e-12);
  EXPECT_EQ(s.active_bounds, 0);
}

TEST(Qp, TrackingObjectiveIsExactWithoutConstraints) {
  const Eigen::VectorXd ref = Eigen::VectorXd::LinSpaced(6, -2.0, 3.0);
  const QpSolution s = SolveQp(QpProblem::Unconstrained(Eigen::MatrixXd::Identity(6, 6), -ref));
  EXPECT_LT((s.x - ref).norm(), 1e-14);
  EXPECT_NEAR(s.objective + 0.5 * ref.squaredNorm(), 0.0, 1e-12);
}

TEST(Qp, ProjectionOntoLine) {
  QpProblem q = QpProblem::Unconstrained(2.0 * Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(-2, -2));
  q.A = Eigen::RowVector2d(1, 1);
  q.b = Eigen::VectorXd::Constant(1, 1.0);
  const QpSolution s = SolveQp(q);
  EXPECT_LT((s.x - Eigen::Vector2d(0.5, 0.5)).norm(), 1e-12);
  EXPECT_LT(s.kkt.Max(), 1e-10);
  EXPECT_NEAR(s.nu(0), -1.0, 1e-12);
}

TEST(Qp, ActiveBoundCarriesMultiplier) {
  QpProblem q = QpProblem::Unconstrained(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(-3, 1));
  q.upper(0) = 1.0;
  q.lower(1) = 0.0;
  const QpSolution s = SolveQp(q);
  EXPECT_LT((s.x - Eigen::Vector2d(1, 0)).norm(), 1e-12);
  EXPECT_NEAR(s.mu_upper(0), 2.0, 1e-12);
  EXPECT_NEAR(s.mu_lower(1), 1.0, 1e-12);
  EXPECT_EQ(s.active_bounds, 2);
}

TEST(Qp, RandomProblemsMatchKktOracle) {
  std::mt19937_64 rng(2024);
  int solved = 0, with_active = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 5;
    const int m = std::min(trial % 4, n - 1);
    const QpProblem q = testing::RandomQp(rng, n, m);
    const auto oracle = testing::KktOracle(q);
    ASSERT_TRUE(oracle.has_value()) << trial;
    const QpSolution s = SolveQp(q);
    EXPECT_LT((s.x - *oracle).lpNorm<Eigen::Infinity>(), 1e-8) << trial;
    EXPECT_LT(s.kkt.Max(), 1e-8) << trial;
    ++solved;
    with_active += s.active_bounds > 0;
  }
  EXPECT_EQ(solved, 300);
  EXPECT_GT(with_active, 50);
}

TEST(Qp, NeverWorseThanFeasiblePoints) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    QpProblem q = testing::RandomQp(rng, 5, 2);
    const QpSolution s = SolveQp(q);
    // Feasible points: x + null-space steps, clipped and kept only if inside.
    const Eigen::MatrixXd ns = Eigen::FullPivLU<Eigen::MatrixXd>(q.A).kernel();
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXd y(ns.cols());
      for (auto& v : y) v = 0.3 * nd(rng);
      const Eigen::VectorXd x = s.x + ns * y;
      if ((x.array() < q.lower.array()).any() || (x.array() > q.upper.array()).any()) continue;
      EXPECT_GE(q.Objective(x), s.objective - 1e-10);
    }
  }
}

TEST(Qp, ErrorKinds) {
  QpProblem inconsistent = QpProblem::Unconstrained(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d::Zero());
  inconsistent.A.resize(2, 2);
  inconsistent.A << 1, 1, 1, 1;
  inconsistent.b = Eigen::Vector2d(1, 2);
  EXPECT_EQ(KindOf(inconsistent), ErrorKind::kInfeasibleProblem);

  QpProblem boxed = QpProblem::Unconstrained(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d::Zero());
  boxed.A = Eigen::RowVector2d(1, 1);
  boxed.b = Eigen::VectorXd::Constant(1, 10.0);
  boxed.lower.setZero();
  boxed.upper.setOnes();
  EXPECT_EQ(KindOf(boxed), ErrorKind::kInfeasibleProblem);

  QpProblem empty_box = QpProblem::Unconstrained(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1));
  empty_box.lower(0) = 1.0;
  empty_box.upper(0) = 0.0;
  EXPECT_EQ(KindOf(empty_box), ErrorKind::kInfeasibleProblem);

  Eigen::Matrix2d indefinite;
  indefinite << 1, 0, 0, -1;
  EXPECT_EQ(KindOf(QpProblem::Unconstrained(indefinite, Eigen::Vector2d::Zero())), ErrorKind::kIllPosedProblem);

  QpProblem bad_shape = QpProblem::Unconstrained(Eigen::MatrixXd::Identity(3, 3), Eigen::Vector2d::Zero());
  EXPECT_EQ(KindOf(bad_shape), ErrorKind::kShapeMismatch);

  const int n = 6;
  QpProblem many = QpProblem::Unconstrained(Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Constant(n, -5.0));
  many.upper.setZero();
  QpOptions tight;
  tight.max_iterations = 2;
  EXPECT_EQ(KindOf(many, tight), ErrorKind::kMaxIterations);
  EXPECT_EQ(SolveQp(many).active_bounds, n);
}

TEST(Qp, EqualityFixedVariableRespectsBounds) {
  QpProblem q = QpProblem::Unconstrained(Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(1, 1));
  q.A = Eigen::RowVector2d(1, 0);
  q.b = Eigen::VectorXd::Constant(1, 0.5);
  q.lower = Eigen::Vector2d(0.0, -kInf);
  q.upper = Eigen::Vector2d(1.0, kInf);
  const QpSolution s = SolveQp(q);
  EXPECT_LT((s.x - Eigen::Vector2d(0.5, -1.0)).norm(), 1e-12);
  q.upper(0) = 0.4;
  EXPECT_EQ(KindOf(q), ErrorKind::kInfeasibleProblem);
}

}  // namespace
}  // namespace sitpose
