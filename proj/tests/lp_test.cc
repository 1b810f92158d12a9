// Copyright 2026 The flex Authors
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

#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "doctest.h"
#include "flex/errors.h"
#include "flex/lp.h"

using namespace flex::lp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd Vec(std::initializer_list<double> v) {
  VectorXd out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

constexpr Algorithm kAlgorithms[] = {Algorithm::kAuto, Algorithm::kPrimal, Algorithm::kDual};

SolverOptions WithAlgorithm(Algorithm alg) {
  SolverOptions o;
  o.algorithm = alg;
  return o;
}

double Uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

// Vertex enumeration for 2-variable problems: every feasible intersection of
// two constraint lines (bounds included), best objective wins.
double BruteForce2d(const MatrixXd& a, const VectorXd& b, const VectorXd& c,
                    const VectorXd& lo, const VectorXd& hi) {
  std::vector<std::pair<Eigen::Vector2d, double>> lines;
  for (int r = 0; r < a.rows(); ++r) lines.push_back({a.row(r).transpose(), b[r]});
  lines.push_back({Eigen::Vector2d(-1, 0), -lo[0]});
  lines.push_back({Eigen::Vector2d(0, -1), -lo[1]});
  lines.push_back({Eigen::Vector2d(1, 0), hi[0]});
  lines.push_back({Eigen::Vector2d(0, 1), hi[1]});
  double best = kInf;
  for (size_t i = 0; i < lines.size(); ++i) {
    for (size_t j = i + 1; j < lines.size(); ++j) {
      Eigen::Matrix2d m;
      m.row(0) = lines[i].first.transpose();
      m.row(1) = lines[j].first.transpose();
      if (std::abs(m.determinant()) < 1e-12) continue;
      const Eigen::Vector2d x = m.partialPivLu().solve(Eigen::Vector2d(lines[i].second, lines[j].second));
      bool ok = true;
      for (const auto& [n, rhs] : lines) ok = ok && n.dot(x) <= rhs + 1e-9;
      if (ok) best = std::min(best, c.dot(x));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("one-variable bound problems") {
  // minimize -x, x <= 10, x >= 0
  LpProblem p = LpProblem::FromDense(Vec({-1}), MatrixXd::Ones(1, 1), Vec({10}),
                                     MatrixXd(0, 1), VectorXd(0), Vec({0}), Vec({kInf}));
  LpSolution s = SolveLp(p);
  CHECK(s.status == LpStatus::kOptimal);
  CHECK(s.x[0] == doctest::Approx(10));
  CHECK(s.objective_value == doctest::Approx(-10));

  // minimize 0, x <= -1, x >= 0
  LpProblem q = LpProblem::FromDense(Vec({0}), MatrixXd::Ones(1, 1), Vec({-1}),
                                     MatrixXd(0, 1), VectorXd(0), Vec({0}), Vec({kInf}));
  CHECK(SolveLp(q).status == LpStatus::kInfeasible);
  CHECK(CheckFeasible(q) == Feasibility::kInfeasible);
}

TEST_CASE("feasibility of simple interval systems") {
  LpProblem box = LpProblem::FromDense(Vec({0}), MatrixXd(0, 1), VectorXd(0), MatrixXd(0, 1),
                                       VectorXd(0), Vec({0}), Vec({1}));
  CHECK(CheckFeasible(box) == Feasibility::kFeasible);

  MatrixXd a(2, 1);
  a << 1, -1;
  LpProblem contradiction = LpProblem::FromDense(Vec({0}), a, Vec({0, -1}), MatrixXd(0, 1),
                                                 VectorXd(0), Vec({-kInf}), Vec({kInf}));
  CHECK(CheckFeasible(contradiction) == Feasibility::kInfeasible);
}

TEST_CASE("single-load charging system with fixed aggregate profile") {
  // Variables u^1_1, u^1_2 in [0, 1]; column sums fixed to u = (0.5, 0.5);
  // energy 1 <= u^1_1 + u^1_2 <= 1.
  LpBuilder b;
  const int v = b.AddVariables(2, 0.0, 1.0);
  b.AddEqual({{v, 1.0}}, 0.5);
  b.AddEqual({{v + 1, 1.0}}, 0.5);
  b.AddLessEqual({{v, 1.0}, {v + 1, 1.0}}, 1.0);
  b.AddLessEqual({{v, -1.0}, {v + 1, -1.0}}, -1.0);
  CHECK(CheckFeasible(b.Build()) == Feasibility::kFeasible);
}

TEST_CASE("unbounded direction is reported") {
  LpProblem p = LpProblem::FromDense(Vec({-1, 0}), MatrixXd(0, 2), VectorXd(0), MatrixXd(0, 2),
                                     VectorXd(0), Vec({0, 0}), Vec({kInf, 1}));
  CHECK(SolveLp(p).status == LpStatus::kUnbounded);
  MatrixXd a(1, 2);
  a << 1, -1;
  LpProblem q = LpProblem::FromDense(Vec({-1, -1}), a, Vec({1}), MatrixXd(0, 2), VectorXd(0),
                                     Vec({0, 0}), Vec({kInf, kInf}));
  CHECK(SolveLp(q).status == LpStatus::kUnbounded);
}

TEST_CASE("malformed problems are rejected") {
  LpProblem p = LpProblem::FromDense(Vec({1, 1}), MatrixXd::Ones(1, 2), Vec({1}), MatrixXd(0, 2),
                                     VectorXd(0), Vec({0, 0}), Vec({1, 1}));
  LpProblem bad_bounds = p;
  bad_bounds.lower = Vec({0});
  CHECK_THROWS_AS(SolveLp(bad_bounds), flex::Error);
  LpProblem nan = p;
  nan.b_in[0] = std::nan("");
  try {
    SolveLp(nan);
    FAIL("expected MalformedProblem");
  } catch (const flex::Error& e) {
    CHECK(e.code() == flex::ErrorCode::kMalformedProblem);
  }
  LpProblem inverted = p;
  inverted.lower[0] = 2.0;
  CHECK_THROWS_AS(CheckFeasible(inverted), flex::Error);
}

TEST_CASE("two-variable problems agree with vertex enumeration") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int rows = 2 + static_cast<int>(rng() % 5);
    MatrixXd a(rows, 2);
    VectorXd b(rows);
    for (int r = 0; r < rows; ++r) {
      a(r, 0) = Uniform(rng, -2, 2);
      a(r, 1) = Uniform(rng, -2, 2);
      b[r] = Uniform(rng, -1, 3);
    }
    const VectorXd c = Vec({Uniform(rng, -1, 1), Uniform(rng, -1, 1)});
    const VectorXd lo = Vec({-3, -3}), hi = Vec({3, 3});
    LpProblem p = LpProblem::FromDense(c, a, b, MatrixXd(0, 2), VectorXd(0), lo, hi);
    const double expected = BruteForce2d(a, b, c, lo, hi);
    for (Algorithm alg : kAlgorithms) {
      CAPTURE(trial);
      CAPTURE(static_cast<int>(alg));
      const LpSolution s = SolveLp(p, WithAlgorithm(alg));
      if (std::isinf(expected)) {
        CHECK(s.status == LpStatus::kInfeasible);
      } else {
        REQUIRE(s.status == LpStatus::kOptimal);
        CHECK(s.objective_value == doctest::Approx(expected).epsilon(1e-7));
        CHECK(MaxViolation(p, s.x) <= 1e-7);
      }
    }
  }
}

TEST_CASE("strong duality on random inequality-form instances") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 46);
    const int m = 3 + static_cast<int>(rng() % 30);
    MatrixXd a(m + 1, n);
    VectorXd b(m + 1);
    for (int r = 0; r < m; ++r) {
      for (int j = 0; j < n; ++j) a(r, j) = (rng() % 3 == 0) ? Uniform(rng, -3, 3) : 0.0;
      b[r] = Uniform(rng, 0.0, 5.0);
    }
    a.row(m).setOnes();  // keeps the region bounded
    b[m] = 10.0;
    VectorXd c(n);
    for (int j = 0; j < n; ++j) c[j] = Uniform(rng, -1, 1);
    const VectorXd zeros = VectorXd::Zero(n);
    const VectorXd inf = VectorXd::Constant(n, kInf);
    LpProblem primal = LpProblem::FromDense(c, a, b, MatrixXd(0, n), VectorXd(0), zeros, inf);
    const LpSolution ps = SolveLp(primal);
    REQUIRE(ps.status == LpStatus::kOptimal);
    CHECK(MaxViolation(primal, ps.x) <= 1e-7);

    // max b'y s.t. A'y <= c, y <= 0, solved as min -b'y.
    LpProblem dual = LpProblem::FromDense(-b, a.transpose(), c, MatrixXd(0, m + 1), VectorXd(0),
                                          VectorXd::Constant(m + 1, -kInf), VectorXd::Zero(m + 1));
    const LpSolution ds = SolveLp(dual);
    REQUIRE(ds.status == LpStatus::kOptimal);
    CHECK(std::abs(ps.objective_value + ds.objective_value) <= 1e-6);
    // The solver's own row duals give the same value.
    CHECK(std::abs(ps.objective_value - b.dot(ps.dual_in)) <= 1e-6);
  }
}

TEST_CASE("strong duality on random equality-form instances") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 6 + static_cast<int>(rng() % 40);
    const int m = 2 + static_cast<int>(rng() % (n / 2));
    MatrixXd a(m, n);
    for (int r = 0; r < m; ++r) {
      for (int j = 0; j < n; ++j) a(r, j) = (rng() % 2 == 0) ? Uniform(rng, -2, 2) : 0.0;
    }
    VectorXd x0(n);
    for (int j = 0; j < n; ++j) x0[j] = Uniform(rng, 0, 2);
    const VectorXd b = a * x0;
    VectorXd c(n);
    for (int j = 0; j < n; ++j) c[j] = Uniform(rng, 0.1, 1.0);
    LpProblem primal = LpProblem::FromDense(c, MatrixXd(0, n), VectorXd(0), a, b,
                                            VectorXd::Zero(n), VectorXd::Constant(n, kInf));
    const LpSolution ps = SolveLp(primal);
    REQUIRE(ps.status == LpStatus::kOptimal);
    CHECK(MaxViolation(primal, ps.x) <= 1e-7);
    LpProblem dual = LpProblem::FromDense(-b, a.transpose(), c, MatrixXd(0, m), VectorXd(0),
                                          VectorXd::Constant(m, -kInf), VectorXd::Constant(m, kInf));
    const LpSolution ds = SolveLp(dual);
    REQUIRE(ds.status == LpStatus::kOptimal);
    CHECK(std::abs(ps.objective_value + ds.objective_value) <= 1e-6);
  }
}

TEST_CASE("infeasibility verdicts carry a valid Farkas certificate") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + static_cast<int>(rng() % 20);
    const int m = 2 + static_cast<int>(rng() % 10);
    const int meq = static_cast<int>(rng() % 3);
    MatrixXd a(m + 1, n);
    VectorXd b(m + 1);
    VectorXd combo = VectorXd::Zero(n);
    double combo_rhs = 0.0;
    for (int r = 0; r < m; ++r) {
      for (int j = 0; j < n; ++j) a(r, j) = Uniform(rng, -2, 2);
      b[r] = Uniform(rng, -1, 2);
      const double w = Uniform(rng, 0.1, 1.0);
      combo += w * a.row(r).transpose();
      combo_rhs += w * b[r];
    }
    // A nonnegative combination of the rows contradicts the last row.
    a.row(m) = -combo.transpose();
    b[m] = -combo_rhs - 0.5;
    MatrixXd aeq(meq, n);
    VectorXd beq(meq);
    for (int r = 0; r < meq; ++r) {
      for (int j = 0; j < n; ++j) aeq(r, j) = Uniform(rng, -1, 1);
      beq[r] = Uniform(rng, -1, 1);
    }
    VectorXd lo(n), hi(n);
    for (int j = 0; j < n; ++j) {
      lo[j] = (rng() % 2) ? -kInf : -5.0;
      hi[j] = (rng() % 2) ? kInf : 5.0;
    }
    // A positive cost lets the dual method start wherever a lower bound is
    // finite.
    VectorXd cost = VectorXd::Zero(n);
    for (int j = 0; j < n; ++j) cost[j] = std::isfinite(lo[j]) ? Uniform(rng, 0, 1) : 0.0;
    LpProblem p = LpProblem::FromDense(cost, a, b, aeq, beq, lo, hi);
    for (Algorithm alg : kAlgorithms) {
      CAPTURE(static_cast<int>(alg));
      const LpSolution s = SolveLp(p, WithAlgorithm(alg));
      REQUIRE(s.status == LpStatus::kInfeasible);
      const FarkasCertificate& f = s.farkas;
      CHECK(f.y_in.minCoeff() >= 0.0);
      CHECK(f.y_lower.minCoeff() >= 0.0);
      CHECK(f.y_upper.minCoeff() >= 0.0);
      VectorXd combination = a.transpose() * f.y_in - f.y_lower + f.y_upper;
      if (meq > 0) combination += aeq.transpose() * f.y_eq;
      double rhs = b.dot(f.y_in) + (meq > 0 ? beq.dot(f.y_eq) : 0.0);
      for (int j = 0; j < n; ++j) {
        if (f.y_lower[j] > 0) rhs -= lo[j] * f.y_lower[j];
        if (f.y_upper[j] > 0) rhs += hi[j] * f.y_upper[j];
      }
      CHECK(combination.cwiseAbs().maxCoeff() <= 1e-8);
      CHECK(rhs < -1e-8);
    }
  }
}

TEST_CASE("primal and dual methods agree from a dual feasible start") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 4 + static_cast<int>(rng() % 30);
    const int m = 3 + static_cast<int>(rng() % 25);
    const int meq = static_cast<int>(rng() % 4);
    MatrixXd a(m, n), aeq(meq, n);
    VectorXd x0(n);
    for (int j = 0; j < n; ++j) x0[j] = Uniform(rng, 0, 2);
    for (int r = 0; r < m; ++r) {
      for (int j = 0; j < n; ++j) a(r, j) = (rng() % 2 == 0) ? Uniform(rng, -2, 2) : 0.0;
    }
    for (int r = 0; r < meq; ++r) {
      for (int j = 0; j < n; ++j) aeq(r, j) = Uniform(rng, -1, 1);
    }
    // Feasible by construction, with slack on the inequalities.
    VectorXd b = a * x0;
    for (int r = 0; r < m; ++r) b[r] += Uniform(rng, 0, 1);
    const VectorXd beq = aeq * x0;
    VectorXd c(n);
    for (int j = 0; j < n; ++j) c[j] = Uniform(rng, 0, 1);
    LpProblem p = LpProblem::FromDense(c, a, b, aeq, beq, VectorXd::Zero(n),
                                       VectorXd::Constant(n, kInf));
    const LpSolution primal = SolveLp(p, WithAlgorithm(Algorithm::kPrimal));
    const LpSolution dual = SolveLp(p, WithAlgorithm(Algorithm::kDual));
    REQUIRE(primal.status == LpStatus::kOptimal);
    REQUIRE(dual.status == LpStatus::kOptimal);
    CHECK(std::abs(primal.objective_value - dual.objective_value) <=
          1e-7 * (1.0 + std::abs(primal.objective_value)));
    CHECK(MaxViolation(p, dual.x) <= 1e-7);
  }
}

TEST_CASE("identical input produces identical output") {
  std::mt19937_64 rng(99);
  const int n = 30, m = 20;
  MatrixXd a(m, n);
  VectorXd b(m), c(n);
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < n; ++j) a(r, j) = Uniform(rng, -1, 1);
    b[r] = Uniform(rng, 0, 1);
  }
  for (int j = 0; j < n; ++j) c[j] = Uniform(rng, -1, 1);
  LpProblem p = LpProblem::FromDense(c, a, b, MatrixXd(0, n), VectorXd(0), VectorXd::Zero(n),
                                     VectorXd::Ones(n));
  const LpSolution s1 = SolveLp(p);
  const LpSolution s2 = SolveLp(p);
  REQUIRE(s1.status == LpStatus::kOptimal);
  CHECK(s1.iterations == s2.iterations);
  for (int j = 0; j < n; ++j) CHECK(s1.x[j] == s2.x[j]);
}

TEST_CASE("degenerate problems terminate") {
  // Klee-Minty-like cube plus many redundant copies of the same facets.
  const int n = 8;
  std::vector<std::vector<double>> rows;
  std::vector<double> rhs;
  for (int i = 0; i < n; ++i) {
    for (int copy = 0; copy < 4; ++copy) {
      std::vector<double> r(n, 0.0);
      for (int j = 0; j < i; ++j) r[j] = 2.0 * std::pow(2.0, i - j);
      r[i] = 1.0;
      rows.push_back(r);
      rhs.push_back(std::pow(5.0, i));
    }
  }
  MatrixXd a(rows.size(), n);
  VectorXd b(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    for (int j = 0; j < n; ++j) a(r, j) = rows[r][j];
    b[r] = rhs[r];
  }
  VectorXd c(n);
  for (int j = 0; j < n; ++j) c[j] = -std::pow(2.0, n - 1 - j);
  LpProblem p = LpProblem::FromDense(c, a, b, MatrixXd(0, n), VectorXd(0), VectorXd::Zero(n),
                                     VectorXd::Constant(n, kInf));
  const LpSolution s = SolveLp(p);
  REQUIRE(s.status == LpStatus::kOptimal);
  CHECK(s.objective_value == doctest::Approx(-std::pow(5.0, n - 1)));
}

TEST_CASE("MPS dump uses twelve significant digits") {
  LpBuilder b;
  const int v = b.AddVariables(2, 0.0, kInf);
  b.SetObjective(v, 1.0 / 3.0);
  b.AddLessEqual({{v, 1.0}, {v + 1, 2.0}}, 4.0);
  b.AddEqual({{v + 1, 1.0}}, 1.5);
  std::ostringstream out;
  WriteMps(b.Build(), "tiny", out);
  const std::string text = out.str();
  CHECK(text.find("NAME tiny") != std::string::npos);
  CHECK(text.find("0.333333333333") != std::string::npos);
  CHECK(text.find(" E e0") != std::string::npos);
  CHECK(text.find("ENDATA") != std::string::npos);
}
