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

// Linear programming: problem container, builder and a bounded revised simplex
// solver.
//
//   minimize    c'x
//   subject to  A_in x <= b_in
//               A_eq x  = b_eq
//               lower <= x <= upper      (either bound may be infinite)
//
// Constraint matrices are stored row-compressed; the solver works on a sparse
// LU factorization of the basis, so the same code path serves the tiny
// one-variable problems and the multi-thousand-row robust counterparts.

#ifndef FLEX_LP_H_
#define FLEX_LP_H_

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace flex::lp {

using SparseRowMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct LpProblem {
  Eigen::VectorXd objective;
  SparseRowMatrix a_in;
  Eigen::VectorXd b_in;
  SparseRowMatrix a_eq;
  Eigen::VectorXd b_eq;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int num_vars() const { return static_cast<int>(objective.size()); }
  int num_ineq() const { return static_cast<int>(a_in.rows()); }
  int num_eq() const { return static_cast<int>(a_eq.rows()); }

  // Throws Error(kMalformedProblem) on dimension mismatch, NaN data, infinite
  // matrix/rhs entries or lower > upper.
  void Validate() const;

  // Convenience for small hand-written problems. Empty matrices are allowed.
  static LpProblem FromDense(const Eigen::VectorXd& objective,
                             const Eigen::MatrixXd& a_in,
                             const Eigen::VectorXd& b_in,
                             const Eigen::MatrixXd& a_eq,
                             const Eigen::VectorXd& b_eq,
                             const Eigen::VectorXd& lower,
                             const Eigen::VectorXd& upper);
};

// Incremental construction of an LpProblem from named variable blocks and
// sparse rows. Variables default to the free range.
class LpBuilder {
 public:
  // Adds `count` variables with the given bounds; returns the first index.
  int AddVariables(int count, double lower = -kInf, double upper = kInf);
  void SetObjective(int var, double coeff);
  void SetBounds(int var, double lower, double upper);

  // Each row is a list of (variable, coefficient); duplicate variables sum.
  struct Term {
    int var;
    double coeff;
  };
  int AddLessEqual(const std::vector<Term>& terms, double rhs);
  int AddEqual(const std::vector<Term>& terms, double rhs);

  int num_vars() const { return static_cast<int>(lower_.size()); }
  LpProblem Build() const;

 private:
  std::vector<double> objective_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  std::vector<Triplet> in_;
  std::vector<double> b_in_;
  std::vector<Triplet> eq_;
  std::vector<double> b_eq_;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

const char* LpStatusName(LpStatus status);

enum class Algorithm {
  kAuto,    // dual when the slack basis is dual feasible, primal otherwise
  kPrimal,
  kDual,    // falls back to primal when the start is not dual feasible
};

struct SolverOptions {
  double tol_feas = 1e-7;
  double tol_opt = 1e-7;
  double tol_pivot = 1e-9;
  int max_iterations = 2'000'000;
  int refactor_interval = 100;
  // Consecutive non-improving primal iterations before switching from
  // Dantzig to Bland's rule.
  int stall_limit = 1000;
  Algorithm algorithm = Algorithm::kAuto;
};

// Multipliers proving infeasibility of the system written entirely as
// "<=" rows: A_in x <= b_in, A_eq x = b_eq (free multiplier), -x <= -lower,
// x <= upper. A valid certificate has
//   A_in' y_in + A_eq' y_eq - y_lower + y_upper = 0   and
//   b_in'y_in + b_eq'y_eq - lower'y_lower + upper'y_upper < 0
// with y_in, y_lower, y_upper >= 0 (entries for infinite bounds are zero).
struct FarkasCertificate {
  Eigen::VectorXd y_in;
  Eigen::VectorXd y_eq;
  Eigen::VectorXd y_lower;
  Eigen::VectorXd y_upper;
};

struct LpSolution {
  LpStatus status = LpStatus::kInfeasible;
  Eigen::VectorXd x;
  double objective_value = 0.0;
  // Row duals at optimality (sensitivity of the optimum to b_in / b_eq).
  Eigen::VectorXd dual_in;
  Eigen::VectorXd dual_eq;
  // Present when status == kInfeasible.
  FarkasCertificate farkas;
  int iterations = 0;
};

LpSolution SolveLp(const LpProblem& problem, const SolverOptions& options = {});

enum class Feasibility { kFeasible, kInfeasible };

// Phase-one test; the objective is ignored.
Feasibility CheckFeasible(const LpProblem& problem,
                          const SolverOptions& options = {});

// Maximum violation of the constraints and bounds by x.
double MaxViolation(const LpProblem& problem, const Eigen::VectorXd& x);

// Writes the problem in free MPS format, 12 significant digits.
void WriteMps(const LpProblem& problem, const std::string& name,
              std::ostream& out);

}  // namespace flex::lp

#endif  // FLEX_LP_H_
