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
#include <cstdio>
#include <ostream>
#include <string>

#include "flex/errors.h"
#include "flex/lp.h"

namespace flex::lp {
namespace {

void CheckFinite(const SparseRowMatrix& m, const char* what) {
  for (int r = 0; r < m.outerSize(); ++r) {
    for (SparseRowMatrix::InnerIterator it(m, r); it; ++it) {
      if (!std::isfinite(it.value())) {
        throw Error(ErrorCode::kMalformedProblem,
                    std::string("non-finite entry in ") + what);
      }
    }
  }
}

void CheckFinite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) {
    throw Error(ErrorCode::kMalformedProblem, std::string("non-finite entry in ") + what);
  }
}

SparseRowMatrix ToSparse(const Eigen::MatrixXd& dense, int cols) {
  SparseRowMatrix s(dense.rows(), cols);
  if (dense.size() > 0) s = dense.sparseView();
  s.makeCompressed();
  return s;
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

const char* LpStatusName(LpStatus status) {
  switch (status) {
    case LpStatus::kOptimal:
      return "Optimal";
    case LpStatus::kInfeasible:
      return "Infeasible";
    case LpStatus::kUnbounded:
      return "Unbounded";
    case LpStatus::kIterationLimit:
      return "IterationLimit";
  }
  return "Unknown";
}

void LpProblem::Validate() const {
  const int n = num_vars();
  if (a_in.cols() != n || a_eq.cols() != n || lower.size() != n || upper.size() != n) {
    throw Error(ErrorCode::kMalformedProblem, "column counts disagree");
  }
  if (b_in.size() != a_in.rows() || b_eq.size() != a_eq.rows()) {
    throw Error(ErrorCode::kMalformedProblem, "right-hand side length disagrees with rows");
  }
  CheckFinite(objective, "objective");
  CheckFinite(a_in, "A_in");
  CheckFinite(a_eq, "A_eq");
  CheckFinite(b_in, "b_in");
  CheckFinite(b_eq, "b_eq");
  for (int j = 0; j < n; ++j) {
    if (std::isnan(lower[j]) || std::isnan(upper[j]) || lower[j] > upper[j] ||
        lower[j] == kInf || upper[j] == -kInf) {
      throw Error(ErrorCode::kMalformedProblem,
                  "invalid bounds for variable " + std::to_string(j));
    }
  }
}

LpProblem LpProblem::FromDense(const Eigen::VectorXd& objective,
                               const Eigen::MatrixXd& a_in,
                               const Eigen::VectorXd& b_in,
                               const Eigen::MatrixXd& a_eq,
                               const Eigen::VectorXd& b_eq,
                               const Eigen::VectorXd& lower,
                               const Eigen::VectorXd& upper) {
  const int n = static_cast<int>(objective.size());
  if ((a_in.size() > 0 && a_in.cols() != n) || (a_eq.size() > 0 && a_eq.cols() != n)) {
    throw Error(ErrorCode::kMalformedProblem, "column counts disagree");
  }
  LpProblem p;
  p.objective = objective;
  p.a_in = ToSparse(a_in, n);
  p.b_in = b_in;
  p.a_eq = ToSparse(a_eq, n);
  p.b_eq = b_eq;
  p.lower = lower;
  p.upper = upper;
  return p;
}

int LpBuilder::AddVariables(int count, double lower, double upper) {
  const int first = num_vars();
  objective_.resize(first + count, 0.0);
  lower_.resize(first + count, lower);
  upper_.resize(first + count, upper);
  return first;
}

void LpBuilder::SetObjective(int var, double coeff) { objective_.at(var) = coeff; }

void LpBuilder::SetBounds(int var, double lower, double upper) {
  lower_.at(var) = lower;
  upper_.at(var) = upper;
}

int LpBuilder::AddLessEqual(const std::vector<Term>& terms, double rhs) {
  const int row = static_cast<int>(b_in_.size());
  for (const Term& t : terms) {
    if (t.coeff != 0.0) in_.emplace_back(row, t.var, t.coeff);
  }
  b_in_.push_back(rhs);
  return row;
}

int LpBuilder::AddEqual(const std::vector<Term>& terms, double rhs) {
  const int row = static_cast<int>(b_eq_.size());
  for (const Term& t : terms) {
    if (t.coeff != 0.0) eq_.emplace_back(row, t.var, t.coeff);
  }
  b_eq_.push_back(rhs);
  return row;
}

LpProblem LpBuilder::Build() const {
  const int n = num_vars();
  LpProblem p;
  p.objective = Eigen::Map<const Eigen::VectorXd>(objective_.data(), n);
  p.lower = Eigen::Map<const Eigen::VectorXd>(lower_.data(), n);
  p.upper = Eigen::Map<const Eigen::VectorXd>(upper_.data(), n);
  p.a_in = SparseRowMatrix(static_cast<int>(b_in_.size()), n);
  p.a_in.setFromTriplets(in_.begin(), in_.end());
  p.a_in.makeCompressed();
  p.b_in = Eigen::Map<const Eigen::VectorXd>(b_in_.data(), b_in_.size());
  p.a_eq = SparseRowMatrix(static_cast<int>(b_eq_.size()), n);
  p.a_eq.setFromTriplets(eq_.begin(), eq_.end());
  p.a_eq.makeCompressed();
  p.b_eq = Eigen::Map<const Eigen::VectorXd>(b_eq_.data(), b_eq_.size());
  return p;
}

double MaxViolation(const LpProblem& problem, const Eigen::VectorXd& x) {
  double worst = 0.0;
  if (problem.num_ineq() > 0) {
    const Eigen::VectorXd r = problem.a_in * x - problem.b_in;
    worst = std::max(worst, r.maxCoeff());
  }
  if (problem.num_eq() > 0) {
    const Eigen::VectorXd r = problem.a_eq * x - problem.b_eq;
    worst = std::max(worst, r.cwiseAbs().maxCoeff());
  }
  for (int j = 0; j < problem.num_vars(); ++j) {
    worst = std::max(worst, problem.lower[j] - x[j]);
    worst = std::max(worst, x[j] - problem.upper[j]);
  }
  return worst;
}

void WriteMps(const LpProblem& problem, const std::string& name, std::ostream& out) {
  const int n = problem.num_vars();
  const int m_in = problem.num_ineq();
  const int m_eq = problem.num_eq();
  out << "NAME " << name << "\nROWS\n N obj\n";
  for (int r = 0; r < m_in; ++r) out << " L r" << r << "\n";
  for (int r = 0; r < m_eq; ++r) out << " E e" << r << "\n";
  // Column-wise entries.
  const Eigen::SparseMatrix<double> in_cols = problem.a_in;
  const Eigen::SparseMatrix<double> eq_cols = problem.a_eq;
  out << "COLUMNS\n";
  for (int j = 0; j < n; ++j) {
    const std::string col = "x" + std::to_string(j);
    if (problem.objective[j] != 0.0) out << " " << col << " obj " << Num(problem.objective[j]) << "\n";
    for (Eigen::SparseMatrix<double>::InnerIterator it(in_cols, j); it; ++it) {
      out << " " << col << " r" << it.row() << " " << Num(it.value()) << "\n";
    }
    for (Eigen::SparseMatrix<double>::InnerIterator it(eq_cols, j); it; ++it) {
      out << " " << col << " e" << it.row() << " " << Num(it.value()) << "\n";
    }
  }
  out << "RHS\n";
  for (int r = 0; r < m_in; ++r) {
    if (problem.b_in[r] != 0.0) out << " rhs r" << r << " " << Num(problem.b_in[r]) << "\n";
  }
  for (int r = 0; r < m_eq; ++r) {
    if (problem.b_eq[r] != 0.0) out << " rhs e" << r << " " << Num(problem.b_eq[r]) << "\n";
  }
  out << "BOUNDS\n";
  for (int j = 0; j < n; ++j) {
    const std::string col = "x" + std::to_string(j);
    const double lo = problem.lower[j];
    const double hi = problem.upper[j];
    if (lo == hi) {
      out << " FX bnd " << col << " " << Num(lo) << "\n";
      continue;
    }
    if (!std::isfinite(lo) && !std::isfinite(hi)) {
      out << " FR bnd " << col << "\n";
      continue;
    }
    if (!std::isfinite(lo)) {
      out << " MI bnd " << col << "\n";
    } else if (lo != 0.0) {
      out << " LO bnd " << col << " " << Num(lo) << "\n";
    }
    if (std::isfinite(hi)) out << " UP bnd " << col << " " << Num(hi) << "\n";
  }
  out << "ENDATA\n";
}

}  // namespace flex::lp
