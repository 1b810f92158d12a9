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

// Bounded revised simplex, primal and dual.
//
// Every row i gets a logical variable w_i so the working system is
// [A I] (x, w) = b with w_i in [0, inf) for "<=" rows and w_i fixed at 0 for
// equality rows. The basis inverse is a sparse LU factorization plus a
// product-form eta file, rebuilt every `refactor_interval` updates.
//
// Primal: phase one minimizes the sum of bound violations of the basic
// variables (composite cost recomputed every iteration); phase two minimizes
// the user objective. Pricing is Dantzig's rule; after `stall_limit`
// iterations without progress the solver switches to Bland's rule until the
// objective moves again.
//
// Dual: used when the slack basis is dual feasible, which is the case for
// pure feasibility problems and for objectives whose signs match the finite
// bounds. Leaving rows are priced by dual steepest edge, the ratio test is
// Harris' two-pass test, and costs are perturbed at the start against dual
// degeneracy. The perturbation is removed at the end and the primal method
// finishes from the final basis, so the reported optimum is for the original
// costs. Infeasibility detected by the dual is also handed to the primal
// phase one, which produces the certificate.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "flex/errors.h"
#include "flex/lp.h"
#include "lu_factor.h"

namespace flex::lp {
namespace {

using internal::LuFactor;
using internal::SparseColumn;

enum class VarState : char { kBasic, kAtLower, kAtUpper, kFreeZero };

struct Eta {
  int position;
  double pivot;
  std::vector<int> index;
  std::vector<double> value;
};

class RevisedSimplex {
 public:
  RevisedSimplex(const LpProblem& problem, const SolverOptions& options)
      : problem_(problem), options_(options) {}

  LpSolution Solve(bool phase_one_only);

 private:
  enum class DualOutcome { kOptimal, kInfeasible, kLimit, kTrouble };

  void Setup();
  bool PlaceForDual(const std::vector<double>& cost);
  DualOutcome DualLoop(std::vector<double> cost);
  void PrimalLoop(bool phase_one_only, LpSolution& out);
  void ComputeRow(const std::vector<double>& rho, std::vector<double>& row) const;
  void Crash();
  void Refactor();
  void RecomputeBasicValues();
  void Ftran(std::vector<double>& v) const;
  void Btran(std::vector<double>& v) const;
  void ColumnOf(int var, std::vector<double>& dense) const;
  double ColumnDot(int var, const std::vector<double>& y) const;
  double Infeasibility(int var) const;
  double SumInfeasibility() const;
  double PhaseCost(int var, bool phase_one) const;
  double ObjectiveValue() const;
  void BuildCertificate(const std::vector<double>& y, const std::vector<double>& cost,
                        LpSolution& out) const;

  const LpProblem& problem_;
  const SolverOptions& options_;

  int n_ = 0;  // structurals
  int m_ = 0;  // rows
  std::vector<int> col_start_;
  std::vector<int> col_row_;
  std::vector<double> col_val_;
  std::vector<int> row_start_;  // row-major copy of [A_in; A_eq]
  std::vector<int> row_col_;
  std::vector<double> row_val_;
  std::vector<double> b_;
  std::vector<double> cost_;
  std::vector<double> lower_;
  std::vector<double> upper_;

  std::vector<double> x_;
  std::vector<VarState> state_;
  std::vector<int> head_;      // basis position -> variable
  std::vector<int> position_;  // variable -> basis position or -1

  LuFactor lu_;
  std::vector<Eta> etas_;
  int iterations_ = 0;
};

void RevisedSimplex::Setup() {
  n_ = problem_.num_vars();
  const int m_in = problem_.num_ineq();
  const int m_eq = problem_.num_eq();
  m_ = m_in + m_eq;

  // Column-major copy of [A_in; A_eq].
  std::vector<int> counts(n_ + 1, 0);
  for (int r = 0; r < m_in; ++r) {
    for (SparseRowMatrix::InnerIterator it(problem_.a_in, r); it; ++it) {
      if (it.value() != 0.0) ++counts[it.col() + 1];
    }
  }
  for (int r = 0; r < m_eq; ++r) {
    for (SparseRowMatrix::InnerIterator it(problem_.a_eq, r); it; ++it) {
      if (it.value() != 0.0) ++counts[it.col() + 1];
    }
  }
  for (int j = 0; j < n_; ++j) counts[j + 1] += counts[j];
  col_start_ = counts;
  col_row_.assign(counts[n_], 0);
  col_val_.assign(counts[n_], 0.0);
  std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
  for (int r = 0; r < m_in; ++r) {
    for (SparseRowMatrix::InnerIterator it(problem_.a_in, r); it; ++it) {
      if (it.value() == 0.0) continue;
      const int k = fill[it.col()]++;
      col_row_[k] = r;
      col_val_[k] = it.value();
    }
  }
  for (int r = 0; r < m_eq; ++r) {
    for (SparseRowMatrix::InnerIterator it(problem_.a_eq, r); it; ++it) {
      if (it.value() == 0.0) continue;
      const int k = fill[it.col()]++;
      col_row_[k] = m_in + r;
      col_val_[k] = it.value();
    }
  }

  row_start_.assign(1, 0);
  row_col_.clear();
  row_val_.clear();
  for (int r = 0; r < m_; ++r) {
    const SparseRowMatrix& a = r < m_in ? problem_.a_in : problem_.a_eq;
    for (SparseRowMatrix::InnerIterator it(a, r < m_in ? r : r - m_in); it; ++it) {
      if (it.value() == 0.0) continue;
      row_col_.push_back(static_cast<int>(it.col()));
      row_val_.push_back(it.value());
    }
    row_start_.push_back(static_cast<int>(row_col_.size()));
  }

  b_.resize(m_);
  for (int r = 0; r < m_in; ++r) b_[r] = problem_.b_in[r];
  for (int r = 0; r < m_eq; ++r) b_[m_in + r] = problem_.b_eq[r];

  const int total = n_ + m_;
  cost_.assign(total, 0.0);
  lower_.assign(total, 0.0);
  upper_.assign(total, 0.0);
  for (int j = 0; j < n_; ++j) {
    cost_[j] = problem_.objective[j];
    lower_[j] = problem_.lower[j];
    upper_[j] = problem_.upper[j];
  }
  for (int r = 0; r < m_in; ++r) upper_[n_ + r] = kInf;

  x_.assign(total, 0.0);
  state_.assign(total, VarState::kAtLower);
  position_.assign(total, -1);
  head_.resize(m_);
  for (int j = 0; j < n_; ++j) {
    if (std::isfinite(lower_[j])) {
      state_[j] = VarState::kAtLower;
      x_[j] = lower_[j];
    } else if (std::isfinite(upper_[j])) {
      state_[j] = VarState::kAtUpper;
      x_[j] = upper_[j];
    } else {
      state_[j] = VarState::kFreeZero;
      x_[j] = 0.0;
    }
  }
  for (int r = 0; r < m_; ++r) {
    head_[r] = n_ + r;
    position_[n_ + r] = r;
    state_[n_ + r] = VarState::kBasic;
  }
}

// Replaces the logicals of violated rows by structural columns, keeping the
// basis triangular: a chosen column's pivot row carries no other crashed
// column, and its remaining rows keep their logicals.
void RevisedSimplex::Crash() {
  std::vector<double> activity(m_, 0.0);
  for (int j = 0; j < n_; ++j) {
    if (x_[j] == 0.0) continue;
    for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
      activity[col_row_[k]] += col_val_[k] * x_[j];
    }
  }
  std::vector<char> locked(m_, 0);
  std::vector<char> pivot(m_, 0);
  // Row-wise view of the columns for the search.
  std::vector<std::vector<int>> row_cols(m_);
  for (int j = 0; j < n_; ++j) {
    for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
      row_cols[col_row_[k]].push_back(j);
    }
  }
  for (int r = 0; r < m_; ++r) {
    const int logical = n_ + r;
    const double w = b_[r] - activity[r];
    const bool violated =
        w < lower_[logical] - options_.tol_feas || w > upper_[logical] + options_.tol_feas;
    if (!violated || locked[r]) continue;
    int best = -1;
    int best_nnz = std::numeric_limits<int>::max();
    double best_value = 0.0;
    for (int j : row_cols[r]) {
      if (state_[j] == VarState::kBasic) continue;
      const int nnz = col_start_[j + 1] - col_start_[j];
      if (nnz >= best_nnz) continue;
      double a_rj = 0.0, col_max = 0.0;
      bool ok = true;
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) {
        const int i = col_row_[k];
        col_max = std::max(col_max, std::abs(col_val_[k]));
        if (i == r) {
          a_rj = col_val_[k];
        } else if (pivot[i]) {
          ok = false;
        }
      }
      if (!ok || std::abs(a_rj) < 0.1 * col_max || std::abs(a_rj) < 1e-7) continue;
      // Value the column takes once it owns row r; must respect its bounds.
      const double value = x_[j] + (b_[r] - activity[r]) / a_rj;
      if (value < lower_[j] - options_.tol_feas || value > upper_[j] + options_.tol_feas) {
        continue;
      }
      best = j;
      best_nnz = nnz;
      best_value = value;
    }
    if (best < 0) continue;
    const double delta = best_value - x_[best];
    for (int k = col_start_[best]; k < col_start_[best + 1]; ++k) {
      const int i = col_row_[k];
      activity[i] += col_val_[k] * delta;
      if (i != r) locked[i] = 1;
    }
    pivot[r] = 1;
    locked[r] = 1;
    x_[best] = best_value;
    state_[best] = VarState::kBasic;
    position_[best] = r;
    head_[r] = best;
    state_[logical] = VarState::kAtLower;
    position_[logical] = -1;
    x_[logical] = 0.0;
  }
}

void RevisedSimplex::Refactor() {
  for (int attempt = 0;; ++attempt) {
    std::vector<SparseColumn> columns(m_);
    for (int p = 0; p < m_; ++p) {
      const int var = head_[p];
      if (var >= n_) {
        columns[p].rows.push_back(var - n_);
        columns[p].values.push_back(1.0);
      } else {
        for (int k = col_start_[var]; k < col_start_[var + 1]; ++k) {
          columns[p].rows.push_back(col_row_[k]);
          columns[p].values.push_back(col_val_[k]);
        }
      }
    }
    LuFactor::Options lu_options;
    const LuFactor::Deficiency def = lu_.Factorize(columns, lu_options);
    etas_.clear();
    if (def.empty()) return;
    if (attempt > 3) throw Error(ErrorCode::kMalformedProblem, "basis repair failed");
    // Swap dependent columns for the logicals of the uncovered rows.
    for (size_t k = 0; k < def.columns.size(); ++k) {
      const int p = def.columns[k];
      const int leaving = head_[p];
      const int logical = n_ + def.rows[k];
      position_[leaving] = -1;
      if (std::isfinite(lower_[leaving]) &&
          (!std::isfinite(upper_[leaving]) ||
           std::abs(x_[leaving] - lower_[leaving]) <= std::abs(x_[leaving] - upper_[leaving]))) {
        state_[leaving] = VarState::kAtLower;
        x_[leaving] = lower_[leaving];
      } else if (std::isfinite(upper_[leaving])) {
        state_[leaving] = VarState::kAtUpper;
        x_[leaving] = upper_[leaving];
      } else {
        state_[leaving] = VarState::kFreeZero;
        x_[leaving] = 0.0;
      }
      head_[p] = logical;
      position_[logical] = p;
      state_[logical] = VarState::kBasic;
    }
  }
}

void RevisedSimplex::Ftran(std::vector<double>& v) const {
  lu_.Ftran(v);
  for (const Eta& e : etas_) {
    const double xr = v[e.position] / e.pivot;
    v[e.position] = xr;
    if (xr == 0.0) continue;
    for (size_t k = 0; k < e.index.size(); ++k) v[e.index[k]] -= e.value[k] * xr;
  }
}

void RevisedSimplex::Btran(std::vector<double>& v) const {
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    double s = v[it->position];
    for (size_t k = 0; k < it->index.size(); ++k) s -= it->value[k] * v[it->index[k]];
    v[it->position] = s / it->pivot;
  }
  lu_.Btran(v);
}

void RevisedSimplex::ColumnOf(int var, std::vector<double>& dense) const {
  std::fill(dense.begin(), dense.end(), 0.0);
  if (var >= n_) {
    dense[var - n_] = 1.0;
    return;
  }
  for (int k = col_start_[var]; k < col_start_[var + 1]; ++k) dense[col_row_[k]] = col_val_[k];
}

double RevisedSimplex::ColumnDot(int var, const std::vector<double>& y) const {
  if (var >= n_) return y[var - n_];
  double s = 0.0;
  for (int k = col_start_[var]; k < col_start_[var + 1]; ++k) s += col_val_[k] * y[col_row_[k]];
  return s;
}

void RevisedSimplex::RecomputeBasicValues() {
  std::vector<double> rhs = b_;
  for (int j = 0; j < n_ + m_; ++j) {
    if (state_[j] == VarState::kBasic || x_[j] == 0.0) continue;
    if (j >= n_) {
      rhs[j - n_] -= x_[j];
    } else {
      for (int k = col_start_[j]; k < col_start_[j + 1]; ++k) rhs[col_row_[k]] -= col_val_[k] * x_[j];
    }
  }
  Ftran(rhs);
  for (int p = 0; p < m_; ++p) x_[head_[p]] = rhs[p];
}

double RevisedSimplex::Infeasibility(int var) const {
  const double v = x_[var];
  if (v < lower_[var]) return lower_[var] - v;
  if (v > upper_[var]) return v - upper_[var];
  return 0.0;
}

double RevisedSimplex::SumInfeasibility() const {
  double s = 0.0;
  for (int p = 0; p < m_; ++p) {
    const double inf = Infeasibility(head_[p]);
    if (inf > options_.tol_feas) s += inf;
  }
  return s;
}

double RevisedSimplex::PhaseCost(int var, bool phase_one) const {
  if (!phase_one) return cost_[var];
  if (state_[var] != VarState::kBasic) return 0.0;
  if (x_[var] < lower_[var] - options_.tol_feas) return -1.0;
  if (x_[var] > upper_[var] + options_.tol_feas) return 1.0;
  return 0.0;
}

double RevisedSimplex::ObjectiveValue() const {
  double s = 0.0;
  for (int j = 0; j < n_; ++j) s += cost_[j] * x_[j];
  return s;
}

void RevisedSimplex::BuildCertificate(const std::vector<double>& y,
                                      const std::vector<double>& cost,
                                      LpSolution& out) const {
  const int m_in = problem_.num_ineq();
  const int m_eq = problem_.num_eq();
  FarkasCertificate& f = out.farkas;
  f.y_in = Eigen::VectorXd::Zero(m_in);
  f.y_eq = Eigen::VectorXd::Zero(m_eq);
  f.y_lower = Eigen::VectorXd::Zero(n_);
  f.y_upper = Eigen::VectorXd::Zero(n_);
  for (int r = 0; r < m_in; ++r) f.y_in[r] = std::max(0.0, -y[r]);
  for (int r = 0; r < m_eq; ++r) f.y_eq[r] = -y[m_in + r];
  for (int j = 0; j < n_; ++j) {
    const double d = cost[j] - ColumnDot(j, y);
    if (state_[j] == VarState::kBasic) {
      if (cost[j] < 0) f.y_lower[j] = 1.0;
      if (cost[j] > 0) f.y_upper[j] = 1.0;
    } else if (d > 0 && std::isfinite(lower_[j])) {
      f.y_lower[j] = d;
    } else if (d < 0 && std::isfinite(upper_[j])) {
      f.y_upper[j] = -d;
    }
  }
}

bool RevisedSimplex::PlaceForDual(const std::vector<double>& cost) {
  for (int j = 0; j < n_; ++j) {
    if (lower_[j] == upper_[j]) continue;
    if (cost[j] > 0.0) {
      if (!std::isfinite(lower_[j])) return false;
      state_[j] = VarState::kAtLower;
      x_[j] = lower_[j];
    } else if (cost[j] < 0.0) {
      if (!std::isfinite(upper_[j])) return false;
      state_[j] = VarState::kAtUpper;
      x_[j] = upper_[j];
    }
  }
  return true;
}

void RevisedSimplex::ComputeRow(const std::vector<double>& rho, std::vector<double>& row) const {
  std::fill(row.begin(), row.end(), 0.0);
  for (int i = 0; i < m_; ++i) {
    const double r = rho[i];
    if (r == 0.0) continue;
    row[n_ + i] = r;
    for (int k = row_start_[i]; k < row_start_[i + 1]; ++k) row[row_col_[k]] += r * row_val_[k];
  }
}

RevisedSimplex::DualOutcome RevisedSimplex::DualLoop(std::vector<double> cost) {
  const int total = n_ + m_;
  const double tol_p = options_.tol_feas;
  const double tol_d = options_.tol_opt;
  const double piv_tol = options_.tol_pivot;

  // Fixed-seed perturbation pushing every nonbasic cost away from zero in the
  // direction its bound allows.
  std::mt19937_64 gen(0x9e3779b97f4a7c15ULL);
  for (int j = 0; j < n_; ++j) {
    if (lower_[j] == upper_[j] || state_[j] == VarState::kFreeZero) continue;
    const double unit = static_cast<double>(gen() >> 11) * 0x1.0p-53;
    const double xi = (1.0 + unit) * 5e-7 * (1.0 + std::abs(cost[j]));
    cost[j] += state_[j] == VarState::kAtLower ? xi : -xi;
  }

  Refactor();
  RecomputeBasicValues();
  std::vector<double> y(m_), d(total, 0.0), rho(m_), row(total), col(m_), tau(m_);
  std::vector<double> weight(m_, 1.0);

  // Fresh duals; residual dual infeasibilities are absorbed into the costs.
  auto refresh_duals = [&] {
    for (int p = 0; p < m_; ++p) y[p] = cost[head_[p]];
    Btran(y);
    for (int j = 0; j < total; ++j) {
      if (state_[j] == VarState::kBasic) {
        d[j] = 0.0;
        continue;
      }
      d[j] = cost[j] - ColumnDot(j, y);
      const bool wrong = lower_[j] != upper_[j] &&
                         ((state_[j] == VarState::kAtLower && d[j] < 0.0) ||
                          (state_[j] == VarState::kAtUpper && d[j] > 0.0) ||
                          state_[j] == VarState::kFreeZero);
      if (wrong) {
        cost[j] -= d[j];
        d[j] = 0.0;
      }
    }
  };
  refresh_duals();

  int trouble = 0;
  for (;;) {
    if (iterations_ >= options_.max_iterations) return DualOutcome::kLimit;
    if (static_cast<int>(etas_.size()) >= options_.refactor_interval) {
      Refactor();
      RecomputeBasicValues();
      refresh_duals();
    }

    // Leaving row: largest squared infeasibility over its edge weight.
    int r = -1;
    double best = 0.0;
    for (int p = 0; p < m_; ++p) {
      const int var = head_[p];
      double infeas = 0.0;
      if (x_[var] < lower_[var] - tol_p) {
        infeas = lower_[var] - x_[var];
      } else if (x_[var] > upper_[var] + tol_p) {
        infeas = x_[var] - upper_[var];
      }
      if (infeas == 0.0) continue;
      const double score = infeas * infeas / weight[p];
      if (score > best) {
        best = score;
        r = p;
      }
    }
    if (r < 0) {
      if (!etas_.empty()) {
        Refactor();
        RecomputeBasicValues();
        refresh_duals();
        continue;
      }
      return DualOutcome::kOptimal;
    }

    const int leaving = head_[r];
    const bool to_lower = x_[leaving] < lower_[leaving];
    const double target = to_lower ? lower_[leaving] : upper_[leaving];
    const double sgn = to_lower ? 1.0 : -1.0;
    std::fill(rho.begin(), rho.end(), 0.0);
    rho[r] = 1.0;
    Btran(rho);
    ComputeRow(rho, row);

    // Harris ratio test on the dual step.
    auto ratio_of = [&](int j, double a, double slack) {
      // a = sgn * row[j]; candidates move d_j toward zero.
      return (d[j] + (a < 0 ? slack : -slack)) / (-a);
    };
    auto candidate = [&](int j, double a) {
      if (state_[j] == VarState::kBasic || lower_[j] == upper_[j] || std::abs(a) <= piv_tol) {
        return false;
      }
      if (state_[j] == VarState::kAtLower) return a < 0;
      if (state_[j] == VarState::kAtUpper) return a > 0;
      return true;
    };
    double theta_max = lp::kInf;
    for (int j = 0; j < total; ++j) {
      const double a = sgn * row[j];
      if (!candidate(j, a)) continue;
      theta_max = std::min(theta_max, ratio_of(j, a, tol_d));
    }
    if (!std::isfinite(theta_max)) return DualOutcome::kInfeasible;
    int q = -1;
    double best_alpha = 0.0;
    for (int j = 0; j < total; ++j) {
      const double a = sgn * row[j];
      if (!candidate(j, a)) continue;
      if (ratio_of(j, a, 0.0) <= theta_max && std::abs(a) > best_alpha) {
        best_alpha = std::abs(a);
        q = j;
      }
    }

    ColumnOf(q, col);
    Ftran(col);
    const double pivot = col[r];
    if (std::abs(pivot - row[q]) > 1e-7 * (1.0 + std::abs(pivot)) || std::abs(pivot) <= piv_tol) {
      if (++trouble > 20) return DualOutcome::kTrouble;
      Refactor();
      RecomputeBasicValues();
      refresh_duals();
      continue;
    }

    // Dual update. An entering cost slightly on the wrong side is shifted to
    // zero first so the step never loses dual feasibility.
    if ((state_[q] == VarState::kAtLower && d[q] < 0.0) ||
        (state_[q] == VarState::kAtUpper && d[q] > 0.0) || state_[q] == VarState::kFreeZero) {
      cost[q] -= d[q];
      d[q] = 0.0;
    }
    const double theta_d = d[q] / row[q];
    if (theta_d != 0.0) {
      for (int j = 0; j < total; ++j) {
        if (row[j] != 0.0 && state_[j] != VarState::kBasic) d[j] -= theta_d * row[j];
      }
    }
    d[q] = 0.0;
    d[leaving] = -theta_d;
    for (int j = 0; j < total; ++j) {
      if (state_[j] == VarState::kBasic || lower_[j] == upper_[j] || j == leaving) continue;
      if ((state_[j] == VarState::kAtLower && d[j] < 0.0) ||
          (state_[j] == VarState::kAtUpper && d[j] > 0.0)) {
        cost[j] -= d[j];
        d[j] = 0.0;
      }
    }

    // Dual steepest-edge weights.
    double w_r = 0.0;
    for (int p = 0; p < m_; ++p) w_r += rho[p] * rho[p];
    tau = rho;
    Ftran(tau);
    for (int p = 0; p < m_; ++p) {
      if (p == r || col[p] == 0.0) continue;
      const double k = col[p] / pivot;
      weight[p] = std::max(weight[p] + k * (k * w_r - 2.0 * tau[p]), 1e-8);
    }
    weight[r] = std::max(w_r / (pivot * pivot), 1e-8);

    // Primal update: the leaving variable lands on its violated bound.
    const double theta_p = (x_[leaving] - target) / pivot;
    for (int p = 0; p < m_; ++p) {
      if (col[p] != 0.0) x_[head_[p]] -= theta_p * col[p];
    }
    x_[q] += theta_p;
    x_[leaving] = target;
    state_[leaving] =
        (to_lower || lower_[leaving] == upper_[leaving]) ? VarState::kAtLower : VarState::kAtUpper;
    position_[leaving] = -1;
    head_[r] = q;
    position_[q] = r;
    state_[q] = VarState::kBasic;

    Eta eta;
    eta.position = r;
    eta.pivot = pivot;
    for (int p = 0; p < m_; ++p) {
      if (p != r && col[p] != 0.0) {
        eta.index.push_back(p);
        eta.value.push_back(col[p]);
      }
    }
    etas_.push_back(std::move(eta));
    ++iterations_;
  }
}

void RevisedSimplex::PrimalLoop(bool phase_one_only, LpSolution& out) {
  const int total = n_ + m_;
  std::vector<double> y(m_), alpha(m_), cost(total);
  std::vector<double> d(total, 0.0);
  bool bland = false;
  int stalled = 0;
  double best_progress = std::numeric_limits<double>::infinity();
  bool last_phase_one = true;

  for (;;) {
    if (iterations_ >= options_.max_iterations) {
      out.status = LpStatus::kIterationLimit;
      break;
    }
    if (static_cast<int>(etas_.size()) >= options_.refactor_interval) {
      Refactor();
      RecomputeBasicValues();
    }
    const double infeasibility = SumInfeasibility();
    const bool phase_one = infeasibility > 0.0;
    if (phase_one != last_phase_one) {
      best_progress = std::numeric_limits<double>::infinity();
      stalled = 0;
      bland = false;
      last_phase_one = phase_one;
    }
    if (!phase_one && phase_one_only) {
      out.status = LpStatus::kOptimal;
      break;
    }
    const double progress = phase_one ? infeasibility : ObjectiveValue();
    if (progress < best_progress - 1e-12 * (1.0 + std::abs(best_progress))) {
      best_progress = progress;
      stalled = 0;
      bland = false;
    } else if (++stalled > options_.stall_limit) {
      bland = true;
    }

    for (int j = 0; j < total; ++j) cost[j] = PhaseCost(j, phase_one);
    for (int p = 0; p < m_; ++p) y[p] = cost[head_[p]];
    Btran(y);

    // Pricing.
    int entering = -1;
    double best_score = 0.0;
    for (int j = 0; j < total; ++j) {
      const VarState s = state_[j];
      if (s == VarState::kBasic) continue;
      if (lower_[j] == upper_[j]) continue;
      const double dj = cost[j] - ColumnDot(j, y);
      d[j] = dj;
      double score = 0.0;
      if (s == VarState::kAtLower && dj < -options_.tol_opt) {
        score = -dj;
      } else if (s == VarState::kAtUpper && dj > options_.tol_opt) {
        score = dj;
      } else if (s == VarState::kFreeZero && std::abs(dj) > options_.tol_opt) {
        score = std::abs(dj);
      }
      if (score <= 0.0) continue;
      if (bland) {
        entering = j;
        break;
      }
      if (score > best_score) {
        best_score = score;
        entering = j;
      }
    }

    if (entering < 0) {
      // Confirm with fresh values before declaring a verdict.
      if (!etas_.empty()) {
        Refactor();
        RecomputeBasicValues();
        if ((SumInfeasibility() > 0.0) != phase_one) continue;
        // The refactorization may have shifted reduced costs and, in phase
        // one, the set of violated bounds; re-price once.
        for (int j = 0; j < total; ++j) cost[j] = PhaseCost(j, phase_one);
        for (int p = 0; p < m_; ++p) y[p] = cost[head_[p]];
        Btran(y);
        bool improvable = false;
        for (int j = 0; j < total && !improvable; ++j) {
          if (state_[j] == VarState::kBasic || lower_[j] == upper_[j]) continue;
          const double dj = cost[j] - ColumnDot(j, y);
          improvable = (state_[j] == VarState::kAtLower && dj < -options_.tol_opt) ||
                       (state_[j] == VarState::kAtUpper && dj > options_.tol_opt) ||
                       (state_[j] == VarState::kFreeZero && std::abs(dj) > options_.tol_opt);
        }
        if (improvable) continue;
      }
      if (phase_one) {
        out.status = LpStatus::kInfeasible;
        BuildCertificate(y, cost, out);
      } else {
        out.status = LpStatus::kOptimal;
      }
      break;
    }

    // Direction of the entering variable and its effect on the basics.
    const double d_in = d[entering];
    const double dir = (state_[entering] == VarState::kAtUpper ||
                        (state_[entering] == VarState::kFreeZero && d_in > 0))
                           ? -1.0
                           : 1.0;
    ColumnOf(entering, alpha);
    Ftran(alpha);

    // Ratio test. Basic at position p moves at rate delta_p = -dir * alpha_p.
    const double tol = options_.tol_feas;
    const double piv_tol = options_.tol_pivot;
    auto bound_target = [&](int p, double rate, double& target) -> bool {
      const int var = head_[p];
      const double v = x_[var];
      if (rate < 0) {
        if (v > upper_[var] + tol && phase_one) {
          target = upper_[var];
          return true;
        }
        if (v < lower_[var] - tol) return false;
        if (!std::isfinite(lower_[var])) return false;
        target = lower_[var];
        return true;
      }
      if (v < lower_[var] - tol && phase_one) {
        target = lower_[var];
        return true;
      }
      if (v > upper_[var] + tol) return false;
      if (!std::isfinite(upper_[var])) return false;
      target = upper_[var];
      return true;
    };

    const double flip_range = upper_[entering] - lower_[entering];
    int leave_pos = -1;
    double leave_target = 0.0;
    double step = std::numeric_limits<double>::infinity();
    if (bland) {
      int leave_var = std::numeric_limits<int>::max();
      for (int p = 0; p < m_; ++p) {
        if (std::abs(alpha[p]) <= piv_tol) continue;
        const double rate = -dir * alpha[p];
        double target;
        if (!bound_target(p, rate, target)) continue;
        const double ratio = std::max(0.0, (target - x_[head_[p]]) / rate);
        if (ratio < step - 1e-12 || (ratio <= step + 1e-12 && head_[p] < leave_var)) {
          step = ratio;
          leave_pos = p;
          leave_var = head_[p];
          leave_target = target;
        }
      }
    } else {
      // Harris two-pass: bound relaxed by tol, then largest pivot among ties.
      double max_step = std::numeric_limits<double>::infinity();
      for (int p = 0; p < m_; ++p) {
        if (std::abs(alpha[p]) <= piv_tol) continue;
        const double rate = -dir * alpha[p];
        double target;
        if (!bound_target(p, rate, target)) continue;
        const double relaxed = (target + (rate > 0 ? tol : -tol) - x_[head_[p]]) / rate;
        max_step = std::min(max_step, relaxed);
      }
      double best_alpha = 0.0;
      for (int p = 0; p < m_; ++p) {
        if (std::abs(alpha[p]) <= piv_tol) continue;
        const double rate = -dir * alpha[p];
        double target;
        if (!bound_target(p, rate, target)) continue;
        const double ratio = (target - x_[head_[p]]) / rate;
        if (ratio <= max_step && std::abs(alpha[p]) > best_alpha) {
          best_alpha = std::abs(alpha[p]);
          leave_pos = p;
          leave_target = target;
          step = std::max(0.0, ratio);
        }
      }
    }

    if (std::isfinite(flip_range) && flip_range <= step) {
      // Bound flip of the entering variable, no basis change.
      const double delta = dir * flip_range;
      x_[entering] += delta;
      state_[entering] = dir > 0 ? VarState::kAtUpper : VarState::kAtLower;
      x_[entering] = dir > 0 ? upper_[entering] : lower_[entering];
      for (int p = 0; p < m_; ++p) {
        if (alpha[p] != 0.0) x_[head_[p]] -= alpha[p] * delta;
      }
      ++iterations_;
      continue;
    }
    if (leave_pos < 0) {
      if (phase_one) {
        // Cannot happen in exact arithmetic; rebuild and retry.
        Refactor();
        RecomputeBasicValues();
        continue;
      }
      out.status = LpStatus::kUnbounded;
      break;
    }

    const int leaving = head_[leave_pos];
    const double delta = dir * step;
    x_[entering] += delta;
    for (int p = 0; p < m_; ++p) {
      if (alpha[p] != 0.0) x_[head_[p]] -= alpha[p] * delta;
    }
    // The leaving variable sits exactly on the bound it reached.
    {
      x_[leaving] = leave_target;
      if (lower_[leaving] == upper_[leaving] || leave_target == lower_[leaving]) {
        state_[leaving] = VarState::kAtLower;
      } else {
        state_[leaving] = VarState::kAtUpper;
      }
    }
    position_[leaving] = -1;
    head_[leave_pos] = entering;
    position_[entering] = leave_pos;
    state_[entering] = VarState::kBasic;

    Eta eta;
    eta.position = leave_pos;
    eta.pivot = alpha[leave_pos];
    for (int p = 0; p < m_; ++p) {
      if (p != leave_pos && alpha[p] != 0.0) {
        eta.index.push_back(p);
        eta.value.push_back(alpha[p]);
      }
    }
    etas_.push_back(std::move(eta));
    ++iterations_;
  }

}

LpSolution RevisedSimplex::Solve(bool phase_one_only) {
  Setup();
  LpSolution out;
  out.x = Eigen::VectorXd::Zero(n_);
  if (m_ == 0) {
    // Only bounds: each variable sits at its cheapest finite bound.
    for (int j = 0; j < n_; ++j) {
      if (lower_[j] > upper_[j]) {
        out.status = LpStatus::kInfeasible;
        return out;
      }
    }
    out.status = LpStatus::kOptimal;
    for (int j = 0; j < n_; ++j) {
      const double c = phase_one_only ? 0.0 : cost_[j];
      double v = x_[j];
      if (c > 0) v = lower_[j];
      if (c < 0) v = upper_[j];
      if (!std::isfinite(v)) {
        out.status = LpStatus::kUnbounded;
        v = 0.0;
      }
      out.x[j] = v;
    }
    out.objective_value = phase_one_only ? 0.0 : out.x.dot(problem_.objective);
    return out;
  }

  std::vector<double> start_cost(n_ + m_, 0.0);
  if (!phase_one_only) start_cost = cost_;
  bool warm = false;
  if (options_.algorithm != Algorithm::kPrimal && PlaceForDual(start_cost)) {
    const DualOutcome outcome = DualLoop(start_cost);
    if (outcome == DualOutcome::kLimit) {
      out.status = LpStatus::kIterationLimit;
      for (int j = 0; j < n_; ++j) out.x[j] = x_[j];
      out.objective_value = out.x.dot(problem_.objective);
      out.iterations = iterations_;
      return out;
    }
    warm = true;
  }
  if (!warm) Crash();
  Refactor();
  RecomputeBasicValues();
  PrimalLoop(phase_one_only, out);

  for (int j = 0; j < n_; ++j) out.x[j] = x_[j];
  out.objective_value = out.x.dot(problem_.objective);
  out.iterations = iterations_;
  if (out.status == LpStatus::kOptimal && !phase_one_only) {
    std::vector<double> y(m_);
    for (int p = 0; p < m_; ++p) y[p] = cost_[head_[p]];
    Btran(y);
    const int m_in = problem_.num_ineq();
    out.dual_in = Eigen::VectorXd(m_in);
    out.dual_eq = Eigen::VectorXd(problem_.num_eq());
    for (int r = 0; r < m_in; ++r) out.dual_in[r] = y[r];
    for (int r = 0; r < problem_.num_eq(); ++r) out.dual_eq[r] = y[m_in + r];
  }
  return out;
}

}  // namespace

LpSolution SolveLp(const LpProblem& problem, const SolverOptions& options) {
  problem.Validate();
  RevisedSimplex simplex(problem, options);
  return simplex.Solve(/*phase_one_only=*/false);
}

Feasibility CheckFeasible(const LpProblem& problem, const SolverOptions& options) {
  problem.Validate();
  RevisedSimplex simplex(problem, options);
  const LpSolution s = simplex.Solve(/*phase_one_only=*/true);
  return s.status == LpStatus::kOptimal ? Feasibility::kFeasible : Feasibility::kInfeasible;
}

}  // namespace flex::lp
