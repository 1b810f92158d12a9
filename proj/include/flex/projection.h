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

// Inner approximation of a Minkowski sum of batteries by a homothet of a
// nominal battery.
//
// The sum of N unit sets is the projection onto u of a lifted polytope in
// (u, u~): one coordinate per slot is eliminated with the column-sum equality
// and the rest become u~. A homothet lambda B + mu lies in the projection when
// an affine rule u~ = W (u - mu) + lambda V keeps the lifted system feasible
// for every u in it. With s = 1/lambda and r = -mu/lambda this is the robust
// constraint
//
//   B [I; W] x <= B [r; -V] + s c   for all x with F x <= H,
//
// which Farkas' lemma turns into the linear program
//
//   minimize s  s.t.  G F = B [I; W],  G H <= B [r; -V] + s c,  G >= 0.
//
// Fixing W = 0 gives the cross-section variant (one lifted point u~ = V / s
// shared by the whole homothet).

#ifndef FLEX_PROJECTION_H_
#define FLEX_PROJECTION_H_

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "flex/geometry.h"
#include "flex/lp.h"
#include "json.hpp"

namespace flex {

// A battery-shaped set over a subset of slots (a charging task or the battery
// of an already aggregated group).
struct FlexUnit {
  std::vector<int> active;  // sorted 0-based slots
  VirtualBattery battery;   // over `active`
  std::string origin;
};

// Which per-unit coordinates survive as u~ and which are recovered from the
// column sums.
struct EliminationMap {
  std::vector<int> times;               // T', sorted 0-based slots; u index k <-> times[k]
  std::vector<std::vector<int>> units;  // N_t per u index (unit indices, ascending)
  std::vector<int> eliminated_unit;     // j_t = min N_t per u index
  // Per unit, per local coordinate (position in FlexUnit::active): the u~
  // index, or -1 when the coordinate is eliminated.
  std::vector<std::vector<int>> tilde_index;
  // Per unit, per local coordinate: the u index of the slot.
  std::vector<std::vector<int>> time_index;
  std::vector<int> tilde_unit;  // owner unit of each u~ coordinate
  std::vector<int> tilde_time;  // u index of each u~ coordinate

  int m() const { return static_cast<int>(times.size()); }
  int m_tilde() const { return static_cast<int>(tilde_unit.size()); }
  int num_units() const { return static_cast<int>(tilde_index.size()); }

  nlohmann::ordered_json ToJson() const;
  static EliminationMap FromJson(const nlohmann::json& j);
};

// Slot bookkeeping for units with the given sorted slot sets: T' is their
// union and the eliminated coordinate at each slot belongs to the lowest
// numbered unit present.
EliminationMap MakeEliminationMap(const std::vector<std::vector<int>>& active_sets);

// B [u; u~] <= c over u in R^m (slots T') and u~ in R^m_tilde.
struct LiftedPolytope {
  lp::SparseRowMatrix b;
  Eigen::VectorXd c;
  int m = 0;
  int m_tilde = 0;
  EliminationMap elim;  // empty for hand-built systems

  int rows() const { return static_cast<int>(c.size()); }
  // A system given directly by its matrix; the first m columns are u.
  static LiftedPolytope Raw(const Eigen::MatrixXd& b, const Eigen::VectorXd& c, int m);
  HPolytope Dense() const;
};

// Rows: two rate rows per slot for the eliminated coordinate, two per u~
// coordinate, two energy rows per unit. Throws kEmptyUnit for a unit without
// slots or with an empty battery.
LiftedPolytope Eliminate(const std::vector<FlexUnit>& units);

struct AppSolution {
  double s = 0.0;
  Eigen::VectorXd r;  // m
  Eigen::MatrixXd w;  // m_tilde x m (zero columns for the cross-section variant)
  Eigen::VectorXd v;  // m_tilde
  Eigen::MatrixXd g;  // n x k Farkas multipliers
  std::vector<std::string> group_ids;
  int iterations = 0;
  // max over x in B of the lifted-row violation, in the scaled units of the
  // LP (multiply by lambda for kW).
  double robust_violation = 0.0;

  double lambda() const { return 1.0 / s; }
  Eigen::VectorXd mu() const { return -r / s; }
  Homothet homothet() const { return {lambda(), mu()}; }

  // Lifted coordinates for an aggregate profile u in the homothet.
  Eigen::VectorXd Lift(const Eigen::VectorXd& u) const;

  nlohmann::ordered_json ToJson(bool with_certificate = false) const;
  static AppSolution FromJson(const nlohmann::json& j);
};

// Variable layout of the generated LPs: s, r (m), W (m_tilde x m, row-major;
// absent in the cross-section variant), V (m_tilde), G (n x k, row-major).
struct AppLayout {
  int m = 0, m_tilde = 0, n = 0, k = 0;
  bool affine = true;
  int s() const { return 0; }
  int r(int t) const { return 1 + t; }
  int w(int j, int t) const { return 1 + m + j * m + t; }
  int v(int j) const { return 1 + m + (affine ? m_tilde * m : 0) + j; }
  int g(int i, int q) const { return v(0) + m_tilde + i * k + q; }
  int num_vars() const { return g(0, 0) + n * k; }
};

inline constexpr double kDegenerateS = 1e-7;
inline constexpr double kMaxS = 1e9;

lp::LpProblem BuildApp(const LiftedPolytope& lifted, const HPolytope& nominal);
lp::LpProblem BuildOpp3(const LiftedPolytope& lifted, const HPolytope& nominal);

struct AppOptions {
  lp::SolverOptions solver{1e-9, 1e-9, 1e-9, 2'000'000, 100, 5000, lp::Algorithm::kAuto};
};

// Solve and unpack. Throws kEmptyOrDegenerate when the LP has no optimum,
// s <= kDegenerateS or s reaches kMaxS; kDimensionMismatch on shape errors.
AppSolution SolveApp(const LiftedPolytope& lifted, const HPolytope& nominal,
                     const AppOptions& options = {});
AppSolution SolveOpp3(const LiftedPolytope& lifted, const HPolytope& nominal,
                      const AppOptions& options = {});

// Exact worst case of B [I; W] x - B [r; -V] - s c over x in the nominal
// battery, computed from the battery's support function. Nonpositive means
// the decision rule is feasible for the whole homothet.
double RobustViolation(const LiftedPolytope& lifted, const VirtualBattery& nominal,
                       const AppSolution& sol);

}  // namespace flex

#endif  // FLEX_PROJECTION_H_
