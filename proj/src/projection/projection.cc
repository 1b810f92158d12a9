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

#include "flex/projection.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "flex/errors.h"

namespace flex {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Term = lp::LpBuilder::Term;

std::vector<double> ToStd(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd FromStd(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw Error(ErrorCode::kParseError, std::string("missing array \"") + key + "\"");
  }
  const auto v = j.at(key).get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(v.data(), v.size());
}

struct SparseEntry {
  int index;
  double value;
};

// Row i of the lifted matrix split into its u part and its u~ part.
struct SplitRow {
  std::vector<SparseEntry> u;
  std::vector<SparseEntry> tilde;
};

std::vector<SplitRow> SplitRows(const LiftedPolytope& lifted) {
  std::vector<SplitRow> rows(lifted.rows());
  for (int i = 0; i < lifted.rows(); ++i) {
    for (lp::SparseRowMatrix::InnerIterator it(lifted.b, i); it; ++it) {
      if (it.col() < lifted.m) {
        rows[i].u.push_back({static_cast<int>(it.col()), it.value()});
      } else {
        rows[i].tilde.push_back({static_cast<int>(it.col()) - lifted.m, it.value()});
      }
    }
  }
  return rows;
}

lp::LpProblem BuildRobust(const LiftedPolytope& lifted, const HPolytope& nominal, bool affine) {
  if (nominal.dim() != lifted.m) {
    throw Error(ErrorCode::kDimensionMismatch,
                "nominal dimension " + std::to_string(nominal.dim()) + " differs from m = " +
                    std::to_string(lifted.m));
  }
  if (lifted.b.cols() != lifted.m + lifted.m_tilde || lifted.b.rows() != lifted.c.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "lifted system shape is inconsistent");
  }
  AppLayout lay{lifted.m, lifted.m_tilde, lifted.rows(), nominal.rows(), affine};
  // Columns of F as sparse lists.
  std::vector<std::vector<SparseEntry>> f_cols(lay.m);
  for (int t = 0; t < lay.m; ++t) {
    for (int q = 0; q < lay.k; ++q) {
      if (nominal.a(q, t) != 0.0) f_cols[t].push_back({q, nominal.a(q, t)});
    }
  }
  const std::vector<SplitRow> rows = SplitRows(lifted);

  lp::LpBuilder builder;
  builder.AddVariables(1, 0.0, kMaxS);                   // s
  builder.AddVariables(lay.m);                           // r
  if (affine) builder.AddVariables(lay.m_tilde * lay.m); // W
  builder.AddVariables(lay.m_tilde);                     // V
  builder.AddVariables(lay.n * lay.k, 0.0, lp::kInf);    // G
  builder.SetObjective(lay.s(), 1.0);

  std::vector<Term> terms;
  std::vector<double> bu(lay.m);
  for (int i = 0; i < lay.n; ++i) {
    std::fill(bu.begin(), bu.end(), 0.0);
    for (const SparseEntry& e : rows[i].u) bu[e.index] = e.value;
    // (G F)_it - (B_tilde W)_it = (B_u)_it
    for (int t = 0; t < lay.m; ++t) {
      terms.clear();
      for (const SparseEntry& f : f_cols[t]) terms.push_back({lay.g(i, f.index), f.value});
      if (affine) {
        for (const SparseEntry& e : rows[i].tilde) terms.push_back({lay.w(e.index, t), -e.value});
      }
      builder.AddEqual(terms, bu[t]);
    }
    // G_i H - (B_u)_i r + (B_tilde)_i V - c_i s <= 0
    terms.clear();
    for (int q = 0; q < lay.k; ++q) {
      if (nominal.c[q] != 0.0) terms.push_back({lay.g(i, q), nominal.c[q]});
    }
    for (const SparseEntry& e : rows[i].u) terms.push_back({lay.r(e.index), -e.value});
    for (const SparseEntry& e : rows[i].tilde) terms.push_back({lay.v(e.index), e.value});
    if (lifted.c[i] != 0.0) terms.push_back({lay.s(), -lifted.c[i]});
    builder.AddLessEqual(terms, 0.0);
  }
  return builder.Build();
}

AppSolution SolveRobust(const LiftedPolytope& lifted, const HPolytope& nominal, bool affine,
                        const AppOptions& options) {
  const lp::LpProblem problem = BuildRobust(lifted, nominal, affine);
  const lp::LpSolution sol = lp::SolveLp(problem, options.solver);
  if (sol.status != lp::LpStatus::kOptimal) {
    throw Error(ErrorCode::kEmptyOrDegenerate,
                std::string("homothet LP ended with status ") + lp::LpStatusName(sol.status));
  }
  AppLayout lay{lifted.m, lifted.m_tilde, lifted.rows(), nominal.rows(), affine};
  AppSolution out;
  out.iterations = sol.iterations;
  out.s = sol.x[lay.s()];
  if (!(out.s > kDegenerateS)) {
    throw Error(ErrorCode::kEmptyOrDegenerate, "optimal s = " + std::to_string(out.s) +
                                                   " is at or below the degeneracy threshold");
  }
  if (out.s >= kMaxS * (1.0 - 1e-9)) {
    throw Error(ErrorCode::kEmptyOrDegenerate, "no homothet of positive size fits (s hit its cap)");
  }
  out.r.resize(lay.m);
  for (int t = 0; t < lay.m; ++t) out.r[t] = sol.x[lay.r(t)];
  out.w = MatrixXd::Zero(lay.m_tilde, lay.m);
  if (affine) {
    for (int j = 0; j < lay.m_tilde; ++j) {
      for (int t = 0; t < lay.m; ++t) out.w(j, t) = sol.x[lay.w(j, t)];
    }
  }
  out.v.resize(lay.m_tilde);
  for (int j = 0; j < lay.m_tilde; ++j) out.v[j] = sol.x[lay.v(j)];
  out.g.resize(lay.n, lay.k);
  for (int i = 0; i < lay.n; ++i) {
    for (int q = 0; q < lay.k; ++q) out.g(i, q) = std::max(0.0, sol.x[lay.g(i, q)]);
  }
  if (auto battery = AsBattery(nominal)) {
    out.robust_violation = RobustViolation(lifted, *battery, out);
  }
  return out;
}

}  // namespace

EliminationMap MakeEliminationMap(const std::vector<std::vector<int>>& active_sets) {
  const int n_units = static_cast<int>(active_sets.size());
  EliminationMap e;
  for (const auto& a : active_sets) e.times.insert(e.times.end(), a.begin(), a.end());
  std::sort(e.times.begin(), e.times.end());
  e.times.erase(std::unique(e.times.begin(), e.times.end()), e.times.end());
  const int m = e.m();
  std::map<int, int> slot_index;
  for (int k = 0; k < m; ++k) slot_index[e.times[k]] = k;
  e.units.assign(m, {});
  e.time_index.resize(n_units);
  for (int i = 0; i < n_units; ++i) {
    for (int slot : active_sets[i]) {
      const int k = slot_index[slot];
      e.units[k].push_back(i);
      e.time_index[i].push_back(k);
    }
  }
  e.eliminated_unit.resize(m);
  for (int k = 0; k < m; ++k) e.eliminated_unit[k] = e.units[k].front();
  e.tilde_index.resize(n_units);
  for (int i = 0; i < n_units; ++i) {
    for (int k : e.time_index[i]) {
      if (e.eliminated_unit[k] == i) {
        e.tilde_index[i].push_back(-1);
      } else {
        e.tilde_index[i].push_back(e.m_tilde());
        e.tilde_unit.push_back(i);
        e.tilde_time.push_back(k);
      }
    }
  }
  return e;
}

nlohmann::ordered_json EliminationMap::ToJson() const {
  nlohmann::ordered_json j;
  j["times"] = times;
  std::vector<std::vector<int>> slots(num_units());
  for (int i = 0; i < num_units(); ++i) {
    for (int k : time_index[i]) slots[i].push_back(times[k]);
  }
  j["unit_slots"] = slots;
  j["tilde_index"] = tilde_index;
  return j;
}

EliminationMap EliminationMap::FromJson(const nlohmann::json& j) {
  if (!j.contains("unit_slots")) throw Error(ErrorCode::kParseError, "elimination map needs \"unit_slots\"");
  const EliminationMap e = MakeEliminationMap(j.at("unit_slots").get<std::vector<std::vector<int>>>());
  if ((j.contains("times") && j.at("times").get<std::vector<int>>() != e.times) ||
      (j.contains("tilde_index") &&
       j.at("tilde_index").get<std::vector<std::vector<int>>>() != e.tilde_index)) {
    throw Error(ErrorCode::kParseError, "elimination map is inconsistent with its unit slots");
  }
  return e;
}

LiftedPolytope LiftedPolytope::Raw(const Eigen::MatrixXd& b, const Eigen::VectorXd& c, int m) {
  if (b.rows() != c.size() || m < 0 || m > b.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "raw lifted system shape");
  }
  LiftedPolytope out;
  out.b = b.sparseView();
  out.b.makeCompressed();
  out.c = c;
  out.m = m;
  out.m_tilde = static_cast<int>(b.cols()) - m;
  return out;
}

HPolytope LiftedPolytope::Dense() const { return HPolytope(MatrixXd(b), c); }

LiftedPolytope Eliminate(const std::vector<FlexUnit>& units) {
  const int n_units = static_cast<int>(units.size());
  if (n_units == 0) throw Error(ErrorCode::kEmptyUnit, "no units to aggregate");
  for (const FlexUnit& u : units) {
    if (u.active.empty()) throw Error(ErrorCode::kEmptyUnit, "unit \"" + u.origin + "\" has no slots");
    if (static_cast<int>(u.active.size()) != u.battery.m()) {
      throw Error(ErrorCode::kEmptyUnit, "unit \"" + u.origin + "\": battery size differs from slots");
    }
    if (!std::is_sorted(u.active.begin(), u.active.end()) ||
        std::adjacent_find(u.active.begin(), u.active.end()) != u.active.end()) {
      throw Error(ErrorCode::kEmptyUnit, "unit \"" + u.origin + "\": slots must be strictly increasing");
    }
    try {
      u.battery.Validate();
    } catch (const Error& e) {
      throw Error(ErrorCode::kEmptyUnit, "unit \"" + u.origin + "\": " + e.what());
    }
  }

  std::vector<std::vector<int>> active_sets;
  for (const FlexUnit& u : units) active_sets.push_back(u.active);
  EliminationMap e = MakeEliminationMap(active_sets);
  const int m = e.m();
  std::vector<std::vector<int>> tilde_at_time(m);
  for (int j = 0; j < e.m_tilde(); ++j) tilde_at_time[e.tilde_time[j]].push_back(j);
  const int mt = e.m_tilde();

  // Coordinate (i, local l) as a linear form over [u; u~].
  auto form = [&](int i, int l, double scale, int row, std::vector<lp::Triplet>& out) {
    const int j = e.tilde_index[i][l];
    if (j >= 0) {
      out.emplace_back(row, m + j, scale);
      return;
    }
    const int k = e.time_index[i][l];
    out.emplace_back(row, k, scale);
    for (int other : tilde_at_time[k]) out.emplace_back(row, m + other, -scale);
  };

  std::vector<lp::Triplet> trips;
  std::vector<double> rhs;
  int row = 0;
  // Local coordinate of the eliminated unit at each slot.
  for (int k = 0; k < m; ++k) {
    const int i = e.eliminated_unit[k];
    const int l = static_cast<int>(std::find(e.time_index[i].begin(), e.time_index[i].end(), k) -
                                   e.time_index[i].begin());
    form(i, l, 1.0, row++, trips);
    rhs.push_back(units[i].battery.p_high[l]);
    form(i, l, -1.0, row++, trips);
    rhs.push_back(-units[i].battery.p_low[l]);
  }
  for (int j = 0; j < mt; ++j) {
    const int i = e.tilde_unit[j];
    const int l = static_cast<int>(std::find(e.tilde_index[i].begin(), e.tilde_index[i].end(), j) -
                                   e.tilde_index[i].begin());
    trips.emplace_back(row++, m + j, 1.0);
    rhs.push_back(units[i].battery.p_high[l]);
    trips.emplace_back(row++, m + j, -1.0);
    rhs.push_back(-units[i].battery.p_low[l]);
  }
  for (int i = 0; i < n_units; ++i) {
    const double delta = units[i].battery.delta_h;
    const int count = static_cast<int>(units[i].active.size());
    for (int l = 0; l < count; ++l) form(i, l, delta, row, trips);
    rhs.push_back(units[i].battery.e_high);
    ++row;
    for (int l = 0; l < count; ++l) form(i, l, -delta, row, trips);
    rhs.push_back(-units[i].battery.e_low);
    ++row;
  }

  LiftedPolytope out;
  out.m = m;
  out.m_tilde = mt;
  out.b = lp::SparseRowMatrix(row, m + mt);
  out.b.setFromTriplets(trips.begin(), trips.end());
  out.b.prune(0.0);
  out.b.makeCompressed();
  out.c = Eigen::Map<const VectorXd>(rhs.data(), rhs.size());
  out.elim = std::move(e);
  return out;
}

Eigen::VectorXd AppSolution::Lift(const Eigen::VectorXd& u) const {
  return w * (u - mu()) + lambda() * v;
}

nlohmann::ordered_json AppSolution::ToJson(bool with_certificate) const {
  nlohmann::ordered_json j;
  j["s"] = s;
  j["r"] = ToStd(r);
  nlohmann::ordered_json wj = nlohmann::ordered_json::array();
  for (int row = 0; row < w.rows(); ++row) wj.push_back(ToStd(w.row(row).transpose()));
  j["W"] = std::move(wj);
  j["V"] = ToStd(v);
  j["group_ids"] = group_ids;
  if (with_certificate) {
    nlohmann::ordered_json gj = nlohmann::ordered_json::array();
    for (int row = 0; row < g.rows(); ++row) gj.push_back(ToStd(g.row(row).transpose()));
    j["G"] = std::move(gj);
  }
  return j;
}

AppSolution AppSolution::FromJson(const nlohmann::json& j) {
  AppSolution out;
  if (!j.contains("s") || !j.at("s").is_number()) throw Error(ErrorCode::kParseError, "missing \"s\"");
  out.s = j.at("s").get<double>();
  out.r = FromStd(j, "r");
  out.v = FromStd(j, "V");
  const auto& wj = j.at("W");
  out.w = MatrixXd::Zero(out.v.size(), out.r.size());
  if (static_cast<int>(wj.size()) != out.v.size()) throw Error(ErrorCode::kParseError, "\"W\" row count");
  for (size_t row = 0; row < wj.size(); ++row) {
    const auto vals = wj[row].get<std::vector<double>>();
    if (static_cast<int>(vals.size()) != out.r.size()) throw Error(ErrorCode::kParseError, "\"W\" row length");
    for (size_t t = 0; t < vals.size(); ++t) out.w(row, t) = vals[t];
  }
  if (j.contains("group_ids")) out.group_ids = j.at("group_ids").get<std::vector<std::string>>();
  return out;
}

lp::LpProblem BuildApp(const LiftedPolytope& lifted, const HPolytope& nominal) {
  return BuildRobust(lifted, nominal, /*affine=*/true);
}

lp::LpProblem BuildOpp3(const LiftedPolytope& lifted, const HPolytope& nominal) {
  return BuildRobust(lifted, nominal, /*affine=*/false);
}

AppSolution SolveApp(const LiftedPolytope& lifted, const HPolytope& nominal,
                     const AppOptions& options) {
  return SolveRobust(lifted, nominal, /*affine=*/true, options);
}

AppSolution SolveOpp3(const LiftedPolytope& lifted, const HPolytope& nominal,
                      const AppOptions& options) {
  return SolveRobust(lifted, nominal, /*affine=*/false, options);
}

double RobustViolation(const LiftedPolytope& lifted, const VirtualBattery& nominal,
                       const AppSolution& sol) {
  const std::vector<SplitRow> rows = SplitRows(lifted);
  double worst = -lp::kInf;
  VectorXd a(lifted.m);
  for (int i = 0; i < lifted.rows(); ++i) {
    a.setZero();
    double rhs = sol.s * lifted.c[i];
    for (const SparseEntry& e : rows[i].u) {
      a[e.index] += e.value;
      rhs += e.value * sol.r[e.index];
    }
    for (const SparseEntry& e : rows[i].tilde) {
      a += e.value * sol.w.row(e.index).transpose();
      rhs -= e.value * sol.v[e.index];
    }
    worst = std::max(worst, BatterySupport(nominal, a) - rhs);
  }
  return worst;
}

}  // namespace flex
