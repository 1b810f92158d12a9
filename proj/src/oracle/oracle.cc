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

#include "flex/oracle.h"

#include <cmath>
#include <cstdint>

#include "flex/errors.h"
#include "flex/lp.h"

namespace flex {
namespace {

bool InWindow(const ChargingTask& task, int t) { return t >= task.a - 1 && t <= task.d - 1; }

void RequireProfile(const Fleet& fleet, const Eigen::VectorXd& u) {
  if (u.size() != fleet.m) {
    throw Error(ErrorCode::kDimensionMismatch, "profile length " + std::to_string(u.size()) +
                                                   " differs from horizon " + std::to_string(fleet.m));
  }
}

std::vector<int> Bits(std::uint64_t mask, int count) {
  std::vector<int> out;
  for (int k = 0; k < count; ++k) {
    if (mask >> k & 1) out.push_back(k);
  }
  return out;
}

}  // namespace

nlohmann::ordered_json VerdictToJson(const AdequacyVerdict& v, const Fleet& fleet) {
  nlohmann::ordered_json j;
  j["adequate"] = v.adequate;
  if (v.witness) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::object();
    for (int i = 0; i < fleet.size(); ++i) {
      std::vector<double> row(v.witness->cols());
      for (int t = 0; t < v.witness->cols(); ++t) row[t] = (*v.witness)(i, t);
      rows[fleet.tasks[i].id] = row;
    }
    j["witness"] = std::move(rows);
  }
  if (v.violated) {
    std::vector<std::string> alpha;
    for (int i : v.violated->alpha) alpha.push_back(fleet.tasks[i].id);
    std::vector<int> beta;
    for (int t : v.violated->beta) beta.push_back(t + 1);
    j["violated"] = {{"alpha", alpha}, {"beta", beta}};
  }
  return j;
}

AdequacyVerdict AdequacyLp(const Fleet& fleet, const Eigen::VectorXd& u) {
  RequireProfile(fleet, u);
  const int n = fleet.size();
  const int m = fleet.m;
  lp::LpBuilder builder;
  std::vector<std::vector<int>> var(n, std::vector<int>(m, -1));
  for (int i = 0; i < n; ++i) {
    const ChargingTask& task = fleet.tasks[i];
    for (int t = task.a - 1; t <= task.d - 1; ++t) var[i][t] = builder.AddVariables(1, 0.0, task.p);
  }
  std::vector<lp::LpBuilder::Term> terms;
  for (int t = 0; t < m; ++t) {
    terms.clear();
    for (int i = 0; i < n; ++i) {
      if (var[i][t] >= 0) terms.push_back({var[i][t], 1.0});
    }
    builder.AddEqual(terms, u[t]);
  }
  for (int i = 0; i < n; ++i) {
    terms.clear();
    for (int t = 0; t < m; ++t) {
      if (var[i][t] >= 0) terms.push_back({var[i][t], fleet.delta_h});
    }
    builder.AddLessEqual(terms, fleet.tasks[i].e_high);
    for (auto& term : terms) term.coeff = -term.coeff;
    builder.AddLessEqual(terms, -fleet.tasks[i].e_low);
  }
  const lp::LpSolution s = lp::SolveLp(builder.Build());
  AdequacyVerdict verdict;
  verdict.adequate = s.status == lp::LpStatus::kOptimal;
  if (verdict.adequate) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, m);
    for (int i = 0; i < n; ++i) {
      for (int t = 0; t < m; ++t) {
        if (var[i][t] >= 0) w(i, t) = s.x[var[i][t]];
      }
    }
    verdict.witness = std::move(w);
  }
  return verdict;
}

AdequacyVerdict AdequacySubsets(const Fleet& fleet, const Eigen::VectorXd& u, SubsetSearch search,
                                double tol) {
  RequireProfile(fleet, u);
  const int n = fleet.size();
  const int m = fleet.m;
  if (n + m > kMaxSubsetBits) {
    throw Error(ErrorCode::kTooLarge, "subset enumeration needs N + m <= " +
                                          std::to_string(kMaxSubsetBits) + ", got " +
                                          std::to_string(n + m));
  }
  const double delta = fleet.delta_h;
  const Eigen::VectorXd energy = delta * u;
  const double total = energy.sum();
  std::vector<double> cap(n);
  AdequacyVerdict verdict;
  verdict.adequate = true;

  for (std::uint64_t beta = (std::uint64_t{1} << m); beta-- > 0;) {
    double in_beta = 0.0;
    for (int t = 0; t < m; ++t) {
      if (beta >> t & 1) in_beta += energy[t];
    }
    const double out_beta = total - in_beta;
    for (int i = 0; i < n; ++i) {
      int count = 0;
      for (int t = 0; t < m; ++t) count += (beta >> t & 1) && InWindow(fleet.tasks[i], t);
      cap[i] = count * fleet.tasks[i].p * delta;
    }
    // slack1(alpha) = sum_{alpha} e_high + sum_{not alpha} c - in_beta
    // slack2(alpha) = out_beta + sum_{not alpha} (c - e_low)
    auto check = [&](std::uint64_t alpha) {
      double s1 = -in_beta, s2 = out_beta;
      for (int i = 0; i < n; ++i) {
        if (alpha >> i & 1) {
          s1 += fleet.tasks[i].e_high;
        } else {
          s1 += cap[i];
          s2 += cap[i] - fleet.tasks[i].e_low;
        }
      }
      return std::min(s1, s2) >= -tol;
    };
    if (search == SubsetSearch::kBruteForce) {
      for (std::uint64_t alpha = (std::uint64_t{1} << n); alpha-- > 0;) {
        if (!check(alpha)) {
          verdict.adequate = false;
          verdict.violated = SubsetPair{Bits(alpha, n), Bits(beta, m)};
          return verdict;
        }
      }
    } else {
      std::uint64_t worst1 = 0, worst2 = 0;
      for (int i = 0; i < n; ++i) {
        if (fleet.tasks[i].e_high < cap[i]) worst1 |= std::uint64_t{1} << i;
        if (!(cap[i] - fleet.tasks[i].e_low < 0)) worst2 |= std::uint64_t{1} << i;
      }
      for (std::uint64_t alpha : {worst1, worst2}) {
        if (!check(alpha)) {
          verdict.adequate = false;
          verdict.violated = SubsetPair{Bits(alpha, n), Bits(beta, m)};
          return verdict;
        }
      }
    }
  }
  return verdict;
}

const char* ViolationKindName(ScheduleViolation::Kind kind) {
  switch (kind) {
    case ScheduleViolation::Kind::kRateHigh:
      return "rate_high";
    case ScheduleViolation::Kind::kRateLow:
      return "rate_low";
    case ScheduleViolation::Kind::kOutsideWindow:
      return "outside_window";
    case ScheduleViolation::Kind::kEnergyLow:
      return "energy_low";
    case ScheduleViolation::Kind::kEnergyHigh:
      return "energy_high";
    case ScheduleViolation::Kind::kColumnSum:
      return "column_sum";
  }
  return "unknown";
}

nlohmann::ordered_json ReportToJson(const ScheduleReport& r, const Fleet& fleet) {
  nlohmann::ordered_json j;
  j["ok"] = r.ok();
  j["max_violation"] = r.max_violation;
  nlohmann::ordered_json list = nlohmann::ordered_json::array();
  for (const ScheduleViolation& v : r.violations) {
    nlohmann::ordered_json o;
    o["kind"] = ViolationKindName(v.kind);
    if (v.task >= 0) o["task"] = fleet.tasks[v.task].id;
    if (v.slot >= 0) o["slot"] = v.slot + 1;
    o["magnitude"] = v.magnitude;
    list.push_back(std::move(o));
  }
  j["violations"] = std::move(list);
  return j;
}

ScheduleReport ValidateSchedule(const Fleet& fleet, const Eigen::MatrixXd& schedule,
                                const Eigen::VectorXd& u, double tol) {
  RequireProfile(fleet, u);
  if (schedule.rows() != fleet.size() || schedule.cols() != fleet.m) {
    throw Error(ErrorCode::kDimensionMismatch, "schedule must be N x m");
  }
  ScheduleReport report;
  auto add = [&](ScheduleViolation::Kind kind, int task, int slot, double magnitude) {
    report.max_violation = std::max(report.max_violation, magnitude);
    if (magnitude > tol) report.violations.push_back({kind, task, slot, magnitude});
  };
  using Kind = ScheduleViolation::Kind;
  for (int i = 0; i < fleet.size(); ++i) {
    const ChargingTask& task = fleet.tasks[i];
    for (int t = 0; t < fleet.m; ++t) {
      const double v = schedule(i, t);
      if (!InWindow(task, t)) {
        add(Kind::kOutsideWindow, i, t, std::abs(v));
        continue;
      }
      add(Kind::kRateHigh, i, t, v - task.p);
      add(Kind::kRateLow, i, t, -v);
    }
    const double e = fleet.delta_h * schedule.row(i).sum();
    add(Kind::kEnergyLow, i, -1, task.e_low - e);
    add(Kind::kEnergyHigh, i, -1, e - task.e_high);
  }
  for (int t = 0; t < fleet.m; ++t) {
    add(Kind::kColumnSum, -1, t, std::abs(schedule.col(t).sum() - u[t]));
  }
  return report;
}

}  // namespace flex
