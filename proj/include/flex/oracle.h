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

// Ground truth for "can the fleet follow aggregate profile u": a direct
// feasibility LP over the per-task charging matrix, the subset inequalities
// of the transportation-style characterization, and a schedule checker.

#ifndef FLEX_ORACLE_H_
#define FLEX_ORACLE_H_

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "flex/fleet.h"
#include "json.hpp"

namespace flex {

// A pair (alpha, beta) of task indices and 0-based slots.
struct SubsetPair {
  std::vector<int> alpha;
  std::vector<int> beta;
};

struct AdequacyVerdict {
  bool adequate = false;
  std::optional<Eigen::MatrixXd> witness;  // N x m, kW
  std::optional<SubsetPair> violated;
};

nlohmann::ordered_json VerdictToJson(const AdequacyVerdict& v, const Fleet& fleet);

// Feasibility of: 0 <= M_it <= p_i on the window, M_it = 0 elsewhere,
// column sums equal u, delta * row sums within [e_low_i, e_high_i].
AdequacyVerdict AdequacyLp(const Fleet& fleet, const Eigen::VectorXd& u);

// For every alpha subset of tasks and beta subset of slots, with
// c_i = |beta cap window_i| p_i delta:
//   sum_{alpha} e_high - delta sum_{beta} u     >= -sum_{not alpha} c_i
//   delta sum_{not beta} u - sum_{not alpha} e_low >= -sum_{not alpha} c_i
// Both sides separate over tasks, so for fixed beta the worst alpha is found
// task by task; kBruteForce enumerates all alpha instead. Pairs are visited in
// descending bitmask order (beta outer, alpha inner) and the first violation
// is reported. Throws kTooLarge when N + m > 22.
enum class SubsetSearch { kGreedy, kBruteForce };
AdequacyVerdict AdequacySubsets(const Fleet& fleet, const Eigen::VectorXd& u,
                                SubsetSearch search = SubsetSearch::kGreedy,
                                double tol = 1e-7);

inline constexpr int kMaxSubsetBits = 22;

struct ScheduleViolation {
  enum class Kind { kRateHigh, kRateLow, kOutsideWindow, kEnergyLow, kEnergyHigh, kColumnSum };
  Kind kind;
  int task = -1;  // -1 for column sums
  int slot = -1;  // 0-based; -1 for energy
  double magnitude = 0.0;
};

const char* ViolationKindName(ScheduleViolation::Kind kind);

struct ScheduleReport {
  std::vector<ScheduleViolation> violations;
  double max_violation = 0.0;
  bool ok() const { return violations.empty(); }
};

nlohmann::ordered_json ReportToJson(const ScheduleReport& r, const Fleet& fleet);

ScheduleReport ValidateSchedule(const Fleet& fleet, const Eigen::MatrixXd& schedule,
                                const Eigen::VectorXd& u, double tol = 1e-6);

}  // namespace flex

#endif  // FLEX_ORACLE_H_
