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

// Multi-stage aggregation of a fleet into one virtual battery, and dispatch of
// an aggregate profile back down to per-task schedules.
//
// Stage 1 splits the fleet into groups and solves the homothet LP for each
// group against a nominal battery. Groups with the same slot span share one
// nominal, so their homothets add (a cohort). Later stages treat every
// resulting battery as a unit and aggregate `fanout` of them at a time until
// one node is left. Every node stores what dispatch needs to map its profile
// to its children.

#ifndef FLEX_AGGREGATION_H_
#define FLEX_AGGREGATION_H_

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "flex/fleet.h"
#include "flex/geometry.h"
#include "flex/projection.h"
#include "json.hpp"

namespace flex {

enum class PartitionPolicy { kRandom, kWindowSorted };

const char* PartitionPolicyName(PartitionPolicy policy);
// Accepts "random" and "window-sorted"; throws kParseError otherwise.
PartitionPolicy ParsePartitionPolicy(const std::string& name);

// Disjoint groups of task indices, each of size group_size except possibly
// the last. kWindowSorted orders tasks by (arrival, departure) first; kRandom
// shuffles with `seed`. Indices inside a group are ascending.
std::vector<std::vector<int>> PartitionFleet(const Fleet& fleet, int group_size,
                                             PartitionPolicy policy, std::uint64_t seed);

// Battery over the union of the group's windows (returned in `slots`):
// p_high(t) is the column average of the maximum charging matrix, p_low = 0,
// energy bounds are the group means clipped to what the rates allow.
VirtualBattery NominalForGroup(const Fleet& fleet, const std::vector<int>& group,
                               std::vector<int>* slots);

// Same construction for arbitrary units: per-slot means of p_low and p_high
// (zero where a unit is inactive) and mean energy bounds, over the union of
// the unit slots.
VirtualBattery NominalForUnits(const std::vector<FlexUnit>& units, std::vector<int>* slots);

struct AggregateConfig {
  int group_size = 10;
  int fanout = 11;
  PartitionPolicy policy = PartitionPolicy::kWindowSorted;
  std::uint64_t seed = 42;
  int workers = 1;
  AppOptions app;
  // When set, every homothet LP is written there as MPS next to its lifted
  // system (JSON).
  std::string debug_dir;
};

struct TreeNode {
  enum class Kind { kLeaf, kApp, kCohort };

  Kind kind = Kind::kLeaf;
  int stage = 0;               // 0 for leaves
  std::vector<int> slots;      // sorted 0-based slots the node spans
  VirtualBattery nominal;      // over `slots`; a leaf stores its own battery
  Homothet homothet;           // node battery = lambda * nominal + mu
  std::vector<int> children;   // node ids
  // kApp only.
  AppSolution solution;
  EliminationMap elim;
  // kLeaf only.
  int task = -1;
  std::string task_id;
  std::string note;            // retry or fallback applied, if any

  VirtualBattery Battery() const;
};

struct AggregationTree {
  static constexpr int kVersion = 1;

  Fleet fleet;
  std::vector<TreeNode> nodes;  // leaves first, in fleet order
  int root = -1;
  VirtualBattery battery;       // root battery over all m slots
  int stages = 0;               // homothet-LP stages run
  int groups = 0;               // stage-1 groups
  int cohorts = 0;              // stage-1 nominals (distinct spans)
  std::vector<std::string> warnings;

  // The Farkas multipliers are large and left out unless asked for.
  nlohmann::ordered_json ToJson(bool with_certificate = false) const;
  static AggregationTree FromJson(const nlohmann::json& j);
};

// Throws kEmptyOrDegenerate (with the offending ids) when a group cannot be
// aggregated even after the fallbacks, kValidationError on an invalid fleet or
// config.
AggregationTree Aggregate(const Fleet& fleet, const AggregateConfig& config = {});

// lambda * nominal + mu of `node`, re-embedded into m slots with zero bounds
// outside the node span.
VirtualBattery SynthesizeBattery(const TreeNode& node, int m);

struct DispatchResult {
  Eigen::MatrixXd schedule;                   // N x m, kW
  std::vector<Eigen::VectorXd> node_profiles;  // per node id, over node slots
  std::vector<std::string> clamps;            // tolerance-level fixes applied
};

// Throws kNotInBattery when u is not in the root battery (tol 1e-6) and
// kDispatchInfeasible when the schedule fails validation after clamping.
DispatchResult Dispatch(const AggregationTree& tree, const Eigen::VectorXd& u,
                        double tol = 1e-6);

// CSV "slot,p_low_kw,p_high_kw", slots 1..m, %.6f.
void WriteBoundsCsv(const VirtualBattery& battery, std::ostream& out);

}  // namespace flex

#endif  // FLEX_AGGREGATION_H_
