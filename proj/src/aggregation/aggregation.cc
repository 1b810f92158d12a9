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

#include "flex/aggregation.h"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "flex/errors.h"
#include "flex/io.h"
#include "flex/lp.h"
#include "flex/oracle.h"
#include "flex/random.h"

namespace flex {
namespace {

using Eigen::VectorXd;

std::vector<double> ToStd(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

VectorXd ToVector(const std::vector<double>& v) {
  return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<int> SortedUnion(const std::vector<std::vector<int>>& sets) {
  std::vector<int> out;
  for (const auto& s : sets) out.insert(out.end(), s.begin(), s.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

int PositionOf(const std::vector<int>& sorted, int value) {
  return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), value) - sorted.begin());
}

// `b` over `from` (a subset of `to`), zero bounds elsewhere.
VirtualBattery Embed(const VirtualBattery& b, const std::vector<int>& from, const std::vector<int>& to) {
  VirtualBattery out;
  out.delta_h = b.delta_h;
  out.p_low = VectorXd::Zero(static_cast<Eigen::Index>(to.size()));
  out.p_high = VectorXd::Zero(static_cast<Eigen::Index>(to.size()));
  for (size_t l = 0; l < from.size(); ++l) {
    const int k = PositionOf(to, from[l]);
    out.p_low[k] = b.p_low[static_cast<Eigen::Index>(l)];
    out.p_high[k] = b.p_high[static_cast<Eigen::Index>(l)];
  }
  out.e_low = b.e_low;
  out.e_high = b.e_high;
  return out;
}

void ClipEnergy(VirtualBattery& b) {
  const double lo = b.delta_h * b.p_low.sum();
  const double hi = b.delta_h * b.p_high.sum();
  b.e_high = std::clamp(b.e_high, lo, hi);
  b.e_low = std::clamp(b.e_low, lo, b.e_high);
}

// Runs fn(0..count-1) on `workers` threads; the first failure (by index) is
// rethrown after all finish.
void ParallelFor(int count, int workers, const std::function<void(int)>& fn) {
  std::vector<std::exception_ptr> errors(static_cast<size_t>(count));
  std::atomic<int> next{0};
  auto run = [&]() {
    for (int i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[static_cast<size_t>(i)] = std::current_exception();
      }
    }
  };
  const int width = std::max(1, std::min(workers, count));
  std::vector<std::thread> threads;
  for (int w = 1; w < width; ++w) threads.emplace_back(run);
  run();
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string JoinIds(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : ",") + id;
  return out;
}

const char* KindName(TreeNode::Kind kind) {
  switch (kind) {
    case TreeNode::Kind::kLeaf: return "leaf";
    case TreeNode::Kind::kApp: return "app";
    case TreeNode::Kind::kCohort: return "cohort";
  }
  return "leaf";
}

TreeNode::Kind ParseKind(const std::string& s) {
  if (s == "leaf") return TreeNode::Kind::kLeaf;
  if (s == "app") return TreeNode::Kind::kApp;
  if (s == "cohort") return TreeNode::Kind::kCohort;
  throw Error(ErrorCode::kParseError, "unknown node kind \"" + s + "\"");
}

// One homothet-LP solve over a set of child nodes.
struct AppJob {
  std::vector<int> children;
  std::vector<FlexUnit> units;
  std::vector<int> slots;
  VirtualBattery nominal;
  std::string label;
  // Filled by Solve.
  std::optional<AppSolution> solution;
  EliminationMap elim;
  std::string failure;

  void Solve(const AppOptions& options, const std::string& debug_dir) {
    try {
      LiftedPolytope lifted = Eliminate(units);
      if (!debug_dir.empty()) Dump(lifted, debug_dir);
      AppSolution sol = SolveApp(lifted, BatteryToHPolytope(nominal), options);
      for (const auto& u : units) sol.group_ids.push_back(u.origin);
      elim = std::move(lifted.elim);
      solution = std::move(sol);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEmptyOrDegenerate) throw;
      failure = e.what();
    }
  }

  void Dump(const LiftedPolytope& lifted, const std::string& dir) const {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base = std::filesystem::path(dir) / label;
    nlohmann::ordered_json j;
    j["m"] = lifted.m;
    j["m_tilde"] = lifted.m_tilde;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int r = 0; r < lifted.b.outerSize(); ++r) {
      nlohmann::ordered_json row = nlohmann::ordered_json::array();
      for (lp::SparseRowMatrix::InnerIterator it(lifted.b, r); it; ++it) {
        row.push_back({it.col(), it.value()});
      }
      rows.push_back(std::move(row));
    }
    j["rows"] = std::move(rows);
    j["c"] = ToStd(lifted.c);
    j["elimination"] = lifted.elim.ToJson();
    j["nominal"] = BatteryToJson(nominal);
    WriteJsonFile(base.string() + "_lifted.json", j);
    std::ostringstream mps;
    lp::WriteMps(BuildApp(lifted, BatteryToHPolytope(nominal)), label, mps);
    WriteFile(base.string() + ".mps", mps.str());
  }
};

// Tightest unit first: fewest slots, then narrowest energy interval.
int MostConstrained(const std::vector<FlexUnit>& units) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(units.size()); ++i) {
    const auto key = [&](int k) {
      return std::make_pair(units[k].active.size(), units[k].battery.e_high - units[k].battery.e_low);
    };
    if (key(i) < key(best)) best = i;
  }
  return best;
}

class Builder {
 public:
  Builder(const Fleet& fleet, const AggregateConfig& config) : fleet_(fleet), config_(config) {
    tree_.fleet = fleet;
  }

  AggregationTree Run() {
    AddLeaves();
    std::vector<int> level = StageOne();
    int stage = 1;
    while (level.size() > 1) {
      ++stage;
      std::vector<int> next = UpperStage(level, stage);
      if (next.size() >= level.size()) {
        std::vector<std::string> ids;
        for (int id : level) ids.push_back(Describe(id));
        throw Error(ErrorCode::kEmptyOrDegenerate,
                    "stage " + std::to_string(stage) + " made no progress on units " + JoinIds(ids));
      }
      level = std::move(next);
    }
    tree_.root = level.front();
    tree_.stages = stage;
    tree_.battery = SynthesizeBattery(tree_.nodes[tree_.root], fleet_.m);
    return std::move(tree_);
  }

 private:
  void AddLeaves() {
    for (int i = 0; i < fleet_.size(); ++i) {
      const ChargingTask& task = fleet_.tasks[i];
      const AdmissibleSet adm = AdmissiblePolytope(task, fleet_.m, fleet_.delta_h);
      TreeNode leaf;
      leaf.kind = TreeNode::Kind::kLeaf;
      leaf.slots = adm.active;
      leaf.nominal = adm.battery;
      leaf.homothet = {1.0, VectorXd::Zero(static_cast<Eigen::Index>(adm.active.size()))};
      leaf.task = i;
      leaf.task_id = task.id;
      tree_.nodes.push_back(std::move(leaf));
      if (task.e_low == task.e_high) {
        Warn("task " + task.id + " has a pinned energy (e_low == e_high)");
      }
    }
  }

  FlexUnit UnitOf(int id) const {
    const TreeNode& n = tree_.nodes[id];
    return {n.slots, n.Battery(), Describe(id)};
  }

  std::string Describe(int id) const {
    const TreeNode& n = tree_.nodes[id];
    if (n.kind == TreeNode::Kind::kLeaf) return n.task_id;
    return "node" + std::to_string(id);
  }

  int AddAppNode(AppJob& job, int stage, std::string note) {
    TreeNode node;
    node.kind = TreeNode::Kind::kApp;
    node.stage = stage;
    node.slots = job.slots;
    node.nominal = job.nominal;
    node.homothet = job.solution->homothet();
    node.children = job.children;
    node.solution = std::move(*job.solution);
    node.elim = std::move(job.elim);
    node.note = std::move(note);
    tree_.nodes.push_back(std::move(node));
    return static_cast<int>(tree_.nodes.size()) - 1;
  }

  void Warn(const std::string& message) {
    spdlog::warn("{}", message);
    tree_.warnings.push_back(message);
  }

  // Solves the jobs in parallel, retrying degenerate ones with their most
  // constrained unit as nominal. Returns per job whether the retry was used;
  // jobs still failing keep `solution` empty.
  std::vector<bool> SolveAll(std::vector<AppJob>& jobs) {
    ParallelFor(static_cast<int>(jobs.size()), config_.workers,
                [&](int i) { jobs[i].Solve(config_.app, config_.debug_dir); });
    std::vector<int> retry;
    for (int i = 0; i < static_cast<int>(jobs.size()); ++i) {
      if (!jobs[i].solution) retry.push_back(i);
    }
    std::vector<bool> retried(jobs.size(), false);
    ParallelFor(static_cast<int>(retry.size()), config_.workers, [&](int r) {
      AppJob& job = jobs[retry[r]];
      const FlexUnit& tight = job.units[MostConstrained(job.units)];
      job.nominal = Embed(tight.battery, tight.active, job.slots);
      job.failure.clear();
      job.label += "_retry";
      job.Solve(config_.app, config_.debug_dir);
    });
    for (int i : retry) retried[i] = true;
    return retried;
  }

  std::vector<int> StageOne() {
    const auto groups = PartitionFleet(fleet_, config_.group_size, config_.policy, config_.seed);
    tree_.groups = static_cast<int>(groups.size());

    // Cohorts: groups over the same slot span share the averaged nominal.
    std::vector<AppJob> jobs(groups.size());
    std::map<std::vector<int>, int> cohort_of_span;
    std::vector<int> cohort(groups.size());
    std::vector<std::vector<int>> members;
    for (size_t g = 0; g < groups.size(); ++g) {
      AppJob& job = jobs[g];
      job.children = groups[g];
      for (int i : groups[g]) job.units.push_back(UnitOf(i));
      job.nominal = NominalForGroup(fleet_, groups[g], &job.slots);
      job.label = "stage1_group" + std::to_string(g);
      auto [it, fresh] = cohort_of_span.emplace(job.slots, static_cast<int>(members.size()));
      if (fresh) members.emplace_back();
      cohort[g] = it->second;
      members[it->second].push_back(static_cast<int>(g));
    }
    tree_.cohorts = static_cast<int>(members.size());
    for (const auto& group_ids : members) {
      VirtualBattery shared = jobs[group_ids.front()].nominal;
      for (size_t k = 1; k < group_ids.size(); ++k) {
        const VirtualBattery& b = jobs[group_ids[k]].nominal;
        shared.p_low += b.p_low;
        shared.p_high += b.p_high;
        shared.e_low += b.e_low;
        shared.e_high += b.e_high;
      }
      const double count = static_cast<double>(group_ids.size());
      shared.p_low /= count;
      shared.p_high /= count;
      shared.e_low /= count;
      shared.e_high /= count;
      for (int g : group_ids) jobs[g].nominal = shared;
    }

    const std::vector<bool> retried = SolveAll(jobs);

    // Node per solved group; singleton fallback for the rest.
    std::vector<std::vector<int>> stage_nodes(groups.size());
    std::vector<bool> in_cohort(groups.size(), false);
    for (size_t g = 0; g < groups.size(); ++g) {
      AppJob& job = jobs[g];
      if (job.solution) {
        std::string note;
        if (retried[g]) {
          note = "degenerate with the cohort nominal; most constrained member used as nominal";
          Warn("group " + std::to_string(g) + ": " + note);
        } else {
          in_cohort[g] = true;
        }
        stage_nodes[g].push_back(AddAppNode(job, 1, std::move(note)));
        continue;
      }
      Warn("group " + std::to_string(g) + " degenerate (" + job.failure + "); split into singletons");
      for (size_t k = 0; k < job.units.size(); ++k) {
        AppJob single;
        single.children = {job.children[k]};
        single.units = {job.units[k]};
        single.slots = job.units[k].active;
        single.nominal = job.units[k].battery;
        single.label = job.label + "_single" + std::to_string(k);
        single.Solve(config_.app, config_.debug_dir);
        if (!single.solution) {
          // A unit without interior (e.g. pinned at one profile) sends s to
          // zero; the identity rule is exact for it.
          AppSolution identity;
          identity.s = 1.0;
          identity.r = VectorXd::Zero(static_cast<Eigen::Index>(single.slots.size()));
          identity.w = Eigen::MatrixXd::Zero(0, identity.r.size());
          identity.v = VectorXd::Zero(0);
          identity.group_ids = {job.units[k].origin};
          single.elim = MakeEliminationMap({single.slots});
          single.solution = std::move(identity);
        }
        stage_nodes[g].push_back(AddAppNode(single, 1, "singleton fallback"));
      }
    }

    // Merge cohort members that kept the shared nominal.
    std::vector<int> level;
    std::vector<bool> emitted(members.size(), false);
    for (size_t g = 0; g < groups.size(); ++g) {
      if (!in_cohort[g]) {
        level.insert(level.end(), stage_nodes[g].begin(), stage_nodes[g].end());
        continue;
      }
      const int c = cohort[g];
      if (emitted[c]) continue;
      emitted[c] = true;
      std::vector<int> kids;
      for (int h : members[c]) {
        if (in_cohort[h]) kids.push_back(stage_nodes[h].front());
      }
      if (kids.size() == 1) {
        level.push_back(kids.front());
        continue;
      }
      TreeNode node;
      node.kind = TreeNode::Kind::kCohort;
      node.stage = 1;
      node.slots = tree_.nodes[kids.front()].slots;
      node.nominal = tree_.nodes[kids.front()].nominal;
      std::vector<BasedHomothet> parts;
      auto base = std::make_shared<const HPolytope>(BatteryToHPolytope(node.nominal));
      for (int k : kids) parts.push_back({base, tree_.nodes[k].homothet});
      node.homothet = SumHomothets(parts);
      node.children = kids;
      tree_.nodes.push_back(std::move(node));
      level.push_back(static_cast<int>(tree_.nodes.size()) - 1);
    }
    return level;
  }

  std::vector<int> UpperStage(const std::vector<int>& level, int stage) {
    const int fanout = config_.fanout;
    std::vector<AppJob> jobs;
    std::vector<int> pass_through_at;  // level index of singleton chunks
    std::vector<std::vector<int>> chunks;
    for (size_t start = 0; start < level.size(); start += static_cast<size_t>(fanout)) {
      const size_t end = std::min(level.size(), start + static_cast<size_t>(fanout));
      chunks.emplace_back(level.begin() + static_cast<long>(start), level.begin() + static_cast<long>(end));
    }
    std::vector<int> job_of_chunk(chunks.size(), -1);
    for (size_t c = 0; c < chunks.size(); ++c) {
      if (chunks[c].size() < 2) continue;
      AppJob job;
      job.children = chunks[c];
      for (int id : chunks[c]) job.units.push_back(UnitOf(id));
      job.nominal = NominalForUnits(job.units, &job.slots);
      job.label = "stage" + std::to_string(stage) + "_chunk" + std::to_string(c);
      job_of_chunk[c] = static_cast<int>(jobs.size());
      jobs.push_back(std::move(job));
    }
    const std::vector<bool> retried = SolveAll(jobs);

    std::vector<int> next;
    for (size_t c = 0; c < chunks.size(); ++c) {
      const int j = job_of_chunk[c];
      if (j < 0) {
        next.push_back(chunks[c].front());
        continue;
      }
      AppJob& job = jobs[j];
      if (!job.solution) {
        Warn("stage " + std::to_string(stage) + " chunk " + std::to_string(c) + " degenerate (" +
             job.failure + "); units passed through");
        next.insert(next.end(), chunks[c].begin(), chunks[c].end());
        continue;
      }
      std::string note;
      if (retried[j]) {
        note = "degenerate with the averaged nominal; most constrained unit used as nominal";
        Warn("stage " + std::to_string(stage) + " chunk " + std::to_string(c) + ": " + note);
      }
      next.push_back(AddAppNode(job, stage, std::move(note)));
    }
    return next;
  }

  const Fleet& fleet_;
  const AggregateConfig& config_;
  AggregationTree tree_;
};

nlohmann::ordered_json NodeToJson(const TreeNode& n, int id, bool with_certificate) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["kind"] = KindName(n.kind);
  j["stage"] = n.stage;
  j["slots"] = n.slots;
  if (n.kind == TreeNode::Kind::kLeaf) {
    j["task"] = n.task;
    j["task_id"] = n.task_id;
    return j;
  }
  j["children"] = n.children;
  j["lambda"] = n.homothet.lambda;
  j["mu"] = ToStd(n.homothet.mu);
  j["nominal"] = BatteryToJson(n.nominal);
  if (n.kind == TreeNode::Kind::kApp) {
    j["solution"] = n.solution.ToJson(with_certificate);
    j["elimination"] = n.elim.ToJson();
  }
  if (!n.note.empty()) j["note"] = n.note;
  return j;
}

}  // namespace

const char* PartitionPolicyName(PartitionPolicy policy) {
  return policy == PartitionPolicy::kRandom ? "random" : "window-sorted";
}

PartitionPolicy ParsePartitionPolicy(const std::string& name) {
  if (name == "random") return PartitionPolicy::kRandom;
  if (name == "window-sorted") return PartitionPolicy::kWindowSorted;
  throw Error(ErrorCode::kParseError, "unknown partition policy \"" + name + "\"");
}

std::vector<std::vector<int>> PartitionFleet(const Fleet& fleet, int group_size,
                                             PartitionPolicy policy, std::uint64_t seed) {
  if (group_size < 1) throw Error(ErrorCode::kValidationError, "group size must be at least 1");
  std::vector<int> order(static_cast<size_t>(fleet.size()));
  std::iota(order.begin(), order.end(), 0);
  if (policy == PartitionPolicy::kWindowSorted) {
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
      const auto& a = fleet.tasks[x];
      const auto& b = fleet.tasks[y];
      return std::make_pair(a.a, a.d) < std::make_pair(b.a, b.d);
    });
  } else {
    Rng rng(seed);
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.Below(i)]);
    }
  }
  std::vector<std::vector<int>> groups;
  for (size_t start = 0; start < order.size(); start += static_cast<size_t>(group_size)) {
    const size_t end = std::min(order.size(), start + static_cast<size_t>(group_size));
    std::vector<int> g(order.begin() + static_cast<long>(start), order.begin() + static_cast<long>(end));
    std::sort(g.begin(), g.end());
    groups.push_back(std::move(g));
  }
  return groups;
}

VirtualBattery NominalForGroup(const Fleet& fleet, const std::vector<int>& group,
                               std::vector<int>* slots) {
  std::vector<FlexUnit> units;
  for (int i : group) {
    const AdmissibleSet adm = AdmissiblePolytope(fleet.tasks[i], fleet.m, fleet.delta_h);
    units.push_back({adm.active, adm.battery, fleet.tasks[i].id});
  }
  return NominalForUnits(units, slots);
}

VirtualBattery NominalForUnits(const std::vector<FlexUnit>& units, std::vector<int>* slots) {
  if (units.empty()) throw Error(ErrorCode::kEmptyUnit, "nominal of an empty set of units");
  std::vector<std::vector<int>> sets;
  for (const auto& u : units) sets.push_back(u.active);
  const std::vector<int> span = SortedUnion(sets);
  VirtualBattery out;
  out.delta_h = units.front().battery.delta_h;
  out.p_low = VectorXd::Zero(static_cast<Eigen::Index>(span.size()));
  out.p_high = VectorXd::Zero(static_cast<Eigen::Index>(span.size()));
  for (const auto& u : units) {
    const VirtualBattery e = Embed(u.battery, u.active, span);
    out.p_low += e.p_low;
    out.p_high += e.p_high;
    out.e_low += e.e_low;
    out.e_high += e.e_high;
  }
  const double n = static_cast<double>(units.size());
  out.p_low /= n;
  out.p_high /= n;
  out.e_low /= n;
  out.e_high /= n;
  ClipEnergy(out);
  if (slots) *slots = span;
  return out;
}

VirtualBattery TreeNode::Battery() const { return ApplyHomothet(homothet, nominal); }

VirtualBattery SynthesizeBattery(const TreeNode& node, int m) {
  std::vector<int> all(static_cast<size_t>(m));
  std::iota(all.begin(), all.end(), 0);
  return Embed(node.Battery(), node.slots, all);
}

nlohmann::ordered_json AggregationTree::ToJson(bool with_certificate) const {
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["m"] = fleet.m;
  j["root"] = root;
  j["stages"] = stages;
  j["groups"] = groups;
  j["cohorts"] = cohorts;
  j["warnings"] = warnings;
  j["battery"] = BatteryToJson(battery);
  j["fleet"] = FleetToJson(fleet);
  nlohmann::ordered_json nj = nlohmann::ordered_json::array();
  for (size_t i = 0; i < nodes.size(); ++i) nj.push_back(NodeToJson(nodes[i], static_cast<int>(i), with_certificate));
  j["nodes"] = std::move(nj);
  return j;
}

AggregationTree AggregationTree::FromJson(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kVersion) {
      throw Error(ErrorCode::kParseError, "unsupported tree version " + j.at("version").dump());
    }
    AggregationTree t;
    t.fleet = FleetFromJson(j.at("fleet"));
    t.root = j.at("root").get<int>();
    t.stages = j.at("stages").get<int>();
    t.groups = j.at("groups").get<int>();
    t.cohorts = j.at("cohorts").get<int>();
    t.warnings = j.at("warnings").get<std::vector<std::string>>();
    t.battery = BatteryFromJson(j.at("battery"));
    const auto& nj = j.at("nodes");
    for (size_t i = 0; i < nj.size(); ++i) {
      const auto& x = nj[i];
      if (x.at("id").get<size_t>() != i) throw Error(ErrorCode::kParseError, "node ids out of order");
      TreeNode n;
      n.kind = ParseKind(x.at("kind").get<std::string>());
      n.stage = x.at("stage").get<int>();
      n.slots = x.at("slots").get<std::vector<int>>();
      if (n.kind == TreeNode::Kind::kLeaf) {
        n.task = x.at("task").get<int>();
        n.task_id = x.at("task_id").get<std::string>();
        if (n.task < 0 || n.task >= t.fleet.size() || t.fleet.tasks[n.task].id != n.task_id) {
          throw Error(ErrorCode::kParseError, "leaf " + std::to_string(i) + " does not match the fleet");
        }
        const AdmissibleSet adm = AdmissiblePolytope(t.fleet.tasks[n.task], t.fleet.m, t.fleet.delta_h);
        n.nominal = adm.battery;
        n.homothet = {1.0, VectorXd::Zero(static_cast<Eigen::Index>(n.slots.size()))};
      } else {
        n.children = x.at("children").get<std::vector<int>>();
        n.homothet.lambda = x.at("lambda").get<double>();
        n.homothet.mu = ToVector(x.at("mu").get<std::vector<double>>());
        n.nominal = BatteryFromJson(x.at("nominal"));
        if (x.contains("note")) n.note = x.at("note").get<std::string>();
        if (n.nominal.m() != static_cast<int>(n.slots.size()) ||
            n.homothet.mu.size() != n.nominal.m()) {
          throw Error(ErrorCode::kParseError, "node " + std::to_string(i) + " has inconsistent sizes");
        }
        if (n.kind == TreeNode::Kind::kApp) {
          n.solution = AppSolution::FromJson(x.at("solution"));
          n.elim = EliminationMap::FromJson(x.at("elimination"));
          if (n.elim.times != n.slots || n.elim.num_units() != static_cast<int>(n.children.size())) {
            throw Error(ErrorCode::kParseError, "node " + std::to_string(i) + " elimination map mismatch");
          }
        }
      }
      for (int c : n.children) {
        if (c < 0 || c >= static_cast<int>(i)) {
          throw Error(ErrorCode::kParseError, "node " + std::to_string(i) + " has a bad child id");
        }
      }
      t.nodes.push_back(std::move(n));
    }
    if (t.root < 0 || t.root >= static_cast<int>(t.nodes.size())) {
      throw Error(ErrorCode::kParseError, "root id out of range");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("aggregation tree: ") + e.what());
  }
}

AggregationTree Aggregate(const Fleet& fleet, const AggregateConfig& config) {
  fleet.Validate();
  if (fleet.size() == 0) throw Error(ErrorCode::kValidationError, "empty fleet");
  if (config.group_size < 1) throw Error(ErrorCode::kValidationError, "group size must be at least 1");
  if (config.fanout < 2) throw Error(ErrorCode::kValidationError, "fanout must be at least 2");
  if (config.workers < 1) throw Error(ErrorCode::kValidationError, "workers must be at least 1");
  return Builder(fleet, config).Run();
}

DispatchResult Dispatch(const AggregationTree& tree, const Eigen::VectorXd& u, double tol) {
  const Fleet& fleet = tree.fleet;
  if (u.size() != fleet.m) {
    throw Error(ErrorCode::kLengthMismatch, "profile has " + std::to_string(u.size()) +
                                                " slots, horizon is " + std::to_string(fleet.m));
  }
  if (!tree.battery.Contains(u, tol)) {
    throw Error(ErrorCode::kNotInBattery, "profile is not in the aggregate battery");
  }
  DispatchResult out;
  out.schedule = Eigen::MatrixXd::Zero(fleet.size(), fleet.m);
  out.node_profiles.resize(tree.nodes.size());

  std::vector<std::pair<int, VectorXd>> stack;
  {
    const TreeNode& root = tree.nodes[tree.root];
    VectorXd z(static_cast<Eigen::Index>(root.slots.size()));
    for (size_t k = 0; k < root.slots.size(); ++k) z[static_cast<Eigen::Index>(k)] = u[root.slots[k]];
    stack.emplace_back(tree.root, std::move(z));
  }
  while (!stack.empty()) {
    auto [id, z] = std::move(stack.back());
    stack.pop_back();
    const TreeNode& node = tree.nodes[id];
    out.node_profiles[id] = z;
    switch (node.kind) {
      case TreeNode::Kind::kLeaf:
        for (size_t k = 0; k < node.slots.size(); ++k) {
          out.schedule(node.task, node.slots[k]) = z[static_cast<Eigen::Index>(k)];
        }
        break;
      case TreeNode::Kind::kCohort: {
        const double lambda = node.homothet.lambda;
        for (int c : node.children) {
          const Homothet& h = tree.nodes[c].homothet;
          stack.emplace_back(c, (h.lambda / lambda) * (z - node.homothet.mu) + h.mu);
        }
        break;
      }
      case TreeNode::Kind::kApp: {
        const EliminationMap& e = node.elim;
        const VectorXd tilde = node.solution.Lift(z);
        VectorXd others = VectorXd::Zero(e.m());
        for (int j = 0; j < e.m_tilde(); ++j) others[e.tilde_time[j]] += tilde[j];
        for (int i = 0; i < e.num_units(); ++i) {
          VectorXd zi(static_cast<Eigen::Index>(e.tilde_index[i].size()));
          for (size_t l = 0; l < e.tilde_index[i].size(); ++l) {
            const int j = e.tilde_index[i][l];
            const int k = e.time_index[i][l];
            zi[static_cast<Eigen::Index>(l)] = j >= 0 ? tilde[j] : z[k] - others[k];
          }
          stack.emplace_back(node.children[i], std::move(zi));
        }
        break;
      }
    }
  }

  // Rate bounds may be missed by rounding; pull values back when within tol.
  for (int i = 0; i < fleet.size(); ++i) {
    const ChargingTask& task = fleet.tasks[i];
    for (int t = task.a - 1; t < task.d; ++t) {
      double& v = out.schedule(i, t);
      const double target = std::clamp(v, 0.0, task.p);
      const double gap = std::abs(v - target);
      if (gap == 0.0 || gap > tol) continue;
      if (gap > 1e-9) {
        out.clamps.push_back("task " + task.id + " slot " + std::to_string(t + 1) + ": " +
                             std::to_string(v) + " -> " + std::to_string(target));
        spdlog::info("dispatch clamp: {}", out.clamps.back());
      }
      v = target;
    }
  }
  const ScheduleReport report = ValidateSchedule(fleet, out.schedule, u, tol);
  if (!report.ok()) {
    const ScheduleViolation& v = report.violations.front();
    throw Error(ErrorCode::kDispatchInfeasible,
                std::string("dispatched schedule fails validation (") + ViolationKindName(v.kind) +
                    ", max violation " + std::to_string(report.max_violation) + ")");
  }
  return out;
}

void WriteBoundsCsv(const VirtualBattery& battery, std::ostream& out) {
  out << "slot,p_low_kw,p_high_kw\n";
  for (int t = 0; t < battery.m(); ++t) {
    out << (t + 1) << ',' << Fixed6(battery.p_low[t]) << ',' << Fixed6(battery.p_high[t]) << '\n';
  }
}

}  // namespace flex
