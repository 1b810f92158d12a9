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

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "flex/errors.h"
#include "flex/fleet.h"
#include "flex/io.h"
#include "flex/lp.h"
#include "test_util.h"

using namespace flex;
using flex::testing::Vec;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ChargingTask Task(std::string id, int a, int d, double p, double lo, double hi) {
  ChargingTask t;
  t.id = std::move(id);
  t.a = a;
  t.d = d;
  t.p = p;
  t.e_low = lo;
  t.e_high = hi;
  return t;
}

std::string TempPath(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("admissible set of a task") {
  const AdmissibleSet s = AdmissiblePolytope(Task("x", 1, 2, 1, 1, 1), 2);
  CHECK(s.active == std::vector<int>{0, 1});
  CHECK(s.poly.rows() == 6);
  CHECK(ContainsPoint(s.poly, Vec({0.5, 0.5})));
  CHECK_FALSE(ContainsPoint(s.poly, Vec({1, 0.5})));

  const AdmissibleSet w = AdmissiblePolytope(Task("y", 2, 3, 2, 1, 3), 4);
  CHECK(w.active == std::vector<int>{1, 2});
  CHECK(w.poly.rows() == 6);
  // u = (0, 0.5, 0.5, 0) restricted to the window.
  CHECK(ContainsPoint(w.poly, Vec({0.5, 0.5})));
  CHECK_FALSE(ContainsPoint(w.poly, Vec({0.25, 0.5})));

  try {
    AdmissiblePolytope(Task("z", 1, 2, 1, 3, 3), 2);
    FAIL("expected InfeasibleTask");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInfeasibleTask);
  }
}

TEST_CASE("generated fleets are valid and reproducible") {
  const Fleet a = GenerateFleet(1000, 24, 42);
  const Fleet b = GenerateFleet(1000, 24, 42);
  CHECK(a.size() == 1000);
  CHECK(FleetToJson(a).dump() == FleetToJson(b).dump());
  CHECK(FleetToJson(a).dump() != FleetToJson(GenerateFleet(1000, 24, 43)).dump());
  int deferrable = 0;
  for (const ChargingTask& t : a.tasks) {
    deferrable += t.deferrable(a.delta_h);
    const AdmissibleSet s = AdmissiblePolytope(t, a.m, a.delta_h);
    const int w = static_cast<int>(s.active.size());
    lp::LpProblem p = lp::LpProblem::FromDense(VectorXd::Zero(w), s.poly.a, s.poly.c, MatrixXd(0, w),
                                               VectorXd(0), VectorXd::Constant(w, -lp::kInf),
                                               VectorXd::Constant(w, lp::kInf));
    REQUIRE(lp::CheckFeasible(p) == lp::Feasibility::kFeasible);
  }
  CHECK(deferrable >= 900);

  const Fleet small = GenerateFleet(10, 24, 7);
  for (const ChargingTask& t : small.tasks) {
    CHECK(t.a < t.d);
    CHECK(t.e_low <= t.window() * t.p);
  }
}

TEST_CASE("arrival distribution concentrates in the first half of the horizon") {
  int early = 0, total = 0;
  for (int seed = 0; seed < 30; ++seed) {
    for (const ChargingTask& t : GenerateFleet(100, 24, seed).tasks) {
      early += t.a <= 12;
      ++total;
    }
  }
  CHECK(early >= 0.7 * total);
}

TEST_CASE("bad generation profiles are rejected") {
  GenProfile bad;
  bad.rates_kw.clear();
  CHECK_THROWS_AS(GenerateFleet(10, 24, 1, bad), Error);
  GenProfile short_stay;
  short_stay.stay_min = 1;
  try {
    GenerateFleet(10, 24, 1, short_stay);
    FAIL("expected BadProfile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kBadProfile);
  }
}

TEST_CASE("fleet json round trip and diagnostics") {
  const Fleet f = GenerateFleet(25, 24, 3);
  const std::string path = TempPath("flex_fleet_test.json");
  SaveFleet(f, path);
  const Fleet g = LoadFleet(path);
  CHECK(FleetToJson(g).dump() == FleetToJson(f).dump());
  std::remove(path.c_str());

  nlohmann::json j = FleetToJson(f);
  j["tasks"][3].erase("p_kw");
  try {
    FleetFromJson(j);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParseError);
    CHECK(std::string(e.what()).find("\"p_kw\"") != std::string::npos);
    CHECK(std::string(e.what()).find("tasks[3]") != std::string::npos);
  }

  nlohmann::json late = FleetToJson(f);
  late["tasks"][0]["d"] = 30;
  try {
    FleetFromJson(late);
    FAIL("expected ValidationError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kValidationError);
  }

  nlohmann::json dup = FleetToJson(f);
  dup["tasks"][1]["id"] = dup["tasks"][0]["id"];
  CHECK_THROWS_AS(FleetFromJson(dup), Error);

  CHECK_THROWS_AS(LoadFleet(TempPath("flex_missing_file.json")), Error);
}

TEST_CASE("schedule csv round trip") {
  Fleet f;
  f.m = 3;
  f.tasks = {Task("a", 1, 2, 1, 0, 2), Task("b", 2, 3, 2, 1, 3)};
  MatrixXd s(2, 3);
  s << 0.5, 0.25, 0, 0, 1.123456, 2;
  std::ostringstream out;
  WriteScheduleCsv(f, s, out);
  CHECK(out.str() == "task_id,t1,t2,t3\na,0.500000,0.250000,0.000000\nb,0.000000,1.123456,2.000000\n");
  std::istringstream in(out.str());
  CHECK(ReadScheduleCsv(f, in).isApprox(s));
  std::istringstream missing("task_id,t1,t2,t3\na,0,0,0\n");
  CHECK_THROWS_AS(ReadScheduleCsv(f, missing), Error);
}

TEST_CASE("profile csv") {
  std::ostringstream out;
  WriteProfileCsv(Vec({1, 2.5}), out);
  CHECK(out.str() == "slot,kw\n1,1.000000\n2,2.500000\n");
  std::istringstream in(out.str());
  CHECK(ReadProfileCsv(in, 2) == Vec({1, 2.5}));
  std::istringstream short_in(out.str());
  try {
    ReadProfileCsv(short_in, 3);
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLengthMismatch);
  }
}
