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

#include "flex/io.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "flex/errors.h"

namespace flex {
namespace {

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << contents;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}

nlohmann::json ReadJsonFile(const std::string& path) {
  const std::string text = ReadFile(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
}

void WriteJsonFile(const std::string& path, const nlohmann::ordered_json& j) {
  WriteFile(path, j.dump(2) + "\n");
}

std::vector<std::vector<std::string>> ReadCsv(std::istream& in) {
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (Trim(line).empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(Trim(field));
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::string Fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  // Avoid "-0.000000" so files do not depend on the sign of rounding noise.
  if (std::string(buf) == "-0.000000") return "0.000000";
  return buf;
}

double ParseNumber(const std::string& field, const std::string& where) {
  try {
    size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size() || !std::isfinite(v)) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kParseError, where + ": not a number: \"" + field + "\"");
  }
}

void WriteProfileCsv(const Eigen::VectorXd& u, std::ostream& out) {
  out << "slot,kw\n";
  for (int t = 0; t < u.size(); ++t) out << (t + 1) << "," << Fixed6(u[t]) << "\n";
}

Eigen::VectorXd ReadProfileCsv(std::istream& in, int m) {
  auto rows = ReadCsv(in);
  if (!rows.empty() && !rows.front().empty()) {
    // Header is optional: skip it when the first field is not numeric.
    try {
      std::stod(rows.front()[0]);
    } catch (const std::exception&) {
      rows.erase(rows.begin());
    }
  }
  if (m >= 0 && static_cast<int>(rows.size()) != m) {
    throw Error(ErrorCode::kLengthMismatch, "profile has " + std::to_string(rows.size()) +
                                                " rows, horizon is " + std::to_string(m));
  }
  Eigen::VectorXd u(rows.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    const std::string where = "profile row " + std::to_string(r + 1);
    if (rows[r].size() != 2) throw Error(ErrorCode::kParseError, where + ": expected slot,value");
    const double slot = ParseNumber(rows[r][0], where);
    if (slot != static_cast<double>(r + 1)) {
      throw Error(ErrorCode::kParseError, where + ": slots must be 1..m in order");
    }
    u[r] = ParseNumber(rows[r][1], where);
  }
  return u;
}

}  // namespace flex
