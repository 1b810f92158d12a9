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

// File and CSV helpers shared by the data formats.

#ifndef FLEX_IO_H_
#define FLEX_IO_H_

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"

namespace flex {

// Whole-file read/write; failures throw kIoError.
std::string ReadFile(const std::string& path);
void WriteFile(const std::string& path, const std::string& contents);

nlohmann::json ReadJsonFile(const std::string& path);
// Pretty-printed with two-space indent and a trailing newline.
void WriteJsonFile(const std::string& path, const nlohmann::ordered_json& j);

// Comma-separated rows; blank lines skipped, fields trimmed. No quoting.
std::vector<std::vector<std::string>> ReadCsv(std::istream& in);

// "%.6f".
std::string Fixed6(double v);

// Parses a finite double; throws kParseError mentioning `where`.
double ParseNumber(const std::string& field, const std::string& where);

// Profile CSV: header slot,kw then rows t,u_t for t = 1..m.
void WriteProfileCsv(const Eigen::VectorXd& u, std::ostream& out);
// Throws kParseError on malformed rows and kLengthMismatch when the row count
// differs from m (m < 0 accepts any length).
Eigen::VectorXd ReadProfileCsv(std::istream& in, int m = -1);

}  // namespace flex

#endif  // FLEX_IO_H_
