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

#ifndef FLEX_SRC_LP_LU_FACTOR_H_
#define FLEX_SRC_LP_LU_FACTOR_H_

#include <vector>

namespace flex::lp::internal {

struct SparseColumn {
  std::vector<int> rows;
  std::vector<double> values;
};

// Right-looking sparse LU with Markowitz pivot selection and threshold
// partial pivoting on columns. The matrix is square; columns are "basis
// positions", rows are constraint rows. Rank deficiency is reported instead of
// failing so the caller can patch the basis with slack columns.
class LuFactor {
 public:
  struct Options {
    double threshold = 0.1;   // |pivot| >= threshold * max |column entry|
    double abs_tol = 1e-11;   // entries below this never become pivots
    double drop_tol = 1e-14;  // fill-in below this is discarded
  };

  struct Deficiency {
    std::vector<int> columns;  // positions without a pivot
    std::vector<int> rows;     // rows without a pivot
    bool empty() const { return columns.empty(); }
  };

  Deficiency Factorize(const std::vector<SparseColumn>& columns,
                       const Options& options);

  // Solves B x = rhs. Input indexed by row, output by position (in place).
  void Ftran(std::vector<double>& rhs) const;
  // Solves B' y = rhs. Input indexed by position, output by row (in place).
  void Btran(std::vector<double>& rhs) const;

  int dim() const { return dim_; }
  long nonzeros() const;

 private:
  struct Entry {
    int index;
    double value;
  };

  int dim_ = 0;
  std::vector<int> pivot_row_;
  std::vector<int> pivot_col_;
  std::vector<double> pivot_value_;
  std::vector<std::vector<Entry>> l_cols_;  // multipliers, by pivot step
  std::vector<std::vector<Entry>> u_rows_;  // off-pivot row entries, by step
  mutable std::vector<double> work_;
};

}  // namespace flex::lp::internal

#endif  // FLEX_SRC_LP_LU_FACTOR_H_
