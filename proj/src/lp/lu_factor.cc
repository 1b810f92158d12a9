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

#include "lu_factor.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace flex::lp::internal {
namespace {

// Doubly linked lists of items keyed by their current nonzero count.
class CountLists {
 public:
  void Init(int items) {
    head_.assign(items + 1, -1);
    next_.assign(items, -1);
    prev_.assign(items, -1);
    count_.assign(items, -1);
  }
  void Insert(int x, int c) {
    count_[x] = c;
    prev_[x] = -1;
    next_[x] = head_[c];
    if (head_[c] >= 0) prev_[head_[c]] = x;
    head_[c] = x;
  }
  void Remove(int x) {
    const int c = count_[x];
    if (c < 0) return;
    if (prev_[x] >= 0) {
      next_[prev_[x]] = next_[x];
    } else {
      head_[c] = next_[x];
    }
    if (next_[x] >= 0) prev_[next_[x]] = prev_[x];
    count_[x] = -1;
  }
  void Move(int x, int c) {
    Remove(x);
    Insert(x, c);
  }
  int Head(int c) const { return head_[c]; }
  int Next(int x) const { return next_[x]; }

 private:
  std::vector<int> head_, next_, prev_, count_;
};

void EraseValue(std::vector<int>& v, int value) {
  auto it = std::find(v.begin(), v.end(), value);
  if (it != v.end()) {
    *it = v.back();
    v.pop_back();
  }
}

}  // namespace

LuFactor::Deficiency LuFactor::Factorize(
    const std::vector<SparseColumn>& columns, const Options& options) {
  const int n = static_cast<int>(columns.size());
  dim_ = n;
  pivot_row_.clear();
  pivot_col_.clear();
  pivot_value_.clear();
  l_cols_.clear();
  u_rows_.clear();
  work_.assign(n, 0.0);

  std::vector<std::vector<int>> col_rows(n);
  std::vector<std::vector<double>> col_vals(n);
  std::vector<std::vector<int>> row_cols(n);
  for (int j = 0; j < n; ++j) {
    const auto& c = columns[j];
    for (size_t k = 0; k < c.rows.size(); ++k) {
      if (c.values[k] == 0.0) continue;
      col_rows[j].push_back(c.rows[k]);
      col_vals[j].push_back(c.values[k]);
      row_cols[c.rows[k]].push_back(j);
    }
  }

  CountLists cols, rows;
  cols.Init(n);
  rows.Init(n);
  for (int j = 0; j < n; ++j) cols.Insert(j, static_cast<int>(col_rows[j].size()));
  for (int i = 0; i < n; ++i) rows.Insert(i, static_cast<int>(row_cols[i].size()));

  std::vector<char> row_done(n, 0);
  std::vector<int> mark(n, -1);
  Deficiency deficiency;

  auto drop_column = [&](int j) {
    for (int i : col_rows[j]) {
      EraseValue(row_cols[i], j);
      rows.Move(i, static_cast<int>(row_cols[i].size()));
    }
    col_rows[j].clear();
    col_vals[j].clear();
    cols.Remove(j);
    deficiency.columns.push_back(j);
  };

  auto column_max = [&](int j) {
    double m = 0.0;
    for (double v : col_vals[j]) m = std::max(m, std::abs(v));
    return m;
  };

  for (int step = 0; step < n; ++step) {
    int best_i = -1, best_j = -1;
    long best_cost = std::numeric_limits<long>::max();
    double best_abs = 0.0;
    int searched = 0;
    std::vector<int> tiny;

    while (cols.Head(0) >= 0) drop_column(cols.Head(0));

    auto good_enough = [&](int c) {
      return best_i >= 0 &&
             (best_cost <= long(c - 1) * (c - 1) || searched >= 4);
    };
    for (int c = 1; c <= n; ++c) {
      for (int j = cols.Head(c); j >= 0 && !good_enough(c); j = cols.Next(j)) {
        const double cmax = column_max(j);
        if (cmax <= options.abs_tol) {
          tiny.push_back(j);
          continue;
        }
        for (size_t k = 0; k < col_rows[j].size(); ++k) {
          const double a = std::abs(col_vals[j][k]);
          if (a < options.threshold * cmax || a <= options.abs_tol) continue;
          const long cost =
              long(row_cols[col_rows[j][k]].size() - 1) * long(c - 1);
          if (cost < best_cost || (cost == best_cost && a > best_abs)) {
            best_cost = cost;
            best_abs = a;
            best_i = col_rows[j][k];
            best_j = j;
          }
        }
        ++searched;
      }
      for (int i = rows.Head(c); i >= 0 && !good_enough(c); i = rows.Next(i)) {
        for (int j : row_cols[i]) {
          const auto& rj = col_rows[j];
          const auto it = std::find(rj.begin(), rj.end(), i);
          const double a = std::abs(col_vals[j][it - rj.begin()]);
          const double cmax = column_max(j);
          if (a < options.threshold * cmax || a <= options.abs_tol) continue;
          const long cost = long(c - 1) * long(rj.size() - 1);
          if (cost < best_cost || (cost == best_cost && a > best_abs)) {
            best_cost = cost;
            best_abs = a;
            best_i = i;
            best_j = j;
          }
        }
        ++searched;
      }
      if (good_enough(c)) break;
    }
    for (int j : tiny) drop_column(j);
    if (best_i < 0) {
      // Every remaining column was numerically empty.
      bool any_active = false;
      for (int j = 0; j < n; ++j) {
        if (!col_rows[j].empty()) any_active = true;
      }
      if (!any_active) break;
      --step;  // the drops changed the active set; search again
      continue;
    }

    const int p = best_i;
    const int q = best_j;
    double piv = 0.0;
    std::vector<Entry> lk;
    for (size_t k = 0; k < col_rows[q].size(); ++k) {
      if (col_rows[q][k] == p) piv = col_vals[q][k];
    }
    for (size_t k = 0; k < col_rows[q].size(); ++k) {
      const int i = col_rows[q][k];
      EraseValue(row_cols[i], q);
      if (i != p) lk.push_back({i, col_vals[q][k] / piv});
    }
    std::vector<Entry> uk;
    for (int j : row_cols[p]) {
      auto& rj = col_rows[j];
      auto& vj = col_vals[j];
      const size_t idx = std::find(rj.begin(), rj.end(), p) - rj.begin();
      uk.push_back({j, vj[idx]});
      rj[idx] = rj.back();
      rj.pop_back();
      vj[idx] = vj.back();
      vj.pop_back();
    }
    row_cols[p].clear();
    col_rows[q].clear();
    col_vals[q].clear();
    rows.Remove(p);
    cols.Remove(q);
    row_done[p] = 1;

    for (const Entry& u : uk) {
      const int j = u.index;
      auto& rj = col_rows[j];
      auto& vj = col_vals[j];
      for (size_t k = 0; k < rj.size(); ++k) mark[rj[k]] = static_cast<int>(k);
      for (const Entry& l : lk) {
        const double delta = -l.value * u.value;
        if (mark[l.index] >= 0) {
          vj[mark[l.index]] += delta;
        } else {
          mark[l.index] = static_cast<int>(rj.size());
          rj.push_back(l.index);
          vj.push_back(delta);
          row_cols[l.index].push_back(j);
        }
      }
      for (int i : rj) mark[i] = -1;
      for (size_t k = 0; k < rj.size();) {
        if (std::abs(vj[k]) < options.drop_tol) {
          EraseValue(row_cols[rj[k]], j);
          rj[k] = rj.back();
          rj.pop_back();
          vj[k] = vj.back();
          vj.pop_back();
        } else {
          ++k;
        }
      }
      cols.Move(j, static_cast<int>(rj.size()));
    }
    for (const Entry& l : lk) {
      rows.Move(l.index, static_cast<int>(row_cols[l.index].size()));
    }

    pivot_row_.push_back(p);
    pivot_col_.push_back(q);
    pivot_value_.push_back(piv);
    l_cols_.push_back(std::move(lk));
    u_rows_.push_back(std::move(uk));
  }

  for (int j = 0; j < n; ++j) {
    if (!col_rows[j].empty()) deficiency.columns.push_back(j);
  }
  std::sort(deficiency.columns.begin(), deficiency.columns.end());
  deficiency.columns.erase(
      std::unique(deficiency.columns.begin(), deficiency.columns.end()),
      deficiency.columns.end());
  for (int i = 0; i < n; ++i) {
    if (!row_done[i]) deficiency.rows.push_back(i);
  }
  return deficiency;
}

void LuFactor::Ftran(std::vector<double>& rhs) const {
  const int steps = static_cast<int>(pivot_row_.size());
  for (int k = 0; k < steps; ++k) {
    const double v = rhs[pivot_row_[k]];
    if (v == 0.0) continue;
    for (const Entry& l : l_cols_[k]) rhs[l.index] -= l.value * v;
  }
  std::vector<double>& x = work_;
  for (int k = steps - 1; k >= 0; --k) {
    double v = rhs[pivot_row_[k]];
    for (const Entry& u : u_rows_[k]) v -= u.value * x[u.index];
    x[pivot_col_[k]] = v / pivot_value_[k];
  }
  rhs.swap(x);
  std::fill(work_.begin(), work_.end(), 0.0);
}

void LuFactor::Btran(std::vector<double>& rhs) const {
  const int steps = static_cast<int>(pivot_row_.size());
  std::vector<double>& v = work_;
  for (int k = 0; k < steps; ++k) {
    const double vk = rhs[pivot_col_[k]] / pivot_value_[k];
    v[pivot_row_[k]] = vk;
    if (vk == 0.0) continue;
    for (const Entry& u : u_rows_[k]) rhs[u.index] -= u.value * vk;
  }
  for (int k = steps - 1; k >= 0; --k) {
    double s = 0.0;
    for (const Entry& l : l_cols_[k]) s += l.value * v[l.index];
    v[pivot_row_[k]] -= s;
  }
  rhs.swap(v);
  std::fill(work_.begin(), work_.end(), 0.0);
}

long LuFactor::nonzeros() const {
  long total = static_cast<long>(pivot_row_.size());
  for (const auto& l : l_cols_) total += static_cast<long>(l.size());
  for (const auto& u : u_rows_) total += static_cast<long>(u.size());
  return total;
}

}  // namespace flex::lp::internal
