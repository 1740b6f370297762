#pragma once

#include <map>
#include <optional>
#include <vector>

#include "starforge/error.hpp"
#include "starforge/rational.hpp"

namespace starforge {

// Exact sparse linear solver over Q. Columns are added in a caller-chosen
// order; elimination pivots on the first nonzero row of each reduced column,
// so results are deterministic functions of that order. The particular
// solution leaves every free column at zero.
struct LinearSolution {
  bool solvable = false;
  std::vector<Rational> particular;               // one entry per column
  std::vector<std::vector<Rational>> nullspace;   // basis of homogeneous solutions
};

template <class RowKey>
class LinearSystem {
 public:
  using Column = std::map<RowKey, Rational>;

  explicit LinearSystem(std::size_t ncols) : cols_(ncols) {}

  std::size_t ncols() const { return cols_.size(); }

  void add_entry(std::size_t col, const RowKey& row, const Rational& v) {
    if (v.is_zero()) return;
    Rational& slot = cols_.at(col)[row];
    slot += v;
    if (slot.is_zero()) cols_.at(col).erase(row);
  }

  void add_rhs(const RowKey& row, const Rational& v) {
    if (v.is_zero()) return;
    Rational& slot = rhs_[row];
    slot += v;
    if (slot.is_zero()) rhs_.erase(row);
  }

  LinearSolution solve() const {
    struct Pivot {
      RowKey row;
      Column column;                  // reduced column, leading entry at `row`
      std::map<std::size_t, Rational> rep;  // expression in original columns
    };
    std::vector<Pivot> pivots;
    std::vector<std::size_t> free_cols;
    std::vector<std::map<std::size_t, Rational>> free_reps;

    auto reduce = [&](Column& vec, std::map<std::size_t, Rational>& rep) {
      for (const Pivot& p : pivots) {
        auto it = vec.find(p.row);
        if (it == vec.end()) continue;
        Rational factor = it->second / p.column.at(p.row);
        for (const auto& [r, v] : p.column) {
          Rational& slot = vec[r];
          slot -= factor * v;
          if (slot.is_zero()) vec.erase(r);
        }
        for (const auto& [c, v] : p.rep) {
          Rational& slot = rep[c];
          slot -= factor * v;
          if (slot.is_zero()) rep.erase(c);
        }
      }
    };

    for (std::size_t j = 0; j < cols_.size(); ++j) {
      Column vec = cols_[j];
      std::map<std::size_t, Rational> rep;
      rep[j] = Rational(1);
      reduce(vec, rep);
      if (vec.empty()) {
        free_cols.push_back(j);
        free_reps.push_back(std::move(rep));
      } else {
        pivots.push_back({vec.begin()->first, std::move(vec), std::move(rep)});
      }
    }

    Column b = rhs_;
    std::map<std::size_t, Rational> brep;
    reduce(b, brep);

    LinearSolution out;
    out.particular.assign(cols_.size(), Rational(0));
    if (!b.empty()) return out;  // inconsistent
    out.solvable = true;
    // rhs reduced to zero: minus the accumulated representation solves A x = b
    for (const auto& [c, v] : brep) out.particular[c] = -v;
    for (const auto& rep : free_reps) {
      std::vector<Rational> vec(cols_.size(), Rational(0));
      for (const auto& [c, v] : rep) vec[c] = v;
      out.nullspace.push_back(std::move(vec));
    }
    return out;
  }

 private:
  std::vector<Column> cols_;
  Column rhs_;
};

}  // namespace starforge
