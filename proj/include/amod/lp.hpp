#pragma once

#include <utility>
#include <vector>

namespace amod {

// Column with a handful of structural nonzeros: a gamma column hits one or
// two demand rows plus divergence/conservation rows of its legs, an arc
// column the divergence rows of its endpoints.
struct LpColumn {
    static constexpr int kMaxNnz = 8;
    int rows[kMaxNnz] = {};
    double vals[kMaxNnz] = {};
    int nnz = 0;

    void add(int row, double val) {
        rows[nnz] = row;
        vals[nnz] = val;
        ++nnz;
    }
};

// min c'x  s.t.  A x = b, x >= 0, re-optimized repeatedly for changing costs
// from the current basis. The caller supplies an initial feasible basis.
class EqualityLp {
public:
    EqualityLp(int num_rows, std::vector<LpColumn> columns, std::vector<double> rhs,
               std::vector<int> initial_basis);

    // Returns the optimal objective; primal solution via `primal_sparse`.
    double solve(const std::vector<double>& costs);

    // Nonzero primal entries (column index, value) of the last solve.
    std::vector<std::pair<int, double>> primal_sparse() const;

    int num_columns() const { return static_cast<int>(cols_.size()); }
    int pivots() const { return pivots_; }

private:
    void refactor();
    double column_entry_dot(const LpColumn& col, const std::vector<double>& y) const;

    int m_ = 0;
    std::vector<LpColumn> cols_;
    std::vector<double> b_;
    std::vector<int> basis_;          // basis column index per row
    std::vector<char> in_basis_;      // per column
    std::vector<double> binv_;        // m x m row-major
    std::vector<double> xb_;          // basic variable values
    int pivots_ = 0;
};

}  // namespace amod
