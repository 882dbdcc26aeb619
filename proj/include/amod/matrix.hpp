#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace amod {

// Dense row-major matrix; just enough arithmetic for demand and flow bookkeeping.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols)
        : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, 0.0) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int r, int c) { return a_[idx(r, c)]; }
    double operator()(int r, int c) const { return a_[idx(r, c)]; }

    const std::vector<double>& data() const { return a_; }

    std::vector<double> row_sums() const {
        std::vector<double> s(rows_, 0.0);
        for (int r = 0; r < rows_; ++r)
            for (int c = 0; c < cols_; ++c) s[r] += (*this)(r, c);
        return s;
    }

    std::vector<double> col_sums() const {
        std::vector<double> s(cols_, 0.0);
        for (int r = 0; r < rows_; ++r)
            for (int c = 0; c < cols_; ++c) s[c] += (*this)(r, c);
        return s;
    }

    // this += s * other
    void axpy(double s, const Matrix& other) {
        assert(rows_ == other.rows_ && cols_ == other.cols_);
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += s * other.a_[i];
    }

    void scale(double s) {
        for (double& v : a_) v *= s;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : a_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    std::size_t idx(int r, int c) const {
        assert(r >= 0 && r < rows_ && c >= 0 && c < cols_);
        return static_cast<std::size_t>(r) * cols_ + c;
    }

    int rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

}  // namespace amod
