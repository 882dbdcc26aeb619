#include "amod/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace amod {

namespace {
constexpr double kRcTol = 1e-10;
constexpr double kPivTol = 1e-11;
}  // namespace

EqualityLp::EqualityLp(int num_rows, std::vector<LpColumn> columns, std::vector<double> rhs,
                       std::vector<int> initial_basis)
    : m_(num_rows), cols_(std::move(columns)), b_(std::move(rhs)), basis_(std::move(initial_basis)) {
    if (static_cast<int>(b_.size()) != m_ || static_cast<int>(basis_.size()) != m_)
        throw std::invalid_argument("lp: dimension mismatch");
    in_basis_.assign(cols_.size(), 0);
    for (int j : basis_) in_basis_[j] = 1;
    refactor();
}

void EqualityLp::refactor() {
    // Gauss-Jordan inverse of the basis matrix; basis matrices here are tiny
    // relative to the column count, so a dense inverse is fine.
    std::vector<double> a(static_cast<std::size_t>(m_) * m_, 0.0);
    for (int r = 0; r < m_; ++r) {
        const LpColumn& col = cols_[basis_[r]];
        for (int k = 0; k < col.nnz; ++k) a[static_cast<std::size_t>(col.rows[k]) * m_ + r] = col.vals[k];
    }
    binv_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
    for (int i = 0; i < m_; ++i) binv_[static_cast<std::size_t>(i) * m_ + i] = 1.0;
    for (int c = 0; c < m_; ++c) {
        int piv = -1;
        double best = 0.0;
        for (int r = c; r < m_; ++r) {
            const double v = std::abs(a[static_cast<std::size_t>(r) * m_ + c]);
            if (v > best) { best = v; piv = r; }
        }
        if (piv < 0 || best < 1e-12) throw std::runtime_error("lp: singular basis");
        if (piv != c) {
            for (int k = 0; k < m_; ++k) {
                std::swap(a[static_cast<std::size_t>(piv) * m_ + k], a[static_cast<std::size_t>(c) * m_ + k]);
                std::swap(binv_[static_cast<std::size_t>(piv) * m_ + k], binv_[static_cast<std::size_t>(c) * m_ + k]);
            }
        }
        const double d = a[static_cast<std::size_t>(c) * m_ + c];
        for (int k = 0; k < m_; ++k) {
            a[static_cast<std::size_t>(c) * m_ + k] /= d;
            binv_[static_cast<std::size_t>(c) * m_ + k] /= d;
        }
        for (int r = 0; r < m_; ++r) {
            if (r == c) continue;
            const double f = a[static_cast<std::size_t>(r) * m_ + c];
            if (f == 0.0) continue;
            for (int k = 0; k < m_; ++k) {
                a[static_cast<std::size_t>(r) * m_ + k] -= f * a[static_cast<std::size_t>(c) * m_ + k];
                binv_[static_cast<std::size_t>(r) * m_ + k] -= f * binv_[static_cast<std::size_t>(c) * m_ + k];
            }
        }
    }
    double scale = 1.0;
    for (double v : b_) scale = std::max(scale, std::abs(v));
    xb_.assign(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
        double s = 0.0;
        for (int k = 0; k < m_; ++k) s += binv_[static_cast<std::size_t>(i) * m_ + k] * b_[k];
        if (s < -1e-7 * scale) throw std::runtime_error("lp: initial basis not primal feasible");
        xb_[i] = std::max(0.0, s);
    }
}

double EqualityLp::column_entry_dot(const LpColumn& col, const std::vector<double>& y) const {
    double s = 0.0;
    for (int k = 0; k < col.nnz; ++k) s += y[col.rows[k]] * col.vals[k];
    return s;
}

double EqualityLp::solve(const std::vector<double>& costs) {
    if (costs.size() != cols_.size()) throw std::invalid_argument("lp: cost vector mismatch");
    std::vector<double> y(m_);
    std::vector<double> d(m_);
    bool bland = false;
    int degenerate_run = 0;
    const int pivot_cap = 2000 * (m_ + 10);
    int local_pivots = 0;

    for (;;) {
        if (++local_pivots > pivot_cap) throw std::runtime_error("lp: pivot limit exceeded");
        // duals y = cB' * Binv
        for (int j = 0; j < m_; ++j) {
            double s = 0.0;
            for (int i = 0; i < m_; ++i)
                s += costs[basis_[i]] * binv_[static_cast<std::size_t>(i) * m_ + j];
            y[j] = s;
        }
        // price nonbasic columns; the tolerance scales with the magnitudes
        // entering the reduced cost so large artificial costs cannot turn
        // rounding noise into pivots
        int enter = -1;
        double best_rc = 0.0;
        for (int j = 0; j < static_cast<int>(cols_.size()); ++j) {
            if (in_basis_[j]) continue;
            const LpColumn& col = cols_[j];
            double mag = std::abs(costs[j]);
            double dotv = 0.0;
            for (int k = 0; k < col.nnz; ++k) {
                const double part = y[col.rows[k]] * col.vals[k];
                dotv += part;
                mag = std::max(mag, std::abs(part));
            }
            const double rc = costs[j] - dotv;
            const double tol = kRcTol * std::max(1.0, mag);
            if (bland) {
                if (rc < -tol) { enter = j; break; }
            } else if (rc < -tol && rc < best_rc) {
                best_rc = rc;
                enter = j;
            }
        }
        if (enter < 0) break;  // optimal

        // direction d = Binv * A_enter
        const LpColumn& col = cols_[enter];
        for (int i = 0; i < m_; ++i) {
            double s = 0.0;
            for (int k = 0; k < col.nnz; ++k)
                s += binv_[static_cast<std::size_t>(i) * m_ + col.rows[k]] * col.vals[k];
            d[i] = s;
        }
        int leave = -1;
        double theta = 0.0;
        for (int i = 0; i < m_; ++i) {
            if (d[i] > kPivTol) {
                const double ratio = xb_[i] / d[i];
                if (leave < 0 || ratio < theta - 1e-14 ||
                    (ratio < theta + 1e-14 && basis_[i] < basis_[leave])) {
                    leave = i;
                    theta = ratio;
                }
            }
        }
        if (leave < 0) throw std::runtime_error("lp: unbounded direction");
        if (theta <= 1e-13) {
            if (++degenerate_run > 4 * m_ + 50) bland = true;
        } else {
            degenerate_run = 0;
        }

        // pivot
        const double piv = d[leave];
        for (int k = 0; k < m_; ++k) binv_[static_cast<std::size_t>(leave) * m_ + k] /= piv;
        for (int i = 0; i < m_; ++i) {
            if (i == leave) continue;
            const double f = d[i];
            if (f == 0.0) continue;
            for (int k = 0; k < m_; ++k)
                binv_[static_cast<std::size_t>(i) * m_ + k] -=
                    f * binv_[static_cast<std::size_t>(leave) * m_ + k];
        }
        for (int i = 0; i < m_; ++i) {
            if (i == leave) continue;
            xb_[i] = std::max(0.0, xb_[i] - theta * d[i]);
        }
        xb_[leave] = theta;
        in_basis_[basis_[leave]] = 0;
        in_basis_[enter] = 1;
        basis_[leave] = enter;
        ++pivots_;
        if (pivots_ % 4096 == 0) refactor();
    }

    double obj = 0.0;
    for (int i = 0; i < m_; ++i) obj += costs[basis_[i]] * xb_[i];
    return obj;
}

std::vector<std::pair<int, double>> EqualityLp::primal_sparse() const {
    std::vector<std::pair<int, double>> x;
    for (int i = 0; i < m_; ++i)
        if (xb_[i] > 0.0) x.push_back({basis_[i], xb_[i]});
    std::sort(x.begin(), x.end());
    return x;
}

}  // namespace amod
