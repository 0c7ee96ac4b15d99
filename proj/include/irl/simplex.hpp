#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace irl {

/// Thrown when the simplex solver exceeds its pivot budget.
class SimplexError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SimplexResult {
    std::vector<double> x;
    double objective = 0.0;
    std::size_t pivots = 0;
    bool objective_monotone = true;  // self-check: objective never decreased
};

/// Dense primal simplex for  max c'x  s.t.  A x <= b,  x >= 0,  with b >= 0
/// (the origin is feasible, so no phase-1 is needed). Bland's rule picks both
/// the entering and the leaving variable, which rules out cycling on the
/// degenerate bases these problems produce. Problem sizes here are a few
/// hundred rows at most, so a plain tableau is fine.
class SimplexSolver {
  public:
    SimplexSolver(std::vector<std::vector<double>> a, std::vector<double> b,
                  std::vector<double> c)
        : m_(b.size()), n_(c.size()), rows_(a), rhs_(b), cost_(c) {
        if (a.size() != m_) throw std::invalid_argument("SimplexSolver: row count mismatch");
        for (const auto& row : a)
            if (row.size() != n_) throw std::invalid_argument("SimplexSolver: column mismatch");
        for (double v : b)
            if (v < 0.0) throw std::invalid_argument("SimplexSolver: requires b >= 0");
    }

    SimplexResult solve(std::size_t max_pivots = 200000) {
        // tableau: m_ rows of [A | I | b], objective row of [-c | 0 | 0]
        const std::size_t total = n_ + m_;
        std::vector<std::vector<double>> t(m_ + 1, std::vector<double>(total + 1, 0.0));
        for (std::size_t i = 0; i < m_; ++i) {
            for (std::size_t j = 0; j < n_; ++j) t[i][j] = rows_[i][j];
            t[i][n_ + i] = 1.0;
            t[i][total] = rhs_[i];
        }
        for (std::size_t j = 0; j < n_; ++j) t[m_][j] = -cost_[j];
        std::vector<std::size_t> basis(m_);
        for (std::size_t i = 0; i < m_; ++i) basis[i] = n_ + i;

        SimplexResult result;
        double last_objective = 0.0;
        constexpr double eps = 1e-9;
        for (std::size_t pivot = 0; pivot < max_pivots; ++pivot) {
            // Bland: entering = lowest-index column with negative reduced cost
            std::size_t enter = total;
            for (std::size_t j = 0; j < total; ++j)
                if (t[m_][j] < -eps) {
                    enter = j;
                    break;
                }
            if (enter == total) {
                result.pivots = pivot;
                result.objective = t[m_][total];
                result.x.assign(n_, 0.0);
                for (std::size_t i = 0; i < m_; ++i)
                    if (basis[i] < n_) result.x[basis[i]] = t[i][total];
                return result;
            }
            // Bland: leaving = min ratio, ties by lowest basis variable index
            std::size_t leave = m_;
            double best_ratio = 0.0;
            for (std::size_t i = 0; i < m_; ++i) {
                if (t[i][enter] <= eps) continue;
                const double ratio = t[i][total] / t[i][enter];
                if (leave == m_ || ratio < best_ratio - 1e-12 ||
                    (std::abs(ratio - best_ratio) <= 1e-12 && basis[i] < basis[leave])) {
                    leave = i;
                    best_ratio = ratio;
                }
            }
            if (leave == m_) throw SimplexError("SimplexSolver: unbounded objective");
            const double pd = t[leave][enter];
            for (std::size_t j = 0; j <= total; ++j) t[leave][j] /= pd;
            for (std::size_t i = 0; i <= m_; ++i) {
                if (i == leave) continue;
                const double f = t[i][enter];
                if (f == 0.0) continue;
                for (std::size_t j = 0; j <= total; ++j) t[i][j] -= f * t[leave][j];
            }
            basis[leave] = enter;
            if (t[m_][total] < last_objective - 1e-7) result.objective_monotone = false;
            last_objective = t[m_][total];
        }
        throw SimplexError("SimplexSolver: pivot budget exhausted");
    }

  private:
    std::size_t m_;
    std::size_t n_;
    std::vector<std::vector<double>> rows_;
    std::vector<double> rhs_;
    std::vector<double> cost_;
};

}  // namespace irl
