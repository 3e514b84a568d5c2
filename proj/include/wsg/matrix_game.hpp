#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsg/numeric.hpp"

namespace wsg {

// Rectangular payoff matrix of the row player (maximizer), row-major.
using Matrix = std::vector<std::vector<double>>;

struct MatrixGameSolution {
    double value = 0.0;
    std::vector<double> x_star;  // row player's optimal mixed action
    std::vector<double> y_star;  // column player's optimal mixed action
    // Certificate residuals on the input matrix: how much each player could
    // gain by a pure deviation against the returned pair. Both <= tol.
    double row_gain = 0.0;  // max_i (A y*)_i - value
    double col_gain = 0.0;  // value - min_j (x*' A)_j
};

inline void check_matrix(const Matrix& A) {
    if (A.empty() || A[0].empty()) throw std::invalid_argument("matrix game: empty matrix");
    for (const auto& row : A) {
        if (row.size() != A[0].size())
            throw std::invalid_argument("matrix game: ragged matrix");
        for (double a : row)
            if (!std::isfinite(a)) throw std::invalid_argument("matrix game: non-finite entry");
    }
}

// min over columns of x' A: the column player's best reply value against x.
inline double best_response_value(const Matrix& A, const std::vector<double>& x) {
    check_matrix(A);
    if (x.size() != A.size()) throw std::invalid_argument("best_response_value: dimension mismatch");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < A[0].size(); ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i) dot += x[i] * A[i][j];
        best = std::min(best, dot);
    }
    return best;
}

// Value and optimal mixed actions of the zero-sum game A via the standard LP
//   max 1'w  s.t.  A''w <= 1, w >= 0       (A'' = A shifted entrywise positive)
// solved by dense tableau simplex with Bland's rule for both the entering
// column and ratio ties, so the returned vertex is deterministic. The row
// player's action is read off the dual values (reduced costs on the slacks).
inline MatrixGameSolution solve_matrix_game(const Matrix& A, double tol = 1e-10) {
    check_matrix(A);
    const std::size_t m = A.size(), n = A[0].size();

    double lo = A[0][0];
    for (const auto& row : A)
        for (double a : row) lo = std::min(lo, a);
    const double delta = 1.0 - lo;  // shifted entries lie in [1, ...), value > 0

    // Tableau: m constraint rows + objective row; columns w_0..w_{n-1},
    // slacks s_0..s_{m-1}, rhs.
    const std::size_t cols = n + m + 1;
    std::vector<std::vector<double>> T(m + 1, std::vector<double>(cols, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) T[i][j] = A[i][j] + delta;
        T[i][n + i] = 1.0;
        T[i][cols - 1] = 1.0;
    }
    for (std::size_t j = 0; j < n; ++j) T[m][j] = -1.0;  // maximize 1'w

    std::vector<std::size_t> basis(m);
    for (std::size_t i = 0; i < m; ++i) basis[i] = n + i;

    const double piv_eps = 1e-12;
    for (int iter = 0;; ++iter) {
        if (iter > 10000)
            throw std::runtime_error("solve_matrix_game: simplex iteration cap hit");
        // Bland: entering column = lowest index with negative reduced cost.
        std::size_t enter = cols - 1;
        for (std::size_t j = 0; j + 1 < cols; ++j)
            if (T[m][j] < -piv_eps) { enter = j; break; }
        if (enter == cols - 1) break;  // optimal

        // Ratio test; ties go to the smallest basis variable (Bland).
        std::size_t leave = m;
        double best_ratio = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            if (T[i][enter] <= piv_eps) continue;
            const double ratio = T[i][cols - 1] / T[i][enter];
            if (leave == m || ratio < best_ratio - 1e-15 ||
                (std::abs(ratio - best_ratio) <= 1e-15 && basis[i] < basis[leave])) {
                leave = i;
                best_ratio = ratio;
            }
        }
        if (leave == m)  // feasible set {w >= 0 : A''w <= 1} is bounded, cannot happen
            throw std::runtime_error("solve_matrix_game: unbounded direction in bounded LP");

        const double piv = T[leave][enter];
        for (std::size_t j = 0; j < cols; ++j) T[leave][j] /= piv;
        for (std::size_t i = 0; i <= m; ++i) {
            if (i == leave) continue;
            const double factor = T[i][enter];
            if (factor == 0.0) continue;
            for (std::size_t j = 0; j < cols; ++j) T[i][j] -= factor * T[leave][j];
        }
        basis[leave] = enter;
    }

    const double z = T[m][cols - 1];  // = sum of w at the optimum = 1/(value + delta)
    if (!(z > 0.0)) throw std::runtime_error("solve_matrix_game: degenerate objective");

    MatrixGameSolution sol;
    sol.value = 1.0 / z - delta;
    sol.y_star.assign(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        if (basis[i] < n) sol.y_star[basis[i]] = std::max(0.0, T[i][cols - 1]);
    sol.x_star.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) sol.x_star[i] = std::max(0.0, T[m][n + i]);

    auto renormalize = [](std::vector<double>& v) {
        double s = 0.0;
        for (double e : v) s += e;
        for (double& e : v) e /= s;
    };
    renormalize(sol.x_star);
    renormalize(sol.y_star);

    // Certificate on the original matrix.
    double maxAy = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += A[i][j] * sol.y_star[j];
        maxAy = std::max(maxAy, dot);
    }
    sol.row_gain = maxAy - sol.value;
    sol.col_gain = sol.value - best_response_value(A, sol.x_star);
    if (sol.row_gain > tol || sol.col_gain > tol)
        throw std::runtime_error("solve_matrix_game: certificate residual " +
                                 format_double(std::max(sol.row_gain, sol.col_gain)) +
                                 " exceeds tolerance " + format_double(tol));
    return sol;
}

struct ValueOracleResult {
    double value;  // midpoint of [lower, upper]
    double bound;  // half-width: |true value - value| <= bound
    double lower;  // grid maximin: a certain lower bound on the value
    double upper;  // grid minimax: a certain upper bound on the value
};

namespace detail {

// Enumerate all grid mixed actions (k_1/g, ..., k_d/g), sum k = g, and fold.
template <typename F>
void for_each_grid_point(std::size_t d, std::int64_t g, F&& f) {
    std::vector<double> x(d, 0.0);
    auto rec = [&](auto&& self, std::size_t i, std::int64_t left) -> void {
        if (i + 1 == d) {
            x[i] = static_cast<double>(left) / static_cast<double>(g);
            f(x);
            return;
        }
        for (std::int64_t k = 0; k <= left; ++k) {
            x[i] = static_cast<double>(k) / static_cast<double>(g);
            self(self, i + 1, left - k);
        }
    };
    rec(rec, 0, g);
}

}  // namespace detail

// Brute-force sandwich of the game value: every grid x certifies a lower
// bound min_j x'A, every grid y an upper bound max_i Ay. Independent of the
// simplex path, so it serves as an oracle for the solver.
inline ValueOracleResult value_oracle(const Matrix& A, std::int64_t grid_n) {
    check_matrix(A);
    const std::size_t m = A.size(), n = A[0].size();
    if (m > 4 || n > 4) throw std::invalid_argument("value_oracle: matrices up to 4x4 only");
    if (grid_n < 1) throw std::invalid_argument("value_oracle: grid_n must be >= 1");

    double lower = -std::numeric_limits<double>::infinity();
    detail::for_each_grid_point(m, grid_n, [&](const std::vector<double>& x) {
        lower = std::max(lower, best_response_value(A, x));
    });
    double upper = std::numeric_limits<double>::infinity();
    detail::for_each_grid_point(n, grid_n, [&](const std::vector<double>& y) {
        double worst = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += A[i][j] * y[j];
            worst = std::max(worst, dot);
        }
        upper = std::min(upper, worst);
    });
    return {0.5 * (lower + upper), 0.5 * (upper - lower), lower, upper};
}

}  // namespace wsg
