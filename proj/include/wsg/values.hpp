#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wsg/evaluation.hpp"
#include "wsg/game.hpp"
#include "wsg/shapley.hpp"

namespace wsg {

// Thrown when the fixed-point loop hits its cap; carries the best iterate and
// the error bound it could certify.
class IterationCapReached : public std::runtime_error {
  public:
    IterationCapReached(const std::string& what, ValueFunction achieved)
        : std::runtime_error(what), achieved(std::move(achieved)) {}
    ValueFunction achieved;
};

namespace detail {

// Dense linear solve by Gaussian elimination with partial pivoting.
inline std::vector<double> solve_linear(std::vector<std::vector<double>> A, std::vector<double> b) {
    const std::size_t n = b.size();
    for (std::size_t c = 0; c < n; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < n; ++r)
            if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
        if (A[piv][c] == 0.0) throw std::runtime_error("solve_linear: singular matrix");
        std::swap(A[c], A[piv]);
        std::swap(b[c], b[piv]);
        for (std::size_t r = c + 1; r < n; ++r) {
            const double f = A[r][c] / A[c][c];
            if (f == 0.0) continue;
            for (std::size_t j = c; j < n; ++j) A[r][j] -= f * A[c][j];
            b[r] -= f * b[c];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t r = n; r-- > 0;) {
        double acc = b[r];
        for (std::size_t j = r + 1; j < n; ++j) acc -= A[r][j] * x[j];
        x[r] = acc / A[r][r];
    }
    return x;
}

}  // namespace detail

// Exact discounted value of a one-player spec (nJ == 1) by policy iteration:
// each policy is evaluated by solving (I - (1-lambda) Q_pi) v = lambda g_pi
// and improved greedily; ties keep the incumbent action so the loop is
// deterministic and terminates.
inline ValueFunction v_discounted_policy_iteration(const GameSpec& spec, double lambda) {
    if (spec.nJ != 1) throw std::invalid_argument("policy iteration requires nJ == 1");
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw std::invalid_argument("policy iteration: lambda must lie in (0,1]");
    const int nK = spec.nK();
    std::vector<int> pi(static_cast<std::size_t>(nK), 0);
    std::vector<double> v(static_cast<std::size_t>(nK), 0.0);
    auto action_value = [&](int k, int i) {
        double nxt = 0.0;
        const auto& q = spec.transition[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)][0];
        for (int kp = 0; kp < nK; ++kp) nxt += q[static_cast<std::size_t>(kp)] * v[static_cast<std::size_t>(kp)];
        return lambda * spec.payoff[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)][0] + (1.0 - lambda) * nxt;
    };
    for (int round = 0; round < 1000; ++round) {
        // Policy evaluation.
        std::vector<std::vector<double>> A(static_cast<std::size_t>(nK),
                                           std::vector<double>(static_cast<std::size_t>(nK), 0.0));
        std::vector<double> b(static_cast<std::size_t>(nK), 0.0);
        for (int k = 0; k < nK; ++k) {
            const auto& q = spec.transition[static_cast<std::size_t>(k)][static_cast<std::size_t>(pi[static_cast<std::size_t>(k)])][0];
            for (int kp = 0; kp < nK; ++kp)
                A[static_cast<std::size_t>(k)][static_cast<std::size_t>(kp)] =
                    (k == kp ? 1.0 : 0.0) - (1.0 - lambda) * q[static_cast<std::size_t>(kp)];
            b[static_cast<std::size_t>(k)] =
                lambda * spec.payoff[static_cast<std::size_t>(k)][static_cast<std::size_t>(pi[static_cast<std::size_t>(k)])][0];
        }
        v = detail::solve_linear(std::move(A), std::move(b));
        // Greedy improvement with a strict margin so float ties cannot cycle.
        bool changed = false;
        for (int k = 0; k < nK; ++k) {
            const double incumbent = action_value(k, pi[static_cast<std::size_t>(k)]);
            int best = pi[static_cast<std::size_t>(k)];
            double best_val = incumbent;
            for (int i = 0; i < spec.nI; ++i) {
                const double av = action_value(k, i);
                if (av > best_val + 1e-13) {
                    best = i;
                    best_val = av;
                }
            }
            if (best != pi[static_cast<std::size_t>(k)]) {
                pi[static_cast<std::size_t>(k)] = best;
                changed = true;
            }
        }
        if (!changed) break;
    }
    ValueFunction out;
    out.values = std::move(v);
    // Certify via the fixed-point residual; for an exact solve this is float
    // noise, but report what was actually achieved.
    std::vector<double> check(out.values.size(), 0.0);
    for (int k = 0; k < nK; ++k) {
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < spec.nI; ++i) {
            double nxt = 0.0;
            const auto& q = spec.transition[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)][0];
            for (int kp = 0; kp < nK; ++kp)
                nxt += q[static_cast<std::size_t>(kp)] * out.values[static_cast<std::size_t>(kp)];
            best = std::max(best, lambda * spec.payoff[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)][0] +
                                      (1.0 - lambda) * nxt);
        }
        check[static_cast<std::size_t>(k)] = best;
    }
    out.error_bound = sup_dist(out.values, check) / lambda;
    return out;
}

// Fixed point of f = Psi(lambda, f) from below, stopping when the step size
// guarantees ||f - v_lambda|| <= eps through the (1-lambda)-contraction.
// Inexact applies shift the fixed point by at most tol/lambda, which is
// included in the reported bound. One-player specs route through policy
// iteration when small enough for a dense solve.
inline ValueFunction v_discounted(const ShapleyOperator& op, double lambda, double eps,
                                  const std::vector<double>* warm_start = nullptr,
                                  std::int64_t iter_cap = 10'000'000) {
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw std::invalid_argument("v_discounted: lambda must lie in (0,1]");
    if (!(eps > 0.0)) throw std::invalid_argument("v_discounted: eps must be > 0");

    if (lambda == 1.0) {
        ValueFunction f(static_cast<std::size_t>(op.dim()));
        return op.apply(1.0, f);
    }
    std::optional<std::vector<double>> seed;
    if (const GameSpec* g = op.game(); g && g->nJ == 1 && g->nK() <= 400 && !warm_start) {
        ValueFunction pi = v_discounted_policy_iteration(*g, lambda);
        pi.error_bound += op.tol_per_apply() / lambda;
        if (pi.error_bound <= eps) return pi;
        seed = std::move(pi.values);  // refine by iteration from the near-exact point
    }

    std::vector<double> f = warm_start ? *warm_start
                          : seed       ? std::move(*seed)
                                       : std::vector<double>(static_cast<std::size_t>(op.dim()), 0.0);
    const double threshold = eps * lambda / (1.0 - lambda);
    double best_delta = std::numeric_limits<double>::infinity();
    std::int64_t since_improvement = 0;
    for (std::int64_t t = 0; t < iter_cap; ++t) {
        std::vector<double> f1 = op.apply_values(lambda, f);
        const double delta = sup_dist(f1, f);
        f = std::move(f1);
        if (delta <= threshold) {
            ValueFunction out;
            out.values = std::move(f);
            out.error_bound = delta * (1.0 - lambda) / lambda + op.tol_per_apply() / lambda;
            return out;
        }
        if (delta < best_delta * (1.0 - 1e-12)) {
            best_delta = delta;
            since_improvement = 0;
        } else if (++since_improvement > 20000) {
            ValueFunction out;
            out.values = std::move(f);
            out.error_bound = delta * (1.0 - lambda) / lambda + op.tol_per_apply() / lambda;
            throw IterationCapReached("v_discounted: step size stagnated at " + format_double(delta) +
                                          " before reaching the eps-derived threshold " +
                                          format_double(threshold),
                                      std::move(out));
        }
    }
    ValueFunction out;
    out.values = std::move(f);
    out.error_bound = best_delta * (1.0 - lambda) / lambda + op.tol_per_apply() / lambda;
    throw IterationCapReached("v_discounted: iteration cap reached before eps threshold", std::move(out));
}

struct TruncatedValue {
    ValueFunction value;       // n-stage iterate from 0 (error = solver accumulation)
    double truncation_bound;   // C * mass beyond stage n: distance to the full value
    std::int64_t horizon;
};

// Finite-stage approximant of the weighted value with its Cauchy bound.
inline TruncatedValue value_weighted_truncated(const ShapleyOperator& op, const Evaluation& theta,
                                               std::int64_t n) {
    TruncatedValue out;
    out.value = op.iterate(theta, n, ValueFunction(static_cast<std::size_t>(op.dim())));
    out.truncation_bound = op.payoff_bound() * theta.tail_mass_from(n + 1);
    out.horizon = n;
    return out;
}

// The weighted value v_theta with certified error <= eps plus accumulated
// solver tolerance. Finite supports run exact backward induction (truncated
// only when the support is enormous and the mass bound already meets eps);
// geometric tails seed with the tail's discounted value and fold the head.
inline ValueFunction v_theta(const ShapleyOperator& op, const Evaluation& theta, double eps) {
    if (!(eps > 0.0)) throw std::invalid_argument("v_theta: eps must be > 0");
    if (theta.is_zero()) return ValueFunction(static_cast<std::size_t>(op.dim()));

    if (theta.finite_support()) {
        const std::int64_t H = theta.support_end();
        std::int64_t n = H;
        double trunc = 0.0;
        if (H > 50000 && op.payoff_bound() > 0.0) {
            // Walk the support backward until the discarded mass matters.
            KahanSum rem;
            std::int64_t cut = H;
            while (cut > 0) {
                rem.add(theta.weight(cut));
                if (op.payoff_bound() * rem.value() > eps / 2.0) break;
                --cut;
            }
            if (cut < H) {
                n = cut;
                trunc = op.payoff_bound() * theta.tail_mass_from(n + 1);
            }
        }
        ValueFunction v = op.iterate(theta, n, ValueFunction(static_cast<std::size_t>(op.dim())));
        v.error_bound += trunc;
        return v;
    }

    // Head + geometric tail: the shifted evaluation past the head is exactly
    // the discounted one with the tail's ratio.
    const double tail_lambda = 1.0 - theta.tail()->rho;
    ValueFunction v = v_discounted(op, tail_lambda, eps / 2.0);
    for (std::int64_t m = theta.head_size(); m >= 1; --m) v = op.apply(theta.stage_discount(m), v);
    return v;
}

// v_n by the exact recursion v_j = Psi(1/j, v_{j-1}).
inline ValueFunction v_n_stage(const ShapleyOperator& op, std::int64_t n) {
    if (n < 1) throw std::invalid_argument("v_n_stage: n must be >= 1");
    ValueFunction v(static_cast<std::size_t>(op.dim()));
    for (std::int64_t j = 1; j <= n; ++j) v = op.apply(1.0 / static_cast<double>(j), v);
    return v;
}

struct AsymptoticRow {
    int j = 0;
    std::int64_t n = 0;
    double lambda = 0.0;
    std::vector<double> v_n;
    std::vector<double> v_lambda;
    double gap = 0.0;       // ||v_n - v_lambda||
    double step_n = 0.0;    // ||v_n - previous v_n||
    double step_lambda = 0.0;
};

struct AsymptoticReport {
    std::vector<AsymptoticRow> rows;
    bool converged = false;
};

// Measures v_n and v_lambda along n = 2^j, lambda = 2^-j until the cross gap
// and both successive steps fall below tol. This only reports the observed
// agreement; it never asserts that an asymptotic value exists.
inline std::pair<ValueFunction, AsymptoticReport>
asymptotic_value_estimate(const ShapleyOperator& op, double tol, int max_doublings = 12) {
    if (!(tol > 0.0)) throw std::invalid_argument("asymptotic_value_estimate: tol must be > 0");
    if (max_doublings < 1) throw std::invalid_argument("asymptotic_value_estimate: need at least one doubling");
    AsymptoticReport report;
    ValueFunction vn(static_cast<std::size_t>(op.dim()));
    std::int64_t cur_n = 0;
    std::vector<double> prev_vn, prev_vl;
    ValueFunction vl;
    for (int j = 1; j <= max_doublings; ++j) {
        const std::int64_t n = std::int64_t{1} << j;
        const double lambda = std::ldexp(1.0, -j);
        while (cur_n < n) {
            ++cur_n;
            vn = op.apply(1.0 / static_cast<double>(cur_n), vn);
        }
        vl = v_discounted(op, lambda, std::max(tol / 4.0, 1e-10),
                          prev_vl.empty() ? nullptr : &prev_vl);
        AsymptoticRow row;
        row.j = j;
        row.n = n;
        row.lambda = lambda;
        row.v_n = vn.values;
        row.v_lambda = vl.values;
        row.gap = sup_dist(vn.values, vl.values);
        row.step_n = prev_vn.empty() ? std::numeric_limits<double>::infinity() : sup_dist(vn.values, prev_vn);
        row.step_lambda = prev_vl.empty() ? std::numeric_limits<double>::infinity() : sup_dist(vl.values, prev_vl);
        prev_vn = vn.values;
        prev_vl = vl.values;
        report.rows.push_back(std::move(row));
        const AsymptoticRow& r = report.rows.back();
        if (r.gap <= tol && r.step_n <= tol && r.step_lambda <= tol) {
            report.converged = true;
            break;
        }
    }
    const AsymptoticRow& last = report.rows.back();
    ValueFunction estimate;
    estimate.values.resize(last.v_n.size());
    for (std::size_t k = 0; k < last.v_n.size(); ++k)
        estimate.values[k] = 0.5 * (last.v_n[k] + last.v_lambda[k]);
    estimate.error_bound = 0.5 * last.gap + vn.error_bound + vl.error_bound;
    return {std::move(estimate), std::move(report)};
}

}  // namespace wsg
