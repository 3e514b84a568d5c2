#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wsg/evaluation.hpp"
#include "wsg/game.hpp"
#include "wsg/matrix_game.hpp"
#include "wsg/shapley.hpp"
#include "wsg/values.hpp"

namespace wsg {

enum class Player { P1, P2 };

// Stage-indexed behavior: stage[m-1][k] is the mixed action played at stage m
// in state k; stages past the table fall back to the stationary tail.
struct MarkovStrategy {
    std::vector<std::vector<MixedAction>> stage;
    std::optional<std::vector<MixedAction>> stationary_tail;

    std::int64_t horizon() const { return static_cast<std::int64_t>(stage.size()); }

    const MixedAction& at(std::int64_t m, int k) const {
        if (m < 1) throw std::out_of_range("MarkovStrategy: stages are 1-based");
        if (m <= horizon()) return stage[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(k)];
        if (stationary_tail) return (*stationary_tail)[static_cast<std::size_t>(k)];
        throw std::invalid_argument("MarkovStrategy: stage " + std::to_string(m) +
                                    " beyond horizon " + std::to_string(horizon()) +
                                    " and no stationary tail");
    }
    bool covers(std::int64_t m) const { return m <= horizon() || stationary_tail.has_value(); }
};

struct StrategyPair {
    MarkovStrategy sigma;  // player 1
    MarkovStrategy tau;    // player 2
    std::vector<double> stage_lambdas;
    std::optional<double> tail_lambda;
};

// Zero-weight stages have no discounted game to be optimal for; the frozen
// convention plays the optimum of the smallest grid discount factor.
inline constexpr double kZeroWeightLambda = 0x1p-20;

// Canonical optimal mixed actions of each state's auxiliary game at discount
// lambda: the strategies the deterministic solver returns at the game
// lambda*g + (1-lambda)*E[v_lambda].
inline std::pair<std::vector<MixedAction>, std::vector<MixedAction>>
optimal_actions(const ShapleyOperator& op, double lambda, double eps = 1e-9) {
    const GameSpec* g = op.game();
    if (!g) throw std::invalid_argument("optimal_actions: operator is not game-backed");
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw std::invalid_argument("optimal_actions: lambda must lie in (0,1]");
    const ValueFunction v = v_discounted(op, lambda, eps);
    std::vector<MixedAction> xs, ys;
    xs.reserve(static_cast<std::size_t>(g->nK()));
    ys.reserve(static_cast<std::size_t>(g->nK()));
    for (int k = 0; k < g->nK(); ++k) {
        MatrixGameSolution sol = solve_matrix_game(auxiliary_matrix(*g, k, lambda, v.values));
        xs.push_back(std::move(sol.x_star));
        ys.push_back(std::move(sol.y_star));
    }
    return {std::move(xs), std::move(ys)};
}

// The theta-discounted strategy pair: at stage m both players use the optimal
// actions of the stage_discount(theta, m)-discounted game. Identical stage
// discounts share one solve, and a geometric tail yields a stationary tail
// policy with the tail's constant discount.
inline StrategyPair discounted_strategy_pair(const ShapleyOperator& op, const Evaluation& theta,
                                             std::int64_t horizon, double eps = 1e-9) {
    const GameSpec* g = op.game();
    if (!g) throw std::invalid_argument("discounted_strategy_pair: operator is not game-backed");
    if (horizon < 0) throw std::invalid_argument("discounted_strategy_pair: horizon must be >= 0");

    StrategyPair out;
    out.stage_lambdas = theta.discount_sequence(horizon);
    std::map<double, std::pair<std::vector<MixedAction>, std::vector<MixedAction>>> cache;
    auto solved = [&](double lambda) -> const auto& {
        auto it = cache.find(lambda);
        if (it == cache.end()) it = cache.emplace(lambda, optimal_actions(op, lambda, eps)).first;
        return it->second;
    };
    out.sigma.stage.reserve(static_cast<std::size_t>(horizon));
    out.tau.stage.reserve(static_cast<std::size_t>(horizon));
    for (std::int64_t m = 1; m <= horizon; ++m) {
        double lam = out.stage_lambdas[static_cast<std::size_t>(m - 1)];
        if (lam == 0.0) lam = kZeroWeightLambda;
        const auto& acts = solved(lam);
        out.sigma.stage.push_back(acts.first);
        out.tau.stage.push_back(acts.second);
    }
    if (theta.tail() && !theta.is_zero()) {
        const double lam = 1.0 - theta.tail()->rho;
        out.tail_lambda = lam;
        const auto& acts = solved(lam);
        out.sigma.stationary_tail = acts.first;
        out.tau.stationary_tail = acts.second;
    }
    return out;
}

struct PayoffResult {
    double value = 0.0;
    double error_bound = 0.0;
};

namespace detail {

// Stage payoff and transition row under a fixed mixed-action profile.
inline double profile_payoff(const GameSpec& g, int k, const MixedAction& x, const MixedAction& y) {
    return expected_payoff(g, k, x, y);
}

inline std::vector<double> profile_transition(const GameSpec& g, int k, const MixedAction& x,
                                              const MixedAction& y) {
    std::vector<double> row(static_cast<std::size_t>(g.nK()), 0.0);
    for (int i = 0; i < g.nI; ++i) {
        if (x[static_cast<std::size_t>(i)] == 0.0) continue;
        for (int j = 0; j < g.nJ; ++j) {
            const double w = x[static_cast<std::size_t>(i)] * y[static_cast<std::size_t>(j)];
            if (w == 0.0) continue;
            const auto& q = g.transition[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            for (int kp = 0; kp < g.nK(); ++kp) row[static_cast<std::size_t>(kp)] += w * q[static_cast<std::size_t>(kp)];
        }
    }
    return row;
}

}  // namespace detail

// Expected theta-weighted payoff of the profile (sigma, tau) from start state
// k1: exact forward recursion over the support head; a geometric tail is
// folded exactly through a linear solve when both strategies are stationary
// there, and otherwise truncated with the payoff-bound times remaining mass.
inline PayoffResult strategy_payoff(const ShapleyOperator& op, const Evaluation& theta,
                                    const MarkovStrategy& sigma, const MarkovStrategy& tau, int k1) {
    const GameSpec* gp = op.game();
    if (!gp) throw std::invalid_argument("strategy_payoff: operator is not game-backed");
    const GameSpec& g = *gp;
    if (k1 < 0 || k1 >= g.nK()) throw std::out_of_range("strategy_payoff: start state");
    if (theta.is_zero()) return {0.0, 0.0};

    const bool finite = theta.finite_support();
    const std::int64_t head = finite ? theta.support_end()
                                     : std::max({theta.head_size(), sigma.horizon(), tau.horizon()});
    if (finite && (!sigma.covers(head) || !tau.covers(head)))
        throw std::invalid_argument("strategy_payoff: strategies do not cover the evaluation horizon " +
                                    std::to_string(head));

    std::vector<double> dist(static_cast<std::size_t>(g.nK()), 0.0);
    dist[static_cast<std::size_t>(k1)] = 1.0;
    KahanSum total;
    for (std::int64_t m = 1; m <= head; ++m) {
        const double w = theta.weight(m);
        std::vector<double> nxt(static_cast<std::size_t>(g.nK()), 0.0);
        for (int k = 0; k < g.nK(); ++k) {
            const double d = dist[static_cast<std::size_t>(k)];
            if (d == 0.0) continue;
            const MixedAction& x = sigma.at(m, k);
            const MixedAction& y = tau.at(m, k);
            if (w != 0.0) total.add(w * d * detail::profile_payoff(g, k, x, y));
            const std::vector<double> row = detail::profile_transition(g, k, x, y);
            for (int kp = 0; kp < g.nK(); ++kp) nxt[static_cast<std::size_t>(kp)] += d * row[static_cast<std::size_t>(kp)];
        }
        dist = std::move(nxt);
    }
    if (finite) return {total.value(), 0.0};

    const double remaining = theta.tail_mass_from(head + 1);
    if (remaining <= 0.0) return {total.value(), 0.0};
    if (!sigma.stationary_tail || !tau.stationary_tail)
        return {total.value(), op.payoff_bound() * remaining};

    // Both strategies stationary and theta geometric past `head`: the tail
    // payoff from state k is a' * [(I - rho Q)^-1 r](k).
    const double rho = theta.tail()->rho;
    const double a = theta.weight(head + 1);
    const int nK = g.nK();
    std::vector<std::vector<double>> M(static_cast<std::size_t>(nK),
                                       std::vector<double>(static_cast<std::size_t>(nK), 0.0));
    std::vector<double> r(static_cast<std::size_t>(nK), 0.0);
    for (int k = 0; k < nK; ++k) {
        const MixedAction& x = (*sigma.stationary_tail)[static_cast<std::size_t>(k)];
        const MixedAction& y = (*tau.stationary_tail)[static_cast<std::size_t>(k)];
        r[static_cast<std::size_t>(k)] = detail::profile_payoff(g, k, x, y);
        const std::vector<double> row = detail::profile_transition(g, k, x, y);
        for (int kp = 0; kp < nK; ++kp)
            M[static_cast<std::size_t>(k)][static_cast<std::size_t>(kp)] =
                (k == kp ? 1.0 : 0.0) - rho * row[static_cast<std::size_t>(kp)];
    }
    const std::vector<double> tailval = detail::solve_linear(std::move(M), std::move(r));
    double tail_total = 0.0;
    for (int k = 0; k < nK; ++k) tail_total += dist[static_cast<std::size_t>(k)] * tailval[static_cast<std::size_t>(k)];
    return {total.value() + a * tail_total, 1e-12 * static_cast<double>(nK)};
}

struct BestResponse {
    MarkovStrategy strategy;  // pure Markov responder
    double value = 0.0;       // the exact best-response payoff in the weighted game
};

// Exact best response against a known Markov opponent, by backward induction
// over (stage, state) with the responder restricted to pure stage actions.
// Against a Markov opponent the game is a finite-horizon MDP for the
// responder, so some pure Markov responder is globally optimal and the
// restriction loses nothing. A geometric theta tail requires the opponent to
// be stationary there; the tail is then the responder's discounted MDP,
// solved exactly by policy iteration on an induced one-player spec.
inline BestResponse best_response(const ShapleyOperator& op, const Evaluation& theta,
                                  const MarkovStrategy& opponent, Player responder, int k1) {
    const GameSpec* gp = op.game();
    if (!gp) throw std::invalid_argument("best_response: operator is not game-backed");
    const GameSpec& g = *gp;
    if (k1 < 0 || k1 >= g.nK()) throw std::out_of_range("best_response: start state");
    const bool maximize = responder == Player::P1;
    const int nB = maximize ? g.nI : g.nJ;

    // Opponent-mixed payoff and transition for responder action b.
    auto mixed_payoff = [&](std::int64_t m, int k, int b) {
        const MixedAction& o = opponent.at(m, k);
        double val = 0.0;
        for (int a = 0; a < (maximize ? g.nJ : g.nI); ++a) {
            const double p = o[static_cast<std::size_t>(a)];
            if (p == 0.0) continue;
            val += p * (maximize ? g.payoff[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)][static_cast<std::size_t>(a)]
                                 : g.payoff[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]);
        }
        return val;
    };
    auto mixed_transition = [&](std::int64_t m, int k, int b, const std::vector<double>& f) {
        const MixedAction& o = opponent.at(m, k);
        double val = 0.0;
        for (int a = 0; a < (maximize ? g.nJ : g.nI); ++a) {
            const double p = o[static_cast<std::size_t>(a)];
            if (p == 0.0) continue;
            const auto& q = maximize
                ? g.transition[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)][static_cast<std::size_t>(a)]
                : g.transition[static_cast<std::size_t>(k)][static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
            double nxt = 0.0;
            for (int kp = 0; kp < g.nK(); ++kp) nxt += q[static_cast<std::size_t>(kp)] * f[static_cast<std::size_t>(kp)];
            val += p * nxt;
        }
        return val;
    };

    std::int64_t head;
    std::vector<double> terminal(static_cast<std::size_t>(g.nK()), 0.0);
    BestResponse out;
    if (theta.is_zero()) {
        out.value = 0.0;
        out.strategy.stage.clear();
        return out;
    }
    if (theta.finite_support()) {
        head = theta.support_end();
        if (!opponent.covers(head))
            throw std::invalid_argument("best_response: opponent does not cover the evaluation horizon");
    } else {
        head = std::max(theta.head_size(), opponent.horizon());
        if (!opponent.stationary_tail)
            throw std::invalid_argument("best_response: geometric tail requires a stationary opponent tail");
        // Tail: responder's rho-discounted MDP against the frozen opponent
        // mixture, induced as a one-player spec and solved exactly. The
        // unnormalized tail value is a'/(1-rho) times the normalized one.
        const double rho = theta.tail()->rho;
        const double a1 = theta.weight(head + 1);
        if (a1 > 0.0) {
            GameSpec mdp;
            mdp.states = g.states;
            mdp.nI = nB;
            mdp.nJ = 1;
            mdp.payoff.assign(static_cast<std::size_t>(g.nK()), {});
            mdp.transition.assign(static_cast<std::size_t>(g.nK()), {});
            for (int k = 0; k < g.nK(); ++k) {
                for (int b = 0; b < nB; ++b) {
                    const double pay = maximize ? mixed_payoff(head + 1, k, b) : -mixed_payoff(head + 1, k, b);
                    mdp.payoff[static_cast<std::size_t>(k)].push_back({pay});
                    std::vector<double> row(static_cast<std::size_t>(g.nK()), 0.0);
                    const MixedAction& o = opponent.at(head + 1, k);
                    for (int aa = 0; aa < (maximize ? g.nJ : g.nI); ++aa) {
                        const double p = o[static_cast<std::size_t>(aa)];
                        if (p == 0.0) continue;
                        const auto& q = maximize
                            ? g.transition[static_cast<std::size_t>(k)][static_cast<std::size_t>(b)][static_cast<std::size_t>(aa)]
                            : g.transition[static_cast<std::size_t>(k)][static_cast<std::size_t>(aa)][static_cast<std::size_t>(b)];
                        for (int kp = 0; kp < g.nK(); ++kp)
                            row[static_cast<std::size_t>(kp)] += p * q[static_cast<std::size_t>(kp)];
                    }
                    mdp.transition[static_cast<std::size_t>(k)].push_back({std::move(row)});
                }
            }
            const double lambda_tail = 1.0 - rho;
            ValueFunction tail = v_discounted_policy_iteration(validate(std::move(mdp)), lambda_tail);
            // Normalized discounted value * total tail mass gives the
            // unnormalized weighted payoff from stage head+1 on.
            const double mass = a1 / lambda_tail;
            for (int k = 0; k < g.nK(); ++k) {
                const double v = tail.values[static_cast<std::size_t>(k)];
                terminal[static_cast<std::size_t>(k)] = mass * (maximize ? v : -v);
            }
            // Tail policy for the returned strategy: greedy at the solved value.
            std::vector<MixedAction> tail_policy;
            for (int k = 0; k < g.nK(); ++k) {
                int best = 0;
                double best_val = maximize ? -std::numeric_limits<double>::infinity()
                                           : std::numeric_limits<double>::infinity();
                for (int b = 0; b < nB; ++b) {
                    const double q = a1 * mixed_payoff(head + 1, k, b) +
                                     rho * mixed_transition(head + 1, k, b, terminal);
                    if ((maximize && q > best_val + 1e-13) || (!maximize && q < best_val - 1e-13)) {
                        best = b;
                        best_val = q;
                    }
                }
                MixedAction act(static_cast<std::size_t>(nB), 0.0);
                act[static_cast<std::size_t>(best)] = 1.0;
                tail_policy.push_back(std::move(act));
            }
            out.strategy.stationary_tail = std::move(tail_policy);
        }
    }

    std::vector<double> W = std::move(terminal);
    std::vector<std::vector<int>> choice(static_cast<std::size_t>(head),
                                         std::vector<int>(static_cast<std::size_t>(g.nK()), 0));
    for (std::int64_t m = head; m >= 1; --m) {
        const double w = theta.weight(m);
        std::vector<double> Wm(static_cast<std::size_t>(g.nK()), 0.0);
        for (int k = 0; k < g.nK(); ++k) {
            int best = 0;
            double best_val = maximize ? -std::numeric_limits<double>::infinity()
                                       : std::numeric_limits<double>::infinity();
            for (int b = 0; b < nB; ++b) {
                const double q = w * mixed_payoff(m, k, b) + mixed_transition(m, k, b, W);
                if ((maximize && q > best_val) || (!maximize && q < best_val)) {
                    best = b;
                    best_val = q;
                }
            }
            choice[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(k)] = best;
            Wm[static_cast<std::size_t>(k)] = best_val;
        }
        W = std::move(Wm);
    }
    out.value = W[static_cast<std::size_t>(k1)];
    out.strategy.stage.assign(static_cast<std::size_t>(head), {});
    for (std::int64_t m = 1; m <= head; ++m) {
        auto& row = out.strategy.stage[static_cast<std::size_t>(m - 1)];
        row.assign(static_cast<std::size_t>(g.nK()), MixedAction(static_cast<std::size_t>(nB), 0.0));
        for (int k = 0; k < g.nK(); ++k)
            row[static_cast<std::size_t>(k)][static_cast<std::size_t>(
                choice[static_cast<std::size_t>(m - 1)][static_cast<std::size_t>(k)])] = 1.0;
    }
    return out;
}

struct Exploitability {
    double sigma_gap = 0.0;  // v* - min_tau payoff(sigma, tau)
    double tau_gap = 0.0;    // max_sigma payoff(sigma, tau) - v*
};

// How far the pair (sigma, tau) is from securing the asymptotic value at k1.
// Either gap can be marginally negative when v_star itself carries error.
inline Exploitability exploitability(const ShapleyOperator& op, const Evaluation& theta,
                                     const MarkovStrategy& sigma, const MarkovStrategy& tau,
                                     int k1, double v_star) {
    const double worst_for_sigma = best_response(op, theta, sigma, Player::P2, k1).value;
    const double best_against_tau = best_response(op, theta, tau, Player::P1, k1).value;
    return {v_star - worst_for_sigma, best_against_tau - v_star};
}

}  // namespace wsg
