#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wsg/numeric.hpp"

namespace wsg {

using MixedAction = std::vector<double>;

// Value vector over states together with a certified sup-norm error bound
// against the exact quantity it approximates.
struct ValueFunction {
    std::vector<double> values;
    double error_bound = 0.0;

    ValueFunction() = default;
    explicit ValueFunction(std::size_t nK, double fill = 0.0, double err = 0.0)
        : values(nK, fill), error_bound(err) {}
};

// Finite zero-sum stochastic game. Action sets are global: every state has nI
// rows and nJ columns, and per-state restrictions are encoded by duplicating
// a dominated row or column, which keeps the one-shot operator uniform.
struct GameSpec {
    std::vector<std::string> states;                                        // labels
    int nI = 0;                                                             // row actions
    int nJ = 0;                                                             // column actions
    std::vector<std::vector<std::vector<double>>> payoff;                   // [k][i][j]
    std::vector<std::vector<std::vector<std::vector<double>>>> transition;  // [k][i][j][k']
    double payoff_bound = 0.0;                                              // max |g|, set by validate

    int nK() const { return static_cast<int>(states.size()); }
};

class InvalidGameSpec : public std::invalid_argument {
  public:
    InvalidGameSpec(const std::string& what, std::vector<std::string> violations)
        : std::invalid_argument(what), violations(std::move(violations)) {}
    std::vector<std::string> violations;
};

// Checks every structural invariant and caches the payoff bound. Violations
// are collected with their cell locations rather than failing on the first.
inline GameSpec validate(GameSpec spec) {
    std::vector<std::string> bad;
    auto cell = [](int k, int i, int j) {
        return "[k=" + std::to_string(k) + ",i=" + std::to_string(i) + ",j=" + std::to_string(j) + "]";
    };
    if (spec.states.empty()) bad.push_back("no states");
    if (spec.nI < 1 || spec.nJ < 1) bad.push_back("action counts must be >= 1");
    const int nK = spec.nK();
    if (static_cast<int>(spec.payoff.size()) != nK) bad.push_back("payoff tensor state count mismatch");
    if (static_cast<int>(spec.transition.size()) != nK) bad.push_back("transition tensor state count mismatch");
    double C = 0.0;
    for (int k = 0; k < nK && bad.size() < 16; ++k) {
        if (k >= static_cast<int>(spec.payoff.size()) || k >= static_cast<int>(spec.transition.size())) break;
        if (static_cast<int>(spec.payoff[k].size()) != spec.nI ||
            static_cast<int>(spec.transition[k].size()) != spec.nI) {
            bad.push_back("row count mismatch at state " + std::to_string(k));
            continue;
        }
        for (int i = 0; i < spec.nI; ++i) {
            if (static_cast<int>(spec.payoff[k][i].size()) != spec.nJ ||
                static_cast<int>(spec.transition[k][i].size()) != spec.nJ) {
                bad.push_back("column count mismatch at state " + std::to_string(k) + " row " + std::to_string(i));
                continue;
            }
            for (int j = 0; j < spec.nJ; ++j) {
                const double g = spec.payoff[k][i][j];
                if (!std::isfinite(g))
                    bad.push_back("non-finite payoff at " + cell(k, i, j));
                else
                    C = std::max(C, std::abs(g));
                const auto& row = spec.transition[k][i][j];
                if (static_cast<int>(row.size()) != nK) {
                    bad.push_back("transition row length mismatch at " + cell(k, i, j));
                    continue;
                }
                KahanSum s;
                for (int kp = 0; kp < nK; ++kp) {
                    const double q = row[static_cast<std::size_t>(kp)];
                    if (!(q >= -1e-12) || !std::isfinite(q))
                        bad.push_back("negative or non-finite probability at " + cell(k, i, j) +
                                      " -> k'=" + std::to_string(kp));
                    s.add(q);
                }
                if (std::abs(s.value() - 1.0) > 1e-12)
                    bad.push_back("transition row at " + cell(k, i, j) + " sums to " + format_double(s.value()));
            }
        }
    }
    if (!bad.empty()) {
        std::string what = "invalid game spec (" + std::to_string(bad.size()) + " violations):";
        for (std::size_t t = 0; t < bad.size() && t < 8; ++t) what += "\n  " + bad[t];
        throw InvalidGameSpec(what, std::move(bad));
    }
    spec.payoff_bound = C;
    return spec;
}

inline void check_mixed_action(const MixedAction& x, int n, const char* who) {
    if (static_cast<int>(x.size()) != n)
        throw std::invalid_argument(std::string(who) + ": mixed action size mismatch");
    KahanSum s;
    for (double p : x) {
        if (!(p >= -1e-12) || !std::isfinite(p))
            throw std::invalid_argument(std::string(who) + ": mixed action has a negative entry");
        s.add(p);
    }
    if (std::abs(s.value() - 1.0) > 1e-12)
        throw std::invalid_argument(std::string(who) + ": mixed action mass " + format_double(s.value()));
}

// g(k, x, y): bilinear expectation of the stage payoff.
inline double expected_payoff(const GameSpec& spec, int k, const MixedAction& x, const MixedAction& y) {
    if (k < 0 || k >= spec.nK()) throw std::out_of_range("expected_payoff: state index");
    check_mixed_action(x, spec.nI, "expected_payoff");
    check_mixed_action(y, spec.nJ, "expected_payoff");
    double total = 0.0;
    for (int i = 0; i < spec.nI; ++i) {
        if (x[static_cast<std::size_t>(i)] == 0.0) continue;
        double row = 0.0;
        for (int j = 0; j < spec.nJ; ++j)
            row += y[static_cast<std::size_t>(j)] * spec.payoff[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        total += x[static_cast<std::size_t>(i)] * row;
    }
    return total;
}

// E^k_{x,y}(f): expectation of f at the next state.
inline double expected_next(const GameSpec& spec, int k, const MixedAction& x, const MixedAction& y,
                            const std::vector<double>& f) {
    if (k < 0 || k >= spec.nK()) throw std::out_of_range("expected_next: state index");
    if (static_cast<int>(f.size()) != spec.nK())
        throw std::invalid_argument("expected_next: value vector size mismatch");
    check_mixed_action(x, spec.nI, "expected_next");
    check_mixed_action(y, spec.nJ, "expected_next");
    double total = 0.0;
    for (int i = 0; i < spec.nI; ++i) {
        if (x[static_cast<std::size_t>(i)] == 0.0) continue;
        double row = 0.0;
        for (int j = 0; j < spec.nJ; ++j) {
            if (y[static_cast<std::size_t>(j)] == 0.0) continue;
            const auto& q = spec.transition[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            double nxt = 0.0;
            for (int kp = 0; kp < spec.nK(); ++kp) nxt += q[static_cast<std::size_t>(kp)] * f[static_cast<std::size_t>(kp)];
            row += y[static_cast<std::size_t>(j)] * nxt;
        }
        total += x[static_cast<std::size_t>(i)] * row;
    }
    return total;
}

namespace detail {

inline std::vector<double> dirac_row(int nK, int k) {
    std::vector<double> row(static_cast<std::size_t>(nK), 0.0);
    row[static_cast<std::size_t>(k)] = 1.0;
    return row;
}

}  // namespace detail

// Named small games used throughout the test and experiment suites.
//   cycle2:    two states alternating deterministically, payoffs 0 and 1
//   big_match: the classic 2x2 absorbing game, value 1/2 at every horizon
//   absorbing: one state, constant payoff 3/4
inline GameSpec corpus(const std::string& name) {
    GameSpec s;
    if (name == "cycle2") {
        s.states = {"s0", "s1"};
        s.nI = s.nJ = 1;
        s.payoff = {{{0.0}}, {{1.0}}};
        s.transition = {{{detail::dirac_row(2, 1)}}, {{detail::dirac_row(2, 0)}}};
    } else if (name == "big_match") {
        s.states = {"active", "absorbed1", "absorbed0"};
        s.nI = s.nJ = 2;
        s.payoff = {{{1.0, 0.0}, {0.0, 1.0}},
                    {{1.0, 1.0}, {1.0, 1.0}},
                    {{0.0, 0.0}, {0.0, 0.0}}};
        const auto active = detail::dirac_row(3, 0);
        const auto abs1 = detail::dirac_row(3, 1);
        const auto abs0 = detail::dirac_row(3, 2);
        s.transition = {{{abs1, abs0}, {active, active}},
                        {{abs1, abs1}, {abs1, abs1}},
                        {{abs0, abs0}, {abs0, abs0}}};
    } else if (name == "absorbing") {
        s.states = {"s0"};
        s.nI = s.nJ = 1;
        s.payoff = {{{0.75}}};
        s.transition = {{{detail::dirac_row(1, 0)}}};
    } else {
        throw std::invalid_argument("corpus: unknown game name '" + name + "'");
    }
    return validate(std::move(s));
}

// Seeded random game: payoffs uniform in [-1, 1], transition rows built from
// positive draws and normalized, so every state remains reachable-ish and no
// row degenerates.
inline GameSpec random_game(std::uint64_t seed, int nK, int nI, int nJ) {
    if (nK < 1 || nI < 1 || nJ < 1) throw std::invalid_argument("random_game: sizes must be >= 1");
    DetRng rng(seed);
    GameSpec s;
    s.nI = nI;
    s.nJ = nJ;
    for (int k = 0; k < nK; ++k) s.states.push_back("s" + std::to_string(k));
    s.payoff.resize(static_cast<std::size_t>(nK));
    s.transition.resize(static_cast<std::size_t>(nK));
    for (int k = 0; k < nK; ++k) {
        s.payoff[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(nI),
                                                     std::vector<double>(static_cast<std::size_t>(nJ), 0.0));
        s.transition[static_cast<std::size_t>(k)].resize(static_cast<std::size_t>(nI));
        for (int i = 0; i < nI; ++i) {
            s.transition[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(nJ));
            for (int j = 0; j < nJ; ++j) {
                s.payoff[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    rng.uniform(-1.0, 1.0);
                std::vector<double> row(static_cast<std::size_t>(nK));
                double total = 0.0;
                for (int kp = 0; kp < nK; ++kp) {
                    row[static_cast<std::size_t>(kp)] = rng.u01() + 0.01;
                    total += row[static_cast<std::size_t>(kp)];
                }
                for (double& q : row) q /= total;
                s.transition[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                    std::move(row);
            }
        }
    }
    return validate(std::move(s));
}

// Absorption probability phi(m) of the gamble taken at count m. Families:
//   triple_log: 1 / ln(ln(ln(m + M0)))   (the slowest-decaying choice)
//   inv_log:    c / ln(m + m0)
//   constant:   c
// All are nonincreasing in m, so range validation only needs the endpoints.
struct SurvivalSpec {
    std::string family = "triple_log";
    double M0 = 1e10;  // triple_log shift; must keep ln(ln(ln(m+M0))) >= 1
    double c = 0.0;    // inv_log scale or the constant level
    double m0 = 2.0;   // inv_log shift

    double phi(std::int64_t m) const {
        if (family == "constant") return c;
        if (family == "inv_log") return c / std::log(static_cast<double>(m) + m0);
        if (family == "triple_log")
            return 1.0 / std::log(std::log(std::log(static_cast<double>(m) + M0)));
        throw std::invalid_argument("survival: unknown family '" + family + "'");
    }
};

struct CounterexampleParams {
    SurvivalSpec survival;
    std::int64_t max_count = 64;  // counts are capped at this value in the dense spec
};

inline void validate_survival(const SurvivalSpec& sv, std::int64_t max_count) {
    if (sv.family == "triple_log" && !(sv.M0 >= 3.0))
        throw std::invalid_argument("survival: triple_log requires M0 >= 3");
    for (std::int64_t m : {std::int64_t{1}, max_count}) {
        const double p = sv.phi(m);
        if (!(p >= 0.0 && p <= 1.0) || !std::isfinite(p))
            throw std::invalid_argument("survival: phi(" + std::to_string(m) + ") = " +
                                        format_double(p) + " outside [0,1]");
    }
}

// State indexing for the gambling MDP: 0 is the absorbing graveyard, then
// (0,m) and (1,m) interleaved for m = 1..max_count.
inline int cx_absorbed() { return 0; }
inline int cx_waiting(std::int64_t m) { return static_cast<int>(2 * m - 1); }
inline int cx_scoring(std::int64_t m) { return static_cast<int>(2 * m); }

// One-player gambling game. In waiting state (0,m) the payoff is 0 and the
// choice is: Continue to (0,m+1), or Quit, which absorbs into the graveyard
// with probability phi(m) and otherwise pays a run of m^2 scoring stages.
// Scoring states (1,m) pay 1 and count down to (1,1), which returns to (0,1).
// Counts saturate at max_count; experiments must certify that the cap is not
// reachable within their horizon (see counterexample_support).
inline GameSpec counterexample_mdp(const CounterexampleParams& params) {
    const std::int64_t M = params.max_count;
    if (M < 2) throw std::invalid_argument("counterexample_mdp: max_count must be >= 2");
    if (M > 512)
        throw std::invalid_argument("counterexample_mdp: dense spec limited to max_count <= 512; "
                                    "use the structured evaluator at scale");
    validate_survival(params.survival, M);

    GameSpec s;
    const int nK = static_cast<int>(2 * M + 1);
    s.nI = 2;  // 0 = Continue, 1 = Quit (duplicated in choice-free states)
    s.nJ = 1;
    s.states.assign(static_cast<std::size_t>(nK), "");
    s.states[0] = "0*";
    for (std::int64_t m = 1; m <= M; ++m) {
        s.states[static_cast<std::size_t>(cx_waiting(m))] = "(0," + std::to_string(m) + ")";
        s.states[static_cast<std::size_t>(cx_scoring(m))] = "(1," + std::to_string(m) + ")";
    }
    s.payoff.assign(static_cast<std::size_t>(nK),
                    std::vector<std::vector<double>>(2, std::vector<double>(1, 0.0)));
    s.transition.assign(static_cast<std::size_t>(nK), {});
    auto both_actions = [&](int k, const std::vector<double>& row) {
        s.transition[static_cast<std::size_t>(k)] = {{row}, {row}};
    };
    both_actions(cx_absorbed(), detail::dirac_row(nK, cx_absorbed()));
    for (std::int64_t m = 1; m <= M; ++m) {
        const int w = cx_waiting(m);
        const std::int64_t jump = std::min(m * m, M);
        std::vector<double> quit(static_cast<std::size_t>(nK), 0.0);
        const double p = params.survival.phi(m);
        quit[static_cast<std::size_t>(cx_absorbed())] = p;
        quit[static_cast<std::size_t>(cx_scoring(jump))] += 1.0 - p;
        s.transition[static_cast<std::size_t>(w)] = {
            {detail::dirac_row(nK, cx_waiting(std::min(m + 1, M)))},
            {std::move(quit)}};

        const int sc = cx_scoring(m);
        s.payoff[static_cast<std::size_t>(sc)] = {{1.0}, {1.0}};
        const int down = m == 1 ? cx_waiting(1) : cx_scoring(m - 1);
        both_actions(sc, detail::dirac_row(nK, down));
    }
    return validate(std::move(s));
}

// Exact reachable supports of the gambling game from (0,1), tracked with
// uncapped counts: tag 0 = waiting, tag 1 = scoring, tag 2 = graveyard.
// Returns one set per stage, 1-based front at stage 1 = {(0,1)}.
inline std::vector<std::set<std::pair<int, std::int64_t>>>
counterexample_support(std::int64_t horizon) {
    // Per-stage sets grow quadratically with the stage index; this exists to
    // certify small dense specs, not to enumerate deep play.
    if (horizon > 512) throw std::invalid_argument("counterexample_support: horizon limited to 512");
    std::vector<std::set<std::pair<int, std::int64_t>>> stages;
    std::set<std::pair<int, std::int64_t>> cur = {{0, 1}};
    for (std::int64_t t = 1; t <= horizon; ++t) {
        stages.push_back(cur);
        std::set<std::pair<int, std::int64_t>> nxt;
        for (const auto& [tag, m] : cur) {
            if (tag == 2) {
                nxt.insert({2, 0});
            } else if (tag == 1) {
                if (m == 1) nxt.insert({0, 1});
                else nxt.insert({1, m - 1});
            } else {
                nxt.insert({0, m + 1});
                nxt.insert({2, 0});
                nxt.insert({1, m * m});
            }
        }
        cur = std::move(nxt);
    }
    return stages;
}

// True iff no count reachable within `horizon` stages exceeds max_count, i.e.
// the dense spec's saturating cap is provably never exercised.
inline bool counterexample_cap_certified(std::int64_t max_count, std::int64_t horizon) {
    for (const auto& stage : counterexample_support(horizon))
        for (const auto& [tag, m] : stage)
            if (tag != 2 && m > max_count) return false;
    return true;
}

}  // namespace wsg
