#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wsg/evaluation.hpp"
#include "wsg/game.hpp"
#include "wsg/json_io.hpp"
#include "wsg/numeric.hpp"
#include "wsg/shapley.hpp"
#include "wsg/values.hpp"

namespace wsg {

namespace detail {

inline std::int64_t ipow_checked(std::int64_t base, std::int64_t exp, std::int64_t limit) {
    std::int64_t v = 1;
    for (std::int64_t i = 0; i < exp; ++i) {
        if (v > limit / base) throw std::invalid_argument("block_ladder: block length overflows the support limit");
        v *= base;
    }
    return v;
}

}  // namespace detail

// R consecutive uniform blocks, block r of length N^(3^r), each holding total
// mass 1/R. Every block dwarfs the combined length of all earlier ones, so no
// single horizon or discount rate describes the whole evaluation; this is the
// shape that separates long-game values from weighted values in the gambling
// chain below.
inline Evaluation block_ladder(int N, int R, std::int64_t support_limit = 1 << 26) {
    if (N < 2) throw std::invalid_argument("block_ladder: N must be >= 2");
    if (R < 1) throw std::invalid_argument("block_ladder: R must be >= 1");
    std::vector<double> head;
    std::int64_t expo = 1;
    for (int r = 1; r <= R; ++r) {
        expo *= 3;
        if (expo > 62) throw std::invalid_argument("block_ladder: exponent overflow");
        const std::int64_t len = detail::ipow_checked(N, expo, support_limit);
        if (static_cast<std::int64_t>(head.size()) > support_limit - len)
            throw std::invalid_argument("block_ladder: total support exceeds limit");
        const double w = 1.0 / (static_cast<double>(R) * static_cast<double>(len));
        head.insert(head.end(), static_cast<std::size_t>(len), w);
    }
    return Evaluation::from_parts(std::move(head));
}

// Exact optimal weighted payoff of the gambling chain from (0,1), for an
// arbitrary finite weight profile w[0..n-1] over stages 1..n. The chain is a
// one-player game, so backward induction over (stage, count) is exact:
//
//   U(s,m) = max( U(s+1, m+1),
//                 (1-phi(m)) * [ mass(s+1 .. s+m^2) + U(s+m^2+1, 1) ] )
//
// with counts reachable at stage s limited to m <= s. Runs in O(n^2) time and
// O(n) memory; suffix masses are Kahan-accumulated once up front.
inline double counterexample_value_exact(const SurvivalSpec& surv, const std::vector<double>& weights) {
    const std::int64_t n = static_cast<std::int64_t>(weights.size());
    if (n < 1) throw std::invalid_argument("counterexample_value_exact: empty weight profile");
    if (n > 40'000)
        throw std::invalid_argument("counterexample_value_exact: quadratic pass limited to n <= 40000");
    validate_survival(surv, n);

    // W[t] = mass of stages t..n, 1-based, W[n+1] = 0.
    std::vector<double> W(static_cast<std::size_t>(n) + 2, 0.0);
    {
        KahanSum acc;
        for (std::int64_t t = n; t >= 1; --t) {
            acc.add(weights[static_cast<std::size_t>(t - 1)]);
            W[static_cast<std::size_t>(t)] = acc.value();
        }
    }
    std::vector<double> phi(static_cast<std::size_t>(n) + 1, 0.0);
    for (std::int64_t m = 1; m <= n; ++m) phi[static_cast<std::size_t>(m)] = surv.phi(m);

    std::vector<double> U1(static_cast<std::size_t>(n) + 2, 0.0);
    std::vector<double> next(static_cast<std::size_t>(n) + 2, 0.0);
    std::vector<double> cur(static_cast<std::size_t>(n) + 2, 0.0);
    for (std::int64_t s = n; s >= 1; --s) {
        for (std::int64_t m = 1; m <= s; ++m) {
            const double stay = next[static_cast<std::size_t>(m + 1)];
            const std::int64_t start = s + 1;
            const std::int64_t stop = std::min(start + m * m, n + 1);  // one past the scoring run
            const double scored = start <= n ? W[static_cast<std::size_t>(start)] - W[static_cast<std::size_t>(stop)] : 0.0;
            const std::int64_t resume = s + m * m + 1;
            const double cont = resume <= n ? U1[static_cast<std::size_t>(resume)] : 0.0;
            const double gamble = (1.0 - phi[static_cast<std::size_t>(m)]) * (scored + cont);
            cur[static_cast<std::size_t>(m)] = std::max(stay, gamble);
        }
        U1[static_cast<std::size_t>(s)] = cur[1];
        std::swap(cur, next);
    }
    return U1[1];
}

inline double counterexample_value_n(const SurvivalSpec& surv, std::int64_t n) {
    if (n < 1) throw std::invalid_argument("counterexample_value_n: n must be >= 1");
    return counterexample_value_exact(
        surv, std::vector<double>(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n)));
}

inline double counterexample_value_theta(const SurvivalSpec& surv, const Evaluation& theta) {
    if (!theta.finite_support())
        throw std::invalid_argument("counterexample_value_theta: needs a finite-support evaluation");
    const std::int64_t n = theta.support_end();
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t m = 1; m <= n; ++m) w[static_cast<std::size_t>(m - 1)] = theta.weight(m);
    return counterexample_value_exact(surv, w);
}

struct LadderSpec {
    int N = 3;
    int R = 2;
};

struct CounterexampleRow {
    int N = 0;
    int R = 0;
    std::int64_t n = 0;  // support end of the ladder evaluation
    double v_n = 0.0;    // uniform n-stage value from (0,1)
    double v_theta = 0.0;
    double gap = 0.0;  // v_n - v_theta
};

struct CounterexampleReport {
    SurvivalSpec survival;
    std::vector<CounterexampleRow> rows;
};

// For each ladder shape, the long-game value against the ladder-weighted
// value at the same support. A healthy configuration shows v_n high (patient
// play wins) while the ladder value stays low (each fresh block forces the
// gamble again).
inline CounterexampleReport reproduce_counterexample(const SurvivalSpec& surv,
                                                     const std::vector<LadderSpec>& ladders) {
    CounterexampleReport rep;
    rep.survival = surv;
    for (const LadderSpec& ls : ladders) {
        const Evaluation theta = block_ladder(ls.N, ls.R);
        CounterexampleRow row;
        row.N = ls.N;
        row.R = ls.R;
        row.n = theta.support_end();
        row.v_n = counterexample_value_n(surv, row.n);
        row.v_theta = counterexample_value_theta(surv, theta);
        row.gap = row.v_n - row.v_theta;
        rep.rows.push_back(row);
    }
    return rep;
}

inline Json to_json(const SurvivalSpec& sv) {
    Json j;
    j["family"] = sv.family;
    if (sv.family == "triple_log") j["M0"] = sv.M0;
    if (sv.family == "inv_log") {
        j["c"] = sv.c;
        j["m0"] = sv.m0;
    }
    if (sv.family == "constant") j["c"] = sv.c;
    return j;
}

inline SurvivalSpec survival_from_json(const Json& j) {
    SurvivalSpec sv;
    sv.family = j.at("family").get<std::string>();
    if (j.contains("M0")) sv.M0 = j["M0"].get<double>();
    if (j.contains("c")) sv.c = j["c"].get<double>();
    if (j.contains("m0")) sv.m0 = j["m0"].get<double>();
    return sv;
}

struct CounterexampleConfig {
    SurvivalSpec survival;
    std::vector<LadderSpec> ladders;
};

inline CounterexampleConfig counterexample_config_from_json(const Json& j) {
    CounterexampleConfig cfg;
    cfg.survival = survival_from_json(j.at("survival"));
    for (const auto& l : j.at("ladders"))
        cfg.ladders.push_back({l.at("N").get<int>(), l.at("R").get<int>()});
    if (cfg.ladders.empty()) throw std::invalid_argument("counterexample config: no ladders");
    return cfg;
}

inline Json to_json(const CounterexampleReport& rep) {
    Json j;
    j["survival"] = to_json(rep.survival);
    j["rows"] = Json::array();
    for (const auto& r : rep.rows) {
        Json row;
        row["N"] = r.N;
        row["R"] = r.R;
        row["n"] = r.n;
        row["v_n"] = r.v_n;
        row["v_theta"] = r.v_theta;
        row["gap"] = r.gap;
        j["rows"].push_back(std::move(row));
    }
    return j;
}

struct SweepEntry {
    std::string name;
    Evaluation theta;
};

// One CSV row per evaluation: name, flatness statistics, the solver's error
// bound, then the value at every state. Row order follows the input order.
inline std::string sweep_values_csv(const ShapleyOperator& op, const std::vector<SweepEntry>& entries,
                                    double eps = 1e-9, int impatience_pieces = 4) {
    const GameSpec* g = op.game();
    std::string csv = "evaluation,sup_weight,impatience,error_bound";
    for (int k = 0; k < op.dim(); ++k) {
        std::string label = g ? g->states[static_cast<std::size_t>(k)] : "s" + std::to_string(k);
        std::replace(label.begin(), label.end(), ',', ';');
        csv += ",v_" + label;
    }
    csv += "\n";
    for (const SweepEntry& e : entries) {
        const ValueFunction v = v_theta(op, e.theta, eps);
        std::string name = e.name;
        std::replace(name.begin(), name.end(), ',', ';');
        csv += name;
        csv += ",";
        csv += format_double(e.theta.sup_weight());
        csv += ",";
        csv += format_double(impatience(e.theta, impatience_pieces));
        csv += ",";
        csv += format_double(v.error_bound);
        for (double x : v.values) {
            csv += ",";
            csv += format_double(x);
        }
        csv += "\n";
    }
    return csv;
}

enum class FaultInjection { none, inflate_apply };

struct PropertyResult {
    std::string name;
    int runs = 0;
    int violations = 0;
    double worst_slack = -std::numeric_limits<double>::infinity();  // max of lhs - allowed
};

struct PropertyReport {
    std::vector<PropertyResult> entries;

    bool passed() const {
        for (const auto& e : entries)
            if (e.violations > 0) return false;
        return true;
    }
    int total_violations() const {
        int t = 0;
        for (const auto& e : entries) t += e.violations;
        return t;
    }
};

inline Json to_json(const PropertyReport& rep) {
    Json j = Json::array();
    for (const auto& e : rep.entries) {
        Json row;
        row["name"] = e.name;
        row["runs"] = e.runs;
        row["violations"] = e.violations;
        row["worst_slack"] = e.worst_slack;
        j.push_back(std::move(row));
    }
    return j;
}

namespace detail {

struct PropertyTable {
    std::vector<PropertyResult> entries;

    PropertyResult& at(const std::string& name) {
        for (auto& e : entries)
            if (e.name == name) return e;
        entries.push_back({name, 0, 0, -std::numeric_limits<double>::infinity()});
        return entries.back();
    }
    // lhs must not exceed allowed; slack above zero is a violation.
    void check(const std::string& name, double lhs, double allowed) {
        PropertyResult& r = at(name);
        r.runs += 1;
        const double slack = lhs - allowed;
        r.worst_slack = std::max(r.worst_slack, slack);
        if (slack > 0.0) r.violations += 1;
    }
};

inline Evaluation random_finite_evaluation(DetRng& rng, int max_head) {
    const int h = static_cast<int>(rng.uniform_int(1, max_head));
    std::vector<double> w(static_cast<std::size_t>(h));
    KahanSum total;
    for (auto& x : w) {
        x = rng.u01() + 1e-3;  // keep every stage weighted so shifts stay well defined
        total.add(x);
    }
    for (auto& x : w) x /= total.value();
    return Evaluation::from_parts(std::move(w));
}

inline std::vector<double> random_vector(DetRng& rng, int dim, double bound) {
    std::vector<double> f(static_cast<std::size_t>(dim));
    for (auto& x : f) x = rng.uniform(-bound, bound);
    return f;
}

}  // namespace detail

// Randomized check of the operator laws the solvers rely on. Each trial draws
// a fresh small game and random data; fault injection wraps the operator so
// the same checks must catch a deliberately broken implementation. Translated
// pairs g = f + c are included on purpose: additive homogeneity makes the
// nonexpansiveness bound tight there, so a multiplicative fault cannot hide.
inline PropertyReport run_property_suite(std::uint64_t seed, int budget,
                                         FaultInjection fault = FaultInjection::none) {
    if (budget < 1) throw std::invalid_argument("run_property_suite: budget must be >= 1");
    detail::PropertyTable tab;
    DetRng rng(seed);

    for (int trial = 0; trial < budget; ++trial) {
        const int nK = static_cast<int>(rng.uniform_int(2, 3));
        const int nI = static_cast<int>(rng.uniform_int(1, 2));
        const int nJ = static_cast<int>(rng.uniform_int(1, 2));
        const GameSpec spec = random_game(rng.engine()(), nK, nI, nJ);
        const ShapleyOperator base = ShapleyOperator::from_game(spec);
        ShapleyOperator op = base;
        if (fault == FaultInjection::inflate_apply) {
            op = ShapleyOperator::from_raw(
                base.dim(),
                [base](double lambda, const std::vector<double>& f) {
                    std::vector<double> out = base.apply_values(lambda, f);
                    for (double& x : out) x *= 1.05;
                    return out;
                },
                base.payoff_bound() * 1.05, base.tol_per_apply());
        }
        const double C = op.payoff_bound();
        const double tol = std::max(op.tol_per_apply(), 1e-12);

        const double lambda = rng.u01();
        const double lambda2 = rng.u01();
        const double B = 2.0;
        const std::vector<double> f = detail::random_vector(rng, nK, B);
        std::vector<double> g;
        const bool translated = trial % 2 == 0;
        if (translated) {
            const double c = rng.uniform(-1.5, 1.5);
            g = f;
            for (double& x : g) x += c;
        } else {
            g = detail::random_vector(rng, nK, B);
        }

        // One-step laws of the discounted operator.
        {
            const std::vector<double> Pf = op.apply_values(lambda, f);
            const std::vector<double> Pg = op.apply_values(lambda, g);
            tab.check("nonexpansive", sup_dist(Pf, Pg), (1.0 - lambda) * sup_dist(f, g) + 2.0 * tol);
            tab.check("bounded", sup_norm(Pf), lambda * C + (1.0 - lambda) * sup_norm(f) + tol);

            const double alpha = rng.u01();
            const double beta = rng.u01();
            const std::vector<double> Pg2 = op.apply_values(lambda2, g);
            double lhs = 0.0;
            double mix = 0.0;
            for (int k = 0; k < nK; ++k) {
                lhs = std::max(lhs, std::abs(alpha * Pf[static_cast<std::size_t>(k)] -
                                             beta * Pg2[static_cast<std::size_t>(k)]));
                mix = std::max(mix, std::abs(alpha * (1.0 - lambda) * f[static_cast<std::size_t>(k)] -
                                             beta * (1.0 - lambda2) * g[static_cast<std::size_t>(k)]));
            }
            tab.check("scaled_comparison", lhs, C * std::abs(alpha * lambda - beta * lambda2) + mix + 2.0 * tol);
        }

        // Iterated laws under a weight profile.
        {
            const Evaluation theta = detail::random_finite_evaluation(rng, 6);
            const Evaluation theta2 = detail::random_finite_evaluation(rng, 6);
            const std::int64_t n = rng.uniform_int(1, 5);
            const ValueFunction inf(static_cast<std::size_t>(nK));
            ValueFunction vf = inf, vg = inf, vf2 = inf;
            vf.values = f;
            vg.values = g;
            vf2.values = f;
            const ValueFunction If = op.iterate(theta, n, vf);
            const ValueFunction Ig = op.iterate(theta, n, vg);
            const ValueFunction If2 = op.iterate(theta2, n, vf2);
            const double rem = theta.tail_mass_from(n + 1);
            const double rem2 = theta2.tail_mass_from(n + 1);
            const double slack_n = static_cast<double>(n) * tol * 2.0;
            tab.check("iterated_nonexpansive", sup_dist(If.values, Ig.values),
                      rem * sup_dist(f, g) + slack_n);
            double mass_head = 0.0;
            double diff_head = 0.0;
            {
                KahanSum mh, dh;
                for (std::int64_t m = 1; m <= n; ++m) {
                    mh.add(theta.weight(m));
                    dh.add(std::abs(theta.weight(m) - theta2.weight(m)));
                }
                mass_head = mh.value();
                diff_head = dh.value();
            }
            tab.check("iterated_bounded", sup_norm(If.values), C * mass_head + rem * sup_norm(f) + slack_n);
            tab.check("profile_comparison", sup_dist(If.values, If2.values),
                      C * diff_head + std::abs(rem - rem2) * sup_norm(f) + slack_n);

            // Value distance against the weight-profile distance.
            const ValueFunction v1 = v_theta(op, theta, 1e-10);
            const ValueFunction v2 = v_theta(op, theta2, 1e-10);
            tab.check("value_lipschitz", sup_dist(v1.values, v2.values),
                      C * l1_distance(theta, theta2) + 1e-8);

            // One-step consistency of the weighted value.
            const ValueFunction vs = v_theta(op, theta.shift(), 1e-10);
            const std::vector<double> stepped = op.apply_values(theta.stage_discount(1), vs.values);
            tab.check("value_consistency", sup_dist(v1.values, stepped), 1e-8);
        }
    }

    PropertyReport rep;
    rep.entries = std::move(tab.entries);
    return rep;
}

}  // namespace wsg
