#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "wsg/game.hpp"

using wsg::GameSpec;

TEST_CASE("validation collects located diagnostics") {
    GameSpec g = wsg::corpus("cycle2");
    g.transition[0][0][0] = {0.5, 0.4};  // row sums to 0.9
    try {
        wsg::validate(g);
        FAIL("expected InvalidGameSpec");
    } catch (const wsg::InvalidGameSpec& e) {
        REQUIRE(e.violations.size() == 1);
        REQUIRE(e.violations[0].find("[k=0,i=0,j=0]") != std::string::npos);
    }

    GameSpec h = wsg::corpus("cycle2");
    h.payoff[1][0][0] = std::numeric_limits<double>::infinity();
    REQUIRE_THROWS_AS(wsg::validate(h), wsg::InvalidGameSpec);

    GameSpec neg = wsg::corpus("cycle2");
    neg.transition[0][0][0] = {1.2, -0.2};
    REQUIRE_THROWS_AS(wsg::validate(neg), wsg::InvalidGameSpec);
}

TEST_CASE("corpus games have the documented shape") {
    const GameSpec c2 = wsg::corpus("cycle2");
    REQUIRE(c2.nK() == 2);
    REQUIRE(c2.nI == 1);
    REQUIRE(c2.payoff[0][0][0] == 0.0);
    REQUIRE(c2.payoff[1][0][0] == 1.0);
    REQUIRE(c2.transition[0][0][0][1] == 1.0);  // s0 -> s1 surely

    const GameSpec bm = wsg::corpus("big_match");
    REQUIRE(bm.nK() == 3);
    REQUIRE(bm.states[0] == "active");
    // The top row absorbs, the bottom row continues.
    REQUIRE(bm.transition[0][0][0][1] == 1.0);
    REQUIRE(bm.transition[0][0][1][2] == 1.0);
    REQUIRE(bm.transition[0][1][0][0] == 1.0);
    REQUIRE(bm.transition[0][1][1][0] == 1.0);
    REQUIRE(bm.payoff_bound == 1.0);

    const GameSpec ab = wsg::corpus("absorbing");
    REQUIRE(ab.nK() == 1);
    REQUIRE(ab.payoff[0][0][0] == 0.75);

    REQUIRE_THROWS_AS(wsg::corpus("nope"), std::invalid_argument);
}

TEST_CASE("expected payoff and next-state mixtures") {
    const GameSpec bm = wsg::corpus("big_match");
    // Hand value: x = (1/4, 3/4), y = (1/2, 1/2) against [[1,0],[0,1]].
    const double ep = wsg::expected_payoff(bm, 0, {0.25, 0.75}, {0.5, 0.5});
    REQUIRE(ep == Catch::Approx(0.25 * 0.5 + 0.75 * 0.5).margin(1e-14));

    // Next-state distribution recovered through indicator value vectors.
    std::vector<double> nxt(3);
    for (int kp = 0; kp < 3; ++kp) {
        std::vector<double> e(3, 0.0);
        e[static_cast<std::size_t>(kp)] = 1.0;
        nxt[static_cast<std::size_t>(kp)] = wsg::expected_next(bm, 0, {0.25, 0.75}, {0.5, 0.5}, e);
    }
    REQUIRE(nxt[0] == Catch::Approx(0.75).margin(1e-14));   // continue rows
    REQUIRE(nxt[1] == Catch::Approx(0.125).margin(1e-14));  // absorb on (T, L)
    REQUIRE(nxt[2] == Catch::Approx(0.125).margin(1e-14));
    REQUIRE(wsg::expected_next(bm, 0, {0.25, 0.75}, {0.5, 0.5}, {1.0, 1.0, 1.0}) ==
            Catch::Approx(1.0).margin(1e-12));

    REQUIRE_THROWS_AS(wsg::expected_payoff(bm, 0, {0.7, 0.7}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("random games are valid and reproducible") {
    const GameSpec a = wsg::random_game(7, 4, 3, 2);
    const GameSpec b = wsg::random_game(7, 4, 3, 2);
    REQUIRE(a.payoff == b.payoff);
    REQUIRE(a.transition == b.transition);
    for (int k = 0; k < a.nK(); ++k)
        for (int i = 0; i < a.nI; ++i)
            for (int j = 0; j < a.nJ; ++j) {
                REQUIRE(std::abs(a.payoff[k][i][j]) <= 1.0);
                double s = 0.0;
                for (double p : a.transition[k][i][j]) {
                    REQUIRE(p >= 0.0);
                    s += p;
                }
                REQUIRE(s == Catch::Approx(1.0).margin(1e-12));
            }
    const GameSpec c = wsg::random_game(8, 4, 3, 2);
    REQUIRE(a.payoff != c.payoff);
}

TEST_CASE("survival families") {
    wsg::SurvivalSpec tl;  // defaults: triple_log, M0 = 1e10
    const double p1 = tl.phi(1);
    REQUIRE(p1 == Catch::Approx(1.0 / std::log(std::log(std::log(1.0 + 1e10)))).margin(1e-15));
    REQUIRE(p1 > 0.8);
    REQUIRE(p1 < 1.0);
    REQUIRE(tl.phi(1000) < p1);  // decreasing
    wsg::validate_survival(tl, 1'000'000);

    wsg::SurvivalSpec iv{"inv_log", 0.0, 1.1, 2.0};
    // phi(1) = 1.1 / ln 3 > 1: rejected.
    REQUIRE_THROWS_AS(wsg::validate_survival(iv, 100), std::invalid_argument);
    iv.c = 0.9;
    wsg::validate_survival(iv, 100);

    wsg::SurvivalSpec cst{"constant", 0.0, 0.25, 0.0};
    REQUIRE(cst.phi(17) == 0.25);

    wsg::SurvivalSpec bad{"mystery", 0.0, 0.0, 0.0};
    REQUIRE_THROWS_AS(bad.phi(1), std::invalid_argument);
}

TEST_CASE("gambling chain dense spec") {
    wsg::CounterexampleParams params;
    params.survival = {"constant", 0.0, 0.25, 0.0};
    params.max_count = 5;
    const GameSpec g = wsg::counterexample_mdp(params);
    REQUIRE(g.nK() == 11);
    REQUIRE(g.nJ == 1);
    REQUIRE(g.states[wsg::cx_absorbed()] == "0*");
    REQUIRE(g.states[wsg::cx_waiting(2)] == "(0,2)");
    REQUIRE(g.states[wsg::cx_scoring(3)] == "(1,3)");

    // Scoring states pay 1 whatever happens; waiting and graveyard pay 0.
    REQUIRE(g.payoff[wsg::cx_scoring(4)][0][0] == 1.0);
    REQUIRE(g.payoff[wsg::cx_waiting(4)][0][0] == 0.0);
    REQUIRE(g.payoff[wsg::cx_absorbed()][1][0] == 0.0);

    // Quit from (0,2): graveyard with phi, otherwise scoring run of length 4.
    const auto& quit = g.transition[wsg::cx_waiting(2)][1][0];
    REQUIRE(quit[wsg::cx_absorbed()] == Catch::Approx(0.25).margin(1e-15));
    REQUIRE(quit[wsg::cx_scoring(4)] == Catch::Approx(0.75).margin(1e-15));

    // Counts saturate at the cap: from (0,5), continue stays at (0,5) and the
    // squared jump clips to (1,5).
    REQUIRE(g.transition[wsg::cx_waiting(5)][0][0][wsg::cx_waiting(5)] == 1.0);
    REQUIRE(g.transition[wsg::cx_waiting(5)][1][0][wsg::cx_scoring(5)] == Catch::Approx(0.75).margin(1e-15));

    // Scoring run counts down; (1,1) hands back to (0,1).
    REQUIRE(g.transition[wsg::cx_scoring(3)][0][0][wsg::cx_scoring(2)] == 1.0);
    REQUIRE(g.transition[wsg::cx_scoring(1)][0][0][wsg::cx_waiting(1)] == 1.0);

    REQUIRE_THROWS_AS(wsg::counterexample_mdp({params.survival, 1}), std::invalid_argument);
    REQUIRE_THROWS_AS(wsg::counterexample_mdp({params.survival, 600}), std::invalid_argument);
}

TEST_CASE("reachable support of the gambling chain") {
    const auto sup = wsg::counterexample_support(3);
    REQUIRE(sup.size() == 3);
    REQUIRE(sup[0] == std::set<std::pair<int, std::int64_t>>{{0, 1}});
    REQUIRE(sup[1] == std::set<std::pair<int, std::int64_t>>{{0, 2}, {1, 1}, {2, 0}});
    REQUIRE(sup[2] == std::set<std::pair<int, std::int64_t>>{{0, 3}, {1, 4}, {0, 1}, {2, 0}});

    REQUIRE(wsg::counterexample_cap_certified(512, 22));
    REQUIRE_FALSE(wsg::counterexample_cap_certified(4, 5));
    REQUIRE_THROWS_AS(wsg::counterexample_support(513), std::invalid_argument);
}
