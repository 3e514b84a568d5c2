#include <catch2/catch_amalgamated.hpp>

#include <vector>

#include "oracles.hpp"
#include "wsg/matrix_game.hpp"
#include "wsg/numeric.hpp"

using wsg::Matrix;
using wsg::solve_matrix_game;

TEST_CASE("frozen small games") {
    // Mixed 2x2: value 3/2 at x = (1/2, 1/2), y = (1/4, 3/4).
    const Matrix A{{3.0, 1.0}, {0.0, 2.0}};
    const auto sol = solve_matrix_game(A);
    REQUIRE(sol.value == Catch::Approx(1.5).margin(1e-10));
    REQUIRE(sol.x_star[0] == Catch::Approx(0.5).margin(1e-10));
    REQUIRE(sol.x_star[1] == Catch::Approx(0.5).margin(1e-10));
    REQUIRE(sol.y_star[0] == Catch::Approx(0.25).margin(1e-10));
    REQUIRE(sol.y_star[1] == Catch::Approx(0.75).margin(1e-10));
    REQUIRE(sol.row_gain <= 1e-10);
    REQUIRE(sol.col_gain <= 1e-10);

    // Saddle point at (0,0).
    const auto saddle = solve_matrix_game({{2.0, 3.0}, {1.0, 4.0}});
    REQUIRE(saddle.value == Catch::Approx(2.0).margin(1e-10));

    // Single row / single column: pure optimization.
    REQUIRE(solve_matrix_game({{4.0, -1.0, 2.0}}).value == Catch::Approx(-1.0).margin(1e-10));
    REQUIRE(solve_matrix_game({{4.0}, {-1.0}, {2.0}}).value == Catch::Approx(4.0).margin(1e-10));

    // Strictly negative entries exercise the feasibility shift.
    const auto neg = solve_matrix_game({{-3.0, -1.0}, {-2.0, -4.0}});
    REQUIRE(neg.value == Catch::Approx(oracle::matrix_value_2x2({{-3.0, -1.0}, {-2.0, -4.0}})).margin(1e-9));
}

TEST_CASE("solution certificates and closed-form agreement on random 2x2s") {
    wsg::DetRng rng(1001);
    for (int t = 0; t < 200; ++t) {
        Matrix A(2, std::vector<double>(2));
        for (auto& row : A)
            for (auto& v : row) v = rng.uniform(-10.0, 10.0);
        const auto sol = solve_matrix_game(A);
        REQUIRE(sol.value == Catch::Approx(oracle::matrix_value_2x2(A)).margin(1e-9));
        REQUIRE(sol.row_gain <= 1e-10);
        REQUIRE(sol.col_gain <= 1e-10);
        // Mixed actions are proper distributions.
        REQUIRE(sol.x_star[0] + sol.x_star[1] == Catch::Approx(1.0).margin(1e-9));
        REQUIRE(sol.x_star[0] >= -1e-12);
        REQUIRE(sol.y_star[0] + sol.y_star[1] == Catch::Approx(1.0).margin(1e-9));
    }
}

TEST_CASE("grid enclosure on random rectangular games") {
    wsg::DetRng rng(2002);
    for (int t = 0; t < 40; ++t) {
        const int m = static_cast<int>(rng.uniform_int(2, 4));
        const int n = static_cast<int>(rng.uniform_int(2, 4));
        Matrix A(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(n)));
        for (auto& row : A)
            for (auto& v : row) v = rng.uniform(-5.0, 5.0);
        const auto sol = solve_matrix_game(A);
        const auto gb = oracle::grid_bounds(A, 60);
        REQUIRE(sol.value >= gb.lower - 1e-9);
        REQUIRE(sol.value <= gb.upper + 1e-9);
        REQUIRE(wsg::best_response_value(A, sol.x_star) >= sol.value - 1e-9);
    }
}

TEST_CASE("duplicated rows keep the pivot deterministic") {
    const Matrix A{{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    const auto s1 = solve_matrix_game(A);
    const auto s2 = solve_matrix_game(A);
    REQUIRE(s1.value == s2.value);  // bitwise equal runs
    REQUIRE(s1.x_star == s2.x_star);
    REQUIRE(s1.y_star == s2.y_star);
    REQUIRE(s1.value == Catch::Approx(0.5).margin(1e-10));
}

TEST_CASE("library grid oracle encloses the solver value") {
    wsg::DetRng rng(3003);
    for (int t = 0; t < 25; ++t) {
        const int m = static_cast<int>(rng.uniform_int(2, 3));
        const int n = static_cast<int>(rng.uniform_int(2, 3));
        Matrix A(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(n)));
        for (auto& row : A)
            for (auto& v : row) v = rng.uniform(-10.0, 10.0);
        const auto sol = solve_matrix_game(A);
        const auto orc = wsg::value_oracle(A, 120);
        REQUIRE(sol.value >= orc.lower - 1e-9);
        REQUIRE(sol.value <= orc.upper + 1e-9);
        REQUIRE(std::abs(sol.value - orc.value) <= orc.bound + 1e-9);
    }
}

TEST_CASE("input validation") {
    REQUIRE_THROWS_AS(solve_matrix_game({}), std::invalid_argument);
    REQUIRE_THROWS_AS(solve_matrix_game({{1.0, 2.0}, {3.0}}), std::invalid_argument);
    REQUIRE_THROWS_AS(solve_matrix_game({{1.0, std::numeric_limits<double>::quiet_NaN()}}),
                      std::invalid_argument);
    Matrix big(5, std::vector<double>(5, 0.0));
    REQUIRE_THROWS_AS(wsg::value_oracle(big, 10), std::invalid_argument);
}
