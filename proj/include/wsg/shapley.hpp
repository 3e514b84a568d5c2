#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "wsg/evaluation.hpp"
#include "wsg/game.hpp"
#include "wsg/matrix_game.hpp"
#include "wsg/numeric.hpp"

namespace wsg {

// The auxiliary one-shot game at state k: entries lambda*g + (1-lambda)*E[f].
inline Matrix auxiliary_matrix(const GameSpec& spec, int k, double lambda,
                               const std::vector<double>& f) {
    Matrix A(static_cast<std::size_t>(spec.nI), std::vector<double>(static_cast<std::size_t>(spec.nJ), 0.0));
    for (int i = 0; i < spec.nI; ++i) {
        for (int j = 0; j < spec.nJ; ++j) {
            const auto& q = spec.transition[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
            double nxt = 0.0;
            for (int kp = 0; kp < spec.nK(); ++kp) nxt += q[static_cast<std::size_t>(kp)] * f[static_cast<std::size_t>(kp)];
            A[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
                lambda * spec.payoff[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +
                (1.0 - lambda) * nxt;
        }
    }
    return A;
}

// One-step weighted value operator: state-wise value of the auxiliary game
// blending the stage payoff (weight lambda) with the continuation (1-lambda).
// Backed either by a game spec or by an abstract 1-Lipschitz map.
class ShapleyOperator {
  public:
    using RawMap = std::function<std::vector<double>(double, const std::vector<double>&)>;

    static ShapleyOperator from_game(GameSpec spec, double lp_tol = 1e-10) {
        auto g = std::make_shared<const GameSpec>(validate(std::move(spec)));
        ShapleyOperator op;
        op.dim_ = g->nK();
        op.bound_ = g->payoff_bound;
        op.tol_ = lp_tol;
        op.game_ = g;
        op.psi_ = [g, lp_tol](double lambda, const std::vector<double>& f) {
            std::vector<double> out(f.size(), 0.0);
            for (int k = 0; k < g->nK(); ++k)
                out[static_cast<std::size_t>(k)] =
                    solve_matrix_game(auxiliary_matrix(*g, k, lambda, f), lp_tol).value;
            return out;
        };
        return op;
    }

    // Remark-2 style adapter: Psi(lambda, f) = lambda * Phi((1-lambda)/lambda * f).
    // Phi is spot-checked for nonexpansiveness on seeded random pairs. Below
    // lambda = 1e-12 the argument scaling is clamped: by the operator's own
    // regularity the induced error is at most (C + ||f||) * 1e-12.
    static ShapleyOperator from_nonexpansive(int dim,
                                             std::function<std::vector<double>(const std::vector<double>&)> phi,
                                             double C0, std::uint64_t check_seed = 99) {
        if (dim < 1) throw std::invalid_argument("from_nonexpansive: dim must be >= 1");
        if (!(C0 >= 0.0)) throw std::invalid_argument("from_nonexpansive: C0 must be >= 0");
        {
            DetRng rng(check_seed);
            for (int t = 0; t < 8; ++t) {
                std::vector<double> u(static_cast<std::size_t>(dim)), v(static_cast<std::size_t>(dim));
                const double scale = std::max(C0, 1.0);
                for (auto& e : u) e = rng.uniform(-scale, scale);
                for (auto& e : v) e = rng.uniform(-scale, scale);
                if (sup_dist(phi(u), phi(v)) > sup_dist(u, v) + 1e-9)
                    throw std::invalid_argument("from_nonexpansive: map failed the 1-Lipschitz spot check");
            }
            const double at_zero = sup_norm(phi(std::vector<double>(static_cast<std::size_t>(dim), 0.0)));
            if (at_zero > C0 + 1e-9)
                throw std::invalid_argument("from_nonexpansive: ||Phi(0)|| = " + format_double(at_zero) +
                                            " exceeds the declared bound " + format_double(C0));
        }
        ShapleyOperator op;
        op.dim_ = dim;
        op.bound_ = C0;
        op.tol_ = 0.0;
        op.psi_ = [phi = std::move(phi)](double lambda, const std::vector<double>& f) {
            const double lc = std::max(lambda, 1e-12);
            std::vector<double> arg(f.size());
            for (std::size_t k = 0; k < f.size(); ++k) arg[k] = (1.0 - lc) / lc * f[k];
            auto out = phi(arg);
            for (auto& e : out) e *= lc;
            return out;
        };
        return op;
    }

    // Unchecked construction; exists so test harnesses can wrap an operator
    // with a deliberately corrupted map and watch the property suite object.
    static ShapleyOperator from_raw(int dim, RawMap psi, double C0, double tol_per_apply = 0.0) {
        ShapleyOperator op;
        op.dim_ = dim;
        op.bound_ = C0;
        op.tol_ = tol_per_apply;
        op.psi_ = std::move(psi);
        return op;
    }

    int dim() const { return dim_; }
    double payoff_bound() const { return bound_; }
    double tol_per_apply() const { return tol_; }
    const GameSpec* game() const { return game_.get(); }

    std::vector<double> apply_values(double lambda, const std::vector<double>& f) const {
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw std::invalid_argument("apply: lambda must lie in [0,1]");
        if (static_cast<int>(f.size()) != dim_)
            throw std::invalid_argument("apply: value vector size mismatch");
        for (double e : f)
            if (!std::isfinite(e)) throw std::invalid_argument("apply: non-finite value entry");
        return psi_(lambda, f);
    }

    ValueFunction apply(double lambda, const ValueFunction& f) const {
        ValueFunction out;
        out.values = apply_values(lambda, f.values);
        out.error_bound = (1.0 - lambda) * f.error_bound + tol_;
        return out;
    }

    // n-fold weighted iteration: innermost stage n outward to stage 1, with
    // the stage discounts of theta. Stage m of the recursion applies
    // lambda_m = theta_m / (mass remaining from m); zero-weight stages apply
    // the pure transition step lambda = 0.
    ValueFunction iterate(const Evaluation& theta, std::int64_t n, const ValueFunction& f) const {
        if (n < 0) throw std::invalid_argument("iterate: n must be >= 0");
        const std::vector<double> lam = theta.discount_sequence(n);
        ValueFunction v = f;
        if (v.values.empty()) v.values.assign(static_cast<std::size_t>(dim_), 0.0);
        for (std::int64_t m = n; m >= 1; --m) v = apply(lam[static_cast<std::size_t>(m - 1)], v);
        return v;
    }

  private:
    int dim_ = 0;
    double bound_ = 0.0;
    double tol_ = 0.0;
    RawMap psi_;
    std::shared_ptr<const GameSpec> game_;
};

}  // namespace wsg
