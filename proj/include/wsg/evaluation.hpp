#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wsg/numeric.hpp"

namespace wsg {

// Mass tolerance for probability vectors over stages. Chosen to absorb
// accumulated rounding from constructions like n equal weights 1/n while
// still rejecting genuinely unnormalized inputs.
inline constexpr double kMassTol = 1e-12;

class InvalidEvaluation : public std::invalid_argument {
  public:
    InvalidEvaluation(const std::string& what, double mass)
        : std::invalid_argument(what), mass(mass) {}
    double mass;
};

// Geometric tail: weight at stage H+m is a * rho^(m-1) for m >= 1, where H is
// the head length. a == 0 means no tail; rho in [0, 1) whenever a > 0.
struct GeometricTail {
    double a = 0.0;
    double rho = 0.0;
};

// A stage-weight evaluation: a finite head w_1..w_H plus an optional geometric
// tail. Total mass is either 1 (a probability on stages) or 0 (the null
// evaluation, which assigns no weight at all). All stage indices are 1-based.
class Evaluation {
  public:
    Evaluation() = default;  // null evaluation

    static Evaluation zero() { return Evaluation(); }

    // Validating constructor; trims trailing zero head entries and drops
    // zero-strength tails so equal weight sequences compare structurally.
    static Evaluation from_parts(std::vector<double> head,
                                 std::optional<GeometricTail> tail = std::nullopt) {
        Evaluation e;
        if (tail && tail->a != 0.0) {
            if (!(tail->a > 0.0) || !std::isfinite(tail->a))
                throw InvalidEvaluation("evaluation tail strength must be >= 0 and finite",
                                        std::numeric_limits<double>::quiet_NaN());
            if (!(tail->rho >= 0.0 && tail->rho < 1.0))
                throw InvalidEvaluation("evaluation tail ratio must lie in [0,1)",
                                        std::numeric_limits<double>::quiet_NaN());
            e.tail_ = *tail;
        }
        for (double w : head)
            if (!(w >= 0.0) || !std::isfinite(w))
                throw InvalidEvaluation("evaluation weights must be >= 0 and finite",
                                        std::numeric_limits<double>::quiet_NaN());
        while (!head.empty() && head.back() == 0.0) head.pop_back();
        e.head_ = std::move(head);

        KahanSum k;
        for (double w : e.head_) k.add(w);
        if (e.tail_) k.add(e.tail_->a / (1.0 - e.tail_->rho));
        const double mass = k.value();
        if (std::abs(mass) <= kMassTol) {
            // Null evaluation: nonnegative weights summing to ~0 are all ~0,
            // canonicalize to the exact zero element.
            e.head_.clear();
            e.tail_.reset();
            e.mass_ = 0.0;
        } else if (std::abs(mass - 1.0) <= kMassTol) {
            e.mass_ = mass;
        } else {
            throw InvalidEvaluation("evaluation mass must be 0 or 1, got " + format_double(mass),
                                    mass);
        }
        return e;
    }

    // Uniform weight on stages 1..n.
    static Evaluation n_stage(std::int64_t n) {
        if (n < 1) throw std::invalid_argument("n_stage: n must be >= 1");
        return from_parts(std::vector<double>(static_cast<std::size_t>(n), 1.0 / static_cast<double>(n)));
    }

    // Geometric weights lambda * (1-lambda)^(m-1); lambda == 1 is the Dirac
    // mass at stage 1.
    static Evaluation discounted(double lambda) {
        if (!(lambda > 0.0 && lambda <= 1.0))
            throw std::invalid_argument("discounted: lambda must lie in (0,1]");
        // The first-stage weight is rounded back from the stored ratio rather
        // than taken as lambda verbatim: for tiny lambda the rounding of
        // 1 - lambda otherwise shifts the implied mass a / (1 - rho) by more
        // than the mass tolerance.
        const double rho = 1.0 - lambda;
        return from_parts({}, GeometricTail{1.0 - rho, rho});
    }

    // Piecewise-constant: level[i] on stages [breakpoints[i], breakpoints[i+1]),
    // zero from breakpoints.back() on. breakpoints must start at 1 and be
    // strictly increasing (no empty pieces).
    static Evaluation piecewise_constant(const std::vector<double>& levels,
                                         const std::vector<std::int64_t>& breakpoints) {
        if (levels.empty() || breakpoints.size() != levels.size() + 1)
            throw std::invalid_argument("piecewise_constant: need p levels and p+1 breakpoints");
        if (breakpoints.front() != 1)
            throw std::invalid_argument("piecewise_constant: first breakpoint must be stage 1");
        for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i)
            if (breakpoints[i + 1] <= breakpoints[i])
                throw std::invalid_argument("piecewise_constant: breakpoints must be strictly increasing (empty piece)");
        std::vector<double> head(static_cast<std::size_t>(breakpoints.back() - 1), 0.0);
        for (std::size_t i = 0; i < levels.size(); ++i)
            for (std::int64_t m = breakpoints[i]; m < breakpoints[i + 1]; ++m)
                head[static_cast<std::size_t>(m - 1)] = levels[i];
        return from_parts(std::move(head));
    }

    struct DiscountedPiece {
        double a;            // weight at the piece's first stage
        double lambda;       // per-stage decay within the piece
        std::int64_t start;  // first stage of the piece
    };

    // Piecewise-discounted: piece i contributes a_i * (1-lambda_i)^(m - start_i)
    // on [start_i, start_{i+1}); the last piece extends forever as a geometric
    // tail. starts must begin at 1 and be strictly increasing.
    static Evaluation piecewise_discounted(const std::vector<DiscountedPiece>& pieces) {
        if (pieces.empty()) throw std::invalid_argument("piecewise_discounted: no pieces");
        if (pieces.front().start != 1)
            throw std::invalid_argument("piecewise_discounted: first piece must start at stage 1");
        for (std::size_t i = 0; i + 1 < pieces.size(); ++i)
            if (pieces[i + 1].start <= pieces[i].start)
                throw std::invalid_argument("piecewise_discounted: starts must be strictly increasing");
        for (const auto& pc : pieces) {
            if (!(pc.a >= 0.0) || !std::isfinite(pc.a))
                throw std::invalid_argument("piecewise_discounted: piece weight must be >= 0");
            if (!(pc.lambda >= 0.0 && pc.lambda <= 1.0))
                throw std::invalid_argument("piecewise_discounted: piece decay must lie in [0,1]");
        }
        const auto& last = pieces.back();
        if (last.a > 0.0 && last.lambda <= 0.0)
            throw std::invalid_argument("piecewise_discounted: last piece has non-summable tail");
        std::vector<double> head(static_cast<std::size_t>(last.start - 1), 0.0);
        for (std::size_t i = 0; i + 1 < pieces.size(); ++i) {
            double w = pieces[i].a;
            const double r = 1.0 - pieces[i].lambda;
            for (std::int64_t m = pieces[i].start; m < pieces[i + 1].start; ++m) {
                head[static_cast<std::size_t>(m - 1)] = w;
                w *= r;
            }
        }
        std::optional<GeometricTail> tail;
        if (last.a > 0.0) tail = GeometricTail{last.a, 1.0 - last.lambda};
        return from_parts(std::move(head), tail);
    }

    bool is_zero() const { return mass_ == 0.0; }
    double mass() const { return mass_; }
    const std::vector<double>& head() const { return head_; }
    std::int64_t head_size() const { return static_cast<std::int64_t>(head_.size()); }
    const std::optional<GeometricTail>& tail() const { return tail_; }

    bool finite_support() const { return !tail_.has_value(); }

    // Last stage with positive weight; 0 for the null evaluation. Requires
    // finite support.
    std::int64_t support_end() const {
        if (tail_) throw std::logic_error("support_end: evaluation has infinite support");
        return head_size();  // trailing zeros trimmed at construction
    }

    // Weight of stage m (1-based).
    double weight(std::int64_t m) const {
        if (m < 1) throw std::out_of_range("weight: stages are 1-based");
        const std::int64_t h = head_size();
        if (m <= h) return head_[static_cast<std::size_t>(m - 1)];
        if (!tail_) return 0.0;
        if (tail_->rho == 0.0) return m == h + 1 ? tail_->a : 0.0;
        return tail_->a * std::pow(tail_->rho, static_cast<double>(m - h - 1));
    }

    // Remaining mass from stage r on: sum of weights at stages >= r.
    double tail_mass_from(std::int64_t r) const {
        if (r < 1) throw std::out_of_range("tail_mass_from: stages are 1-based");
        if (is_zero()) return 0.0;
        const std::int64_t h = head_size();
        if (r > h) {
            if (!tail_) return 0.0;
            if (tail_->rho == 0.0) return r == h + 1 ? tail_->a : 0.0;
            return tail_->a * std::pow(tail_->rho, static_cast<double>(r - h - 1)) / (1.0 - tail_->rho);
        }
        KahanSum k;
        for (std::int64_t m = h; m >= r; --m) k.add(head_[static_cast<std::size_t>(m - 1)]);
        if (tail_) k.add(tail_->a / (1.0 - tail_->rho));
        return k.value();
    }

    // Stage discount: weight(m) normalized by the remaining mass from m, and 0
    // at zero-weight stages.
    double stage_discount(std::int64_t m) const {
        const double w = weight(m);
        if (w == 0.0) return 0.0;
        if (m > head_size()) return 1.0 - tail_->rho;  // ratio of consecutive geometric masses
        const double rem = tail_mass_from(m);
        if (rem <= 0.0) return 0.0;
        return std::clamp(w / rem, 0.0, 1.0);
    }

    // Stage discounts lambda_1..lambda_n in one backward pass (O(n + H) instead
    // of O(n * H) repeated suffix sums).
    std::vector<double> discount_sequence(std::int64_t n) const {
        if (n < 0) throw std::invalid_argument("discount_sequence: n must be >= 0");
        std::vector<double> lam(static_cast<std::size_t>(n), 0.0);
        if (is_zero() || n == 0) return lam;
        const std::int64_t h = head_size();
        const double tail_lambda = tail_ ? 1.0 - tail_->rho : 0.0;
        for (std::int64_t m = h + 1; m <= n; ++m)
            lam[static_cast<std::size_t>(m - 1)] = weight(m) > 0.0 ? tail_lambda : 0.0;
        KahanSum rem;
        if (tail_) rem.add(tail_->a / (1.0 - tail_->rho));
        for (std::int64_t m = h; m >= 1; --m) {
            const double w = head_[static_cast<std::size_t>(m - 1)];
            rem.add(w);
            if (m <= n && w > 0.0 && rem.value() > 0.0)
                lam[static_cast<std::size_t>(m - 1)] = std::clamp(w / rem.value(), 0.0, 1.0);
        }
        return lam;
    }

    double sup_weight() const {
        double s = tail_ ? tail_->a : 0.0;
        for (double w : head_) s = std::max(s, w);
        return s;
    }

    // Drop stages before r and renormalize by the remaining mass; the null
    // evaluation when no mass remains. A mass-1 pure tail is shift-invariant,
    // which this returns exactly (not just within rounding).
    Evaluation r_shift(std::int64_t r) const {
        if (r < 1) throw std::out_of_range("r_shift: stages are 1-based");
        if (r == 1 || is_zero()) return *this;
        const std::int64_t h = head_size();
        const double rem = tail_mass_from(r);
        if (rem <= 0.0) return zero();
        if (r > h) {
            // Only the geometric tail remains; renormalized it is the same
            // geometric law regardless of r. If there was no head it already
            // has mass 1 and shifting is the identity.
            if (h == 0) return *this;
            return from_parts({}, GeometricTail{1.0 - tail_->rho, tail_->rho});
        }
        std::vector<double> head(head_.begin() + static_cast<std::ptrdiff_t>(r - 1), head_.end());
        for (double& w : head) w /= rem;
        std::optional<GeometricTail> tail;
        if (tail_) tail = GeometricTail{tail_->a / rem, tail_->rho};
        return from_parts(std::move(head), tail);
    }

    // One-stage shift: null if stage 1 carries all the mass, otherwise the
    // conditional law of the remaining stages.
    Evaluation shift() const { return r_shift(2); }

  private:
    std::vector<double> head_;
    std::optional<GeometricTail> tail_;
    double mass_ = 0.0;
};

// Exact l1 distance between two evaluations. Heads are compared pointwise;
// beyond both heads the weights are geometric, where the difference changes
// sign at most once, so the remainder splits into closed-form geometric sums
// around the crossing. No truncation is involved.
inline double l1_distance(const Evaluation& x, const Evaluation& y) {
    const std::int64_t M = std::max(x.head_size(), y.head_size());
    KahanSum s;
    for (std::int64_t m = 1; m <= M; ++m) s.add(std::abs(x.weight(m) - y.weight(m)));

    const double ax = x.weight(M + 1);
    const double ay = y.weight(M + 1);
    const double rx = x.tail() ? x.tail()->rho : 0.0;
    const double ry = y.tail() ? y.tail()->rho : 0.0;
    if (ax == 0.0 && ay == 0.0) return s.value();
    if (ax == 0.0) return s.value() + ay / (1.0 - ry);
    if (ay == 0.0) return s.value() + ax / (1.0 - rx);
    if (rx == ry) return s.value() + std::abs(ax - ay) / (1.0 - rx);
    // A Dirac remainder (ratio 0) only overlaps the other side at one stage.
    if (rx == 0.0) return s.value() + std::abs(ax - ay) + ay * ry / (1.0 - ry);
    if (ry == 0.0) return s.value() + std::abs(ax - ay) + ax * rx / (1.0 - rx);

    // g(k) = ax*rx^k - ay*ry^k for k >= 0; ax,ay > 0 and rx != ry, so
    // (ax/ay)(rx/ry)^k is strictly monotone and g changes sign at most once.
    const double kcross = std::log(ay / ax) / std::log(rx / ry);
    auto geo_rem = [](double a, double r, double from_k) {
        return a * std::pow(r, from_k) / (1.0 - r);
    };
    if (!(kcross > 0.0)) {
        // Sign fixed on all of k >= 0.
        return s.value() + std::abs(ax / (1.0 - rx) - ay / (1.0 - ry));
    }
    const double k1 = std::max(0.0, std::floor(kcross) - 2.0);
    const double k2 = k1 + 5.0;
    // Fixed sign on [0, k1), pointwise across the crossing window, fixed sign
    // beyond k2.
    double before = 0.0;
    if (k1 > 0.0)
        before = std::abs(ax * (1.0 - std::pow(rx, k1)) / (1.0 - rx) -
                          ay * (1.0 - std::pow(ry, k1)) / (1.0 - ry));
    KahanSum window;
    for (double k = k1; k <= k2; k += 1.0)
        window.add(std::abs(ax * std::pow(rx, k) - ay * std::pow(ry, k)));
    const double after = std::abs(geo_rem(ax, rx, k2 + 1.0) - geo_rem(ay, ry, k2 + 1.0));
    return s.value() + before + window.value() + after;
}

struct PwcApproximation {
    Evaluation approx;
    double certified_bound;   // proven bound on l1 distance to the geometric law
    double epsilon_used;      // 1/ceil(1/epsilon)
    std::int64_t piece_count; // constant pieces used (zero-level runs included)
};

// Approximate the geometric evaluation with ratio lambda by a piecewise
// constant one with at most (1/eps)^3 pieces and certified l1 error <= eps.
// Two constructions: truncation with a terminal lump when the lump is already
// small enough, otherwise sampling on blocks of ~eps^2/lambda stages (the
// truncation bound degrades near its case boundary, so the block construction
// takes over exactly when the certified truncation bound would exceed eps).
inline PwcApproximation approx_discounted_by_pwc(double lambda, double epsilon) {
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw std::invalid_argument("approx_discounted_by_pwc: lambda must lie in (0,1]");
    if (!(epsilon > 0.0 && epsilon <= 0.1 + 1e-15))
        throw std::invalid_argument("approx_discounted_by_pwc: epsilon must lie in (0, 1/10]");
    const std::int64_t inv = static_cast<std::int64_t>(std::ceil(1.0 / epsilon - 1e-9));
    const double eps = 1.0 / static_cast<double>(inv);
    const std::int64_t pieces = inv * inv * inv;
    if (pieces > (std::int64_t{1} << 23))
        throw std::invalid_argument("approx_discounted_by_pwc: epsilon too small, piece budget " +
                                    std::to_string(pieces) + " is impractical");

    const double rho = 1.0 - lambda;
    const double trunc_bound = 2.0 * std::pow(rho, static_cast<double>(pieces - 1));
    if (trunc_bound <= eps) {
        // Copy the geometric weights on stages 1..pieces-1 and lump the exact
        // remaining mass at stage `pieces`.
        std::vector<double> head(static_cast<std::size_t>(pieces), 0.0);
        KahanSum mass;
        double w = lambda;
        for (std::int64_t m = 1; m < pieces; ++m) {
            if ((m - 1) % 512 == 0)  // resync the running product against drift
                w = lambda * std::pow(rho, static_cast<double>(m - 1));
            head[static_cast<std::size_t>(m - 1)] = w;
            mass.add(w);
            w *= rho;
        }
        const double lump = std::max(0.0, 1.0 - mass.value());
        head.back() = lump;
        const double beyond = std::pow(rho, static_cast<double>(pieces));
        const double bound = std::abs(lump - lambda * std::pow(rho, static_cast<double>(pieces - 1))) + beyond;
        PwcApproximation out{Evaluation::from_parts(std::move(head)), bound, eps, pieces};
        if (out.certified_bound > eps)
            throw std::logic_error("approx_discounted_by_pwc: internal bound failure");
        return out;
    }

    // Block construction: stages 1..L get weight zero, then pieces-2 blocks of
    // length L sampled at their first stage, then one lump. Sampling at block
    // starts overestimates inside a block, which the leading zero block
    // compensates, keeping the lump nonnegative.
    const double L_real = std::floor(eps * eps / lambda);
    if (L_real < 1.0)
        throw std::logic_error("approx_discounted_by_pwc: block construction needs lambda <= eps^2");
    const std::int64_t L = static_cast<std::int64_t>(L_real);
    const std::int64_t nblocks = pieces - 2;
    const std::int64_t lump_stage = (nblocks + 1) * L + 1;
    std::vector<double> head(static_cast<std::size_t>(lump_stage), 0.0);
    KahanSum mass;
    for (std::int64_t r = 1; r <= nblocks; ++r) {
        const double wr = lambda * std::pow(rho, static_cast<double>(r * L));
        for (std::int64_t m = r * L + 1; m <= (r + 1) * L; ++m)
            head[static_cast<std::size_t>(m - 1)] = wr;
        mass.add(wr * static_cast<double>(L));
    }
    const double lump = std::max(0.0, 1.0 - mass.value());
    head.back() = lump;

    const double skipped_head = 1.0 - std::pow(rho, static_cast<double>(L));
    const double rel_gap = 1.0 - std::pow(rho, static_cast<double>(L - 1));
    const double lump_gap =
        std::abs(lump - lambda * std::pow(rho, static_cast<double>(lump_stage - 1)));
    const double beyond = std::pow(rho, static_cast<double>(lump_stage));
    const double bound = skipped_head + rel_gap * mass.value() + lump_gap + beyond;
    PwcApproximation out{Evaluation::from_parts(std::move(head)), bound, eps, pieces};
    if (out.certified_bound > eps)
        throw std::logic_error("approx_discounted_by_pwc: internal bound failure");
    return out;
}

enum class DistanceMode {
    exact_tiny,   // exhaustive over breakpoints and vertex level candidates
    upper_bound,  // greedy equal-mass segmentation, feasible witness
};

namespace detail {

// Cost of approximating weights[first..last) by a constant level plus linear
// interpolation helpers, via sorted prefix sums.
struct PieceCost {
    std::vector<double> sorted;
    std::vector<double> prefix;  // prefix[i] = sum of sorted[0..i)

    void build(const std::vector<double>& w, std::int64_t first, std::int64_t last) {
        sorted.assign(w.begin() + first, w.begin() + last);
        std::sort(sorted.begin(), sorted.end());
        prefix.assign(sorted.size() + 1, 0.0);
        for (std::size_t i = 0; i < sorted.size(); ++i) prefix[i + 1] = prefix[i] + sorted[i];
    }
    // sum over the piece of |w_m - a|
    double at(double a) const {
        const auto it = std::lower_bound(sorted.begin(), sorted.end(), a);
        const std::size_t k = static_cast<std::size_t>(it - sorted.begin());
        const double below = a * static_cast<double>(k) - prefix[k];
        const double above = (prefix.back() - prefix[k]) - a * static_cast<double>(sorted.size() - k);
        return below + above;
    }
};

inline double distance_to_pwc_exact(const Evaluation& theta, int p) {
    if (!theta.finite_support())
        throw std::invalid_argument("distance_to_pwc: exact mode requires finite support");
    const std::int64_t H = theta.support_end();
    if (H > 20) throw std::invalid_argument("distance_to_pwc: exact mode limited to support <= 20");
    if (p < 1 || p > 4) throw std::invalid_argument("distance_to_pwc: exact mode limited to p <= 4");
    if (H == 0) return 1.0;  // null evaluation vs any mass-1 sequence

    std::vector<double> w(static_cast<std::size_t>(H), 0.0);
    for (std::int64_t m = 1; m <= H; ++m) w[static_cast<std::size_t>(m - 1)] = theta.weight(m);
    std::vector<double> suffix(static_cast<std::size_t>(H) + 1, 0.0);
    for (std::int64_t m = H; m >= 1; --m)
        suffix[static_cast<std::size_t>(m - 1)] = suffix[static_cast<std::size_t>(m)] + w[static_cast<std::size_t>(m - 1)];

    // An optimal approximant never needs support beyond H: moving trailing
    // mass onto the last piece cannot increase the cost. So breakpoints range
    // over 1 = b_0 <= b_1 <= ... <= b_p <= H+1 (empty pieces emulate fewer
    // pieces). For fixed breakpoints, the best levels solve a separable l1 fit
    // under one mass equality; some optimum has every level but one at a data
    // value or 0, and the last level is pinned by the mass balance.
    double best = std::numeric_limits<double>::infinity();
    std::vector<std::int64_t> b(static_cast<std::size_t>(p) + 1, 1);
    std::vector<PieceCost> costs(static_cast<std::size_t>(p));
    std::vector<std::vector<double>> cands(static_cast<std::size_t>(p));

    auto eval_config = [&]() {
        // Nonempty pieces and their candidate levels.
        std::vector<int> live;
        for (int i = 0; i < p; ++i) {
            if (b[i + 1] > b[i]) {
                live.push_back(i);
                costs[i].build(w, b[i] - 1, b[i + 1] - 1);
                auto& c = cands[i];
                c.assign(w.begin() + (b[i] - 1), w.begin() + (b[i + 1] - 1));
                c.push_back(0.0);
                std::sort(c.begin(), c.end());
                c.erase(std::unique(c.begin(), c.end()), c.end());
            }
        }
        const double beyond = suffix[static_cast<std::size_t>(b[p] - 1)];
        if (live.empty()) return;  // no mass-1 approximant with empty support

        // Choose the balancing piece j; enumerate candidate levels on the rest.
        for (std::size_t jj = 0; jj < live.size(); ++jj) {
            const int j = live[jj];
            const double lenj = static_cast<double>(b[j + 1] - b[j]);
            std::vector<std::size_t> idx(live.size(), 0);
            while (true) {
                double cost = beyond, massed = 0.0;
                for (std::size_t t = 0; t < live.size(); ++t) {
                    if (t == jj) continue;
                    const int i = live[t];
                    const double a = cands[i][idx[t]];
                    cost += costs[i].at(a);
                    massed += a * static_cast<double>(b[i + 1] - b[i]);
                }
                const double aj = (1.0 - massed) / lenj;
                if (aj >= -1e-12) {
                    cost += costs[j].at(std::max(aj, 0.0));
                    best = std::min(best, cost);
                }
                // Advance the mixed-radix counter over non-balancing pieces.
                std::size_t t = 0;
                for (; t < live.size(); ++t) {
                    if (t == jj) continue;
                    if (++idx[t] < cands[live[t]].size()) break;
                    idx[t] = 0;
                }
                if (t == live.size()) break;
            }
        }
    };

    // Enumerate nondecreasing breakpoint tuples recursively.
    auto rec = [&](auto&& self, int i) -> void {
        if (i > p) {
            eval_config();
            return;
        }
        for (std::int64_t v = b[i - 1]; v <= H + 1; ++v) {
            b[static_cast<std::size_t>(i)] = v;
            self(self, i + 1);
        }
    };
    rec(rec, 1);
    return best;
}

inline double distance_to_pwc_upper(const Evaluation& theta, int p) {
    if (theta.is_zero()) return 1.0;
    std::int64_t M;
    double dumped = 0.0;
    if (theta.finite_support()) {
        M = std::max<std::int64_t>(theta.support_end(), 1);
    } else {
        // Cut where the remaining mass drops below 1e-12, capped; any mass
        // beyond the cap is folded into the last segment's level.
        const double rho = theta.tail()->rho;
        const std::int64_t H = theta.head_size();
        std::int64_t cut = H + 1;
        if (rho > 0.0) {
            const double a = theta.tail()->a;
            cut = H + 1 + static_cast<std::int64_t>(
                std::ceil(std::log(1e-12 * (1.0 - rho) / a) / std::log(rho)));
        }
        M = std::min<std::int64_t>(std::max<std::int64_t>(cut, 1), 2'000'000);
        dumped = theta.tail_mass_from(M + 1);
    }
    const int segs = static_cast<int>(std::min<std::int64_t>(p, M));
    // Segment boundaries at cumulative mass k/segs.
    std::vector<std::int64_t> bounds(static_cast<std::size_t>(segs) + 1, 1);
    bounds[static_cast<std::size_t>(segs)] = M + 1;
    {
        double cum = 0.0;
        std::int64_t m = 1;
        for (int k = 1; k < segs; ++k) {
            const double target = static_cast<double>(k) / static_cast<double>(segs);
            while (cum < target && m <= M - (segs - k)) cum += theta.weight(m++);
            bounds[static_cast<std::size_t>(k)] = std::max(m, bounds[static_cast<std::size_t>(k - 1)] + 1);
        }
    }
    std::vector<double> levels(static_cast<std::size_t>(segs), 0.0);
    for (int k = 0; k < segs; ++k) {
        KahanSum seg;
        for (std::int64_t m = bounds[static_cast<std::size_t>(k)]; m < bounds[static_cast<std::size_t>(k + 1)]; ++m)
            seg.add(theta.weight(m));
        if (k == segs - 1) seg.add(dumped);  // keep the witness at mass 1
        levels[static_cast<std::size_t>(k)] =
            seg.value() / static_cast<double>(bounds[static_cast<std::size_t>(k + 1)] - bounds[static_cast<std::size_t>(k)]);
    }
    const Evaluation witness = Evaluation::piecewise_constant(levels, bounds);
    return l1_distance(theta, witness);
}

}  // namespace detail

// Distance from theta to the family of p-piecewise-constant evaluations.
// exact_tiny is exhaustive (finite support <= 20, p <= 4); upper_bound returns
// the distance to a feasible greedy witness, an upper bound for any theta.
inline double distance_to_pwc(const Evaluation& theta, int p,
                              DistanceMode mode = DistanceMode::upper_bound) {
    if (p < 1) throw std::invalid_argument("distance_to_pwc: p must be >= 1");
    return mode == DistanceMode::exact_tiny ? detail::distance_to_pwc_exact(theta, p)
                                            : detail::distance_to_pwc_upper(theta, p);
}

// Impatience index against the p-piecewise-constant family: the larger of the
// sup weight and the (bounded) distance to the family.
inline double impatience(const Evaluation& theta, int p,
                         DistanceMode mode = DistanceMode::upper_bound) {
    return std::max(theta.sup_weight(), distance_to_pwc(theta, p, mode));
}

struct BlockDecomposition {
    struct Block {
        std::int64_t start;  // first stage of the block
        double lambda;       // stage discount at the block start
        double pi;           // remaining mass at the block start
    };
    std::vector<Block> blocks;
    double epsilon;
    std::int64_t final_stage;  // scan horizon: last stage with remaining mass >= epsilon
};

// Greedy decomposition of a decreasing evaluation into blocks on which the
// renormalized weights stay within a (1 +- eps) envelope of the geometric law
// seeded at the block start. Block ends are prefix-maximal: the envelope holds
// at every offset inside a block and fails just past it. The scan stops at the
// last stage whose remaining mass is at least eps.
inline BlockDecomposition block_decomposition(const Evaluation& theta, double epsilon) {
    if (!(epsilon > 0.0 && epsilon < 0.1 + 1e-15))
        throw std::invalid_argument("block_decomposition: epsilon must lie in (0, 1/10)");
    if (theta.is_zero())
        throw std::invalid_argument("block_decomposition: null evaluation");

    // Decreasing check: head, head-to-tail junction, and within-tail (automatic).
    const auto& head = theta.head();
    for (std::size_t i = 0; i + 1 < head.size(); ++i)
        if (head[i + 1] > head[i])
            throw std::invalid_argument("block_decomposition: weights must be non-increasing");
    if (theta.tail() && !head.empty() && theta.tail()->a > head.back())
        throw std::invalid_argument("block_decomposition: weights must be non-increasing");

    // final stage: last m with remaining mass >= epsilon.
    const std::int64_t H = theta.head_size();
    std::int64_t mtil = 1;
    if (theta.tail() && theta.tail()->rho > 0.0) {
        const double a = theta.tail()->a, rho = theta.tail()->rho;
        const double full = a / (1.0 - rho);
        if (full >= epsilon)
            mtil = H + 1 + static_cast<std::int64_t>(std::floor(std::log(epsilon * (1.0 - rho) / a) / std::log(rho)));
    }
    for (std::int64_t m = std::max<std::int64_t>(mtil, 1); m <= H + 1; ++m) {
        if (theta.tail_mass_from(m) >= epsilon) mtil = m; else break;
    }

    // Remaining-mass table over the scanned range.
    std::vector<double> rem(static_cast<std::size_t>(std::min(mtil, H)) + 2, 0.0);
    {
        KahanSum k;
        if (theta.tail()) k.add(theta.tail()->a / (1.0 - theta.tail()->rho));
        for (std::int64_t m = H; m >= 1; --m) {
            k.add(head[static_cast<std::size_t>(m - 1)]);
            if (m < static_cast<std::int64_t>(rem.size())) rem[static_cast<std::size_t>(m)] = k.value();
        }
    }
    auto remaining = [&](std::int64_t m) -> double {
        if (m <= H && m < static_cast<std::int64_t>(rem.size())) return rem[static_cast<std::size_t>(m)];
        return theta.tail_mass_from(m);
    };

    BlockDecomposition out;
    out.epsilon = epsilon;
    out.final_stage = mtil;
    std::int64_t t = 1;
    while (t <= mtil) {
        const double pi = remaining(t);
        const double w1 = theta.weight(t);
        if (!(w1 > 0.0))
            throw std::invalid_argument("block_decomposition: zero weight at stage " + std::to_string(t) +
                                        " inside the scanned range");
        const double lam = std::clamp(w1 / pi, 0.0, 1.0);
        out.blocks.push_back({t, lam, pi});
        // Longest prefix on which the envelope holds.
        double geo = lam;
        std::int64_t len = 0;
        for (std::int64_t off = 1; t + off - 1 <= mtil; ++off) {
            if ((off - 1) % 1024 == 0 && off > 1)
                geo = lam * std::pow(1.0 - lam, static_cast<double>(off - 1));
            const double mu = theta.weight(t + off - 1) / pi;
            if (!((1.0 - epsilon) * mu <= geo && geo <= (1.0 + epsilon) * mu)) break;
            len = off;
            geo *= (1.0 - lam);
        }
        if (len == 0 || t + len > mtil) break;  // envelope ran through the horizon: last block
        t += len;
    }
    return out;
}

}  // namespace wsg
