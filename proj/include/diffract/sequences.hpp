#pragma once
// Generators for the non-interacting 1D and 2D models: Bernoulli chains,
// substitution sequences (Rudin-Shapiro, Thue-Morse, Fibonacci), circle
// sequences and random interval tilings.

#include <bit>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "diffract/core.hpp"

namespace diffract {

/// Two-letter scattering alphabet with letter probabilities.
struct TwoLetterWeights {
    cplx h1{1.0, 0.0};
    cplx h2{0.0, 0.0};
    double p1 = 0.5;
    double p2 = 0.5;

    void validate() const {
        if (p1 < 0.0 || p1 > 1.0 || p2 < 0.0 || p2 > 1.0 || std::abs(p1 + p2 - 1.0) > 1e-12)
            throw DomainError("two-letter probabilities must lie in [0,1] and sum to 1");
    }
    [[nodiscard]] cplx mean() const { return p1 * h1 + p2 * h2; }
    /// <|h|^2> - |<h>|^2
    [[nodiscard]] double variance() const {
        return p1 * std::norm(h1) + p2 * std::norm(h2) - std::norm(mean());
    }
};

/// Parameters of the circle sequence x_n - x_{n-1} = 1 + xi * 1_[0,beta)(n alpha mod 1).
struct CircleParams {
    double alpha = (std::sqrt(5.0) - 1.0) / 2.0;
    double beta = 2.0 - kTau;
    double xi = kTau - 1.0;
    double x0 = 0.0;

    void validate() const {
        if (!(beta > 0.0 && beta < 1.0)) throw DomainError("circle sequence needs 0 < beta < 1");
        if (!std::isfinite(alpha) || !std::isfinite(xi) || !std::isfinite(x0))
            throw DomainError("circle sequence parameters must be finite");
    }
};

inline WeightedComb bernoulli_chain(std::size_t n, const TwoLetterWeights& w, SeededRng& rng) {
    w.validate();
    if (n == 0) throw DomainError("bernoulli_chain needs n >= 1");
    LatticeWeights lw;
    lw.shape = {n, 1};
    lw.values.resize(n);
    for (auto& v : lw.values) v = rng.bernoulli(w.p1) ? w.h1 : w.h2;
    return comb_from_lattice_weights(lw);
}

namespace detail {
inline std::int64_t floor_div4(std::int64_t n) { return n >= 0 ? n / 4 : -((-n + 3) / 4); }
inline bool odd(std::int64_t n) { return (n % 2) != 0; }

// One step of the recursion: value at n from the value at m = floor(n/4).
inline int rs_step(std::int64_t n, int eta_m) {
    const std::int64_t m = floor_div4(n);
    const std::int64_t l = n - 4 * m;
    if (l < 2) return eta_m;
    return odd(m + l + eta_m) ? 1 : 0;
}
}  // namespace detail

/// Rudin-Shapiro occupation eta(n) in {0,1}, evaluated with a caller-owned memo.
///
/// eta(0) = 1, eta(-1) = 0, eta(4m) = eta(4m+1) = eta(m),
/// eta(4m+l) = (1 - (-1)^(m + l + eta(m))) / 2 for l = 2, 3.
/// |floor(n/4)| < |n| away from the fixed points 0 and -1, so the chain terminates.
inline int rudin_shapiro_value(std::int64_t n, std::unordered_map<std::int64_t, int>& memo) {
    if (n == 0) return 1;
    if (n == -1) return 0;
    if (auto it = memo.find(n); it != memo.end()) return it->second;
    std::vector<std::int64_t> chain;
    std::int64_t cur = n;
    int base = 0;
    while (true) {
        if (cur == 0) { base = 1; break; }
        if (cur == -1) { base = 0; break; }
        if (auto it = memo.find(cur); it != memo.end()) { base = it->second; break; }
        chain.push_back(cur);
        cur = detail::floor_div4(cur);
    }
    int value = base;
    for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
        value = detail::rs_step(*it, value);
        memo.emplace(*it, value);
    }
    return value;
}

/// Rudin-Shapiro lattice gas on the integer interval [a, b).
inline WeightedComb rudin_shapiro(std::int64_t a, std::int64_t b) {
    if (!(a < b)) throw DomainError("rudin_shapiro needs a < b");
    const auto n = static_cast<std::size_t>(b - a);
    std::unordered_map<std::int64_t, int> memo;
    memo.reserve(n / 2 + 16);
    std::vector<Vec2> pts(n);
    std::vector<cplx> ws(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::int64_t site = a + static_cast<std::int64_t>(i);
        pts[i] = {static_cast<double>(site), 0.0};
        ws[i] = static_cast<double>(rudin_shapiro_value(site, memo));
    }
    Extent ext;
    ext.origin = {static_cast<double>(a), 0.0};
    ext.size = {static_cast<double>(n), 1.0};
    return WeightedComb(1, std::move(pts), std::move(ws), ext, LatticeInfo{1.0, {n, 1}, false}, {}, false);
}

/// Letter i of the Thue-Morse fixed point starting with a (a -> ab, b -> ba):
/// true for b, i.e. odd binary digit sum.
inline bool thue_morse_letter_b(std::uint64_t i) { return (std::popcount(i) & 1) != 0; }

/// First n letters of Thue-Morse; signed maps a -> +1, b -> -1, otherwise a -> 1, b -> 0.
inline WeightedComb thue_morse(std::size_t n, bool signed_weights) {
    if (n == 0) throw DomainError("thue_morse needs n >= 1");
    LatticeWeights lw;
    lw.shape = {n, 1};
    lw.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool b = thue_morse_letter_b(i);
        lw.values[i] = signed_weights ? (b ? -1.0 : 1.0) : (b ? 0.0 : 1.0);
    }
    return comb_from_lattice_weights(lw);
}

/// 2^k x 2^k Thue-Morse square from the 2D substitution, built as the product
/// w(i, j) = t(i) * t(j) of signed 1D letters. Unsigned maps a -> 1, b -> 0.
inline WeightedComb thue_morse_2d(unsigned k, bool signed_weights) {
    if (k < 1) throw DomainError("thue_morse_2d needs depth k >= 1");
    if (k > 14) throw DomainError("thue_morse_2d depth too large");
    const std::size_t n = std::size_t{1} << k;
    LatticeWeights lw;
    lw.dimension = 2;
    lw.shape = {n, n};
    lw.values.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ti = thue_morse_letter_b(i) ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double tj = thue_morse_letter_b(j) ? -1.0 : 1.0;
            const double s = ti * tj;
            lw.values[i * n + j] = signed_weights ? s : (s > 0 ? 1.0 : 0.0);
        }
    }
    return comb_from_lattice_weights(lw);
}

/// Fibonacci tiling: the one-sided fixed point L S L L S L S L ... of L -> LS, S -> L
/// (equivalently of its square L -> LSL, S -> LS), |L| = tau, |S| = 1, unit
/// scatterers on left endpoints starting at 0. The extent ends at the right end of
/// the last tile.
inline WeightedComb fibonacci_chain(std::size_t n) {
    if (n == 0) throw DomainError("fibonacci_chain needs n >= 1");
    std::vector<bool> word{true};  // true = L
    while (word.size() < n) {
        std::vector<bool> next;
        next.reserve(word.size() * 2);
        for (bool l : word) {
            next.push_back(true);
            if (l) next.push_back(false);
        }
        word = std::move(next);
    }
    std::vector<Vec2> pts(n);
    std::vector<WeightedComb::TauCoord> tc(n);
    WeightedComb::TauCoord pos{};
    for (std::size_t i = 0; i < n; ++i) {
        tc[i] = pos;
        pts[i] = {pos.value(), 0.0};
        if (word[i]) ++pos.b; else ++pos.a;
    }
    Extent ext;
    ext.size = {pos.value(), 1.0};
    return WeightedComb(1, std::move(pts), std::vector<cplx>(n, 1.0), ext, std::nullopt, std::move(tc), false);
}

namespace detail {
/// Indicator 1_[0,beta)(m alpha mod 1); the boundary point 0 counts as inside.
inline bool circle_indicator(std::int64_t m, double alpha, double beta) {
    const long double t = static_cast<long double>(m) * static_cast<long double>(alpha);
    const long double frac = t - std::floor(t);
    return frac >= 0.0L && frac < static_cast<long double>(beta);
}
}  // namespace detail

/// Circle sequence positions x_0 .. x_{n-1}, evaluated in closed form
/// x_j = x0 + j + xi * #{1 <= m <= j : m alpha mod 1 in [0, beta)}.
/// The extent runs from x0 to x_n. When xi = tau - 1 the positions are also
/// stored exactly in Z[tau].
inline WeightedComb circle_sequence(std::size_t n, const CircleParams& p) {
    p.validate();
    if (n == 0) throw DomainError("circle_sequence needs n >= 1");
    if (p.xi <= -1.0) throw DomainError("circle sequence gaps must be positive");
    const bool tau_exact = std::abs(p.xi - (kTau - 1.0)) < 1e-15 && p.x0 == 0.0;
    std::vector<Vec2> pts(n);
    std::vector<WeightedComb::TauCoord> tc;
    if (tau_exact) tc.resize(n);
    std::int64_t hits = 0;
    auto position = [&](std::int64_t j) {
        return p.x0 + static_cast<double>(j) + p.xi * static_cast<double>(hits);
    };
    for (std::size_t j = 0; j < n; ++j) {
        if (j > 0 && detail::circle_indicator(static_cast<std::int64_t>(j), p.alpha, p.beta)) ++hits;
        pts[j] = {position(static_cast<std::int64_t>(j)), 0.0};
        if (tau_exact) tc[j] = {static_cast<std::int64_t>(j) - hits, hits};
    }
    if (detail::circle_indicator(static_cast<std::int64_t>(n), p.alpha, p.beta)) ++hits;
    const double end = position(static_cast<std::int64_t>(n));
    Extent ext;
    ext.origin = {p.x0, 0.0};
    ext.size = {end - p.x0, 1.0};
    return WeightedComb(1, std::move(pts), std::vector<cplx>(n, 1.0), ext, std::nullopt, std::move(tc), false);
}

/// Left endpoints of n i.i.d. tiles: length tau with probability p, else 1.
inline WeightedComb random_interval_tiling(std::size_t n, double p, SeededRng& rng) {
    if (n == 0) throw DomainError("random_interval_tiling needs n >= 1");
    if (p < 0.0 || p > 1.0) throw DomainError("long-tile probability must lie in [0,1]");
    std::vector<Vec2> pts(n);
    std::vector<WeightedComb::TauCoord> tc(n);
    WeightedComb::TauCoord pos{};
    for (std::size_t i = 0; i < n; ++i) {
        tc[i] = pos;
        pts[i] = {pos.value(), 0.0};
        if (rng.bernoulli(p)) ++pos.b; else ++pos.a;
    }
    Extent ext;
    ext.size = {pos.value(), 1.0};
    return WeightedComb(1, std::move(pts), std::vector<cplx>(n, 1.0), ext, std::nullopt, std::move(tc), false);
}

}  // namespace diffract
