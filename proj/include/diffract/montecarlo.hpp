#pragma once
// Interacting lattice models on periodic tori: the anisotropic Ising lattice gas
// (single-site Metropolis, checkerboard order) and square ice (directed-walk loop
// updates), together with exact small-size enumerators used as oracles.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffract/core.hpp"

namespace diffract {

// ---------------------------------------------------------------------------
// Ising lattice gas

/// (sinh 2K1 sinh 2K2)^-1: > 1 above the critical temperature, < 1 below.
inline double critical_condition(double K1, double K2) {
    if (!(K1 > 0.0) || !(K2 > 0.0)) throw DomainError("critical_condition needs K1, K2 > 0");
    return 1.0 / (std::sinh(2.0 * K1) * std::sinh(2.0 * K2));
}

struct IsingParams {
    std::size_t L1 = 16;
    std::size_t L2 = 16;
    double K1 = 0.35;  // coupling along x (first index)
    double K2 = 0.1;   // coupling along y (second index)
    std::size_t equilibration_sweeps = 1000;
    std::size_t measurement_interval = 10;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    /// Ordered start restricted to the positive-magnetization sector.
    /// Defaults to true exactly when the couplings lie below the critical temperature.
    std::optional<bool> ordered;
    /// Allows K = 0 (used by oracle tests); physical runs require K > 0.
    bool allow_zero_coupling = false;

    void validate() const {
        const bool ok_k = allow_zero_coupling ? (K1 >= 0.0 && K2 >= 0.0) : (K1 > 0.0 && K2 > 0.0);
        if (!ok_k) throw DomainError("Ising couplings must be positive");
        if (L1 < 2 || L2 < 2 || L1 % 2 || L2 % 2)
            throw DomainError("Ising torus sides must be even and >= 2 (checkerboard updates)");
        if (measurement_interval == 0) throw DomainError("measurement interval must be >= 1");
    }
    [[nodiscard]] bool ordered_phase() const {
        if (ordered) return *ordered;
        if (K1 <= 0.0 || K2 <= 0.0) return false;
        return critical_condition(K1, K2) < 1.0;
    }
};

struct IsingObservables {
    double energy = 0.0;         // -(K1 sum s s_{+x} + K2 sum s s_{+y}) / V
    double nn_x = 0.0;           // <s_r s_{r+e1}> averaged over sites
    double nn_y = 0.0;           // <s_r s_{r+e2}>
    double magnetization = 0.0;  // sum s / V
    [[nodiscard]] double occupation() const { return 0.5 * (1.0 + magnetization); }
};

/// Single-site Metropolis for weight exp(K1 sum s s_{+x} + K2 sum s s_{+y}).
///
/// Sites are visited in checkerboard order. In the ordered phase the chain starts
/// all up; after every sweep a configuration with negative magnetization is
/// replaced by its global spin flip, which keeps the chain in the positive sector
/// and leaves all flip-invariant averages untouched.
class IsingSampler {
public:
    explicit IsingSampler(IsingParams params)
        : p_(params), rng_(params.seed, params.stream), spins_(params.L1 * params.L2, 1) {
        p_.validate();
        positive_sector_ = p_.ordered_phase();
        if (!positive_sector_)
            for (auto& s : spins_) s = rng_.bernoulli(0.5) ? 1 : -1;
        for (int up = 0; up < 2; ++up)
            for (int hx = -2; hx <= 2; hx += 2)
                for (int hy = -2; hy <= 2; hy += 2) {
                    const double s = up ? 1.0 : -1.0;
                    const double dE = 2.0 * s * (p_.K1 * hx + p_.K2 * hy);
                    accept_[table_index(up ? 1 : -1, hx, hy)] = dE <= 0.0 ? 1.0 : std::exp(-dE);
                }
    }

    [[nodiscard]] const IsingParams& params() const { return p_; }
    [[nodiscard]] std::span<const std::int8_t> spins() const { return spins_; }
    [[nodiscard]] std::int8_t spin(std::size_t x, std::size_t y) const { return spins_[x * p_.L2 + y]; }

    void sweep() {
        const std::size_t L1 = p_.L1, L2 = p_.L2;
        for (std::size_t parity = 0; parity < 2; ++parity) {
            for (std::size_t x = 0; x < L1; ++x) {
                const std::size_t xl = (x + L1 - 1) % L1, xr = (x + 1) % L1;
                for (std::size_t y = (x + parity) % 2; y < L2; y += 2) {
                    const std::size_t yd = (y + L2 - 1) % L2, yu = (y + 1) % L2;
                    auto& s = spins_[x * L2 + y];
                    const int hx = spins_[xl * L2 + y] + spins_[xr * L2 + y];
                    const int hy = spins_[x * L2 + yd] + spins_[x * L2 + yu];
                    const double a = accept_[table_index(s, hx, hy)];
                    if (a >= 1.0 || rng_.uniform() < a) s = static_cast<std::int8_t>(-s);
                }
            }
        }
        if (positive_sector_) {
            long m = 0;
            for (auto s : spins_) m += s;
            if (m < 0)
                for (auto& s : spins_) s = static_cast<std::int8_t>(-s);
        }
        ++sweeps_done_;
    }

    void sweeps(std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) sweep();
    }
    void equilibrate() { sweeps(p_.equilibration_sweeps); }
    /// Advances by one measurement interval.
    void advance() { sweeps(p_.measurement_interval); }
    [[nodiscard]] std::size_t sweeps_done() const { return sweeps_done_; }

    [[nodiscard]] IsingObservables observables() const {
        const std::size_t L1 = p_.L1, L2 = p_.L2;
        long bx = 0, by = 0, m = 0;
        for (std::size_t x = 0; x < L1; ++x)
            for (std::size_t y = 0; y < L2; ++y) {
                const int s = spins_[x * L2 + y];
                bx += s * spins_[((x + 1) % L1) * L2 + y];
                by += s * spins_[x * L2 + (y + 1) % L2];
                m += s;
            }
        const double v = static_cast<double>(L1 * L2);
        IsingObservables o;
        o.nn_x = static_cast<double>(bx) / v;
        o.nn_y = static_cast<double>(by) / v;
        o.energy = -(p_.K1 * o.nn_x + p_.K2 * o.nn_y);
        o.magnetization = static_cast<double>(m) / v;
        return o;
    }

    /// Lattice gas comb: occupation (1 + s) / 2 on the unit-spaced periodic torus.
    [[nodiscard]] WeightedComb comb() const {
        LatticeWeights lw;
        lw.dimension = 2;
        lw.shape = {p_.L1, p_.L2};
        lw.values.resize(spins_.size());
        for (std::size_t i = 0; i < spins_.size(); ++i) lw.values[i] = spins_[i] > 0 ? 1.0 : 0.0;
        return comb_from_lattice_weights(lw, 1.0, true);
    }

private:
    static std::size_t table_index(int s, int hx, int hy) {
        return static_cast<std::size_t>((s > 0 ? 9 : 0) + (hx / 2 + 1) * 3 + (hy / 2 + 1));
    }

    IsingParams p_;
    SeededRng rng_;
    std::vector<std::int8_t> spins_;
    std::array<double, 18> accept_{};
    bool positive_sector_ = false;
    std::size_t sweeps_done_ = 0;
};

/// Equilibrated lattice-gas configuration.
inline WeightedComb ising_sample(const IsingParams& params) {
    IsingSampler s(params);
    s.equilibrate();
    return s.comb();
}

/// `count` configurations separated by the measurement interval after equilibration.
inline std::vector<WeightedComb> ising_measurements(const IsingParams& params, std::size_t count) {
    IsingSampler s(params);
    s.equilibrate();
    std::vector<WeightedComb> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        s.advance();
        out.push_back(s.comb());
    }
    return out;
}

/// Exact Boltzmann averages on a tiny torus.
struct IsingExact {
    std::size_t L1 = 0, L2 = 0;
    double energy = 0.0;  // per site, same convention as IsingObservables
    double nn_x = 0.0;
    double nn_y = 0.0;
    /// Connected pair correlation C(dx, dy) = <s_r s_{r+d}> - <s>^2, row-major (dx * L2 + dy).
    std::vector<double> correlation;
    [[nodiscard]] double corr(std::size_t dx, std::size_t dy) const { return correlation[dx * L2 + dy]; }
};

/// Enumerates all 2^(L1 L2) spin states (L1 L2 <= 16). Couplings may be zero.
inline IsingExact ising_exact_pair_correlations(std::size_t L1, std::size_t L2, double K1, double K2) {
    if (L1 == 0 || L2 == 0 || L1 * L2 > 16) throw DomainError("exact Ising enumeration capped at L1*L2 <= 16");
    const std::size_t n = L1 * L2;
    const std::uint32_t states = 1u << n;
    auto spin = [](std::uint32_t st, std::size_t i) { return ((st >> i) & 1u) ? 1 : -1; };

    // Log weights first, then normalize with the maximum for stability.
    std::vector<double> logw(states);
    std::vector<int> bxs(states), bys(states);
    double maxlog = -1e300;
    for (std::uint32_t st = 0; st < states; ++st) {
        int bx = 0, by = 0;
        for (std::size_t x = 0; x < L1; ++x)
            for (std::size_t y = 0; y < L2; ++y) {
                const int s = spin(st, x * L2 + y);
                bx += s * spin(st, ((x + 1) % L1) * L2 + y);
                by += s * spin(st, x * L2 + (y + 1) % L2);
            }
        bxs[st] = bx;
        bys[st] = by;
        logw[st] = K1 * bx + K2 * by;
        maxlog = std::max(maxlog, logw[st]);
    }
    IsingExact r;
    r.L1 = L1;
    r.L2 = L2;
    r.correlation.assign(n, 0.0);
    double z = 0.0, ex = 0.0, ey = 0.0, mag = 0.0;
    for (std::uint32_t st = 0; st < states; ++st) {
        const double w = std::exp(logw[st] - maxlog);
        z += w;
        ex += w * bxs[st];
        ey += w * bys[st];
        int m = 0;
        for (std::size_t i = 0; i < n; ++i) m += spin(st, i);
        mag += w * m;
        for (std::size_t dx = 0; dx < L1; ++dx)
            for (std::size_t dy = 0; dy < L2; ++dy) {
                int c = 0;
                for (std::size_t x = 0; x < L1; ++x)
                    for (std::size_t y = 0; y < L2; ++y)
                        c += spin(st, x * L2 + y) * spin(st, ((x + dx) % L1) * L2 + (y + dy) % L2);
                r.correlation[dx * L2 + dy] += w * c;
            }
    }
    const double v = static_cast<double>(n);
    r.nn_x = ex / z / v;
    r.nn_y = ey / z / v;
    r.energy = -(K1 * r.nn_x + K2 * r.nn_y);
    const double m1 = mag / z / v;
    for (auto& c : r.correlation) c = c / z / v - m1 * m1;
    return r;
}

// ---------------------------------------------------------------------------
// Square ice

/// Hydrogen placement on the bonds of an L x L torus of oxygens.
///
/// Vertex (x, y) has index x * L + y. h[i] describes the bond (x, y) -> (x+1, y),
/// v[i] the bond (x, y) -> (x, y+1). A 0 puts the hydrogen at distance 1/3 from
/// the lower-coordinate oxygen, a 1 at distance 1/3 from the other one. Read as
/// an arrow pointing at the oxygen the hydrogen belongs to, 1 means the arrow
/// points in the +x / +y direction. One hydrogen per bond holds by construction.
struct IceConfiguration {
    std::size_t L = 0;
    std::vector<std::uint8_t> h;
    std::vector<std::uint8_t> v;
    bool ice_valid = false;  // claimed by the producer; check with ice_rules_check

    [[nodiscard]] std::size_t vertex(std::size_t x, std::size_t y) const { return (x % L) * L + (y % L); }
    /// Number of hydrogens adjacent to oxygen (x, y).
    [[nodiscard]] int hydrogens_at(std::size_t x, std::size_t y) const {
        const std::size_t i = vertex(x, y);
        const std::size_t left = vertex(x + L - 1, y), down = vertex(x, y + L - 1);
        return (h[left] == 1) + (h[i] == 0) + (v[down] == 1) + (v[i] == 0);
    }
    friend bool operator==(const IceConfiguration& a, const IceConfiguration& b) {
        return a.L == b.L && a.h == b.h && a.v == b.v;
    }
};

/// Uniform ferroelectric state: every arrow points east or north.
inline IceConfiguration ferroelectric_ice(std::size_t L) {
    if (L < 1) throw DomainError("ice torus needs L >= 1");
    IceConfiguration c;
    c.L = L;
    c.h.assign(L * L, 1);
    c.v.assign(L * L, 1);
    c.ice_valid = true;
    return c;
}

struct IceRulesReport {
    std::size_t vertices = 0;
    std::size_t rule1_violations = 0;  // oxygens without exactly two adjacent hydrogens
    std::size_t rule2_violations = 0;  // bonds without exactly one hydrogen; structurally zero
    [[nodiscard]] bool ok() const { return rule1_violations == 0 && rule2_violations == 0; }
};

inline IceRulesReport ice_rules_check(const IceConfiguration& c) {
    IceRulesReport r;
    r.vertices = c.L * c.L;
    for (std::size_t x = 0; x < c.L; ++x)
        for (std::size_t y = 0; y < c.L; ++y)
            if (c.hydrogens_at(x, y) != 2) ++r.rule1_violations;
    return r;
}

/// Each bond's hydrogen placed independently with probability 1/2.
inline IceConfiguration bernoulli_hydrogens(std::size_t L, SeededRng& rng) {
    if (L < 2) throw DomainError("bernoulli_hydrogens needs L >= 2");
    IceConfiguration c;
    c.L = L;
    c.h.resize(L * L);
    c.v.resize(L * L);
    for (auto& b : c.h) b = rng.bernoulli(0.5) ? 1 : 0;
    for (auto& b : c.v) b = rng.bernoulli(0.5) ? 1 : 0;
    c.ice_valid = false;
    return c;
}

/// Loop-update Monte Carlo on the six-vertex (ice) manifold.
///
/// Two rejection-free moves, both in detailed balance with the uniform
/// distribution over ice states:
///
/// - short loop: start at a uniformly chosen oxygen and repeatedly leave through
///   one of its two outgoing arrows (probability 1/2 each). When the walk reaches a
///   vertex already on its path, the closed loop from that vertex on is reversed
///   and the tail is discarded.
/// - long loop: start at a uniformly chosen oxygen, reverse one of its outgoing
///   arrows and keep walking, reversing each traversed arrow and leaving every
///   vertex through one of the two arrows that pointed out of it before arrival,
///   until the walk returns to the start. The path may cross itself.
///
/// Short loops seldom wind around a large torus, so on their own they leave the
/// net arrow flux (polarization) of the start state almost frozen. A sweep
/// therefore alternates the two moves.
class IceSampler {
public:
    IceSampler(std::size_t L, SeededRng rng) : IceSampler(ferroelectric_ice(L), std::move(rng)) {}

    IceSampler(IceConfiguration start, SeededRng rng) : c_(std::move(start)), rng_(std::move(rng)) {
        if (c_.L < 2) throw DomainError("ice sampler needs L >= 2");
        if (!ice_rules_check(c_).ok()) throw DomainError("ice sampler needs a valid ice start state");
        c_.ice_valid = true;
        on_path_.assign(c_.L * c_.L, -1);
    }

    [[nodiscard]] const IceConfiguration& config() const { return c_; }

    /// Short-loop move; returns the number of reversed arrows.
    std::size_t loop_move() {
        const std::size_t L = c_.L;
        path_.clear();
        steps_.clear();
        std::size_t x = rng_.below(L), y = rng_.below(L);
        while (true) {
            const std::size_t cur = x * L + y;
            if (on_path_[cur] >= 0) {
                const auto start = static_cast<std::size_t>(on_path_[cur]);
                for (std::size_t s = start; s < steps_.size(); ++s) *steps_[s] ^= 1u;
                for (auto vtx : path_) on_path_[vtx] = -1;
                return steps_.size() - start;
            }
            on_path_[cur] = static_cast<std::int64_t>(steps_.size());
            path_.push_back(cur);
            const auto out = outgoing(x, y, nullptr);
            if (out.count != 2) throw std::logic_error("ice sampler left the ice manifold");
            const auto pick = rng_.below(2);
            steps_.push_back(out.bond[pick]);
            x = out.dest[pick][0];
            y = out.dest[pick][1];
        }
    }

    /// Long-loop move; returns the number of arrow reversals performed.
    std::size_t long_loop_move() {
        const std::size_t L = c_.L;
        const std::size_t sx = rng_.below(L), sy = rng_.below(L);
        std::size_t x = sx, y = sy;
        std::uint8_t* arrived = nullptr;
        std::size_t flips = 0;
        do {
            // Outgoing arrows as they were before the arrival bond was reversed.
            const auto out = outgoing(x, y, arrived);
            if (out.count != 2) throw std::logic_error("ice sampler left the ice manifold");
            const auto pick = rng_.below(2);
            *out.bond[pick] ^= 1u;
            ++flips;
            arrived = out.bond[pick];
            x = out.dest[pick][0];
            y = out.dest[pick][1];
        } while (x != sx || y != sy);
        return flips;
    }

    /// A fixed schedule: L^2 / 4 short loops interleaved with 4 long loops, which
    /// reverses roughly 2 L^2 arrows (the number of bonds) on average.
    void sweep() {
        const std::size_t shorts = std::max<std::size_t>(4, c_.L * c_.L / 4);
        for (std::size_t block = 0; block < 4; ++block) {
            for (std::size_t i = block * shorts / 4; i < (block + 1) * shorts / 4; ++i) loop_move();
            long_loop_move();
        }
    }
    void sweeps(std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) sweep();
    }

private:
    struct Outgoing {
        int count = 0;
        std::array<std::uint8_t*, 4> bond{};
        std::array<std::array<std::size_t, 2>, 4> dest{};
    };

    // Arrows pointing out of (x, y); `exclude` is skipped (the bond just reversed
    // on arrival, which now points out but did not before).
    Outgoing outgoing(std::size_t x, std::size_t y, const std::uint8_t* exclude) {
        const std::size_t L = c_.L;
        const std::size_t cur = x * L + y;
        const std::size_t xl = (x + L - 1) % L, xr = (x + 1) % L;
        const std::size_t yd = (y + L - 1) % L, yu = (y + 1) % L;
        Outgoing o;
        auto add = [&](std::uint8_t* b, std::size_t dx, std::size_t dy) {
            if (b == exclude) return;
            o.bond[static_cast<std::size_t>(o.count)] = b;
            o.dest[static_cast<std::size_t>(o.count)] = {dx, dy};
            ++o.count;
        };
        if (c_.h[cur] == 1) add(&c_.h[cur], xr, y);
        if (c_.h[xl * L + y] == 0) add(&c_.h[xl * L + y], xl, y);
        if (c_.v[cur] == 1) add(&c_.v[cur], x, yu);
        if (c_.v[x * L + yd] == 0) add(&c_.v[x * L + yd], x, yd);
        return o;
    }

    IceConfiguration c_;
    SeededRng rng_;
    std::vector<std::int64_t> on_path_;
    std::vector<std::size_t> path_;
    std::vector<std::uint8_t*> steps_;
};

/// Ice configuration after `sweeps` loop sweeps from the ferroelectric state.
inline IceConfiguration ice_sample(std::size_t L, std::size_t sweeps, SeededRng rng) {
    if (L < 2 || L % 2) throw DomainError("ice_sample needs an even L >= 2");
    IceSampler s(L, std::move(rng));
    s.sweeps(sweeps);
    return s.config();
}

/// Oxygens with weight hO on Z^2 and one hydrogen of weight hH per bond at
/// distance 1/3 from its oxygen. Points sit on the periodic (1/3)Z^2 grid.
inline WeightedComb ice_to_comb(const IceConfiguration& c, double hO, double hH) {
    const std::size_t L = c.L;
    if (L == 0 || c.h.size() != L * L || c.v.size() != L * L) throw DomainError("malformed ice configuration");
    std::vector<Vec2> pts;
    std::vector<cplx> ws;
    pts.reserve(3 * L * L);
    ws.reserve(3 * L * L);
    for (std::size_t x = 0; x < L; ++x)
        for (std::size_t y = 0; y < L; ++y) {
            const std::size_t i = x * L + y;
            const double fx = static_cast<double>(3 * x), fy = static_cast<double>(3 * y);
            pts.push_back({fx / 3.0, fy / 3.0});
            ws.emplace_back(hO);
            pts.push_back({(fx + 1.0 + c.h[i]) / 3.0, fy / 3.0});
            ws.emplace_back(hH);
            pts.push_back({fx / 3.0, (fy + 1.0 + c.v[i]) / 3.0});
            ws.emplace_back(hH);
        }
    Extent ext;
    ext.dimension = 2;
    ext.size = {static_cast<double>(L), static_cast<double>(L)};
    LatticeInfo info{1.0 / 3.0, {3 * L, 3 * L}, true};
    return WeightedComb(2, std::move(pts), std::move(ws), ext, info, {}, false);
}

// ---------------------------------------------------------------------------
// Exact ice state counts

__extension__ typedef unsigned __int128 IceCount;

inline std::string to_string(IceCount v) {
    if (v == 0) return "0";
    std::string s;
    while (v > 0) {
        s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    std::reverse(s.begin(), s.end());
    return s;
}

/// Bit code of a configuration on an L1 x L2 torus: h of vertex i at bit i,
/// v of vertex i at bit L1*L2 + i.
inline std::uint64_t encode_ice(const IceConfiguration& c) {
    const std::size_t n = c.L * c.L;
    if (2 * n > 64) throw DomainError("ice configuration too large to encode");
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < n; ++i) {
        code |= static_cast<std::uint64_t>(c.h[i] & 1u) << i;
        code |= static_cast<std::uint64_t>(c.v[i] & 1u) << (n + i);
    }
    return code;
}

namespace detail {
// Depth-first assignment of bonds in index order with vertex checks as soon as
// all four bonds of a vertex are fixed. Visits every ice state.
class IceEnumerator {
public:
    IceEnumerator(std::size_t L1, std::size_t L2) : L1_(L1), L2_(L2), n_(L1 * L2), bits_(2 * L1 * L2, 0) {
        ready_.resize(2 * n_);
        for (std::size_t x = 0; x < L1; ++x)
            for (std::size_t y = 0; y < L2; ++y) {
                const std::size_t i = x * L2 + y;
                const std::size_t last = std::max({h_bit(i), v_bit(i), h_bit(((x + L1 - 1) % L1) * L2 + y),
                                                   v_bit(x * L2 + (y + L2 - 1) % L2)});
                ready_[last].push_back(i);
            }
    }

    void run(const std::function<void(const std::vector<std::uint8_t>&)>& visit) { dfs(0, visit); }

    [[nodiscard]] std::size_t h_bit(std::size_t i) const { return 2 * i; }
    [[nodiscard]] std::size_t v_bit(std::size_t i) const { return 2 * i + 1; }

private:
    bool vertex_ok(std::size_t i) const {
        const std::size_t x = i / L2_, y = i % L2_;
        const std::size_t left = ((x + L1_ - 1) % L1_) * L2_ + y;
        const std::size_t down = x * L2_ + (y + L2_ - 1) % L2_;
        const int in = (bits_[h_bit(left)] == 1) + (bits_[h_bit(i)] == 0) + (bits_[v_bit(down)] == 1) +
                       (bits_[v_bit(i)] == 0);
        return in == 2;
    }
    void dfs(std::size_t e, const std::function<void(const std::vector<std::uint8_t>&)>& visit) {
        if (e == bits_.size()) {
            visit(bits_);
            return;
        }
        for (std::uint8_t b = 0; b < 2; ++b) {
            bits_[e] = b;
            bool ok = true;
            for (auto i : ready_[e])
                if (!vertex_ok(i)) { ok = false; break; }
            if (ok) dfs(e + 1, visit);
        }
        bits_[e] = 0;
    }

    std::size_t L1_, L2_, n_;
    std::vector<std::uint8_t> bits_;
    std::vector<std::vector<std::size_t>> ready_;
};

// Number of horizontal-bond rings compatible with vertical bonds `below`
// (into the row) and `above` (out of the row) for a row of `width` vertices.
inline int ice_row_weight(std::uint32_t below, std::uint32_t above, std::size_t width) {
    int count = 0;
    for (int init = 0; init < 2; ++init) {
        int prev = init;  // bond entering vertex 0 from the left (wraps around)
        bool ok = true;
        for (std::size_t x = 0; x < width && ok; ++x) {
            const int in_left = prev == 1;
            const int in_below = (below >> x) & 1u;
            const int in_above = ((above >> x) & 1u) == 0;
            const int need_right_in = 2 - in_left - in_below - in_above;
            if (need_right_in < 0 || need_right_in > 1) ok = false;
            prev = need_right_in == 1 ? 0 : 1;
        }
        if (ok && prev == init) ++count;
    }
    return count;
}
}  // namespace detail

/// Direct enumeration count (L1 * L2 <= 20).
inline IceCount count_ice_states_direct(std::size_t L1, std::size_t L2) {
    if (L1 == 0 || L2 == 0 || L1 * L2 > 20) throw DomainError("direct ice enumeration capped at L1*L2 <= 20");
    IceCount count = 0;
    detail::IceEnumerator en(L1, L2);
    en.run([&](const std::vector<std::uint8_t>&) { ++count; });
    return count;
}

/// Every ice state of the L x L torus, as encode_ice codes (L * L <= 16).
inline std::vector<std::uint64_t> list_ice_states(std::size_t L) {
    if (L == 0 || L * L > 16) throw DomainError("ice state listing capped at L*L <= 16");
    std::vector<std::uint64_t> out;
    detail::IceEnumerator en(L, L);
    const std::size_t n = L * L;
    en.run([&](const std::vector<std::uint8_t>& bits) {
        std::uint64_t code = 0;
        for (std::size_t i = 0; i < n; ++i) {
            code |= static_cast<std::uint64_t>(bits[2 * i]) << i;
            code |= static_cast<std::uint64_t>(bits[2 * i + 1]) << (n + i);
        }
        out.push_back(code);
    });
    std::sort(out.begin(), out.end());
    return out;
}

/// Row transfer-matrix count: trace of T^L2 with T indexed by the vertical bonds
/// crossing a row of L1 vertices. T conserves the number of upward arrows, so the
/// trace is taken sector by sector (L1 <= 12).
inline IceCount count_ice_states_transfer(std::size_t L1, std::size_t L2) {
    if (L1 == 0 || L2 == 0 || L1 > 12) throw DomainError("transfer-matrix ice count capped at L1 <= 12");
    const std::uint32_t states = 1u << L1;
    IceCount total = 0;
    for (std::size_t up = 0; up <= L1; ++up) {
        std::vector<std::uint32_t> sector;
        for (std::uint32_t s = 0; s < states; ++s)
            if (static_cast<std::size_t>(std::popcount(s)) == up) sector.push_back(s);
        const std::size_t d = sector.size();
        std::vector<IceCount> t(d * d), acc(d * d, 0), tmp(d * d);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < d; ++b)
                t[a * d + b] = static_cast<IceCount>(detail::ice_row_weight(sector[a], sector[b], L1));
        for (std::size_t i = 0; i < d; ++i) acc[i * d + i] = 1;
        for (std::size_t step = 0; step < L2; ++step) {
            std::fill(tmp.begin(), tmp.end(), IceCount{0});
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t c = 0; c < d; ++c) {
                    const IceCount lhs = acc[a * d + c];
                    if (lhs == 0) continue;
                    for (std::size_t b = 0; b < d; ++b) tmp[a * d + b] += lhs * t[c * d + b];
                }
            std::swap(acc, tmp);
        }
        for (std::size_t i = 0; i < d; ++i) total += acc[i * d + i];
    }
    return total;
}

struct IceEnumeration {
    std::size_t L1 = 0, L2 = 0;
    IceCount count = 0;
    std::optional<IceCount> direct;
    std::optional<IceCount> transfer;
    /// ln(count) / (L1 L2)
    [[nodiscard]] double entropy_per_vertex() const {
        return std::log(static_cast<long double>(count)) / static_cast<double>(L1 * L2);
    }
};

/// Exact number of ice states on the L1 x L2 torus. Both methods run where both
/// are feasible and must agree.
inline IceEnumeration enumerate_ice_states(std::size_t L1, std::size_t L2) {
    if (L1 == 0 || L2 == 0) throw DomainError("ice torus needs positive sides");
    IceEnumeration r;
    r.L1 = L1;
    r.L2 = L2;
    if (L1 * L2 <= 16) r.direct = count_ice_states_direct(L1, L2);
    const std::size_t width = std::min(L1, L2), length = std::max(L1, L2);
    if (width <= 12) r.transfer = count_ice_states_transfer(width, length);
    if (!r.direct && !r.transfer) throw DomainError("ice torus too large for exact enumeration");
    if (r.direct && r.transfer && *r.direct != *r.transfer)
        throw std::logic_error("ice enumeration methods disagree");
    r.count = r.transfer ? *r.transfer : *r.direct;
    return r;
}

/// Lieb's residual entropy of square ice per vertex, (3/2) ln(4/3).
inline double lieb_entropy() { return 1.5 * std::log(4.0 / 3.0); }

}  // namespace diffract
