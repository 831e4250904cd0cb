#pragma once
// Numerical diffraction (FFT on lattice or binned grids, direct exponential
// sums), autocorrelation estimators, closed-form reference spectra, and the
// analyses built on them: peak scaling, symmetry, homometry, block entropy.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "diffract/core.hpp"
#include "diffract/fft.hpp"
#include "diffract/sequences.hpp"

namespace diffract {

/// Raised when two inputs of an analysis do not share a grid or shape.
class IncompatibleError : public DomainError {
public:
    using DomainError::DomainError;
};

// ---------------------------------------------------------------------------
// Grid placement

/// Integer site indices of every point of a lattice-supported comb.
struct GridPlacement {
    std::array<std::size_t, 2> shape{1, 1};
    double spacing = 1.0;
    std::vector<std::array<std::size_t, 2>> index;  // per point
};

inline GridPlacement place_on_lattice(const WeightedComb& comb) {
    if (!comb.lattice()) throw DomainError("comb is not lattice-supported");
    const auto& info = *comb.lattice();
    GridPlacement g;
    g.shape = info.shape;
    g.spacing = info.spacing;
    g.index.resize(comb.size());
    const auto pts = comb.points();
    for (std::size_t n = 0; n < comb.size(); ++n) {
        for (int a = 0; a < comb.dimension(); ++a) {
            const double u = (pts[n][a] - comb.extent().origin[a]) / info.spacing;
            const auto i = std::llround(u);
            if (std::abs(u - static_cast<double>(i)) > 1e-6 || i < 0 ||
                static_cast<std::size_t>(i) >= info.shape[a])
                throw DomainError("comb point is not on its declared lattice");
            g.index[n][a] = static_cast<std::size_t>(i);
        }
        if (comb.dimension() == 1) g.index[n][1] = 0;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Diffraction

struct DiffractionOptions {
    /// Zero-padding factor per axis for lattice combs (finer k grid, same Parseval sum).
    std::size_t oversample = 1;
    /// Bin width for combs without a lattice (golden-ratio tilings).
    double bin_width = 0x1p-12;
    /// Largest |k| the binned spectrum must represent within `phase_tolerance`.
    double k_max = 4.0;
    /// Allowed phase error pi * k_max * bin_width (radians) from snapping to bins.
    double phase_tolerance = 0.05;
    std::size_t max_bins = std::size_t{1} << 26;
};

/// I(k) = |sum_x w(x) exp(-2 pi i k.x)|^2 / V on the FFT grid.
///
/// Lattice combs use their own lattice (times `oversample`), so k steps are
/// 1 / (M * spacing). Other 1D combs are snapped to bins of `bin_width` and the
/// call is rejected when the snapping error would exceed the phase tolerance at
/// k_max, when two points share a bin, or when the grid exceeds `max_bins`.
inline SpectrumGrid diffraction_fft(const WeightedComb& comb, const DiffractionOptions& opt = {}) {
    if (opt.oversample == 0) throw DomainError("oversample must be >= 1");
    SpectrumGrid out;
    out.dimension = comb.dimension();
    out.volume = comb.volume();
    out.point_count = comb.size();
    const auto ws = comb.weights();

    if (comb.lattice()) {
        const auto g = place_on_lattice(comb);
        const std::size_t m0 = g.shape[0] * opt.oversample;
        const std::size_t m1 = comb.dimension() == 2 ? g.shape[1] * opt.oversample : 1;
        std::vector<cplx> buf(m0 * m1, cplx{});
        for (std::size_t n = 0; n < comb.size(); ++n) buf[g.index[n][0] * m1 + g.index[n][1]] += ws[n];
        if (comb.dimension() == 2) fft::forward_2d(buf, m0, m1); else fft::forward(buf);
        out.shape = {m0, m1};
        out.dk = {1.0 / (static_cast<double>(m0) * g.spacing),
                  comb.dimension() == 2 ? 1.0 / (static_cast<double>(m1) * g.spacing) : 1.0};
        out.values.resize(buf.size());
        for (std::size_t i = 0; i < buf.size(); ++i) out.values[i] = std::norm(buf[i]) / out.volume;
        return out;
    }

    if (comb.dimension() != 1) throw DomainError("binned diffraction supports 1D combs only");
    if (!(opt.bin_width > 0.0)) throw DomainError("bin width must be positive");
    const double phase_err = kPi * opt.k_max * opt.bin_width;
    if (phase_err > opt.phase_tolerance)
        throw DomainError("bin width " + std::to_string(opt.bin_width) + " gives phase error " +
                          std::to_string(phase_err) + " rad at k_max " + std::to_string(opt.k_max) +
                          ", above tolerance " + std::to_string(opt.phase_tolerance));
    const double span = comb.extent().size[0];
    const auto needed = static_cast<std::size_t>(std::ceil(span / opt.bin_width)) + 1;
    std::size_t m = 1;
    while (m < needed) m <<= 1;
    if (m > opt.max_bins)
        throw DomainError("binned grid needs " + std::to_string(m) + " bins, above the cap of " +
                          std::to_string(opt.max_bins) + "; use direct sums or a coarser bin width");
    std::vector<cplx> buf(m, cplx{});
    std::vector<std::uint8_t> used(m, 0);
    const auto pts = comb.points();
    for (std::size_t n = 0; n < comb.size(); ++n) {
        const auto i = static_cast<std::size_t>(std::llround((pts[n][0] - comb.extent().origin[0]) / opt.bin_width));
        if (used[i]) throw DomainError("two points share a bin; bin width too coarse");
        used[i] = 1;
        buf[i] = ws[n];
    }
    fft::forward(buf);
    out.shape = {m, 1};
    out.dk = {1.0 / (static_cast<double>(m) * opt.bin_width), 1.0};
    out.k0 = {0.0, 0.0};
    out.values.resize(m);
    for (std::size_t i = 0; i < m; ++i) out.values[i] = std::norm(buf[i]) / out.volume;
    return out;
}

/// Unnormalized amplitude F(k) = sum_x w(x) exp(-2 pi i k.x); I(k) = |F(k)|^2 / V.
inline cplx structure_amplitude(const WeightedComb& comb, const Vec2& k) {
    const auto pts = comb.points();
    const auto ws = comb.weights();
    cplx acc{};
    for (std::size_t n = 0; n < comb.size(); ++n)
        acc += ws[n] * std::polar(1.0, -2.0 * kPi * (k[0] * pts[n][0] + k[1] * pts[n][1]));
    return acc;
}

/// Direct exponential sums at arbitrary wavevectors.
inline std::vector<double> diffraction_direct(const WeightedComb& comb, std::span<const Vec2> ks) {
    std::vector<double> out(ks.size());
    const double v = comb.volume();
    for (std::size_t q = 0; q < ks.size(); ++q) out[q] = std::norm(structure_amplitude(comb, ks[q])) / v;
    return out;
}

inline double diffraction_direct(const WeightedComb& comb, const Vec2& k) {
    return diffraction_direct(comb, std::span<const Vec2>(&k, 1)).front();
}

/// Direct sums on a regular 1D grid k = k0 + m dk, m < count, via per-point phase recurrence.
inline SpectrumGrid diffraction_direct_grid(const WeightedComb& comb, double k0, double dk, std::size_t count) {
    if (comb.dimension() != 1) throw DomainError("direct grid evaluation supports 1D combs");
    if (count == 0) throw DomainError("empty k grid");
    std::vector<cplx> acc(count, cplx{});
    const auto pts = comb.points();
    const auto ws = comb.weights();
    for (std::size_t n = 0; n < comb.size(); ++n) {
        const double x = pts[n][0];
        cplx phase = std::polar(1.0, -2.0 * kPi * k0 * x) * ws[n];
        const cplx step = std::polar(1.0, -2.0 * kPi * dk * x);
        for (std::size_t m = 0; m < count; ++m) {
            if (m % 256 == 0)  // re-anchor to bound accumulated rounding
                phase = std::polar(1.0, -2.0 * kPi * (k0 + static_cast<double>(m) * dk) * x) * ws[n];
            acc[m] += phase;
            phase *= step;
        }
    }
    SpectrumGrid out;
    out.dimension = 1;
    out.shape = {count, 1};
    out.dk = {dk, 1.0};
    out.k0 = {k0, 0.0};
    out.volume = comb.volume();
    out.point_count = comb.size();
    out.values.resize(count);
    for (std::size_t m = 0; m < count; ++m) out.values[m] = std::norm(acc[m]) / out.volume;
    return out;
}

struct IncommensurateOptions {
    double k_max = 4.0;
    /// Direct-sum grid step is 1 / (oversample * extent).
    std::size_t oversample = 4;
    /// Largest point count diffracted by direct sums; larger combs are binned.
    std::size_t direct_limit = 200000;
    DiffractionOptions binning{};
};

/// Spectrum of a 1D comb without a lattice on k in [0, k_max]: direct sums up to
/// `direct_limit` points, otherwise the binned FFT truncated to k_max. The bin width
/// starts at binning.bin_width and is coarsened by powers of two to respect
/// binning.max_bins.
inline SpectrumGrid diffraction_incommensurate(const WeightedComb& comb, const IncommensurateOptions& opt = {}) {
    if (comb.dimension() != 1) throw DomainError("incommensurate diffraction supports 1D combs");
    if (!(opt.k_max > 0.0) || opt.oversample == 0) throw DomainError("invalid incommensurate grid options");
    if (comb.size() <= opt.direct_limit) {
        const double dk = 1.0 / (static_cast<double>(opt.oversample) * comb.extent().size[0]);
        const auto count = static_cast<std::size_t>(std::floor(opt.k_max / dk)) + 1;
        return diffraction_direct_grid(comb, 0.0, dk, count);
    }
    DiffractionOptions b = opt.binning;
    b.k_max = opt.k_max;
    // Long combs: double the bin width until the grid fits under the bin cap; the
    // phase-error check in diffraction_fft still bounds k_max.
    while (std::ceil(comb.extent().size[0] / b.bin_width) + 1.0 > static_cast<double>(b.max_bins)) b.bin_width *= 2.0;
    auto full = diffraction_fft(comb, b);
    const auto count = std::min(full.shape[0], static_cast<std::size_t>(std::floor(opt.k_max / full.dk[0])) + 1);
    full.values.resize(count);
    full.shape = {count, 1};
    return full;
}

/// Cut through a 2D lattice spectrum at fixed k1: returns I(k1_fixed, k2) on the
/// FFT grid of the second axis.
inline SpectrumGrid diffraction_cut(const WeightedComb& comb, double k1_fixed) {
    if (comb.dimension() != 2 || !comb.lattice()) throw DomainError("cuts need a 2D lattice comb");
    const auto g = place_on_lattice(comb);
    const std::size_t m1 = g.shape[1];
    std::vector<cplx> rows(m1, cplx{});
    const auto ws = comb.weights();
    const auto pts = comb.points();
    for (std::size_t n = 0; n < comb.size(); ++n)
        rows[g.index[n][1]] += ws[n] * std::polar(1.0, -2.0 * kPi * k1_fixed * pts[n][0]);
    fft::forward(rows);
    SpectrumGrid out;
    out.dimension = 1;
    out.shape = {m1, 1};
    out.dk = {1.0 / (static_cast<double>(m1) * g.spacing), 1.0};
    out.volume = comb.volume();
    out.point_count = comb.size();
    out.values.resize(m1);
    for (std::size_t j = 0; j < m1; ++j) out.values[j] = std::norm(rows[j]) / out.volume;
    return out;
}

/// Intensity profile on [center - half_width, center + half_width] from direct sums.
inline std::vector<std::pair<double, double>> peak_profile(const WeightedComb& comb, double center,
                                                           double half_width, std::size_t samples) {
    if (samples < 2) throw DomainError("peak profile needs >= 2 samples");
    const double dk = 2.0 * half_width / static_cast<double>(samples - 1);
    const auto g = diffraction_direct_grid(comb, center - half_width, dk, samples);
    std::vector<std::pair<double, double>> out(samples);
    for (std::size_t i = 0; i < samples; ++i) out[i] = {center - half_width + static_cast<double>(i) * dk, g.values[i]};
    return out;
}

/// Bin-wise mean of `count` spectra produced by `make(i)`. Results are summed in
/// index order, so the mean does not depend on `threads`.
inline SpectrumGrid average_spectra(std::size_t count, const std::function<SpectrumGrid(std::size_t)>& make,
                                    std::size_t threads = 1) {
    if (count == 0) throw DomainError("ensemble needs at least one member");
    threads = std::max<std::size_t>(1, std::min(threads, count));
    std::vector<std::optional<SpectrumGrid>> members(count);
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) members[i] = make(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < count; i = next++) members[i] = make(i);
            });
        for (auto& th : pool) th.join();
    }
    SpectrumGrid mean = *members[0];
    for (std::size_t i = 1; i < count; ++i) {
        if (!members[i]->same_grid(mean)) throw IncompatibleError("ensemble members differ in grid");
        for (std::size_t b = 0; b < mean.values.size(); ++b) mean.values[b] += members[i]->values[b];
    }
    for (auto& v : mean.values) v /= static_cast<double>(count);
    return mean;
}

// ---------------------------------------------------------------------------
// Autocorrelation

/// Periodic autocorrelation of a lattice comb on its full index-difference grid:
/// nu[d] = (1/V) sum_r w(r) conj(w(r - d)) with r - d taken modulo the lattice.
/// Computed by explicit pair sums.
inline std::vector<cplx> periodic_autocorrelation_grid(const WeightedComb& comb) {
    const auto g = place_on_lattice(comb);
    const std::size_t m0 = g.shape[0], m1 = g.shape[1];
    const auto ws = comb.weights();
    std::vector<std::size_t> nz;
    for (std::size_t n = 0; n < comb.size(); ++n)
        if (ws[n] != cplx{}) nz.push_back(n);
    std::vector<cplx> nu(m0 * m1, cplx{});
    for (auto p : nz) {
        const auto [ip, jp] = g.index[p];
        const cplx wp = ws[p];
        for (auto q : nz) {
            const auto [iq, jq] = g.index[q];
            const std::size_t d0 = (ip + m0 - iq) % m0, d1 = (jp + m1 - jq) % m1;
            nu[d0 * m1 + d1] += wp * std::conj(ws[q]);
        }
    }
    const double v = comb.volume();
    for (auto& c : nu) c /= v;
    return nu;
}

/// Finite-size autocorrelation nu(z) = (1/V) sum_y w(y) conj(w(y - z)) for |z| <= radius.
///
/// Periodic combs (tori) wrap differences to the minimal image. Open combs divide
/// each coefficient by the overlap volume of the extent with its translate by z,
/// which is V at z = 0. The boundary used is recorded in the table.
inline AutocorrelationTable autocorrelation(const WeightedComb& comb, double radius,
                                            std::optional<Boundary> boundary = std::nullopt) {
    const auto& ext = comb.extent();
    const double diameter = comb.dimension() == 1 ? ext.size[0] : std::hypot(ext.size[0], ext.size[1]);
    if (radius < 0.0 || radius > diameter + 1e-12) throw DomainError("autocorrelation radius exceeds the extent");
    const bool periodic_default = comb.lattice() && comb.lattice()->periodic;
    const Boundary mode = boundary.value_or(periodic_default ? Boundary::Periodic : Boundary::OpenOverlap);

    AutocorrelationTable table;
    table.radius = radius;
    table.boundary = mode;
    table.volume = comb.volume();
    const double tol = 1e-9;

    if (mode == Boundary::Periodic) {
        if (!comb.lattice()) throw DomainError("periodic autocorrelation needs a lattice comb");
        const auto nu = periodic_autocorrelation_grid(comb);
        const auto& info = *comb.lattice();
        const std::size_t m0 = info.shape[0], m1 = comb.dimension() == 2 ? info.shape[1] : 1;
        auto minimal = [](std::size_t d, std::size_t m) {
            const auto s = static_cast<long long>(d);
            const auto mm = static_cast<long long>(m);
            return s > mm / 2 ? s - mm : s;
        };
        for (std::size_t d0 = 0; d0 < m0; ++d0)
            for (std::size_t d1 = 0; d1 < m1; ++d1) {
                const Vec2 z{static_cast<double>(minimal(d0, m0)) * info.spacing,
                             comb.dimension() == 2 ? static_cast<double>(minimal(d1, m1)) * info.spacing : 0.0};
                if (std::hypot(z[0], z[1]) <= radius + tol) table.entries.push_back({z, nu[d0 * m1 + d1]});
            }
        std::sort(table.entries.begin(), table.entries.end(),
                  [](const auto& a, const auto& b) { return a.z < b.z; });
        return table;
    }

    // Open boundaries: accumulate raw pair sums keyed by the difference vector.
    const auto pts = comb.points();
    const auto ws = comb.weights();
    const auto tcs = comb.tau_coords();
    std::map<std::array<long long, 2>, std::pair<Vec2, cplx>> acc;
    auto key_of = [&](std::size_t p, std::size_t q) -> std::array<long long, 2> {
        if (!tcs.empty()) return {tcs[p].a - tcs[q].a, tcs[p].b - tcs[q].b};
        return {std::llround((pts[p][0] - pts[q][0]) * 1e6), std::llround((pts[p][1] - pts[q][1]) * 1e6)};
    };
    std::vector<std::size_t> order(comb.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return pts[a][0] < pts[b][0]; });
    for (std::size_t ia = 0; ia < order.size(); ++ia) {
        const auto p = order[ia];
        if (ws[p] == cplx{}) continue;
        // Partners within radius along the first axis on both sides.
        for (std::size_t ib = ia + 1; ib-- > 0;) {
            const auto q = order[ib];
            if (pts[p][0] - pts[q][0] > radius + tol) break;
            if (ws[q] == cplx{}) continue;
            const Vec2 z{pts[p][0] - pts[q][0], pts[p][1] - pts[q][1]};
            if (std::hypot(z[0], z[1]) > radius + tol) continue;
            auto& e = acc[key_of(p, q)];
            e.first = z;
            e.second += ws[p] * std::conj(ws[q]);
        }
        for (std::size_t ib = ia + 1; ib < order.size(); ++ib) {
            const auto q = order[ib];
            if (pts[q][0] - pts[p][0] > radius + tol) break;
            if (ws[q] == cplx{}) continue;
            const Vec2 z{pts[p][0] - pts[q][0], pts[p][1] - pts[q][1]};
            if (std::hypot(z[0], z[1]) > radius + tol) continue;
            auto& e = acc[key_of(p, q)];
            e.first = z;
            e.second += ws[p] * std::conj(ws[q]);
        }
    }
    for (const auto& [key, e] : acc) {
        const Vec2 z = e.first;
        double overlap = std::max(ext.size[0] - std::abs(z[0]), 0.0);
        if (comb.dimension() == 2) overlap *= std::max(ext.size[1] - std::abs(z[1]), 0.0);
        if (overlap <= 0.0) continue;
        table.entries.push_back({z, e.second / overlap});
    }
    std::sort(table.entries.begin(), table.entries.end(), [](const auto& a, const auto& b) { return a.z < b.z; });
    return table;
}

// ---------------------------------------------------------------------------
// Closed-form reference spectra

/// Pure point part on Z^d plus an absolutely continuous density.
struct AnalyticSpectrum {
    std::string model;
    int dimension = 1;
    /// Weight of the Bragg peak at integer k (callers pass integer-valued k).
    std::function<double(const Vec2&)> pp;
    /// Density of the absolutely continuous part; empty when not available in closed form.
    std::function<double(const Vec2&)> ac;

    [[nodiscard]] bool has_ac() const { return static_cast<bool>(ac); }
};

/// Closed-form spectrum of the Bernoulli chain: |<h>|^2 on Z plus Var(h).
inline AnalyticSpectrum analytic_bernoulli_spectrum(cplx h1, cplx h2, double p1, double p2) {
    if (p1 < 0.0 || p2 < 0.0 || std::abs(p1 + p2 - 1.0) > 1e-12) throw DomainError("invalid probabilities");
    const cplx mean = p1 * h1 + p2 * h2;
    const double pp = std::norm(mean);
    const double var = p1 * std::norm(h1) + p2 * std::norm(h2) - pp;
    AnalyticSpectrum s;
    s.model = "bernoulli";
    s.dimension = 1;
    s.pp = [pp](const Vec2&) { return pp; };
    s.ac = [var](const Vec2&) { return std::max(var, 0.0); };
    return s;
}

inline AnalyticSpectrum analytic_bernoulli_spectrum(const TwoLetterWeights& w) {
    w.validate();
    return analytic_bernoulli_spectrum(w.h1, w.h2, w.p1, w.p2);
}

/// Rudin-Shapiro lattice gas with weights 1 and 0: 1/4 on Z plus the constant 1/4.
inline AnalyticSpectrum analytic_rs_spectrum() {
    AnalyticSpectrum s;
    s.model = "rudin-shapiro";
    s.dimension = 1;
    s.pp = [](const Vec2&) { return 0.25; };
    s.ac = [](const Vec2&) { return 0.25; };
    return s;
}

enum class IsingRegime { AboveCritical, BelowCritical };

/// Bragg part of the Ising lattice gas: 1/4 on Z^2 above T_c, rho^2 below.
inline AnalyticSpectrum analytic_ising_pp(IsingRegime regime, double rho = 0.5) {
    if (regime == IsingRegime::BelowCritical && (rho < 0.5 || rho > 1.0))
        throw DomainError("occupation density below T_c must lie in [1/2, 1]");
    const double w = regime == IsingRegime::AboveCritical ? 0.25 : rho * rho;
    AnalyticSpectrum s;
    s.model = "ising-pp";
    s.dimension = 2;
    s.pp = [w](const Vec2&) { return w; };
    return s;
}

/// Squared form factor of the ice unit cell at integer k (square ice and the
/// Bernoulli-hydrogen model alike).
inline double ice_bragg(long long k1, long long k2, double hO, double hH) {
    const double f = hO + hH * (std::cos(2.0 * kPi * static_cast<double>(k1) / 3.0) +
                                std::cos(2.0 * kPi * static_cast<double>(k2) / 3.0));
    return f * f;
}

/// Diffuse background of the Bernoulli-hydrogen model; independent of hO.
inline double bernoulli_ice_background(const Vec2& k, double hH) {
    const double s1 = std::sin(kPi * k[0] / 3.0), s2 = std::sin(kPi * k[1] / 3.0);
    return hH * hH * (s1 * s1 + s2 * s2);
}

inline AnalyticSpectrum analytic_bernoulli_ice(double hO, double hH) {
    AnalyticSpectrum s;
    s.model = "bernoulli-ice";
    s.dimension = 2;
    s.pp = [hO, hH](const Vec2& k) { return ice_bragg(std::llround(k[0]), std::llround(k[1]), hO, hH); };
    s.ac = [hH](const Vec2& k) { return bernoulli_ice_background(k, hH); };
    return s;
}

/// Autocorrelation coefficient of the Bernoulli-hydrogen model at z in Z^2 + (1/3)Z^2.
///
/// Lattice-periodic part: hO^2 + hH^2 on Z^2, hH^2/2 at the (+-1/3, +-1/3)
/// translates, hO hH + hH^2/4 at the (+-1/3, 0) and (0, +-1/3) translates; plus the
/// local correction hH^2 at z = 0 and -hH^2/4 at the four axis offsets themselves.
inline double ice_autocorrelation_analytic(const Vec2& z, double hO, double hH) {
    long long t[2];
    for (int a = 0; a < 2; ++a) {
        const double u = 3.0 * z[a];
        t[a] = std::llround(u);
        if (std::abs(u - static_cast<double>(t[a])) > 1e-9) return 0.0;
    }
    auto residue = [](long long v) {  // representative in {-1, 0, 1}
        long long r = ((v % 3) + 3) % 3;
        return r == 2 ? -1LL : r;
    };
    const long long r0 = residue(t[0]), r1 = residue(t[1]);
    double c = 0.0;
    if (r0 == 0 && r1 == 0) c = hO * hO + hH * hH;
    else if (r0 != 0 && r1 != 0) c = hH * hH / 2.0;
    else c = hO * hH + hH * hH / 4.0;
    if (t[0] == 0 && t[1] == 0) c += hH * hH;
    if ((std::llabs(t[0]) == 1 && t[1] == 0) || (t[0] == 0 && std::llabs(t[1]) == 1)) c -= hH * hH / 4.0;
    return c;
}

/// True when both spectra agree at every probe wavevector (pp at integer probes, ac everywhere).
inline bool analytic_equal(const AnalyticSpectrum& a, const AnalyticSpectrum& b, std::span<const Vec2> probes,
                           double tol = 0.0) {
    if (a.dimension != b.dimension || a.has_ac() != b.has_ac()) return false;
    for (const auto& k : probes) {
        if (std::abs(a.pp(k) - b.pp(k)) > tol) return false;
        if (a.has_ac() && std::abs(a.ac(k) - b.ac(k)) > tol) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Peak scaling

enum class ScalingClass { PurePointLike, Intermediate, AbsolutelyContinuousLike, Degenerate };

inline const char* to_string(ScalingClass c) {
    switch (c) {
        case ScalingClass::PurePointLike: return "pp-like";
        case ScalingClass::Intermediate: return "intermediate";
        case ScalingClass::AbsolutelyContinuousLike: return "ac-like";
        case ScalingClass::Degenerate: return "degenerate";
    }
    return "?";
}

/// Intensity-versus-size regression I ~ N^alpha on log-log data.
struct ScalingFit {
    Vec2 k{0.0, 0.0};
    std::vector<double> sizes;
    std::vector<double> intensities;
    double alpha = std::numeric_limits<double>::quiet_NaN();
    double alpha_stderr = std::numeric_limits<double>::quiet_NaN();
    double log_prefactor = std::numeric_limits<double>::quiet_NaN();
    ScalingClass classification = ScalingClass::Degenerate;
    bool degenerate = true;
    /// The size-scaling heuristic is an indication of spectral type, not a proof.
    std::string caveat = "scaling heuristic: pp ~ N, ac ~ const, sc ~ N^alpha (0<alpha<1); not correct in general";
};

inline ScalingClass classify_exponent(double alpha) {
    if (!std::isfinite(alpha)) return ScalingClass::Degenerate;
    if (alpha >= 0.95) return ScalingClass::PurePointLike;
    if (alpha <= 0.05) return ScalingClass::AbsolutelyContinuousLike;
    return ScalingClass::Intermediate;
}

/// Least-squares slope of log I against log N with its standard error.
inline ScalingFit fit_scaling(std::vector<double> sizes, std::vector<double> intensities, Vec2 k = {0.0, 0.0}) {
    if (sizes.size() != intensities.size()) throw DomainError("sizes/intensities length mismatch");
    if (sizes.size() < 4) throw DomainError("scaling fit needs at least 4 sizes");
    for (std::size_t i = 1; i < sizes.size(); ++i)
        if (!(sizes[i] > sizes[i - 1])) throw DomainError("scaling sizes must be strictly increasing");
    ScalingFit f;
    f.k = k;
    f.sizes = std::move(sizes);
    f.intensities = std::move(intensities);
    const double peak = *std::max_element(f.intensities.begin(), f.intensities.end());
    for (double v : f.intensities)
        if (!(v > 1e-12 * std::max(peak, 1e-300)) || !(v > 0.0)) return f;  // degenerate: zero intensities
    const std::size_t n = f.sizes.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        lx[i] = std::log(f.sizes[i]);
        ly[i] = std::log(f.intensities[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    f.alpha = sxy / sxx;
    f.log_prefactor = my - f.alpha * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = ly[i] - (f.log_prefactor + f.alpha * lx[i]);
        rss += r * r;
    }
    f.alpha_stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
    f.degenerate = false;
    f.classification = classify_exponent(f.alpha);
    return f;
}

struct ScalingOptions {
    /// Realizations averaged per size (stochastic generators).
    std::size_t realizations = 1;
    /// When > 0, the intensity at each size is the maximum over [k - window, k + window]
    /// sampled with step 1 / (oversample * extent); tracks peaks that are not pinned to k.
    double window = 0.0;
    std::size_t oversample = 4;
};

/// Comb factory: (size, realization index) -> comb.
using CombGenerator = std::function<WeightedComb(std::size_t, std::size_t)>;

/// Intensity at k (1D: k[0]) versus system size, fitted on log-log axes.
inline ScalingFit peak_scaling(const CombGenerator& make, const Vec2& k, const std::vector<std::size_t>& sizes,
                               const ScalingOptions& opt = {}) {
    if (sizes.size() < 4) throw DomainError("scaling fit needs at least 4 sizes");
    if (opt.realizations == 0) throw DomainError("scaling needs at least one realization");
    std::vector<double> ns, is;
    for (auto n : sizes) {
        double acc = 0.0;
        for (std::size_t r = 0; r < opt.realizations; ++r) {
            const auto comb = make(n, r);
            if (opt.window > 0.0) {
                if (comb.dimension() != 1) throw DomainError("windowed scaling supports 1D combs");
                const double step = 1.0 / (static_cast<double>(opt.oversample) * comb.extent().size[0]);
                const auto count = static_cast<std::size_t>(std::ceil(2.0 * opt.window / step)) + 1;
                const auto g = diffraction_direct_grid(comb, k[0] - opt.window, step, count);
                acc += *std::max_element(g.values.begin(), g.values.end());
            } else {
                acc += diffraction_direct(comb, k);
            }
        }
        ns.push_back(static_cast<double>(n));
        is.push_back(acc / static_cast<double>(opt.realizations));
    }
    return fit_scaling(std::move(ns), std::move(is), k);
}

// ---------------------------------------------------------------------------
// Symmetry

enum class SymmetryOp { Identity, AxisSwap, Rotate90 };

/// Spectrum transformed by op on the periodic FFT grid (k0 must be 0 for Rotate90).
inline SpectrumGrid apply_symmetry(const SpectrumGrid& s, SymmetryOp op) {
    if (op == SymmetryOp::Identity) return s;
    if (s.dimension != 2 || s.shape[0] != s.shape[1] || std::abs(s.dk[0] - s.dk[1]) > 1e-12)
        throw IncompatibleError("symmetry operations need a square 2D grid");
    const std::size_t m = s.shape[0];
    SpectrumGrid t = s;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            // value of the transformed spectrum at (i, j) = value of s at op^-1 (i, j)
            if (op == SymmetryOp::AxisSwap) t.at(i, j) = s.at(j, i);
            else t.at(i, j) = s.at(j, (m - i) % m);  // (k1, k2) -> (-k2, k1)
        }
    return t;
}

/// Normalized L1 discrepancy sum|I - T I| / (sum I + sum T I); 0 means invariant.
inline double symmetry_score(const SpectrumGrid& s, SymmetryOp op) {
    if (op == SymmetryOp::Rotate90 && (s.k0[0] != 0.0 || s.k0[1] != 0.0))
        throw IncompatibleError("rotation needs a grid anchored at k = 0");
    const auto t = apply_symmetry(s, op);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        num += std::abs(s.values[i] - t.values[i]);
        den += s.values[i] + t.values[i];
    }
    return den > 0.0 ? num / den : 0.0;
}

/// True when every coordinate of the bin's wavevector is an integer (within tol).
inline bool is_integer_bin(const SpectrumGrid& s, std::size_t i1, std::size_t i2 = 0, double tol = 1e-9) {
    const auto k = s.k_of(i1, i2);
    for (int a = 0; a < s.dimension; ++a)
        if (std::abs(k[a] - std::round(k[a])) > tol) return false;
    return true;
}

/// Copy keeping only bins at integer wavevectors (the Bragg positions on Z^d).
inline SpectrumGrid bragg_only(const SpectrumGrid& s) {
    SpectrumGrid out = s;
    for (std::size_t i = 0; i < s.shape[0]; ++i)
        for (std::size_t j = 0; j < s.shape[1]; ++j)
            if (!is_integer_bin(s, i, j)) out.at(i, j) = 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Homometry

/// Circular convolution with a normalized triangular kernel of half-width `width`
/// bins (weights width - |j| for |j| < width), separable in 2D.
inline SpectrumGrid smooth_triangular(const SpectrumGrid& s, std::size_t width) {
    if (width <= 1) return s;
    std::vector<double> kern(2 * width - 1);
    double norm = 0.0;
    for (std::size_t j = 0; j < kern.size(); ++j) {
        kern[j] = static_cast<double>(width) - std::abs(static_cast<double>(j) - static_cast<double>(width - 1));
        norm += kern[j];
    }
    for (auto& k : kern) k /= norm;
    SpectrumGrid out = s;
    auto pass = [&](int axis) {
        const SpectrumGrid in = out;
        const std::size_t m = s.shape[axis];
        for (std::size_t i = 0; i < s.shape[0]; ++i)
            for (std::size_t j = 0; j < s.shape[1]; ++j) {
                double acc = 0.0;
                for (std::size_t q = 0; q < kern.size(); ++q) {
                    const auto off = static_cast<long long>(q) - static_cast<long long>(width - 1);
                    const auto base = static_cast<long long>(axis == 0 ? i : j);
                    const auto src = static_cast<std::size_t>(((base + off) % static_cast<long long>(m) +
                                                               static_cast<long long>(m)) % static_cast<long long>(m));
                    acc += kern[q] * (axis == 0 ? in.at(src, j) : in.at(i, src));
                }
                out.at(i, j) = acc;
            }
    };
    pass(0);
    if (s.dimension == 2) pass(1);
    return out;
}

struct HomometryReport {
    std::size_t width = 0;
    double raw_l1 = 0.0;       // mean |a - b| over bins
    double smoothed_l1 = 0.0;  // same after smoothing both
};

inline double mean_abs_difference(const SpectrumGrid& a, const SpectrumGrid& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) s += std::abs(a.values[i] - b.values[i]);
    return s / static_cast<double>(a.values.size());
}

inline HomometryReport homometry_compare(const SpectrumGrid& a, const SpectrumGrid& b, std::size_t width = 8) {
    if (!a.same_grid(b)) throw IncompatibleError("homometry comparison needs identical grids");
    HomometryReport r;
    r.width = width;
    r.raw_l1 = mean_abs_difference(a, b);
    r.smoothed_l1 = mean_abs_difference(smooth_triangular(a, width), smooth_triangular(b, width));
    return r;
}

// ---------------------------------------------------------------------------
// Block entropy

struct BlockEntropy {
    std::vector<double> H;          // H[n-1] = Shannon entropy (nats) of length-n blocks, n = 1..max+1
    std::vector<double> h;          // h[n-1] = H_{n+1} - H_n, n = 1..max
    std::vector<bool> undersampled; // per n: sequence shorter than 4^n
};

/// Binary letters of a comb: 1 where the weight is non-zero.
inline std::vector<std::uint8_t> binary_letters(const WeightedComb& comb) {
    std::vector<std::uint8_t> out(comb.size());
    const auto ws = comb.weights();
    for (std::size_t i = 0; i < ws.size(); ++i) out[i] = ws[i] != cplx{} ? 1 : 0;
    return out;
}

/// Empirical block entropies over overlapping windows and their increments.
inline BlockEntropy block_entropy(std::span<const std::uint8_t> seq, std::size_t max_block) {
    if (max_block == 0 || max_block > 40) throw DomainError("block length must lie in [1, 40]");
    BlockEntropy r;
    const std::size_t total = seq.size();
    for (std::size_t n = 1; n <= max_block + 1; ++n) {
        if (total < n) {
            r.H.push_back(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        std::unordered_map<std::uint64_t, std::uint64_t> counts;
        std::vector<std::uint64_t> dense;
        const bool use_dense = n <= 22;
        if (use_dense) dense.assign(std::size_t{1} << n, 0);
        const std::uint64_t mask = n == 64 ? ~0ULL : ((1ULL << n) - 1);
        std::uint64_t code = 0;
        for (std::size_t i = 0; i < total; ++i) {
            code = ((code << 1) | (seq[i] & 1u)) & mask;
            if (i + 1 >= n) {
                if (use_dense) ++dense[code]; else ++counts[code];
            }
        }
        const double windows = static_cast<double>(total - n + 1);
        double H = 0.0;
        auto add = [&](std::uint64_t c) {
            if (c == 0) return;
            const double p = static_cast<double>(c) / windows;
            H -= p * std::log(p);
        };
        if (use_dense) for (auto c : dense) add(c);
        else for (const auto& [_, c] : counts) add(c);
        r.H.push_back(H);
    }
    for (std::size_t n = 1; n <= max_block; ++n) {
        r.h.push_back(r.H[n] - r.H[n - 1]);
        r.undersampled.push_back(static_cast<double>(total) < std::pow(4.0, static_cast<double>(n)));
    }
    return r;
}

}  // namespace diffract
