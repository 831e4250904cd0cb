#pragma once
// Shared domain types: weighted point sets, sampled spectra, autocorrelation
// tables and the reproducible random stream used by every stochastic model.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace diffract {

using cplx = std::complex<double>;
using Vec2 = std::array<double, 2>;

inline constexpr double kPi = 3.14159265358979323846;
/// Golden ratio, the long tile length of the Fibonacci and circle tilings.
inline const double kTau = (1.0 + std::sqrt(5.0)) / 2.0;

/// Thrown for violated preconditions and malformed construction input.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Axis-aligned box [origin, origin + size). For 1D combs only index 0 is used.
struct Extent {
    Vec2 origin{0.0, 0.0};
    Vec2 size{0.0, 1.0};
    int dimension = 1;

    [[nodiscard]] double volume() const {
        return dimension == 1 ? size[0] : size[0] * size[1];
    }
    [[nodiscard]] bool contains(const Vec2& p, double tol = 1e-9) const {
        for (int a = 0; a < dimension; ++a) {
            if (p[a] < origin[a] - tol || p[a] > origin[a] + size[a] + tol) return false;
        }
        return true;
    }
};

/// Regular lattice a comb lives on: site (i, j) sits at origin + (i, j) * spacing.
/// `periodic` marks torus-generated models whose FFT grid is the lattice itself.
struct LatticeInfo {
    double spacing = 1.0;
    std::array<std::size_t, 2> shape{1, 1};
    bool periodic = false;
};

/// Finite weighted Dirac comb in dimension 1 or 2.
///
/// Immutable after construction. Points are pairwise distinct and lie inside the
/// extent; zero weights are kept as explicit points (w(x) in {0,1} lattice gases).
/// For tilings built from the golden ratio, `tau_coords` stores each position
/// exactly as a + b*tau.
class WeightedComb {
public:
    struct TauCoord {
        std::int64_t a = 0;
        std::int64_t b = 0;
        [[nodiscard]] double value() const {
            return static_cast<double>(a) + static_cast<double>(b) * kTau;
        }
        friend bool operator==(const TauCoord&, const TauCoord&) = default;
    };

    WeightedComb(int dimension, std::vector<Vec2> points, std::vector<cplx> weights,
                 Extent extent, std::optional<LatticeInfo> lattice = std::nullopt,
                 std::vector<TauCoord> tau_coords = {}, bool check_distinct = true)
        : dimension_(dimension),
          points_(std::move(points)),
          weights_(std::move(weights)),
          extent_(extent),
          lattice_(lattice),
          tau_coords_(std::move(tau_coords)) {
        if (dimension_ != 1 && dimension_ != 2) throw DomainError("comb dimension must be 1 or 2");
        extent_.dimension = dimension_;
        if (points_.empty()) throw DomainError("comb needs at least one point");
        if (points_.size() != weights_.size()) throw DomainError("points/weights size mismatch");
        if (!tau_coords_.empty() && tau_coords_.size() != points_.size())
            throw DomainError("tau coordinates size mismatch");
        for (std::size_t i = 0; i < points_.size(); ++i) {
            const auto& w = weights_[i];
            if (!std::isfinite(w.real()) || !std::isfinite(w.imag()))
                throw DomainError("non-finite weight");
            max_abs_weight_ = std::max(max_abs_weight_, std::abs(w));
            if (!extent_.contains(points_[i])) throw DomainError("point outside extent");
            if (dimension_ == 1) points_[i][1] = 0.0;
        }
        if (check_distinct) {
            std::vector<Vec2> sorted = points_;
            std::sort(sorted.begin(), sorted.end());
            if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
                throw DomainError("comb points must be pairwise distinct");
        }
    }

    [[nodiscard]] int dimension() const { return dimension_; }
    [[nodiscard]] std::size_t size() const { return points_.size(); }
    [[nodiscard]] std::span<const Vec2> points() const { return points_; }
    [[nodiscard]] std::span<const cplx> weights() const { return weights_; }
    [[nodiscard]] const Extent& extent() const { return extent_; }
    [[nodiscard]] double volume() const { return extent_.volume(); }
    [[nodiscard]] const std::optional<LatticeInfo>& lattice() const { return lattice_; }
    [[nodiscard]] std::span<const TauCoord> tau_coords() const { return tau_coords_; }
    [[nodiscard]] double max_abs_weight() const { return max_abs_weight_; }

    /// Sum of |w|^2 over all points.
    [[nodiscard]] double total_power() const {
        double s = 0.0;
        for (const auto& w : weights_) s += std::norm(w);
        return s;
    }

private:
    int dimension_;
    std::vector<Vec2> points_;
    std::vector<cplx> weights_;
    Extent extent_;
    std::optional<LatticeInfo> lattice_;
    std::vector<TauCoord> tau_coords_;
    double max_abs_weight_ = 0.0;
};

/// Weights indexed by lattice site; 1D arrays use shape {n, 1}.
struct LatticeWeights {
    int dimension = 1;
    std::array<std::size_t, 2> shape{0, 1};
    std::vector<cplx> values;  // row-major: index = i * shape[1] + j

    [[nodiscard]] cplx at(std::size_t i, std::size_t j = 0) const { return values[i * shape[1] + j]; }
};

/// Comb with point i*spacing (1D) or (i, j)*spacing (2D) carrying the site weight.
/// The extent is the array span times the spacing.
inline WeightedComb comb_from_lattice_weights(const LatticeWeights& lw, double spacing = 1.0,
                                              bool periodic = false) {
    if (lw.values.empty() || lw.shape[0] == 0 || lw.shape[1] == 0)
        throw DomainError("lattice weights must be non-empty");
    if (lw.values.size() != lw.shape[0] * lw.shape[1]) throw DomainError("lattice weights shape mismatch");
    if (lw.dimension == 1 && lw.shape[1] != 1) throw DomainError("1D lattice weights need shape {n, 1}");
    if (!(spacing > 0.0)) throw DomainError("lattice spacing must be positive");

    std::vector<Vec2> pts;
    pts.reserve(lw.values.size());
    for (std::size_t i = 0; i < lw.shape[0]; ++i)
        for (std::size_t j = 0; j < lw.shape[1]; ++j)
            pts.push_back({static_cast<double>(i) * spacing,
                           lw.dimension == 2 ? static_cast<double>(j) * spacing : 0.0});
    Extent ext;
    ext.dimension = lw.dimension;
    ext.size = {static_cast<double>(lw.shape[0]) * spacing,
                lw.dimension == 2 ? static_cast<double>(lw.shape[1]) * spacing : 1.0};
    LatticeInfo info{spacing, lw.shape, periodic};
    return WeightedComb(lw.dimension, std::move(pts), lw.values, ext, info, {}, false);
}

inline WeightedComb comb_from_lattice_weights(std::span<const double> weights, double spacing = 1.0,
                                              bool periodic = false) {
    LatticeWeights lw;
    lw.dimension = 1;
    lw.shape = {weights.size(), 1};
    lw.values.assign(weights.begin(), weights.end());
    return comb_from_lattice_weights(lw, spacing, periodic);
}

/// Reads the site weights back from a lattice comb (inverse of comb_from_lattice_weights).
inline LatticeWeights lattice_weights_of(const WeightedComb& comb) {
    if (!comb.lattice()) throw DomainError("comb is not lattice-supported");
    const auto& info = *comb.lattice();
    LatticeWeights lw;
    lw.dimension = comb.dimension();
    lw.shape = info.shape;
    lw.values.assign(info.shape[0] * info.shape[1], cplx{});
    const auto pts = comb.points();
    const auto ws = comb.weights();
    for (std::size_t n = 0; n < comb.size(); ++n) {
        const auto i = static_cast<std::size_t>(std::llround((pts[n][0] - comb.extent().origin[0]) / info.spacing));
        const auto j = comb.dimension() == 2
                           ? static_cast<std::size_t>(std::llround((pts[n][1] - comb.extent().origin[1]) / info.spacing))
                           : 0;
        lw.values[i * info.shape[1] + j] = ws[n];
    }
    return lw;
}

/// Number of points with non-zero weight per unit volume of the extent.
inline double density(const WeightedComb& comb) {
    const double v = comb.volume();
    if (!(v > 0.0)) throw DomainError("density needs a positive extent volume");
    const auto ws = comb.weights();
    const auto occupied = std::count_if(ws.begin(), ws.end(), [](const cplx& w) { return w != cplx{}; });
    return static_cast<double>(occupied) / v;
}

enum class Normalization { PerVolume };

/// Diffraction intensity sampled on a regular wavevector grid.
///
/// Bin (i1, i2) sits at k = (k0[0] + i1*dk[0], k0[1] + i2*dk[1]); values are stored
/// row-major with i2 fastest. Intensities are per volume: |sum w e^{-2 pi i k x}|^2 / V.
struct SpectrumGrid {
    int dimension = 1;
    std::array<std::size_t, 2> shape{0, 1};
    Vec2 dk{1.0, 1.0};
    Vec2 k0{0.0, 0.0};
    std::vector<double> values;
    Normalization normalization = Normalization::PerVolume;
    double volume = 1.0;
    std::size_t point_count = 0;

    [[nodiscard]] std::size_t size() const { return values.size(); }
    [[nodiscard]] double& at(std::size_t i1, std::size_t i2 = 0) { return values[i1 * shape[1] + i2]; }
    [[nodiscard]] double at(std::size_t i1, std::size_t i2 = 0) const { return values[i1 * shape[1] + i2]; }
    [[nodiscard]] Vec2 k_of(std::size_t i1, std::size_t i2 = 0) const {
        return {k0[0] + static_cast<double>(i1) * dk[0],
                dimension == 2 ? k0[1] + static_cast<double>(i2) * dk[1] : 0.0};
    }
    [[nodiscard]] double mean() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s / static_cast<double>(values.size());
    }
    [[nodiscard]] bool same_grid(const SpectrumGrid& o, double tol = 1e-12) const {
        return dimension == o.dimension && shape == o.shape && std::abs(dk[0] - o.dk[0]) <= tol &&
               std::abs(dk[1] - o.dk[1]) <= tol && std::abs(k0[0] - o.k0[0]) <= tol &&
               std::abs(k0[1] - o.k0[1]) <= tol;
    }
};

enum class Boundary { Periodic, OpenOverlap };

/// Autocorrelation coefficients nu(z) on difference vectors |z| <= radius.
struct AutocorrelationTable {
    struct Entry {
        Vec2 z;
        cplx nu;
    };
    std::vector<Entry> entries;  // sorted by z
    double radius = 0.0;
    Boundary boundary = Boundary::Periodic;
    double volume = 1.0;

    /// Coefficient at z (0 when z is not a difference vector of the support).
    [[nodiscard]] cplx at(const Vec2& z, double tol = 1e-9) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), Vec2{z[0] - tol, -1e300},
                                   [](const Entry& e, const Vec2& key) { return e.z < key; });
        for (; it != entries.end() && it->z[0] <= z[0] + tol; ++it) {
            if (std::abs(it->z[1] - z[1]) <= tol && std::abs(it->z[0] - z[0]) <= tol) return it->nu;
        }
        return {};
    }
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Reproducible random stream keyed by (seed, stream).
///
/// Uses mt19937_64 (bit-exact across standard libraries) and derives every
/// variate from raw 64-bit outputs, so no implementation-defined std
/// distribution is involved.
class SeededRng {
public:
    using result_type = std::uint64_t;

    explicit SeededRng(std::uint64_t seed = 0, std::uint64_t stream = 0) : seed_(seed), stream_(stream) {
        std::uint64_t s = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
        std::array<std::uint32_t, 8> words{};
        for (std::size_t i = 0; i < words.size(); i += 2) {
            const auto v = detail::splitmix64(s);
            words[i] = static_cast<std::uint32_t>(v);
            words[i + 1] = static_cast<std::uint32_t>(v >> 32);
        }
        std::seed_seq seq(words.begin(), words.end());
        engine_.seed(seq);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return engine_(); }

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    [[nodiscard]] std::uint64_t stream() const { return stream_; }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Uniform integer in [0, n), unbiased.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw DomainError("below(0)");
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t r;
        do {
            r = engine_();
        } while (r >= limit);
        return r % n;
    }

    /// Independent stream for ensemble member `k`.
    [[nodiscard]] SeededRng substream(std::uint64_t k) const {
        return SeededRng(seed_, stream_ * 0x100000001B3ULL + k + 1);
    }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

}  // namespace diffract
