#include <gtest/gtest.h>

#include <numeric>

#include "diffract/diffract.hpp"
#include "oracles.hpp"

using namespace diffract;

namespace {

// Every generator in the catalog at a small size, lattice and non-lattice alike.
std::vector<std::pair<std::string, WeightedComb>> catalog() {
    std::vector<std::pair<std::string, WeightedComb>> out;
    SeededRng rng(31);
    out.emplace_back("bernoulli", bernoulli_chain(1000, {}, rng));
    out.emplace_back("bernoulli-complex", bernoulli_chain(777, TwoLetterWeights{cplx(1, 2), cplx(-0.5, 0.25), 0.3, 0.7}, rng));
    out.emplace_back("rudin-shapiro", rudin_shapiro(-300, 724));
    out.emplace_back("thue-morse", thue_morse(1024, true));
    out.emplace_back("thue-morse-unsigned", thue_morse(1000, false));
    out.emplace_back("thue-morse-2d", thue_morse_2d(5, true));
    out.emplace_back("lattice", comb_from_lattice_weights(std::vector<double>(256, 1.0)));
    out.emplace_back("fibonacci", fibonacci_chain(3000));
    out.emplace_back("circle", circle_sequence(3000, CircleParams{}));
    out.emplace_back("random-tiling", random_interval_tiling(3000, 0.4, rng));
    IsingParams ip;
    ip.L1 = ip.L2 = 32;
    ip.equilibration_sweeps = 20;
    out.emplace_back("ising", ising_sample(ip));
    out.emplace_back("ice", ice_to_comb(ice_sample(8, 10, SeededRng(2)), 0.5, 1.0));
    out.emplace_back("bernoulli-ice", ice_to_comb(bernoulli_hydrogens(8, rng), 1.0, 1.0));
    return out;
}

double rel_err(double a, double b, double scale) { return std::abs(a - b) / std::max(std::abs(b), scale); }

}  // namespace

// ---------------------------------------------------------------- FFT diffraction

TEST(DiffractionFft, SinglePointIsFlat) {
    const auto s = diffraction_fft(comb_from_lattice_weights(std::vector<double>{1.0}), DiffractionOptions{.oversample = 8});
    ASSERT_EQ(s.size(), 8u);
    for (double v : s.values) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(DiffractionFft, FullLatticeBraggBins) {
    const std::size_t n = 1024;
    const auto s = diffraction_fft(comb_from_lattice_weights(std::vector<double>(n, 1.0)), DiffractionOptions{.oversample = 4});
    EXPECT_NEAR(s.at(0), static_cast<double>(n), 1e-9);
    for (std::size_t i = 4; i < s.shape[0]; i += 4) EXPECT_NEAR(s.at(i), 0.0, 1e-9);
}

TEST(DiffractionFft, MatchesDirectSums) {
    SeededRng rng(3);
    const auto c = bernoulli_chain(300, TwoLetterWeights{cplx(1, -1), 0.5, 0.5, 0.5}, rng);
    const auto s = diffraction_fft(c, DiffractionOptions{.oversample = 2});
    for (std::size_t i = 0; i < s.shape[0]; i += 7) {
        const double d = diffraction_direct(c, s.k_of(i));
        EXPECT_LE(rel_err(s.at(i), d, s.mean()), 1e-10);
    }
}

TEST(DiffractionFft, Matches2DDirectSums) {
    const auto c = ice_to_comb(ice_sample(4, 5, SeededRng(9)), 0.3, 1.0);
    const auto s = diffraction_fft(c);
    for (std::size_t i = 0; i < s.shape[0]; i += 3)
        for (std::size_t j = 0; j < s.shape[1]; j += 5)
            EXPECT_LE(rel_err(s.at(i, j), diffraction_direct(c, s.k_of(i, j)), s.mean()), 1e-10);
}

TEST(DiffractionFft, ParsevalOverCatalog) {
    for (const auto& [name, c] : catalog()) {
        SCOPED_TRACE(name);
        const auto s = diffraction_fft(c);
        const double expect = c.total_power() / c.volume();
        EXPECT_LE(std::abs(s.mean() - expect) / expect, 1e-9);
        for (double v : s.values) ASSERT_GE(v, 0.0);
    }
}

TEST(DiffractionFft, ParsevalEqualsAutocorrelationAtZero) {
    for (const auto& [name, c] : catalog()) {
        SCOPED_TRACE(name);
        const auto s = diffraction_fft(c);
        const auto nu0 = autocorrelation(c, 0.0).at({0.0, 0.0});
        EXPECT_LE(std::abs(s.mean() - nu0.real()) / nu0.real(), 1e-9);
    }
}

TEST(DiffractionFft, WienerKhinchinWithNaiveDft) {
    for (const auto& [name, c] : catalog()) {
        if (!c.lattice()) continue;
        SCOPED_TRACE(name);
        const auto s = diffraction_fft(c);
        const auto nu = periodic_autocorrelation_grid(c);
        const auto t = oracle::dft_2d(nu, s.shape[0], s.shape[1]);
        const double floor = s.mean();
        for (std::size_t b = 0; b < s.size(); ++b) {
            ASSERT_LE(std::abs(t[b].imag()), 1e-9 * std::max(s.values[b], floor));
            ASSERT_LE(rel_err(t[b].real(), s.values[b], floor), 1e-9) << "bin " << b;
        }
    }
}

TEST(DiffractionFft, ThueMorseProductProperty) {
    const unsigned k = 6;
    const auto s2 = diffraction_fft(thue_morse_2d(k, true));
    const auto s1 = diffraction_fft(thue_morse(std::size_t{1} << k, true));
    const double floor = s2.mean();
    for (std::size_t i = 0; i < s2.shape[0]; ++i)
        for (std::size_t j = 0; j < s2.shape[1]; ++j)
            ASSERT_LE(rel_err(s2.at(i, j), s1.at(i) * s1.at(j), floor), 1e-9);
}

TEST(DiffractionFft, BinnedRejectsLargePhaseError) {
    const auto c = fibonacci_chain(100);
    DiffractionOptions o;
    o.k_max = 1000.0;
    EXPECT_THROW(diffraction_fft(c, o), DomainError);
    try {
        diffraction_fft(c, o);
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("phase error"), std::string::npos);
    }
}

TEST(DiffractionFft, BinnedRejectsOversizedGrid) {
    DiffractionOptions o;
    o.max_bins = 1024;
    EXPECT_THROW(diffraction_fft(fibonacci_chain(1000), o), DomainError);
}

TEST(DiffractionFft, BinnedRejectsSharedBins) {
    DiffractionOptions o;
    o.bin_width = 1.5;
    o.k_max = 0.001;
    EXPECT_THROW(diffraction_fft(fibonacci_chain(100), o), DomainError);
}

TEST(Incommensurate, BinnedAgreesWithDirectAtCrossover) {
    // Just above the direct-sum limit the binned path takes over; compare it with
    // direct sums at the strongest bins below k = 1 and at a spread of ordinary bins.
    const auto c = fibonacci_chain(200001);
    IncommensurateOptions o;
    o.k_max = 1.0;
    const auto s = diffraction_incommensurate(c, o);
    ASSERT_GT(c.size(), o.direct_limit);
    const std::size_t top = s.shape[0];
    std::vector<std::size_t> idx(top);
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + 20, idx.end(), [&](auto a, auto b) { return s.at(a) > s.at(b); });
    for (std::size_t r = 0; r < 20; ++r) {
        const auto i = idx[r];
        EXPECT_LE(rel_err(s.at(i), diffraction_direct(c, s.k_of(i)), 1.0), 5e-3) << "k = " << s.k_of(i)[0];
    }
    for (std::size_t i = 1; i < top; i += top / 50)
        EXPECT_NEAR(s.at(i), diffraction_direct(c, s.k_of(i)), 5e-3 * s.at(idx[0])) << i;
}

TEST(Incommensurate, DirectAndBinnedPathsAgree) {
    const auto c = circle_sequence(5000, CircleParams{});
    IncommensurateOptions direct;
    direct.k_max = 2.0;
    const auto a = diffraction_incommensurate(c, direct);
    EXPECT_LE(a.k_of(a.shape[0] - 1)[0], 2.0);
    EXPECT_GT(a.k_of(a.shape[0] - 1)[0], 2.0 - a.dk[0]);
    IncommensurateOptions binned = direct;
    binned.direct_limit = 10;
    const auto b = diffraction_incommensurate(c, binned);
    EXPECT_LE(b.k_of(b.shape[0] - 1)[0], 2.0);
    EXPECT_NEAR(a.at(0), b.at(0), 1e-6 * a.at(0));
    const double top = *std::max_element(b.values.begin(), b.values.end());
    for (std::size_t i = 0; i < b.shape[0]; i += 97)
        EXPECT_NEAR(b.at(i), diffraction_direct(c, b.k_of(i)), 5e-3 * top) << b.k_of(i)[0];
}

TEST(Incommensurate, Rejects2D) {
    EXPECT_THROW(diffraction_incommensurate(thue_morse_2d(2, true)), DomainError);
}

TEST(DiffractionCut, MatchesDirectSums) {
    const auto c = thue_morse_2d(5, true);
    const auto cut = diffraction_cut(c, 1.0 / 3.0);
    ASSERT_EQ(cut.shape[0], 32u);
    for (std::size_t j = 0; j < cut.shape[0]; ++j)
        EXPECT_LE(rel_err(cut.at(j), diffraction_direct(c, {1.0 / 3.0, cut.k_of(j)[0]}), cut.mean()), 1e-10);
}

TEST(AverageSpectra, IndependentOfThreadCount) {
    auto make = [](std::size_t i) {
        SeededRng rng = SeededRng(4).substream(i);
        return diffraction_fft(bernoulli_chain(512, {}, rng));
    };
    const auto one = average_spectra(16, make, 1);
    const auto many = average_spectra(16, make, 5);
    EXPECT_EQ(one.values, many.values);
}

TEST(AverageSpectra, RejectsMismatchedGrids) {
    auto make = [](std::size_t i) { return diffraction_fft(thue_morse(64 + i, true)); };
    EXPECT_THROW(average_spectra(2, make), IncompatibleError);
}

// ---------------------------------------------------------------- autocorrelation

TEST(Autocorrelation, FullPeriodicLattice) {
    const auto c = comb_from_lattice_weights(std::vector<double>(64, 1.0), 1.0, true);
    const auto t = autocorrelation(c, 10.0);
    EXPECT_EQ(t.boundary, Boundary::Periodic);
    for (int z = -10; z <= 10; ++z) EXPECT_NEAR(t.at({static_cast<double>(z), 0.0}).real(), 1.0, 1e-12);
}

TEST(Autocorrelation, BernoulliOpenBoundary) {
    SeededRng rng(13);
    const auto c = bernoulli_chain(100000, {}, rng);
    const auto t = autocorrelation(c, 20.0);
    EXPECT_EQ(t.boundary, Boundary::OpenOverlap);
    EXPECT_NEAR(t.at({0.0, 0.0}).real(), 0.5, 0.01);
    for (int z = 1; z <= 20; ++z) {
        EXPECT_NEAR(t.at({static_cast<double>(z), 0.0}).real(), 0.25, 0.01);
        EXPECT_NEAR(t.at({-static_cast<double>(z), 0.0}).real(), 0.25, 0.01);
    }
}

TEST(Autocorrelation, RudinShapiroDecorrelates) {
    const std::size_t n = 65536;
    const auto t = autocorrelation(rudin_shapiro(0, static_cast<std::int64_t>(n)), 100.0);
    // partial sums of the +-1 Rudin-Shapiro sequence are O(sqrt N)
    EXPECT_NEAR(t.at({0.0, 0.0}).real(), 0.5, 1.0 / std::sqrt(static_cast<double>(n)));
    double worst = 0.0;
    for (int z = 1; z <= 100; ++z) worst = std::max(worst, std::abs(t.at({static_cast<double>(z), 0.0}).real() - 0.25));
    EXPECT_LE(worst, 2.0 / std::sqrt(static_cast<double>(n)));
}

TEST(Autocorrelation, ZeroCoefficientIsTotalPower) {
    for (const auto& [name, c] : catalog()) {
        SCOPED_TRACE(name);
        const auto t = autocorrelation(c, 2.0);
        EXPECT_LE(std::abs(t.at({0.0, 0.0}).real() - c.total_power() / c.volume()), 1e-9 * c.total_power() / c.volume());
    }
}

TEST(Autocorrelation, RealWeightsAreSymmetric) {
    for (const auto& [name, c] : catalog()) {
        if (c.weights()[0].imag() != 0.0) continue;
        SCOPED_TRACE(name);
        const auto t = autocorrelation(c, 3.0);
        for (const auto& e : t.entries) {
            const cplx back = t.at({-e.z[0], -e.z[1]});
            ASSERT_LE(std::abs(back - e.nu), 1e-12);
        }
    }
}

TEST(Autocorrelation, ComplexWeightsConjugate) {
    Extent ext;
    ext.size = {2.0, 1.0};
    const cplx a(1, 2), b(-0.5, 3);
    const WeightedComb c(1, {{0.0, 0.0}, {1.0, 0.0}}, {a, b}, ext);
    const auto t = autocorrelation(c, 1.0);
    // nu(1) = sum_y w(y) conj(w(y - 1)) / overlap = b conj(a) / 1
    EXPECT_LE(std::abs(t.at({1.0, 0.0}) - b * std::conj(a)), 1e-12);
    EXPECT_LE(std::abs(t.at({-1.0, 0.0}) - std::conj(t.at({1.0, 0.0}))), 1e-12);
    EXPECT_NEAR(t.at({0.0, 0.0}).real(), (std::norm(a) + std::norm(b)) / 2.0, 1e-12);
}

TEST(Autocorrelation, RadiusBeyondExtentRejected) {
    EXPECT_THROW(autocorrelation(thue_morse(16, true), 17.0), DomainError);
}

TEST(Autocorrelation, IceSupportOnThirdGrid) {
    SeededRng rng(3);
    const auto t = autocorrelation(ice_to_comb(bernoulli_hydrogens(6, rng), 1.0, 1.0), 2.0);
    for (const auto& e : t.entries)
        for (int a = 0; a < 2; ++a) ASSERT_NEAR(3.0 * e.z[a], std::round(3.0 * e.z[a]), 1e-9);
}

TEST(Autocorrelation, BernoulliIceMatchesClosedForm) {
    const double hO = 0.7, hH = 1.0;
    const std::size_t L = 24, members = 40;
    std::vector<Vec2> probes{{0, 0}, {1.0 / 3, 0}, {0, 1.0 / 3}, {-1.0 / 3, 0}, {2.0 / 3, 0}, {1.0 / 3, 1.0 / 3},
                             {1, 0}, {1, 1}, {4.0 / 3, 0}, {1.0 / 3, -2.0 / 3}, {5.0 / 3, 1}, {2, 2.0 / 3}};
    std::vector<double> mean(probes.size(), 0.0);
    for (std::size_t m = 0; m < members; ++m) {
        SeededRng rng = SeededRng(17).substream(m);
        const auto t = autocorrelation(ice_to_comb(bernoulli_hydrogens(L, rng), hO, hH), 3.0);
        for (std::size_t p = 0; p < probes.size(); ++p) mean[p] += t.at(probes[p]).real() / members;
    }
    for (std::size_t p = 0; p < probes.size(); ++p)
        EXPECT_NEAR(mean[p], ice_autocorrelation_analytic(probes[p], hO, hH), 0.02)
            << probes[p][0] << "," << probes[p][1];
}

// ---------------------------------------------------------------- analytic spectra

TEST(Analytic, BernoulliFairCoin) {
    const auto s = analytic_bernoulli_spectrum(1.0, 0.0, 0.5, 0.5);
    EXPECT_DOUBLE_EQ(s.pp({3, 0}), 0.25);
    EXPECT_DOUBLE_EQ(s.ac({0.3, 0}), 0.25);
}

TEST(Analytic, BernoulliWithoutDisorder) {
    EXPECT_NEAR(analytic_bernoulli_spectrum(cplx(2, 1), cplx(2, 1), 0.3, 0.7).ac({0.1, 0}), 0.0, 1e-12);
    EXPECT_NEAR(analytic_bernoulli_spectrum(cplx(2, 1), cplx(2, 1), 0.3, 0.7).pp({0, 0}), 5.0, 1e-12);
    EXPECT_NEAR(analytic_bernoulli_spectrum(1.0, 5.0, 1.0, 0.0).ac({0.1, 0}), 0.0, 1e-12);
    EXPECT_THROW(analytic_bernoulli_spectrum(1.0, 0.0, 0.5, 0.6), DomainError);
}

TEST(Analytic, RudinShapiroIsHomometricToBernoulli) {
    const auto rs = analytic_rs_spectrum();
    EXPECT_DOUBLE_EQ(rs.pp({0, 0}), 0.25);
    EXPECT_DOUBLE_EQ(rs.ac({0.4, 0}), 0.25);
    EXPECT_DOUBLE_EQ(rs.pp({0, 0}) + rs.ac({0, 0}), 0.5);
    std::vector<Vec2> probes;
    for (int i = -20; i <= 20; ++i) probes.push_back({i * 0.37, 0.0});
    EXPECT_TRUE(analytic_equal(rs, analytic_bernoulli_spectrum(1.0, 0.0, 0.5, 0.5), probes));
    EXPECT_FALSE(analytic_equal(rs, analytic_bernoulli_spectrum(1.0, 0.0, 0.6, 0.4), probes));
}

TEST(Analytic, IsingPurePoint) {
    EXPECT_DOUBLE_EQ(analytic_ising_pp(IsingRegime::AboveCritical).pp({2, 5}), 0.25);
    EXPECT_DOUBLE_EQ(analytic_ising_pp(IsingRegime::BelowCritical, 0.9).pp({0, 0}), 0.81);
    EXPECT_DOUBLE_EQ(analytic_ising_pp(IsingRegime::BelowCritical, 0.5).pp({0, 0}), 0.25);
    EXPECT_FALSE(analytic_ising_pp(IsingRegime::AboveCritical).has_ac());
    EXPECT_THROW(analytic_ising_pp(IsingRegime::BelowCritical, 0.4), DomainError);
    EXPECT_THROW(analytic_ising_pp(IsingRegime::BelowCritical, 1.1), DomainError);
}

TEST(Analytic, IceBraggExtinctions) {
    for (auto [a, b] : {std::pair{1, 1}, {1, 2}, {2, 1}, {2, 2}}) EXPECT_NEAR(ice_bragg(a, b, 0.8, 0.8), 0.0, 1e-24);
    EXPECT_NEAR(ice_bragg(0, 0, 0.0, 1.0), 4.0, 1e-12);
    for (int a = -4; a <= 4; ++a)
        for (int b = -4; b <= 4; ++b) {
            EXPECT_NEAR(ice_bragg(a + 3, b, 0.3, 1.1), ice_bragg(a, b, 0.3, 1.1), 1e-12);
            EXPECT_NEAR(ice_bragg(a, b - 3, 0.3, 1.1), ice_bragg(a, b, 0.3, 1.1), 1e-12);
        }
}

TEST(Analytic, BernoulliIceBackground) {
    EXPECT_DOUBLE_EQ(bernoulli_ice_background({0, 0}, 1.0), 0.0);
    EXPECT_NEAR(bernoulli_ice_background({1.5, 1.5}, 1.0), 2.0, 1e-12);
    for (double a = -2; a <= 2; a += 0.37)
        for (double b = -2; b <= 2; b += 0.29)
            EXPECT_NEAR(bernoulli_ice_background({a, b}, 0.7), bernoulli_ice_background({b, a}, 0.7), 1e-12);
    // independent of hO
    EXPECT_DOUBLE_EQ(analytic_bernoulli_ice(0.0, 1.0).ac({0.3, 0.2}), analytic_bernoulli_ice(5.0, 1.0).ac({0.3, 0.2}));
}

TEST(Analytic, IceAutocorrelationExamples) {
    const double hO = 0.6, hH = 1.3;
    EXPECT_NEAR(ice_autocorrelation_analytic({0, 0}, hO, hH), hO * hO + 2 * hH * hH, 1e-12);
    EXPECT_NEAR(ice_autocorrelation_analytic({1.0 / 3, 0}, hO, hH), hO * hH, 1e-12);
    EXPECT_NEAR(ice_autocorrelation_analytic({5, 7}, hO, hH), hO * hO + hH * hH, 1e-12);
    EXPECT_NEAR(ice_autocorrelation_analytic({1.0 / 3, -1.0 / 3}, hO, hH), hH * hH / 2, 1e-12);
    EXPECT_NEAR(ice_autocorrelation_analytic({4.0 / 3, 0}, hO, hH), hO * hH + hH * hH / 4, 1e-12);
    EXPECT_EQ(ice_autocorrelation_analytic({0.5, 0}, hO, hH), 0.0);
}

TEST(Analytic, BernoulliIceSpectrumNumerically) {
    // Ensemble mean of the Bernoulli-hydrogen model against Bragg weights times V and g(k).
    const std::size_t L = 16, members = 200;
    const double hO = 0.4, hH = 1.0;
    const auto mean = average_spectra(members, [&](std::size_t m) {
        SeededRng rng = SeededRng(23).substream(m);
        return diffraction_fft(ice_to_comb(bernoulli_hydrogens(L, rng), hO, hH));
    }, 4);
    const double V = static_cast<double>(L * L);
    double worst_bg = 0.0;
    for (std::size_t i = 0; i < mean.shape[0]; ++i)
        for (std::size_t j = 0; j < mean.shape[1]; ++j) {
            const auto k = mean.k_of(i, j);
            const double g = bernoulli_ice_background(k, hH);
            if (is_integer_bin(mean, i, j)) {
                const double pp = ice_bragg(std::llround(k[0]), std::llround(k[1]), hO, hH) * V;
                EXPECT_NEAR(mean.at(i, j), pp + g, 6.0 * std::sqrt(2.0 * pp * g / members) + 1e-9);
            } else {
                worst_bg = std::max(worst_bg, std::abs(mean.at(i, j) - g) / std::max(g, 0.05));
            }
        }
    EXPECT_LT(worst_bg, 0.5);  // 200 members: per-bin relative noise about 1/sqrt(200)
}

// ---------------------------------------------------------------- scaling

TEST(Scaling, ExactPowerLaw) {
    const auto f = fit_scaling({16, 64, 256, 1024, 4096}, {4, 8, 16, 32, 64});
    EXPECT_NEAR(f.alpha, 0.5, 1e-12);
    EXPECT_NEAR(f.alpha_stderr, 0.0, 1e-9);
    EXPECT_EQ(f.classification, ScalingClass::Intermediate);
    EXPECT_FALSE(f.caveat.empty());
}

TEST(Scaling, Classification) {
    EXPECT_EQ(classify_exponent(1.0), ScalingClass::PurePointLike);
    EXPECT_EQ(classify_exponent(0.95), ScalingClass::PurePointLike);
    EXPECT_EQ(classify_exponent(0.0), ScalingClass::AbsolutelyContinuousLike);
    EXPECT_EQ(classify_exponent(-0.04), ScalingClass::AbsolutelyContinuousLike);
    EXPECT_EQ(classify_exponent(0.5), ScalingClass::Intermediate);
    EXPECT_EQ(classify_exponent(std::nan("")), ScalingClass::Degenerate);
}

TEST(Scaling, RejectsBadInput) {
    EXPECT_THROW(fit_scaling({1, 2, 3}, {1, 2, 3}), DomainError);
    EXPECT_THROW(fit_scaling({1, 2, 2, 3}, {1, 2, 3, 4}), DomainError);
    EXPECT_THROW(fit_scaling({1, 2, 3, 4}, {1, 2, 3}), DomainError);
}

TEST(Scaling, ZeroIntensityIsDegenerate) {
    const auto f = fit_scaling({4, 16, 64, 256}, {1, 0, 1, 1});
    EXPECT_TRUE(f.degenerate);
    EXPECT_EQ(f.classification, ScalingClass::Degenerate);
}

TEST(Scaling, FullLatticeIsPurePoint) {
    auto make = [](std::size_t n, std::size_t) { return comb_from_lattice_weights(std::vector<double>(n, 1.0)); };
    const auto f = peak_scaling(make, {1.0, 0.0}, {64, 128, 256, 512, 1024});
    EXPECT_NEAR(f.alpha, 1.0, 0.02);
    EXPECT_EQ(f.classification, ScalingClass::PurePointLike);
}

TEST(Scaling, ThueMorseAtOneThird) {
    // |F(1/3)|^2 = 3^(2j) at N = 4^j, so alpha = log2(3) - 1 exactly.
    auto make = [](std::size_t n, std::size_t) { return thue_morse(n, true); };
    const auto f = peak_scaling(make, {1.0 / 3.0, 0.0}, {256, 1024, 4096, 16384, 65536});
    EXPECT_NEAR(f.alpha, std::log2(3.0) - 1.0, 1e-9);
    EXPECT_NEAR(f.alpha, 0.584963, 1e-6);
    EXPECT_EQ(f.classification, ScalingClass::Intermediate);
}

TEST(Scaling, ThueMorseProductOracle) {
    // product formula |prod_j (1 - e^{2 pi i 2^j k})|^2 for the signed chain of length 2^m
    const double k = 0.2;
    for (unsigned m = 4; m <= 12; m += 2) {
        cplx prod = 1.0;
        for (unsigned j = 0; j < m; ++j) prod *= 1.0 - std::polar(1.0, -2.0 * kPi * std::ldexp(k, static_cast<int>(j)));
        const double n = std::ldexp(1.0, static_cast<int>(m));
        EXPECT_NEAR(diffraction_direct(thue_morse(static_cast<std::size_t>(n), true), {k, 0}), std::norm(prod) / n, 1e-9);
    }
}

TEST(Scaling, InvariantUnderWeightScaling) {
    const cplx c(0.3, -2.0);
    auto plain = [](std::size_t n, std::size_t) { return thue_morse(n, true); };
    auto scaled = [c](std::size_t n, std::size_t) {
        auto lw = lattice_weights_of(thue_morse(n, true));
        for (auto& v : lw.values) v *= c;
        return comb_from_lattice_weights(lw);
    };
    const std::vector<std::size_t> sizes{256, 1024, 4096, 16384};
    const auto a = peak_scaling(plain, {0.2, 0}, sizes), b = peak_scaling(scaled, {0.2, 0}, sizes);
    EXPECT_NEAR(a.alpha, b.alpha, 1e-9);
    EXPECT_EQ(a.classification, b.classification);
    for (std::size_t i = 0; i < sizes.size(); ++i) EXPECT_NEAR(b.intensities[i], std::norm(c) * a.intensities[i], 1e-9 * b.intensities[i]);
}

TEST(Scaling, BernoulliBackgroundIsFlat) {
    // bin mean over k in [0.1, 0.4], averaged over realizations
    std::vector<double> ns, is;
    for (std::size_t n : {256, 512, 1024, 2048, 4096}) {
        double acc = 0.0;
        for (std::size_t r = 0; r < 50; ++r) {
            SeededRng rng = SeededRng(n).substream(r);
            const auto s = diffraction_fft(bernoulli_chain(n, {}, rng));
            double sum = 0.0, cnt = 0.0;
            for (std::size_t i = 0; i < s.size(); ++i)
                if (s.k_of(i)[0] >= 0.1 && s.k_of(i)[0] <= 0.4) {
                    sum += s.at(i);
                    cnt += 1.0;
                }
            acc += sum / cnt;
        }
        ns.push_back(static_cast<double>(n));
        is.push_back(acc / 50.0);
    }
    const auto f = fit_scaling(ns, is);
    EXPECT_LE(std::abs(f.alpha), 0.05);
    EXPECT_EQ(f.classification, ScalingClass::AbsolutelyContinuousLike);
}

TEST(Scaling, WindowTracksMovingPeak) {
    // strongest Fibonacci peak in (0.2, 2); its finite-size maximum drifts, the window follows it
    const auto g = diffraction_direct_grid(fibonacci_chain(20000), 0.2, 1e-4, 18000);
    const auto it = std::max_element(g.values.begin(), g.values.end());
    const double k = g.k_of(static_cast<std::size_t>(it - g.values.begin()))[0];
    ScalingOptions o;
    o.window = 0.005;
    auto make = [](std::size_t n, std::size_t) { return fibonacci_chain(n); };
    const auto f = peak_scaling(make, {k, 0}, {1000, 2000, 4000, 8000, 16000}, o);
    EXPECT_GT(f.alpha, 0.9);
}

// ---------------------------------------------------------------- symmetry

TEST(Symmetry, IdentityAndSymmetricSpectra) {
    const auto s = diffraction_fft(thue_morse_2d(5, true));
    EXPECT_EQ(symmetry_score(s, SymmetryOp::Identity), 0.0);
    EXPECT_NEAR(symmetry_score(s, SymmetryOp::AxisSwap), 0.0, 1e-12);
    EXPECT_NEAR(symmetry_score(s, SymmetryOp::Rotate90), 0.0, 1e-12);
}

TEST(Symmetry, DetectsAnisotropy) {
    SpectrumGrid s;
    s.dimension = 2;
    s.shape = {4, 4};
    s.values.assign(16, 1.0);
    s.at(1, 0) = 5.0;
    EXPECT_GT(symmetry_score(s, SymmetryOp::AxisSwap), 0.1);
    const auto t = apply_symmetry(s, SymmetryOp::Rotate90);
    EXPECT_EQ(t.at(0, 1), 5.0);  // (1, 0) -> (0, 1)
}

TEST(Symmetry, RejectsNonSquare) {
    SpectrumGrid s;
    s.dimension = 2;
    s.shape = {4, 2};
    s.values.assign(8, 1.0);
    EXPECT_THROW(symmetry_score(s, SymmetryOp::AxisSwap), IncompatibleError);
}

TEST(Symmetry, BraggOnlyKeepsIntegerBins) {
    const auto s = diffraction_fft(comb_from_lattice_weights(std::vector<double>(8, 1.0)), DiffractionOptions{.oversample = 4});
    const auto b = bragg_only(s);
    for (std::size_t i = 0; i < s.shape[0]; ++i) EXPECT_EQ(b.at(i), i == 0 ? s.at(0) : 0.0);
}

TEST(Symmetry, IsotropicIsingIsSwapSymmetric) {
    IsingParams p;
    p.L1 = p.L2 = 32;
    p.K1 = p.K2 = 0.3;
    p.equilibration_sweeps = 100;
    const auto combs = ising_measurements(p, 200);
    const auto mean = average_spectra(combs.size(), [&](std::size_t i) { return diffraction_fft(combs[i]); });
    EXPECT_LT(symmetry_score(mean, SymmetryOp::AxisSwap), 0.05);
}

// ---------------------------------------------------------------- homometry

TEST(Homometry, IdenticalSpectraAreAtZeroDistance) {
    const auto s = diffraction_fft(rudin_shapiro(0, 1024));
    const auto r = homometry_compare(s, s);
    EXPECT_EQ(r.raw_l1, 0.0);
    EXPECT_EQ(r.smoothed_l1, 0.0);
}

TEST(Homometry, GridMismatchRejected) {
    EXPECT_THROW(homometry_compare(diffraction_fft(thue_morse(64, true)), diffraction_fft(thue_morse(128, true))),
                 IncompatibleError);
}

TEST(Homometry, SmoothingPreservesMean) {
    const auto s = diffraction_fft(rudin_shapiro(0, 4096));
    EXPECT_NEAR(smooth_triangular(s, 8).mean(), s.mean(), 1e-9 * s.mean());
}

TEST(Homometry, BernoulliAndFibonacciDiffer) {
    const std::size_t n = 4096;
    const double dk = 1.0 / n;
    auto bern = [&](std::size_t r) {
        SeededRng rng = SeededRng(6).substream(r);
        return diffraction_direct_grid(bernoulli_chain(n, {}, rng), 0.0, dk, n);
    };
    std::vector<SpectrumGrid> members;
    for (std::size_t r = 0; r < 20; ++r) members.push_back(bern(r));
    const auto mean = average_spectra(members.size(), [&](std::size_t i) { return members[i]; });
    double spread = 0.0;
    for (const auto& m : members) spread += homometry_compare(m, mean).smoothed_l1 / static_cast<double>(members.size());
    const auto fib = diffraction_direct_grid(fibonacci_chain(n), 0.0, dk, n);
    const auto d = homometry_compare(fib, mean);
    EXPECT_GT(d.smoothed_l1, 5.0 * spread);
}

// ---------------------------------------------------------------- block entropy

TEST(BlockEntropyTest, ConstantSequenceHasNoEntropy) {
    const std::vector<std::uint8_t> seq(5000, 1);
    const auto be = block_entropy(seq, 6);
    for (double h : be.h) EXPECT_NEAR(h, 0.0, 1e-12);
}

TEST(BlockEntropyTest, FairCoinIsLogTwo) {
    SeededRng rng(99);
    const auto letters = binary_letters(bernoulli_chain(1000000, {}, rng));
    const auto be = block_entropy(letters, 10);
    for (double h : be.h) EXPECT_NEAR(h, std::log(2.0), 0.02);
}

TEST(BlockEntropyTest, RudinShapiroEntropyDrops) {
    const auto letters = binary_letters(rudin_shapiro(0, 1 << 20));
    const auto be = block_entropy(letters, 10);
    for (std::size_t n = 1; n < be.h.size(); ++n) EXPECT_LE(be.h[n], be.h[n - 1] + 1e-6) << n;
    EXPECT_LT(be.h.back(), 0.2);
}

TEST(BlockEntropyTest, PeriodicSequence) {
    std::vector<std::uint8_t> seq;
    for (int i = 0; i < 3000; ++i) seq.push_back(i % 3 == 0);
    const auto be = block_entropy(seq, 5);
    EXPECT_NEAR(be.H[0], -(1.0 / 3) * std::log(1.0 / 3) - (2.0 / 3) * std::log(2.0 / 3), 1e-3);
    for (std::size_t n = 2; n < be.h.size(); ++n) EXPECT_NEAR(be.h[n], 0.0, 1e-3);
}

TEST(BlockEntropyTest, FlagsUndersampledLengths) {
    const std::vector<std::uint8_t> seq(100, 0);
    const auto be = block_entropy(seq, 5);
    EXPECT_FALSE(be.undersampled[1]);  // 4^2 = 16 <= 100
    EXPECT_TRUE(be.undersampled[4]);   // 4^5 > 100
    EXPECT_THROW(block_entropy(seq, 0), DomainError);
}
