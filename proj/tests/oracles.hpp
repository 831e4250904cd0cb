#pragma once
// Independent reference computations for tests: nothing here calls FFTW or the
// library's spectral code paths.

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "diffract/core.hpp"

namespace oracle {

using diffract::cplx;

/// Plain O(n^2) DFT with the e^{-2 pi i k n / N} sign.
inline std::vector<cplx> dft(const std::vector<cplx>& x) {
    const std::size_t n = x.size();
    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc{};
        for (std::size_t j = 0; j < n; ++j) {
            const auto r = static_cast<double>((k * j) % n) / static_cast<double>(n);
            acc += x[j] * std::polar(1.0, -2.0 * diffract::kPi * r);
        }
        out[k] = acc;
    }
    return out;
}

/// Separable 2D DFT (rows then columns) of an n0 x n1 row-major array.
inline std::vector<cplx> dft_2d(std::vector<cplx> a, std::size_t n0, std::size_t n1) {
    if (n1 > 1)
        for (std::size_t i = 0; i < n0; ++i) {
            std::vector<cplx> row(a.begin() + static_cast<long>(i * n1), a.begin() + static_cast<long>((i + 1) * n1));
            row = dft(row);
            std::copy(row.begin(), row.end(), a.begin() + static_cast<long>(i * n1));
        }
    if (n0 > 1)
        for (std::size_t j = 0; j < n1; ++j) {
            std::vector<cplx> col(n0);
            for (std::size_t i = 0; i < n0; ++i) col[i] = a[i * n1 + j];
            col = dft(col);
            for (std::size_t i = 0; i < n0; ++i) a[i * n1 + j] = col[i];
        }
    return a;
}

/// Rudin-Shapiro recursion evaluated literally, without memo.
inline int rs_naive(std::int64_t n) {
    if (n == 0) return 1;
    if (n == -1) return 0;
    const std::int64_t m = n >= 0 ? n / 4 : -((-n + 3) / 4);
    const std::int64_t l = n - 4 * m;
    const int em = rs_naive(m);
    if (l < 2) return em;
    const std::int64_t e = m + l + em;
    return (e % 2 != 0) ? 1 : 0;
}

/// Thue-Morse by literal substitution a -> ab, b -> ba (true = b).
inline std::vector<bool> tm_substitution(std::size_t n) {
    std::vector<bool> w{false};
    while (w.size() < n) {
        std::vector<bool> next;
        for (bool b : w) {
            next.push_back(b);
            next.push_back(!b);
        }
        w = std::move(next);
    }
    w.resize(n);
    return w;
}

/// 2D substitution a -> [[b, a], [a, b]], b -> [[a, b], [b, a]] iterated k times
/// from a; rows are listed top to bottom as written, returned with y pointing up
/// (index [x][y], y = 0 is the bottom row).
inline std::vector<std::vector<bool>> tm2d_rho(unsigned k) {
    std::vector<std::vector<bool>> top{{false}};  // [row from top][col], true = b
    for (unsigned s = 0; s < k; ++s) {
        const std::size_t n = top.size();
        std::vector<std::vector<bool>> next(2 * n, std::vector<bool>(2 * n));
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < n; ++c) {
                const bool b = top[r][c];
                // block written top row first: [[!b, b], [b, !b]] for a -> [[b,a],[a,b]]
                next[2 * r][2 * c] = !b;
                next[2 * r][2 * c + 1] = b;
                next[2 * r + 1][2 * c] = b;
                next[2 * r + 1][2 * c + 1] = !b;
            }
        top = std::move(next);
    }
    const std::size_t n = top.size();
    std::vector<std::vector<bool>> xy(n, std::vector<bool>(n));
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = 0; y < n; ++y) xy[x][y] = top[n - 1 - y][x];
    return xy;
}

/// Number of ice states on an L1 x L2 torus by trying all 2^(2 L1 L2) arrow fields.
inline std::uint64_t ice_count_bruteforce(std::size_t L1, std::size_t L2) {
    const std::size_t n = L1 * L2;
    std::uint64_t count = 0;
    for (std::uint64_t s = 0; s < (std::uint64_t{1} << (2 * n)); ++s) {
        auto h = [&](std::size_t x, std::size_t y) { return (s >> ((x % L1) * L2 + (y % L2))) & 1u; };
        auto v = [&](std::size_t x, std::size_t y) { return (s >> (n + (x % L1) * L2 + (y % L2))) & 1u; };
        bool ok = true;
        for (std::size_t x = 0; x < L1 && ok; ++x)
            for (std::size_t y = 0; y < L2 && ok; ++y) {
                // arrows pointing into (x, y): from the left (+x), below (+y); out of it: own bonds pointing away
                const unsigned in = h(x + L1 - 1, y) + (1u - h(x, y)) + v(x, y + L2 - 1) + (1u - v(x, y));
                ok = in == 2;
            }
        count += ok;
    }
    return count;
}

}  // namespace oracle
