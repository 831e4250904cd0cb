#pragma once
// Command implementations behind the `diffract` executable: run configuration,
// comb / spectrum / image file formats, and the generate, diffract, analyze and
// reproduce pipelines. Commands report failures as CliError carrying the exit code.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffract/diffract.hpp"

namespace diffract::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kConfigError = 2, kInputError = 3, kIncompatible = 4 };

class CliError : public std::runtime_error {
public:
    CliError(int code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    [[nodiscard]] int code() const { return code_; }

private:
    int code_;
};

inline const std::vector<std::string>& model_names() {
    static const std::vector<std::string> names{"bernoulli", "rudin-shapiro", "thue-morse", "thue-morse-2d",
                                                "fibonacci", "circle",        "random-tiling", "lattice",
                                                "ising",     "ice",           "bernoulli-ice"};
    return names;
}

inline const std::vector<std::string>& figure_names() {
    static const std::vector<std::string> names{"fig1", "fig2", "fig3", "fig4", "fig5"};
    return names;
}

// ---------------------------------------------------------------------------
// Text helpers

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

inline std::string join(const std::vector<std::string>& v, const std::string& sep = ", ") {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

/// Shortest decimal text that parses back to the same double.
inline std::string fmt(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

/// Accepts decimals and fractions "p/q".
inline std::optional<double> parse_real(std::string_view s) {
    const std::string t = trim(s);
    if (t.empty()) return std::nullopt;
    if (auto slash = t.find('/'); slash != std::string::npos) {
        auto a = parse_real(t.substr(0, slash)), b = parse_real(t.substr(slash + 1));
        if (!a || !b || *b == 0.0) return std::nullopt;
        return *a / *b;
    }
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

/// "re" or "re,im".
inline std::optional<cplx> parse_complex(std::string_view s) {
    const std::string t = trim(s);
    if (auto comma = t.find(','); comma != std::string::npos) {
        auto re = parse_real(t.substr(0, comma)), im = parse_real(t.substr(comma + 1));
        if (!re || !im) return std::nullopt;
        return cplx{*re, *im};
    }
    auto re = parse_real(t);
    if (!re) return std::nullopt;
    return cplx{*re, 0.0};
}

inline std::optional<std::uint64_t> parse_uint(std::string_view s) {
    const std::string t = trim(s);
    std::uint64_t v = 0;
    auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || r.ec != std::errc{} || r.ptr != t.data() + t.size()) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// Run configuration

struct KeyDef {
    std::string name;
    std::string fallback;
    std::string help;
};

inline const std::vector<KeyDef>& config_schema() {
    static const std::vector<KeyDef> keys{
        {"figure", "none", "fig1..fig5 for reproduce runs, none otherwise"},
        {"model", "rudin-shapiro", "generator: " + join(model_names())},
        {"n", "1024", "points / sites (1D models)"},
        {"a", "0", "first site of the Rudin-Shapiro range [a, a+n)"},
        {"depth", "9", "2D Thue-Morse substitution depth (side 2^depth)"},
        {"signed", "true", "Thue-Morse weights +1/-1 (true) or 1/0 (false)"},
        {"h1", "1", "Bernoulli letter weight 1 (re or re,im)"},
        {"h2", "0", "Bernoulli letter weight 2 (re or re,im)"},
        {"p1", "0.5", "probability of h1"},
        {"alpha", "0.6180339887498949", "circle rotation number"},
        {"beta", "0.3819660112501051", "circle window length"},
        {"xi", "0.6180339887498949", "circle gap increment"},
        {"x0", "0", "circle start position"},
        {"p_long", "0.5", "random tiling long-tile probability"},
        {"L", "64", "torus side (ising, ice, bernoulli-ice)"},
        {"K1", "0.35", "Ising coupling along x"},
        {"K2", "0.1", "Ising coupling along y"},
        {"equilibration", "1000", "Ising equilibration sweeps / ice start sweeps"},
        {"interval", "10", "sweeps between successive Ising or ice realizations"},
        {"hO", "0", "oxygen scattering strength"},
        {"hH", "1", "hydrogen scattering strength"},
        {"seed", "0", "random seed"},
        {"realizations", "1", "ensemble members"},
        {"output", "out", "output directory"},
        {"oversample", "1", "zero padding factor (lattice) / grid refinement (direct sums)"},
        {"k_max", "4", "largest k for combs without a lattice"},
        {"cut_k1", "none", "fixed k1 of a 1D cut through a 2D spectrum, or none"},
        {"scale", "auto", "image intensity mapping: auto, log, linear"},
        {"colormap", "gray", "image colormap (linear grayscale only)"},
        {"gamma", "1", "image gamma applied after normalization"},
    };
    return keys;
}

class RunConfig {
public:
    RunConfig() {
        for (const auto& k : config_schema()) values_[k.name] = k.fallback;
    }

    static bool known(const std::string& key) {
        const auto& s = config_schema();
        return std::any_of(s.begin(), s.end(), [&](const KeyDef& k) { return k.name == key; });
    }

    void set(const std::string& key, const std::string& value) {
        if (!known(key)) {
            std::vector<std::string> names;
            for (const auto& k : config_schema()) names.push_back(k.name);
            throw CliError(kConfigError, "unknown config key '" + key + "'; valid keys: " + join(names));
        }
        values_[key] = trim(value);
    }

    /// key = value lines; '#' starts a comment; blank lines ignored; a key may appear once.
    void load_text(const std::string& text, const std::string& origin = "config") {
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        std::map<std::string, std::size_t> seen;
        while (std::getline(in, line)) {
            ++lineno;
            if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            const std::string t = trim(line);
            if (t.empty()) continue;
            const auto eq = t.find('=');
            if (eq == std::string::npos)
                throw CliError(kConfigError, origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
            const std::string key = trim(t.substr(0, eq));
            if (seen.count(key))
                throw CliError(kConfigError, origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
            seen[key] = lineno;
            try {
                set(key, t.substr(eq + 1));
            } catch (const CliError& e) {
                throw CliError(kConfigError, origin + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
    }

    void load_file(const fs::path& p) {
        std::ifstream in(p);
        if (!in) throw CliError(kConfigError, "cannot read config file " + p.string());
        std::stringstream ss;
        ss << in.rdbuf();
        load_text(ss.str(), p.string());
    }

    /// Applies "key=value" overrides.
    void apply_overrides(const std::vector<std::string>& sets) {
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw CliError(kConfigError, "--set expects key=value, got '" + s + "'");
            set(trim(s.substr(0, eq)), s.substr(eq + 1));
        }
    }

    [[nodiscard]] const std::string& str(const std::string& key) const { return values_.at(key); }

    [[nodiscard]] double real(const std::string& key) const {
        auto v = parse_real(str(key));
        if (!v) throw CliError(kConfigError, "config key '" + key + "' expects a number, got '" + str(key) + "'");
        return *v;
    }
    [[nodiscard]] std::uint64_t uint(const std::string& key) const {
        auto v = parse_uint(str(key));
        if (!v) throw CliError(kConfigError, "config key '" + key + "' expects a non-negative integer, got '" + str(key) + "'");
        return *v;
    }
    [[nodiscard]] std::int64_t integer(const std::string& key) const {
        const std::string t = str(key);
        std::int64_t v = 0;
        auto r = std::from_chars(t.data(), t.data() + t.size(), v);
        if (t.empty() || r.ec != std::errc{} || r.ptr != t.data() + t.size())
            throw CliError(kConfigError, "config key '" + key + "' expects an integer, got '" + t + "'");
        return v;
    }
    [[nodiscard]] cplx complex(const std::string& key) const {
        auto v = parse_complex(str(key));
        if (!v) throw CliError(kConfigError, "config key '" + key + "' expects re or re,im, got '" + str(key) + "'");
        return *v;
    }
    [[nodiscard]] bool boolean(const std::string& key) const {
        const auto& t = str(key);
        if (t == "true" || t == "1" || t == "yes") return true;
        if (t == "false" || t == "0" || t == "no") return false;
        throw CliError(kConfigError, "config key '" + key + "' expects true or false, got '" + t + "'");
    }
    [[nodiscard]] std::optional<double> optional_real(const std::string& key) const {
        if (str(key) == "none") return std::nullopt;
        return real(key);
    }

    /// Every key in schema order; parses back to the same configuration.
    [[nodiscard]] std::string resolved_text() const {
        std::ostringstream out;
        out << "# resolved configuration\n";
        for (const auto& k : config_schema()) out << k.name << " = " << values_.at(k.name) << "\n";
        return out.str();
    }

private:
    std::map<std::string, std::string> values_;
};

/// Builds the configuration: file < DIFFRACT_SEED < --set overrides.
inline RunConfig resolve_config(const std::optional<fs::path>& file, const std::vector<std::string>& sets,
                                const char* env_seed = std::getenv("DIFFRACT_SEED")) {
    RunConfig cfg;
    if (file) cfg.load_file(*file);
    if (env_seed && *env_seed) {
        if (!parse_uint(env_seed)) throw CliError(kConfigError, std::string("DIFFRACT_SEED is not an integer: ") + env_seed);
        cfg.set("seed", env_seed);
    }
    cfg.apply_overrides(sets);
    return cfg;
}

// ---------------------------------------------------------------------------
// Comb file: header lines then one point per line "x [y] re im".
//
//   # diffract comb v1
//   dimension 1
//   extent <origin_x> <origin_y> <size_x> <size_y>
//   lattice <spacing> <n0> <n1> <periodic 0|1>      (optional)
//   count <N>
//   x re im                                          (dimension 1)
//   x y re im                                        (dimension 2)

inline void write_comb(std::ostream& out, const WeightedComb& c) {
    const auto& e = c.extent();
    out << "# diffract comb v1\n";
    out << "dimension " << c.dimension() << "\n";
    out << "extent " << fmt(e.origin[0]) << " " << fmt(e.origin[1]) << " " << fmt(e.size[0]) << " " << fmt(e.size[1]) << "\n";
    if (c.lattice()) {
        const auto& l = *c.lattice();
        out << "lattice " << fmt(l.spacing) << " " << l.shape[0] << " " << l.shape[1] << " " << (l.periodic ? 1 : 0) << "\n";
    }
    out << "count " << c.size() << "\n";
    const auto pts = c.points();
    const auto ws = c.weights();
    for (std::size_t i = 0; i < c.size(); ++i) {
        out << fmt(pts[i][0]);
        if (c.dimension() == 2) out << " " << fmt(pts[i][1]);
        out << " " << fmt(ws[i].real()) << " " << fmt(ws[i].imag()) << "\n";
    }
}

inline void write_comb_file(const fs::path& p, const WeightedComb& c) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw CliError(kInputError, "cannot write " + p.string());
    write_comb(out, c);
    if (!out) throw CliError(kInputError, "write failed for " + p.string());
}

inline WeightedComb read_comb(std::istream& in, const std::string& origin = "comb") {
    auto fail = [&](std::size_t line, const std::string& msg) {
        return CliError(kInputError, origin + ":" + std::to_string(line) + ": " + msg);
    };
    std::string line;
    std::size_t lineno = 0;
    int dim = 0;
    std::optional<Extent> extent;
    std::optional<LatticeInfo> lattice;
    std::optional<std::size_t> count;
    auto numbers = [&](const std::string& s) {
        std::vector<double> v;
        std::istringstream ss(s);
        std::string tok;
        while (ss >> tok) {
            auto r = parse_real(tok);
            if (!r) throw fail(lineno, "not a number: '" + tok + "'");
            v.push_back(*r);
        }
        return v;
    };
    while (!count && std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::istringstream ss(t);
        std::string key;
        ss >> key;
        std::string rest;
        std::getline(ss, rest);
        const auto v = numbers(rest);
        if (key == "dimension") {
            if (v.size() != 1 || (v[0] != 1.0 && v[0] != 2.0)) throw fail(lineno, "dimension must be 1 or 2");
            dim = static_cast<int>(v[0]);
        } else if (key == "extent") {
            if (v.size() != 4) throw fail(lineno, "extent needs 4 numbers");
            Extent e;
            e.origin = {v[0], v[1]};
            e.size = {v[2], v[3]};
            extent = e;
        } else if (key == "lattice") {
            if (v.size() != 4 || v[1] < 1 || v[2] < 1) throw fail(lineno, "lattice needs spacing n0 n1 periodic");
            lattice = LatticeInfo{v[0], {static_cast<std::size_t>(v[1]), static_cast<std::size_t>(v[2])}, v[3] != 0.0};
        } else if (key == "count") {
            if (v.size() != 1 || v[0] < 1 || v[0] != std::floor(v[0])) throw fail(lineno, "count must be a positive integer");
            count = static_cast<std::size_t>(v[0]);
        } else {
            throw fail(lineno, "unknown header field '" + key + "'");
        }
    }
    if (!dim || !extent || !count) throw fail(lineno, "incomplete header (need dimension, extent, count)");
    extent->dimension = dim;
    std::vector<Vec2> pts;
    std::vector<cplx> ws;
    pts.reserve(*count);
    ws.reserve(*count);
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto v = numbers(t);
        if (static_cast<int>(v.size()) != dim + 2)
            throw fail(lineno, "expected " + std::to_string(dim + 2) + " columns, got " + std::to_string(v.size()));
        pts.push_back({v[0], dim == 2 ? v[1] : 0.0});
        ws.emplace_back(v[dim], v[dim + 1]);
    }
    if (pts.size() != *count)
        throw fail(lineno, "count says " + std::to_string(*count) + " points, found " + std::to_string(pts.size()));
    try {
        return WeightedComb(dim, std::move(pts), std::move(ws), *extent, lattice, {}, !lattice);
    } catch (const DomainError& e) {
        throw CliError(kInputError, origin + ": " + e.what());
    }
}

inline WeightedComb read_comb_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw CliError(kInputError, "cannot read comb file " + p.string());
    return read_comb(in, p.string());
}

// ---------------------------------------------------------------------------
// Spectrum CSV: '#' metadata lines, a column header, then one row per bin in
// storage order (i1 major, i2 fastest).
//
//   # diffract spectrum v1
//   # dimension 2
//   # shape <n1> <n2>
//   # dk <dk1> <dk2>
//   # k0 <k01> <k02>
//   # volume <V>
//   # point_count <N>
//   # normalization per-volume
//   k1,k2,intensity

inline void write_spectrum_csv(std::ostream& out, const SpectrumGrid& s, const std::vector<std::string>& notes = {}) {
    out << "# diffract spectrum v1\n";
    for (const auto& n : notes) out << "# note " << n << "\n";
    out << "# dimension " << s.dimension << "\n";
    out << "# shape " << s.shape[0] << " " << s.shape[1] << "\n";
    out << "# dk " << fmt(s.dk[0]) << " " << fmt(s.dk[1]) << "\n";
    out << "# k0 " << fmt(s.k0[0]) << " " << fmt(s.k0[1]) << "\n";
    out << "# volume " << fmt(s.volume) << "\n";
    out << "# point_count " << s.point_count << "\n";
    out << "# normalization per-volume\n";
    out << (s.dimension == 2 ? "k1,k2,intensity\n" : "k1,intensity\n");
    for (std::size_t i = 0; i < s.shape[0]; ++i)
        for (std::size_t j = 0; j < s.shape[1]; ++j) {
            const auto k = s.k_of(i, j);
            out << fmt(k[0]) << ",";
            if (s.dimension == 2) out << fmt(k[1]) << ",";
            out << fmt(s.at(i, j)) << "\n";
        }
}

inline void write_spectrum_file(const fs::path& p, const SpectrumGrid& s, const std::vector<std::string>& notes = {}) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw CliError(kInputError, "cannot write " + p.string());
    write_spectrum_csv(out, s, notes);
    if (!out) throw CliError(kInputError, "write failed for " + p.string());
}

inline SpectrumGrid read_spectrum(std::istream& in, const std::string& origin = "spectrum") {
    auto fail = [&](std::size_t line, const std::string& msg) {
        return CliError(kInputError, origin + ":" + std::to_string(line) + ": " + msg);
    };
    SpectrumGrid s;
    bool have_shape = false, header_done = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            std::istringstream ss(t.substr(1));
            std::string key;
            ss >> key;
            std::vector<std::string> toks;
            for (std::string tok; ss >> tok;) toks.push_back(tok);
            auto num = [&](std::size_t i) {
                if (i >= toks.size()) throw fail(lineno, "missing value for " + key);
                auto r = parse_real(toks[i]);
                if (!r) throw fail(lineno, "bad value for " + key);
                return *r;
            };
            if (key == "dimension") s.dimension = static_cast<int>(num(0));
            else if (key == "shape") {
                s.shape = {static_cast<std::size_t>(num(0)), static_cast<std::size_t>(num(1))};
                have_shape = true;
            } else if (key == "dk") s.dk = {num(0), num(1)};
            else if (key == "k0") s.k0 = {num(0), num(1)};
            else if (key == "volume") s.volume = num(0);
            else if (key == "point_count") s.point_count = static_cast<std::size_t>(num(0));
            continue;
        }
        if (!header_done) {
            header_done = true;
            if (!have_shape || (s.dimension != 1 && s.dimension != 2)) throw fail(lineno, "missing spectrum metadata");
            s.values.reserve(s.shape[0] * s.shape[1]);
            continue;  // column names
        }
        std::vector<double> cols;
        std::size_t start = 0;
        while (start <= t.size()) {
            const auto comma = t.find(',', start);
            const auto tok = t.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            auto r = parse_real(tok);
            if (!r) throw fail(lineno, "not a number: '" + tok + "'");
            cols.push_back(*r);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        if (static_cast<int>(cols.size()) != s.dimension + 1) throw fail(lineno, "wrong column count");
        s.values.push_back(cols.back());
    }
    if (!have_shape) throw fail(lineno, "missing spectrum metadata");
    if (s.values.size() != s.shape[0] * s.shape[1])
        throw fail(lineno, "expected " + std::to_string(s.shape[0] * s.shape[1]) + " rows, found " +
                               std::to_string(s.values.size()));
    return s;
}

inline SpectrumGrid read_spectrum_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw CliError(kInputError, "cannot read spectrum file " + p.string());
    return read_spectrum(in, p.string());
}

// ---------------------------------------------------------------------------
// PGM rendering (P5, 16-bit big-endian). Column c is bin i1 = c, row r is bin
// i2 = shape[1] - 1 - r, so k2 grows upward. The header comment states the mapping.

enum class Scale { Auto, Log, Linear };

inline Scale parse_scale(const std::string& s) {
    if (s == "auto") return Scale::Auto;
    if (s == "log") return Scale::Log;
    if (s == "linear") return Scale::Linear;
    throw CliError(kConfigError, "scale must be auto, log or linear, got '" + s + "'");
}

/// Auto picks log when the largest bin exceeds 20 times the mean (Bragg peaks present).
inline Scale resolve_scale(const SpectrumGrid& s, Scale requested) {
    if (requested != Scale::Auto) return requested;
    const double mx = *std::max_element(s.values.begin(), s.values.end());
    return mx > 20.0 * s.mean() ? Scale::Log : Scale::Linear;
}

inline void write_pgm(std::ostream& out, const SpectrumGrid& s, Scale requested, double gamma = 1.0,
                      const std::string& title = "spectrum") {
    if (s.dimension != 2) throw CliError(kInputError, "PGM output needs a 2D spectrum");
    if (!(gamma > 0.0)) throw CliError(kConfigError, "gamma must be positive");
    const Scale scale = resolve_scale(s, requested);
    const double lo = *std::min_element(s.values.begin(), s.values.end());
    const double hi = *std::max_element(s.values.begin(), s.values.end());
    const double c = std::max(s.mean(), 1e-300);
    auto normalized = [&](double v) {
        double t = 0.0;
        if (scale == Scale::Log) {
            const double top = std::log1p(std::max(hi, 0.0) / c);
            t = top > 0.0 ? std::log1p(std::max(v, 0.0) / c) / top : 0.0;
        } else {
            t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
        }
        return std::pow(std::clamp(t, 0.0, 1.0), 1.0 / gamma);
    };
    const std::size_t w = s.shape[0], h = s.shape[1];
    out << "P5\n";
    out << "# diffract " << title << "\n";
    if (scale == Scale::Log)
        out << "# mapping log: p = round(65535 * (log(1 + I/c) / log(1 + Imax/c))^(1/gamma)), c = " << fmt(c)
            << ", Imax = " << fmt(hi) << ", gamma = " << fmt(gamma) << "\n";
    else
        out << "# mapping linear: p = round(65535 * ((I - Imin) / (Imax - Imin))^(1/gamma)), Imin = " << fmt(lo)
            << ", Imax = " << fmt(hi) << ", gamma = " << fmt(gamma) << "\n";
    out << "# pixel (col, row) = bin (i1 = col, i2 = " << h - 1 << " - row); k = k0 + i * dk, k0 = " << fmt(s.k0[0])
        << " " << fmt(s.k0[1]) << ", dk = " << fmt(s.dk[0]) << " " << fmt(s.dk[1]) << "\n";
    out << w << " " << h << "\n65535\n";
    std::vector<unsigned char> row(2 * w);
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t j = h - 1 - r;
        for (std::size_t i = 0; i < w; ++i) {
            const auto p = static_cast<std::uint16_t>(std::lround(65535.0 * normalized(s.at(i, j))));
            row[2 * i] = static_cast<unsigned char>(p >> 8);
            row[2 * i + 1] = static_cast<unsigned char>(p & 0xFF);
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
}

inline void write_pgm_file(const fs::path& p, const SpectrumGrid& s, Scale scale, double gamma = 1.0,
                           const std::string& title = "spectrum") {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw CliError(kInputError, "cannot write " + p.string());
    write_pgm(out, s, scale, gamma, title);
    if (!out) throw CliError(kInputError, "write failed for " + p.string());
}

/// Real parts of a 2D lattice comb's weights laid out as an image grid (for structure pictures).
inline SpectrumGrid weight_image(const WeightedComb& c) {
    const auto lw = lattice_weights_of(c);
    SpectrumGrid g;
    g.dimension = 2;
    g.shape = lw.shape;
    g.dk = {c.lattice()->spacing, c.lattice()->spacing};
    g.volume = c.volume();
    g.point_count = c.size();
    g.values.resize(lw.values.size());
    for (std::size_t i = 0; i < lw.values.size(); ++i) g.values[i] = lw.values[i].real();
    return g;
}

// ---------------------------------------------------------------------------
// Model construction

inline void require_model(const std::string& m) {
    const auto& names = model_names();
    if (std::find(names.begin(), names.end(), m) == names.end())
        throw CliError(kConfigError, "unknown model '" + m + "'; valid models: " + join(names));
}

/// Ensemble of `count` combs described by the configuration. Markov-chain models
/// return successive states of one chain spaced by `interval` sweeps.
inline std::vector<WeightedComb> build_ensemble(const RunConfig& cfg, std::size_t count) {
    const std::string model = cfg.str("model");
    require_model(model);
    const std::uint64_t seed = cfg.uint("seed");
    std::vector<WeightedComb> out;
    out.reserve(count);
    try {
        if (model == "ising") {
            IsingParams p;
            p.L1 = p.L2 = cfg.uint("L");
            p.K1 = cfg.real("K1");
            p.K2 = cfg.real("K2");
            p.equilibration_sweeps = cfg.uint("equilibration");
            p.measurement_interval = cfg.uint("interval");
            p.seed = seed;
            auto combs = ising_measurements(p, count);
            return combs;
        }
        if (model == "ice") {
            const std::size_t L = cfg.uint("L");
            if (L < 2 || L % 2) throw DomainError("ice needs an even L >= 2");
            IceSampler s(L, SeededRng(seed, 0));
            s.sweeps(cfg.uint("equilibration"));
            for (std::size_t r = 0; r < count; ++r) {
                if (r > 0) s.sweeps(cfg.uint("interval"));
                out.push_back(ice_to_comb(s.config(), cfg.real("hO"), cfg.real("hH")));
            }
            return out;
        }
        const SeededRng base(seed, 0);
        for (std::size_t r = 0; r < count; ++r) {
            SeededRng rng = base.substream(r);
            const std::size_t n = cfg.uint("n");
            if (model == "bernoulli") {
                TwoLetterWeights w{cfg.complex("h1"), cfg.complex("h2"), cfg.real("p1"), 1.0 - cfg.real("p1")};
                out.push_back(bernoulli_chain(n, w, rng));
            } else if (model == "rudin-shapiro") {
                if (n == 0) throw DomainError("rudin-shapiro needs n >= 1");
                const auto a = cfg.integer("a");
                out.push_back(rudin_shapiro(a, a + static_cast<std::int64_t>(n)));
            } else if (model == "thue-morse") {
                out.push_back(thue_morse(n, cfg.boolean("signed")));
            } else if (model == "thue-morse-2d") {
                out.push_back(thue_morse_2d(static_cast<unsigned>(cfg.uint("depth")), cfg.boolean("signed")));
            } else if (model == "fibonacci") {
                out.push_back(fibonacci_chain(n));
            } else if (model == "circle") {
                CircleParams p{cfg.real("alpha"), cfg.real("beta"), cfg.real("xi"), cfg.real("x0")};
                out.push_back(circle_sequence(n, p));
            } else if (model == "random-tiling") {
                out.push_back(random_interval_tiling(n, cfg.real("p_long"), rng));
            } else if (model == "lattice") {
                if (n == 0) throw DomainError("lattice needs n >= 1");
                std::vector<double> ones(n, 1.0);
                out.push_back(comb_from_lattice_weights(ones));
            } else if (model == "bernoulli-ice") {
                out.push_back(ice_to_comb(bernoulli_hydrogens(cfg.uint("L"), rng), cfg.real("hO"), cfg.real("hH")));
            }
        }
    } catch (const DomainError& e) {
        throw CliError(kConfigError, "invalid parameters for model '" + model + "': " + e.what());
    }
    return out;
}

struct SpectrumOptions {
    std::size_t oversample = 1;
    double k_max = 4.0;
    std::optional<double> cut_k1;
};

/// FFT for lattice combs (optionally a cut at fixed k1), direct sums or binning otherwise.
inline SpectrumGrid spectrum_of(const WeightedComb& c, const SpectrumOptions& o) {
    try {
        if (o.cut_k1) return diffraction_cut(c, *o.cut_k1);
        if (c.lattice()) return diffraction_fft(c, DiffractionOptions{.oversample = o.oversample});
        IncommensurateOptions io;
        io.k_max = o.k_max;
        io.oversample = std::max<std::size_t>(o.oversample, 4);
        return diffraction_incommensurate(c, io);
    } catch (const IncompatibleError& e) {
        throw CliError(kIncompatible, e.what());
    } catch (const DomainError& e) {
        throw CliError(kInputError, std::string("cannot diffract input: ") + e.what());
    }
}

inline SpectrumOptions spectrum_options(const RunConfig& cfg) {
    SpectrumOptions o;
    o.oversample = std::max<std::uint64_t>(1, cfg.uint("oversample"));
    o.k_max = cfg.real("k_max");
    o.cut_k1 = cfg.optional_real("cut_k1");
    return o;
}

inline void ensure_dir(const fs::path& d) {
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) throw CliError(kInputError, "cannot create directory " + d.string() + ": " + ec.message());
}

inline void write_text_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw CliError(kInputError, "cannot write " + p.string());
    out << text;
    if (!out) throw CliError(kInputError, "write failed for " + p.string());
}

inline std::string member_name(const std::string& stem, std::size_t r, std::size_t count, const std::string& ext) {
    if (count == 1) return stem + ext;
    std::ostringstream ss;
    ss << stem << "_" << std::setw(4) << std::setfill('0') << r << ext;
    return ss.str();
}

// ---------------------------------------------------------------------------
// Commands

/// Writes comb file(s) and the resolved configuration into the output directory.
inline int cmd_generate(const RunConfig& cfg, std::ostream& log) {
    const std::size_t count = std::max<std::uint64_t>(1, cfg.uint("realizations"));
    const auto combs = build_ensemble(cfg, count);
    const fs::path dir = cfg.str("output");
    ensure_dir(dir);
    for (std::size_t r = 0; r < combs.size(); ++r) {
        const auto p = dir / member_name("comb", r, combs.size(), ".txt");
        write_comb_file(p, combs[r]);
        log << "wrote " << p.string() << " (" << combs[r].size() << " points)\n";
    }
    write_text_file(dir / "resolved.conf", cfg.resolved_text());
    return kOk;
}

struct DiffractArgs {
    fs::path input;
    std::optional<fs::path> csv;
    std::optional<fs::path> pgm;
    SpectrumOptions spectrum;
    Scale scale = Scale::Auto;
    double gamma = 1.0;
};

inline int cmd_diffract(const DiffractArgs& a, std::ostream& log) {
    const auto comb = read_comb_file(a.input);
    const auto s = spectrum_of(comb, a.spectrum);
    fs::path csv = a.csv ? *a.csv : fs::path(a.input).replace_extension(".csv");
    std::vector<std::string> notes{"source " + a.input.filename().string()};
    if (a.spectrum.cut_k1) notes.push_back("cut k1 = " + fmt(*a.spectrum.cut_k1));
    write_spectrum_file(csv, s, notes);
    log << "wrote " << csv.string() << " (" << s.size() << " bins)\n";
    if (a.pgm) {
        write_pgm_file(*a.pgm, s, a.scale, a.gamma);
        log << "wrote " << a.pgm->string() << "\n";
    }
    return kOk;
}

struct AnalyzeArgs {
    std::string id;
    std::vector<fs::path> inputs;
    fs::path out_dir = ".";
    Vec2 k{0.0, 0.0};
    double window = 0.0;          // scaling: search half-width in k units
    std::size_t width = 8;        // homometry smoothing width
    std::size_t max_block = 10;   // entropy
    double threshold = 0.05;      // symmetry verdict
};

inline const std::vector<std::string>& analysis_names() {
    static const std::vector<std::string> names{"scaling", "symmetry", "homometry", "entropy"};
    return names;
}

namespace detail {
// Largest bin within `window` of k (the bin nearest k when window is 0).
inline double sample_near(const SpectrumGrid& s, const Vec2& k, double window) {
    double best = -1.0;
    std::size_t i_lo = 0, i_hi = s.shape[0] - 1, j_lo = 0, j_hi = s.shape[1] - 1;
    auto range = [&](int axis, std::size_t& lo, std::size_t& hi) {
        const double c = (k[axis] - s.k0[axis]) / s.dk[axis];
        const double w = window / s.dk[axis];
        const double last = static_cast<double>(s.shape[axis] - 1);
        const double a = std::clamp(std::round(c - w), 0.0, last), b = std::clamp(std::round(c + w), 0.0, last);
        if (c < -0.5 || c > last + 0.5) throw CliError(kIncompatible, "k lies outside a spectrum's grid");
        lo = static_cast<std::size_t>(a);
        hi = static_cast<std::size_t>(b);
    };
    range(0, i_lo, i_hi);
    if (s.dimension == 2) range(1, j_lo, j_hi);
    for (std::size_t i = i_lo; i <= i_hi; ++i)
        for (std::size_t j = j_lo; j <= j_hi; ++j) best = std::max(best, s.at(i, j));
    return best;
}
}  // namespace detail

inline int cmd_analyze_impl(const AnalyzeArgs& a, std::ostream& log);

inline int cmd_analyze(const AnalyzeArgs& a, std::ostream& log) {
    try {
        return cmd_analyze_impl(a, log);
    } catch (const IncompatibleError& e) {
        throw CliError(kIncompatible, e.what());
    } catch (const DomainError& e) {
        throw CliError(kInputError, e.what());
    }
}

inline int cmd_analyze_impl(const AnalyzeArgs& a, std::ostream& log) {
    const auto& names = analysis_names();
    if (std::find(names.begin(), names.end(), a.id) == names.end())
        throw CliError(kConfigError, "unknown analysis '" + a.id + "'; valid analyses: " + join(names));
    if (a.inputs.empty()) throw CliError(kConfigError, "analyze needs at least one input file");
    ensure_dir(a.out_dir);
    std::ostringstream report, csv;
    report << "analysis " << a.id << "\n";

    if (a.id == "scaling") {
        std::vector<SpectrumGrid> specs;
        for (const auto& p : a.inputs) specs.push_back(read_spectrum_file(p));
        std::sort(specs.begin(), specs.end(), [](const auto& x, const auto& y) { return x.point_count < y.point_count; });
        std::vector<double> ns, is;
        for (const auto& s : specs) {
            if (s.dimension != specs.front().dimension) throw CliError(kIncompatible, "spectra differ in dimension");
            ns.push_back(static_cast<double>(s.point_count));
            is.push_back(detail::sample_near(s, a.k, a.window));
        }
        ScalingFit f;
        try {
            f = fit_scaling(ns, is, a.k);
        } catch (const DomainError& e) {
            throw CliError(kIncompatible, std::string("scaling fit: ") + e.what());
        }
        report << "k " << fmt(a.k[0]) << " " << fmt(a.k[1]) << "\n";
        report << "alpha " << fmt(f.alpha) << "\nalpha_stderr " << fmt(f.alpha_stderr) << "\n";
        report << "class " << to_string(f.classification) << "\n";
        report << "caveat " << f.caveat << "\n";
        csv << "size,intensity\n";
        for (std::size_t i = 0; i < ns.size(); ++i) csv << fmt(ns[i]) << "," << fmt(is[i]) << "\n";
    } else if (a.id == "symmetry") {
        const auto s = read_spectrum_file(a.inputs.front());
        if (s.dimension != 2 || s.shape[0] != s.shape[1]) throw CliError(kIncompatible, "symmetry needs a square 2D spectrum");
        const auto bragg = bragg_only(s);
        const double full_swap = symmetry_score(s, SymmetryOp::AxisSwap);
        const double full_rot = symmetry_score(s, SymmetryOp::Rotate90);
        const double bragg_swap = symmetry_score(bragg, SymmetryOp::AxisSwap);
        const double bragg_rot = symmetry_score(bragg, SymmetryOp::Rotate90);
        report << "full_axis_swap " << fmt(full_swap) << "\nfull_rotate90 " << fmt(full_rot) << "\n";
        report << "bragg_axis_swap " << fmt(bragg_swap) << "\nbragg_rotate90 " << fmt(bragg_rot) << "\n";
        report << "threshold " << fmt(a.threshold) << "\n";
        const bool four = full_rot <= a.threshold;
        const bool bragg_four = bragg_rot <= a.threshold;
        report << "verdict " << (four ? "fourfold" : "twofold") << " (full spectrum); Bragg part alone looks "
               << (bragg_four ? "fourfold" : "twofold") << "\n";
        csv << "part,op,score\nfull,axis_swap," << fmt(full_swap) << "\nfull,rotate90," << fmt(full_rot)
            << "\nbragg,axis_swap," << fmt(bragg_swap) << "\nbragg,rotate90," << fmt(bragg_rot) << "\n";
    } else if (a.id == "homometry") {
        if (a.inputs.size() < 2) throw CliError(kConfigError, "homometry needs two spectra (plus optional references)");
        const auto x = read_spectrum_file(a.inputs[0]);
        const auto y = read_spectrum_file(a.inputs[1]);
        if (!x.same_grid(y, 1e-9)) throw CliError(kIncompatible, "homometry inputs are on different grids");
        const auto r = homometry_compare(x, y, a.width);
        report << "width " << r.width << "\nraw_l1 " << fmt(r.raw_l1) << "\nsmoothed_l1 " << fmt(r.smoothed_l1) << "\n";
        csv << "quantity,value\nraw_l1," << fmt(r.raw_l1) << "\nsmoothed_l1," << fmt(r.smoothed_l1) << "\n";
        if (a.inputs.size() > 2) {
            // Reference realizations of the second input's ensemble give the spread.
            double spread = 0.0;
            const auto ys = smooth_triangular(y, a.width);
            for (std::size_t i = 2; i < a.inputs.size(); ++i) {
                const auto ref = read_spectrum_file(a.inputs[i]);
                if (!ref.same_grid(y, 1e-9)) throw CliError(kIncompatible, "reference spectrum on a different grid");
                spread += mean_abs_difference(smooth_triangular(ref, a.width), ys);
            }
            spread /= static_cast<double>(a.inputs.size() - 2);
            report << "reference_spread " << fmt(spread) << "\n";
            csv << "reference_spread," << fmt(spread) << "\n";
            report << "verdict " << (r.smoothed_l1 < spread ? "indistinguishable" : "distinguishable") << " at width "
                   << a.width << "\n";
        } else {
            report << "verdict none (no reference realizations given)\n";
        }
    } else {  // entropy
        const auto comb = read_comb_file(a.inputs.front());
        const auto letters = binary_letters(comb);
        const auto be = block_entropy(letters, a.max_block);
        csv << "n,H_n,h_n,undersampled\n";
        for (std::size_t n = 1; n <= a.max_block; ++n)
            csv << n << "," << fmt(be.H[n - 1]) << "," << fmt(be.h[n - 1]) << "," << (be.undersampled[n - 1] ? 1 : 0) << "\n";
        report << "letters " << letters.size() << "\nh_" << a.max_block << " " << fmt(be.h.back()) << "\n";
    }
    write_text_file(a.out_dir / ("analysis_" + a.id + ".txt"), report.str());
    write_text_file(a.out_dir / ("analysis_" + a.id + ".csv"), csv.str());
    log << report.str();
    return kOk;
}

// ---------------------------------------------------------------------------
// Figure pipelines

/// Built-in configuration of each figure; identical to configs/<fig>.conf.
inline std::string figure_config_text(const std::string& fig) {
    if (fig == "fig1")
        return "# 2D Thue-Morse pattern (construction picture)\n"
               "figure = fig1\nmodel = thue-morse-2d\ndepth = 4\nsigned = true\noutput = fig1\n";
    if (fig == "fig2")
        return "# 2D Thue-Morse diffraction, 512 x 512, with the cut at k1 = 1/3\n"
               "figure = fig2\nmodel = thue-morse-2d\ndepth = 9\nsigned = true\ncut_k1 = 1/3\nscale = log\noutput = fig2\n";
    if (fig == "fig3")
        return "# Ising lattice gas above T_c, K1 = 0.35, K2 = 0.1\n"
               "figure = fig3\nmodel = ising\nL = 256\nK1 = 0.35\nK2 = 0.1\nequilibration = 1000\ninterval = 10\n"
               "realizations = 100\nseed = 3\nscale = log\noutput = fig3\n";
    if (fig == "fig4")
        return "# typical square ice configuration\n"
               "figure = fig4\nmodel = ice\nL = 8\nequilibration = 200\nhO = 1\nhH = 1\nseed = 4\noutput = fig4\n";
    if (fig == "fig5")
        return "# elementary cell of the square ice diffraction pattern, hO = 0, hH = 1\n"
               "figure = fig5\nmodel = ice\nL = 64\nequilibration = 200\ninterval = 5\nrealizations = 100\n"
               "hO = 0\nhH = 1\nseed = 5\nscale = log\noutput = fig5\n";
    throw CliError(kConfigError, "unknown figure '" + fig + "'; valid figures: " + join(figure_names()));
}

inline SpectrumGrid ensemble_mean(const std::vector<WeightedComb>& combs, const SpectrumOptions& o, std::size_t threads) {
    return average_spectra(combs.size(), [&](std::size_t i) { return spectrum_of(combs[i], o); }, threads);
}

/// Runs a figure pipeline into cfg.output, ending with the resolved configuration.
inline int cmd_reproduce(const RunConfig& cfg, std::size_t threads, std::ostream& log) {
    const std::string fig = cfg.str("figure");
    figure_config_text(fig);  // validates the id
    const fs::path dir = cfg.str("output");
    ensure_dir(dir);
    const Scale scale = parse_scale(cfg.str("scale"));
    const double gamma = cfg.real("gamma");
    if (cfg.str("colormap") != "gray") throw CliError(kConfigError, "colormap must be gray");
    auto wrote = [&](const fs::path& p) { log << "wrote " << p.string() << "\n"; };

    if (fig == "fig1" || fig == "fig4") {
        const auto comb = build_ensemble(cfg, 1).front();
        write_comb_file(dir / "structure.txt", comb);
        wrote(dir / "structure.txt");
        write_pgm_file(dir / "structure.pgm", weight_image(comb), Scale::Linear, 1.0, "structure weights");
        wrote(dir / "structure.pgm");
        if (fig == "fig4") {
            // Arrow picture: one line per row of oxygens, top row = largest y.
            const std::size_t L = cfg.uint("L");
            IceSampler s(L, SeededRng(cfg.uint("seed"), 0));
            s.sweeps(cfg.uint("equilibration"));
            const auto& c = s.config();
            std::ostringstream pic;
            for (std::size_t yy = L; yy-- > 0;) {
                for (std::size_t x = 0; x < L; ++x) pic << (c.h[c.vertex(x, yy)] ? "O>  " : "O<  ");
                pic << "\n";
                for (std::size_t x = 0; x < L; ++x) pic << (c.v[c.vertex(x, yy)] ? "^" : "v") << "   ";
                pic << "\n";
            }
            write_text_file(dir / "arrows.txt", pic.str());
            wrote(dir / "arrows.txt");
            const auto rep = ice_rules_check(c);
            log << "ice rule violations: " << rep.rule1_violations << "\n";
        }
    } else if (fig == "fig2") {
        const auto comb = build_ensemble(cfg, 1).front();
        SpectrumOptions o = spectrum_options(cfg);
        const auto cut_k1 = o.cut_k1;
        o.cut_k1.reset();
        const auto s = spectrum_of(comb, o);
        write_spectrum_file(dir / "spectrum.csv", s);
        write_pgm_file(dir / "spectrum.pgm", s, scale, gamma, "2D Thue-Morse spectrum");
        wrote(dir / "spectrum.csv");
        wrote(dir / "spectrum.pgm");
        if (cut_k1) {
            SpectrumOptions co;
            co.cut_k1 = cut_k1;
            const auto cut = spectrum_of(comb, co);
            write_spectrum_file(dir / "cut.csv", cut, {"cut k1 = " + fmt(*cut_k1)});
            wrote(dir / "cut.csv");
        }
    } else if (fig == "fig3") {
        const std::size_t count = std::max<std::uint64_t>(1, cfg.uint("realizations"));
        const auto combs = build_ensemble(cfg, count);
        const auto mean = ensemble_mean(combs, spectrum_options(cfg), threads);
        write_spectrum_file(dir / "spectrum.csv", mean, {"mean of " + std::to_string(count) + " configurations"});
        write_pgm_file(dir / "spectrum.pgm", mean, scale, gamma, "Ising lattice gas mean spectrum");
        wrote(dir / "spectrum.csv");
        wrote(dir / "spectrum.pgm");
        const double swap = symmetry_score(mean, SymmetryOp::AxisSwap);
        const double bragg = symmetry_score(bragg_only(mean), SymmetryOp::AxisSwap);
        std::ostringstream rep;
        rep << "critical_condition " << fmt(critical_condition(cfg.real("K1"), cfg.real("K2"))) << "\n";
        rep << "full_axis_swap " << fmt(swap) << "\nbragg_axis_swap " << fmt(bragg) << "\n";
        write_text_file(dir / "symmetry.txt", rep.str());
        wrote(dir / "symmetry.txt");
    } else if (fig == "fig5") {
        const std::size_t count = std::max<std::uint64_t>(1, cfg.uint("realizations"));
        const auto o = spectrum_options(cfg);
        const auto ice = build_ensemble(cfg, count);
        RunConfig bcfg = cfg;
        bcfg.set("model", "bernoulli-ice");
        const auto ber = build_ensemble(bcfg, count);
        const auto ice_mean = ensemble_mean(ice, o, threads);
        const auto ber_mean = ensemble_mean(ber, o, threads);
        write_spectrum_file(dir / "ice.csv", ice_mean, {"square ice, mean of " + std::to_string(count)});
        write_spectrum_file(dir / "bernoulli.csv", ber_mean, {"Bernoulli hydrogens, mean of " + std::to_string(count)});
        write_pgm_file(dir / "ice.pgm", ice_mean, scale, gamma, "square ice mean spectrum");
        write_pgm_file(dir / "bernoulli.pgm", ber_mean, scale, gamma, "Bernoulli-hydrogen mean spectrum");
        for (auto n : {"ice.csv", "bernoulli.csv", "ice.pgm", "bernoulli.pgm"}) wrote(dir / n);
        const double hO = cfg.real("hO"), hH = cfg.real("hH");
        const double L = static_cast<double>(cfg.uint("L"));
        std::ostringstream rep;
        rep << "k1,k2,ice_bragg_times_V,ice,bernoulli\n";
        for (long long k1 = 0; k1 < 3; ++k1)
            for (long long k2 = 0; k2 < 3; ++k2) {
                const auto i = static_cast<std::size_t>(k1) * static_cast<std::size_t>(L);
                const auto j = static_cast<std::size_t>(k2) * static_cast<std::size_t>(L);
                rep << k1 << "," << k2 << "," << fmt(ice_bragg(k1, k2, hO, hH) * L * L) << "," << fmt(ice_mean.at(i, j))
                    << "," << fmt(ber_mean.at(i, j)) << "\n";
            }
        write_text_file(dir / "bragg.csv", rep.str());
        wrote(dir / "bragg.csv");
    }
    write_text_file(dir / "resolved.conf", cfg.resolved_text());
    wrote(dir / "resolved.conf");
    return kOk;
}

}  // namespace diffract::cli
