// diffract: generate point sets, compute spectra, run analyses, reproduce figures.

#include <CLI11.hpp>

#include <iostream>

#include "diffract/cli.hpp"

using namespace diffract;
using namespace diffract::cli;

namespace {

Vec2 parse_k(const std::string& text) {
    const auto comma = text.find(',');
    auto k1 = parse_real(text.substr(0, comma));
    auto k2 = comma == std::string::npos ? std::optional<double>(0.0) : parse_real(text.substr(comma + 1));
    if (!k1 || !k2) throw CliError(kConfigError, "--k expects k1 or k1,k2 (fractions allowed), got '" + text + "'");
    return {*k1, *k2};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffract: diffraction of ordered and disordered point sets"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write comb file(s) for a configured model");
    std::string gen_config;
    std::vector<std::string> gen_sets;
    std::string gen_out;
    gen->add_option("config", gen_config, "key = value configuration file");
    gen->add_option("--set", gen_sets, "override a key: key=value (repeatable)");
    gen->add_option("--out", gen_out, "output directory (same as --set output=DIR)");

    // diffract
    auto* dif = app.add_subcommand("diffract", "spectrum of a comb file as CSV (and optionally PGM)");
    std::string dif_in, dif_csv, dif_pgm, dif_cut, dif_scale = "auto";
    std::size_t dif_over = 1;
    double dif_kmax = 4.0, dif_gamma = 1.0;
    dif->add_option("comb", dif_in, "comb file")->required();
    dif->add_option("--out", dif_csv, "CSV path (default: input with .csv extension)");
    dif->add_option("--pgm", dif_pgm, "also render a 16-bit PGM image (2D spectra)");
    dif->add_option("--oversample", dif_over, "zero-padding / grid refinement factor");
    dif->add_option("--kmax", dif_kmax, "largest k for combs without a lattice");
    dif->add_option("--cut", dif_cut, "fixed k1 of a 1D cut through a 2D spectrum, e.g. 1/3");
    dif->add_option("--scale", dif_scale, "image mapping: auto, log, linear");
    dif->add_option("--gamma", dif_gamma, "image gamma");

    // analyze
    auto* ana = app.add_subcommand("analyze", "scaling | symmetry | homometry | entropy");
    std::string ana_id, ana_out = ".", ana_k = "0";
    std::vector<std::string> ana_inputs;
    double ana_window = 0.0, ana_threshold = 0.05;
    std::size_t ana_width = 8, ana_block = 10;
    ana->add_option("analysis", ana_id, "analysis id")->required();
    ana->add_option("inputs", ana_inputs, "spectrum CSVs (comb file for entropy)")->required();
    ana->add_option("--out", ana_out, "report directory");
    ana->add_option("--k", ana_k, "scaling: wavevector k1[,k2]");
    ana->add_option("--window", ana_window, "scaling: take the largest bin within this distance of k");
    ana->add_option("--width", ana_width, "homometry: triangular smoothing width in bins");
    ana->add_option("--max-block", ana_block, "entropy: largest block length");
    ana->add_option("--threshold", ana_threshold, "symmetry: largest score still called symmetric");

    // reproduce
    auto* rep = app.add_subcommand("reproduce", "run a figure pipeline (fig1..fig5)");
    std::string rep_fig, rep_config, rep_out;
    std::vector<std::string> rep_sets;
    std::size_t rep_threads = 1;
    rep->add_option("figure", rep_fig, "figure id")->required();
    rep->add_option("--config", rep_config, "configuration file layered over the built-in one");
    rep->add_option("--set", rep_sets, "override a key: key=value (repeatable)");
    rep->add_option("--out", rep_out, "output directory (same as --set output=DIR)");
    rep->add_option("--threads", rep_threads, "worker threads for ensemble spectra");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }

    try {
        if (*gen) {
            auto sets = gen_sets;
            if (!gen_out.empty()) sets.push_back("output=" + gen_out);
            const auto cfg = resolve_config(gen_config.empty() ? std::nullopt : std::optional<fs::path>(gen_config), sets);
            return cmd_generate(cfg, std::cout);
        }
        if (*dif) {
            DiffractArgs a;
            a.input = dif_in;
            if (!dif_csv.empty()) a.csv = dif_csv;
            if (!dif_pgm.empty()) a.pgm = dif_pgm;
            a.spectrum.oversample = std::max<std::size_t>(1, dif_over);
            a.spectrum.k_max = dif_kmax;
            if (!dif_cut.empty()) {
                auto c = parse_real(dif_cut);
                if (!c) throw CliError(kConfigError, "--cut expects a number, got '" + dif_cut + "'");
                a.spectrum.cut_k1 = *c;
            }
            a.scale = parse_scale(dif_scale);
            a.gamma = dif_gamma;
            return cmd_diffract(a, std::cout);
        }
        if (*ana) {
            AnalyzeArgs a;
            a.id = ana_id;
            for (const auto& p : ana_inputs) a.inputs.emplace_back(p);
            a.out_dir = ana_out;
            a.k = parse_k(ana_k);
            a.window = ana_window;
            a.width = ana_width;
            a.max_block = ana_block;
            a.threshold = ana_threshold;
            return cmd_analyze(a, std::cout);
        }
        if (*rep) {
            RunConfig cfg;
            cfg.load_text(figure_config_text(rep_fig), rep_fig);
            if (!rep_config.empty()) cfg.load_file(rep_config);
            if (const char* env = std::getenv("DIFFRACT_SEED"); env && *env) {
                if (!parse_uint(env)) throw CliError(kConfigError, std::string("DIFFRACT_SEED is not an integer: ") + env);
                cfg.set("seed", env);
            }
            auto sets = rep_sets;
            if (!rep_out.empty()) sets.push_back("output=" + rep_out);
            cfg.apply_overrides(sets);
            if (cfg.str("figure") != rep_fig)
                throw CliError(kConfigError, "configuration is for " + cfg.str("figure") + ", not " + rep_fig);
            return cmd_reproduce(cfg, std::max<std::size_t>(1, rep_threads), std::cout);
        }
    } catch (const CliError& e) {
        std::cerr << "diffract: " << e.what() << "\n";
        return e.code();
    } catch (const std::exception& e) {
        std::cerr << "diffract: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
