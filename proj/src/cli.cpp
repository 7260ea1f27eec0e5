#include "sparselets/cli.hpp"

#include "sparselets/bench.hpp"
#include "sparselets/config.hpp"
#include "sparselets/priors.hpp"
#include "sparselets/pursuit.hpp"
#include "sparselets/shl.hpp"
#include "sparselets/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <sstream>

namespace sparselets {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
    std::string config_file;
    std::vector<std::string> overrides;
    std::uint64_t seed = 0;
    bool seed_given = false;
};

RunConfig resolve_config(const Options& o) {
    RunConfig c;
    if (!o.config_file.empty()) c = load_config(o.config_file);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw CLI::ValidationError("--set", "expects key=value, got '" + kv + "'");
        try {
            set_config_value(c, kv.substr(0, eq), kv.substr(eq + 1));
        } catch (const std::invalid_argument& e) {
            throw CLI::ValidationError("--set", e.what());
        }
    }
    if (o.seed_given) c.seed = o.seed;
    return c;
}

/// `<output>.meta.json` with everything needed to rerun the command.
void write_metadata(const fs::path& output, const RunConfig& config, const std::string& command) {
    json meta = {{"tool", "sparselets"},
                 {"version", kVersion},
                 {"command", command},
                 {"config_hash", config_hash(config)},
                 {"seed", config.seed},
                 {"config", format_config(config)}};
    save_text(fs::path(output.string() + ".meta.json"), meta.dump(2));
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

template <typename T>
void apply_if(const CLI::Option* opt, T& target, const T& value) {
    if (opt->count() > 0) target = value;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    std::vector<char*> argv;
    std::vector<std::string> storage(args);
    for (auto& s : storage) argv.push_back(s.data());
    argv.push_back(nullptr);
    return run(static_cast<int>(storage.size()), argv.data());
}

int run(int argc, char** argv) {
    CLI::App app{"sparselets: sparse edge coding of natural images with log-Gabor Matching Pursuit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Options opt;
    app.add_option("--config", opt.config_file, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--set", opt.overrides, "override a configuration entry (key=value), repeatable");
    auto* seed_opt = app.add_option("--seed", opt.seed, "seed for every random draw");
    int workers = 0;
    app.add_option("--workers", workers, "threads for corpus-level work (0 = every core); outputs do not depend on it")
        ->check(CLI::NonNegativeNumber);

    // extract
    auto* ex = app.add_subcommand("extract", "extract an edge list from an image");
    std::string ex_in, ex_edges, ex_prior, ex_thetas, ex_residual;
    double ex_alpha = 0, ex_threshold = 0, ex_eta = 0;
    int ex_max = 0, ex_size = 0;
    bool ex_raw = false;
    ex->add_option("--in", ex_in, "input image (PGM or PNG)")->required()->check(CLI::ExistingFile);
    ex->add_option("--edges", ex_edges, "output edge list (JSON)")->required();
    auto* o_alpha = ex->add_option("--alpha", ex_alpha, "fraction of each projection removed");
    auto* o_max = ex->add_option("--max-edges", ex_max, "maximum number of steps");
    auto* o_thr = ex->add_option("--threshold", ex_threshold, "residual energy fraction to stop at");
    auto* o_size = ex->add_option("--size", ex_size, "central crop side");
    ex->add_option("--prior", ex_prior, "chevron histogram (JSON) guiding selection")->check(CLI::ExistingFile);
    auto* o_eta = ex->add_option("--eta", ex_eta, "strength of the co-occurrence prior");
    ex->add_option("--orientations", ex_thetas, "orientation set (JSON from `equalize`)")->check(CLI::ExistingFile);
    ex->add_option("--residual", ex_residual, "also write the residual image");
    ex->add_flag("--raw", ex_raw, "skip whitening and masking");

    // reconstruct
    auto* rc = app.add_subcommand("reconstruct", "rebuild an image from an edge list");
    std::string rc_edges, rc_out;
    rc->add_option("--edges", rc_edges, "edge list (JSON)")->required()->check(CLI::ExistingFile);
    rc->add_option("--out", rc_out, "output image (.pgm or .png)")->required();

    // learn
    auto* ln = app.add_subcommand("learn", "learn a patch dictionary with Sparse Hebbian Learning");
    std::string ln_corpus, ln_out, ln_log, ln_homeo, ln_split = "train";
    int ln_steps = 0, ln_atoms = 0, ln_l0 = 0, ln_images = 0;
    ln->add_option("--corpus", ln_corpus, "image manifest")->required()->check(CLI::ExistingFile);
    auto* o_steps = ln->add_option("--steps", ln_steps, "learning steps");
    auto* o_atoms = ln->add_option("--atoms", ln_atoms, "dictionary size M");
    auto* o_l0 = ln->add_option("--l0", ln_l0, "nonzero coefficients per patch");
    auto* o_homeo = ln->add_option("--homeo", ln_homeo, "homeostasis: none | variance | histogram");
    ln->add_option("--split", ln_split, "manifest split to learn from (empty for all)");
    ln->add_option("--images", ln_images, "use at most this many images");
    ln->add_option("--out", ln_out, "output dictionary file")->required();
    ln->add_option("--log", ln_log, "training log (CSV)");

    // stats
    auto* st = app.add_subcommand("stats", "first- and second-order edge statistics");
    std::string st_dir, st_chevron, st_hist;
    int st_bins = 24;
    bool st_counts = false;
    st->add_option("--edges-dir", st_dir, "directory of edge lists (*.json)")->required()->check(CLI::ExistingDirectory);
    st->add_option("--chevron", st_chevron, "output chevron histogram (JSON)");
    st->add_option("--hist", st_hist, "output orientation histogram (JSON)");
    st->add_option("--bins", st_bins, "orientation bins");
    st->add_flag("--counts", st_counts, "weight by counts instead of moduli");

    // equalize
    auto* eq = app.add_subcommand("equalize", "orientation set equalizing a histogram");
    std::string eq_hist, eq_out;
    int eq_n = 24;
    eq->add_option("--hist", eq_hist, "orientation histogram (JSON)")->required()->check(CLI::ExistingFile);
    eq->add_option("--n", eq_n, "number of orientations");
    eq->add_option("--out", eq_out, "output orientation set (JSON)")->required();

    // bench
    auto* bn = app.add_subcommand("bench", "efficiency experiments");
    std::string bn_mode, bn_corpus, bn_out, bn_var = "B_theta", bn_split;
    std::vector<double> bn_values;
    int bn_size = 0, bn_images = 20;
    double bn_target = 0.85;
    bn->add_option("mode", bn_mode, "efficiency | sweep | noise")
        ->required()
        ->check(CLI::IsMember({"efficiency", "sweep", "noise"}));
    bn->add_option("--corpus", bn_corpus, "image manifest")->required()->check(CLI::ExistingFile);
    bn->add_option("--out", bn_out, "output directory")->required();
    auto* o_bsize = bn->add_option("--size", bn_size, "image side");
    bn->add_option("--images", bn_images, "use at most this many images (0 for all)");
    bn->add_option("--split", bn_split, "manifest split (empty for all)");
    bn->add_option("--variable", bn_var, "sweep variable: B_f | B_theta | n_orientations | n_scales | scale_ratio");
    bn->add_option("--values", bn_values, "sweep grid");
    bn->add_option("--target", bn_target, "sweep energy extraction target");

    // synth
    auto* sy = app.add_subcommand("synth", "circle-in-noise test image");
    double sy_radius = 0;
    int sy_clutter = 0, sy_size = 0;
    std::string sy_out;
    auto* o_radius = sy->add_option("--radius", sy_radius, "circle radius, pixels");
    auto* o_clutter = sy->add_option("--clutter", sy_clutter, "number of distractor atoms");
    auto* o_ssize = sy->add_option("--size", sy_size, "image side");
    sy->add_option("--out", sy_out, "output image (.pgm or .png)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    std::ostringstream command;
    for (int i = 0; i < argc; ++i) command << (i ? " " : "") << argv[i];

    try {
        opt.seed_given = seed_opt->count() > 0;
        RunConfig cfg = resolve_config(opt);

        if (*ex) {
            apply_if(o_alpha, cfg.pursuit.alpha, ex_alpha);
            apply_if(o_max, cfg.pursuit.max_edges, ex_max);
            apply_if(o_thr, cfg.pursuit.energy_threshold, ex_threshold);
            apply_if(o_size, cfg.image_size, ex_size);
            apply_if(o_eta, cfg.cooc.eta, ex_eta);
            if (!ex_thetas.empty())
                cfg.bank.orientations = json::parse(load_text(ex_thetas)).at("orientations").get<std::vector<double>>();
            const Image raw = load_image(ex_in, cfg.image_size);
            const Image img = ex_raw ? raw : preprocess(raw, cfg.whitening);
            const LogGaborBank bank(cfg.bank, cfg.image_size);
            EdgeList edges;
            if (!ex_prior.empty())
                edges = extract_with_prior(img, bank, ChevronHistogram::from_json(load_text(ex_prior)), cfg.pursuit,
                                           cfg.cooc);
            else
                edges = extract(img, bank, cfg.pursuit);
            ensure_parent(ex_edges);
            save_edges(ex_edges, edges);
            write_metadata(ex_edges, cfg, command.str());
            const auto curve = measured_energy_curve(edges);
            std::cout << "edges: " << edges.size() << " (steps " << edges.steps.size() << ", repeats "
                      << edges.repeat_count() << "), residual energy " << curve.back() << "\n";
            if (!ex_residual.empty()) {
                Image residual = img;
                residual -= reconstruct(edges, bank);
                ensure_parent(ex_residual);
                save_image(ex_residual, residual);
                write_metadata(ex_residual, cfg, command.str());
            }
        } else if (*rc) {
            const auto edges = load_edges(rc_edges);
            const LogGaborBank bank(edges.bank_params, edges.image_size);
            ensure_parent(rc_out);
            save_image(rc_out, reconstruct(edges, bank));
            write_metadata(rc_out, cfg, command.str());
        } else if (*ln) {
            apply_if(o_steps, cfg.shl.n_steps, ln_steps);
            apply_if(o_atoms, cfg.shl.n_atoms, ln_atoms);
            apply_if(o_l0, cfg.shl.l0_target, ln_l0);
            if (o_homeo->count()) cfg.shl.homeo_mode = parse_homeo_mode(ln_homeo);
            if (opt.seed_given) cfg.shl.seed = cfg.seed;
            std::vector<Image> whitened;
            for (auto& im : load_named_corpus(ln_corpus, cfg.image_size, ln_split, ln_images))
                whitened.push_back(whiten(im.image, cfg.whitening));
            ImagePatchSource source(std::move(whitened), cfg.shl.patch_side);
            const auto result = learn(source, cfg.shl);
            ensure_parent(ln_out);
            save_dictionary(ln_out, result.dict, cfg.shl.patch_side);
            write_metadata(ln_out, cfg, command.str());
            if (!ln_log.empty()) {
                ensure_parent(ln_log);
                result.log.write_csv(ln_log);
                write_metadata(ln_log, cfg, command.str());
            }
            if (!result.log.records.empty()) {
                const auto& r = result.log.records.back();
                std::cout << "steps " << r.step << ", residual " << r.residual << ", kurtosis " << r.kurtosis
                          << ", pick rate " << r.min_pick_rate << ".." << r.max_pick_rate << "\n";
            }
        } else if (*st) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(st_dir))
                if (e.path().extension() == ".json" && e.path().string().find(".meta.") == std::string::npos)
                    files.push_back(e.path());
            std::sort(files.begin(), files.end());
            std::vector<EdgeList> corpus;
            for (const auto& f : files) corpus.push_back(load_edges(f));
            if (corpus.empty()) throw std::runtime_error("no edge lists in " + st_dir);
            if (st_hist.empty() && st_chevron.empty()) throw CLI::ValidationError("stats", "give --hist and/or --chevron");
            if (!st_hist.empty()) {
                ensure_parent(st_hist);
                save_text(st_hist, orientation_stats(corpus, st_bins, !st_counts).to_json());
                write_metadata(st_hist, cfg, command.str());
            }
            if (!st_chevron.empty()) {
                ChevronBins bins;
                bins.modulus_weighted = !st_counts;
                ensure_parent(st_chevron);
                save_text(st_chevron, chevron_stats(corpus, bins).to_json());
                write_metadata(st_chevron, cfg, command.str());
            }
        } else if (*eq) {
            const auto hist = OrientationHistogram::from_json(load_text(eq_hist));
            const auto thetas = equalize_orientations(hist, eq_n);
            ensure_parent(eq_out);
            save_text(eq_out, json{{"version", 1}, {"orientations", thetas}}.dump(2));
            write_metadata(eq_out, cfg, command.str());
        } else if (*bn) {
            const int size = o_bsize->count() ? bn_size : (bn_mode == "efficiency" ? cfg.image_size : 128);
            fs::create_directories(bn_out);
            const auto raw = load_named_corpus(bn_corpus, size, bn_split, bn_images);
            if (bn_mode == "efficiency") {
                const LogGaborBank bank(cfg.bank, size);
                const auto table = efficiency_experiment(preprocess_corpus(raw, cfg.whitening), bank, cfg.pursuit, workers);
                const fs::path out = fs::path(bn_out) / "efficiency.csv";
                write_efficiency_csv(out, table);
                write_metadata(out, cfg, command.str());
                for (const auto& s : table.summary)
                    std::cout << "N=" << s.N << " E=" << s.mean << " +- " << s.std << " bpp=" << s.bits_per_pixel
                              << "\n";
            } else if (bn_mode == "sweep") {
                SweepSpec spec;
                spec.variable = parse_sweep_variable(bn_var);
                spec.values = bn_values;
                if (spec.values.empty()) {
                    const double pi = std::numbers::pi;
                    spec.values = {pi / 32, pi / 16, pi / 8, pi / 4, pi / 2};
                    if (spec.variable != SweepVariable::bandwidth_orientation)
                        throw CLI::ValidationError("--values", "required for this sweep variable");
                }
                spec.target_extraction = bn_target;
                spec.baseline = cfg.bank;
                spec.pursuit = cfg.pursuit;
                spec.pursuit.max_edges = std::max(spec.pursuit.max_edges, 8192);
                spec.workers = workers;
                const auto rows = parameter_sweep(preprocess_corpus(raw, cfg.whitening), spec);
                const fs::path out = fs::path(bn_out) / "sweep.csv";
                write_sweep_csv(out, spec.variable, rows);
                write_metadata(out, cfg, command.str());
                for (const auto& r : rows)
                    std::cout << to_string(spec.variable) << "=" << r.value << " gain="
                              << (r.ok ? std::to_string(r.gain_mean) : "error: " + r.error) << "\n";
            } else {
                const LogGaborBank bank(cfg.bank, size);
                const auto report = noise_robustness(raw, bank, cfg.pursuit, cfg.whitening, true, cfg.seed, workers);
                const fs::path clean = fs::path(bn_out) / "noise_clean.csv", noisy = fs::path(bn_out) / "noise_noisy.csv";
                write_efficiency_csv(clean, report.clean);
                write_efficiency_csv(noisy, report.noisy);
                write_metadata(clean, cfg, command.str());
                write_metadata(noisy, cfg, command.str());
                std::cout << "bits/pixel at 85% extraction: clean " << report.clean_bpp_at_015 << ", noisy "
                          << report.noisy_bpp_at_015 << "\n";
            }
        } else if (*sy) {
            apply_if(o_radius, cfg.synth.radius, sy_radius);
            apply_if(o_clutter, cfg.synth.n_clutter, sy_clutter);
            apply_if(o_ssize, cfg.image_size, sy_size);
            if (opt.seed_given) cfg.synth.seed = cfg.seed;
            const LogGaborBank bank(cfg.bank, cfg.image_size);
            const auto stim = make_circle_in_noise(cfg.synth, bank);
            ensure_parent(sy_out);
            save_image(sy_out, stim.image);
            write_metadata(sy_out, cfg, command.str());
        }
    } catch (const CLI::Error& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace sparselets
