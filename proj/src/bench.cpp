#include "sparselets/bench.hpp"

#include "sparselets/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>

namespace sparselets {

std::vector<NamedImage> load_named_corpus(const std::filesystem::path& manifest, int target_size,
                                          const std::string& split, int limit) {
    std::vector<NamedImage> out;
    for (const auto& e : read_manifest(manifest)) {
        if (!split.empty() && e.split != split) continue;
        if (limit > 0 && static_cast<int>(out.size()) >= limit) break;
        out.push_back({e.path.stem().string(), load_image(e.path, target_size)});
    }
    if (out.empty()) throw std::runtime_error("no images selected from " + manifest.string());
    return out;
}

std::vector<NamedImage> preprocess_corpus(const std::vector<NamedImage>& raw, const WhiteningParams& whitening) {
    std::vector<NamedImage> out;
    for (const auto& r : raw) out.push_back({r.id, preprocess(r.image, whitening)});
    return out;
}

std::vector<int> log_grid(int max_n) {
    std::vector<int> g{0};
    for (int n = 1; n < max_n; n *= 2) g.push_back(n);
    if (max_n > 0) g.push_back(max_n);
    return g;
}

double bits_per_pixel(int n, std::size_t coefficient_count, int image_size) {
    return n * std::log2(static_cast<double>(coefficient_count)) / (static_cast<double>(image_size) * image_size);
}

double edges_to_reach(const std::vector<double>& curve, double residual_fraction) {
    for (std::size_t n = 1; n < curve.size(); ++n) {
        if (curve[n] > residual_fraction) continue;
        const double e0 = curve[n - 1], e1 = curve[n];
        const double t = e0 > e1 ? (e0 - residual_fraction) / (e0 - e1) : 1.0;
        if (n == 1) return t;
        const double l0 = std::log(static_cast<double>(n - 1)), l1 = std::log(static_cast<double>(n));
        return std::exp(l0 + t * (l1 - l0));
    }
    if (!curve.empty() && curve[0] <= residual_fraction) return 0.0;
    return std::numeric_limits<double>::infinity();
}

double EfficiencyTable::mean_edges_at(double residual_fraction) const {
    if (curves.empty()) throw std::runtime_error("efficiency table is empty");
    double s = 0.0;
    for (const auto& c : curves) s += edges_to_reach(c, residual_fraction);
    return s / curves.size();
}

double EfficiencyTable::bits_per_pixel_at(double residual_fraction) const {
    return mean_edges_at(residual_fraction) * std::log2(static_cast<double>(coefficient_count)) /
           (static_cast<double>(image_size) * image_size);
}

double EfficiencyTable::mean_energy_at(int n) const {
    if (curves.empty()) throw std::runtime_error("efficiency table is empty");
    double s = 0.0;
    for (const auto& c : curves) s += c[std::min<std::size_t>(n, c.size() - 1)];
    return s / curves.size();
}

namespace {

std::vector<std::size_t> order_by_id(const std::vector<NamedImage>& corpus) {
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return corpus[a].id < corpus[b].id; });
    return order;
}

}  // namespace

EfficiencyTable efficiency_experiment(const std::vector<NamedImage>& corpus, const LogGaborBank& bank,
                                      const PursuitParams& pparams, int workers) {
    if (corpus.empty()) throw std::invalid_argument("efficiency_experiment: empty corpus");
    EfficiencyTable t;
    t.coefficient_count = bank.coefficient_count();
    t.image_size = bank.image_size();
    const auto grid = log_grid(pparams.max_edges);
    const auto order = order_by_id(corpus);
    std::vector<std::vector<double>> curves(order.size());
    parallel_for(order.size(), workers, [&](std::size_t k) {
        curves[k] = energy_curve(extract(corpus[order[k]].image, bank, pparams), pparams.alpha);
    });
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto i = order[k];
        auto& curve = curves[k];
        t.ids.push_back(corpus[i].id);
        for (int n : grid) {
            const double e = curve[std::min<std::size_t>(n, curve.size() - 1)];
            t.rows.push_back({corpus[i].id, n, e, bits_per_pixel(n, t.coefficient_count, t.image_size)});
        }
        t.curves.push_back(std::move(curve));
    }
    for (int n : grid) {
        double s = 0.0, ss = 0.0;
        for (const auto& c : t.curves) {
            const double e = c[std::min<std::size_t>(n, c.size() - 1)];
            s += e;
            ss += e * e;
        }
        const double mean = s / t.curves.size();
        t.summary.push_back({n, mean, std::sqrt(std::max(0.0, ss / t.curves.size() - mean * mean)),
                             bits_per_pixel(n, t.coefficient_count, t.image_size)});
    }
    return t;
}

SweepVariable parse_sweep_variable(const std::string& name) {
    if (name == "B_f" || name == "bandwidth_log_frequency") return SweepVariable::bandwidth_log_frequency;
    if (name == "B_theta" || name == "bandwidth_orientation") return SweepVariable::bandwidth_orientation;
    if (name == "n_orientations") return SweepVariable::n_orientations;
    if (name == "n_scales") return SweepVariable::n_scales;
    if (name == "scale_ratio") return SweepVariable::scale_ratio;
    throw std::invalid_argument("unknown sweep variable '" + name + "'");
}

std::string to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::bandwidth_log_frequency: return "B_f";
        case SweepVariable::bandwidth_orientation: return "B_theta";
        case SweepVariable::n_orientations: return "n_orientations";
        case SweepVariable::n_scales: return "n_scales";
        case SweepVariable::scale_ratio: return "scale_ratio";
    }
    throw std::invalid_argument("unknown sweep variable");
}

BankParams with_value(BankParams p, SweepVariable v, double value) {
    switch (v) {
        case SweepVariable::bandwidth_log_frequency: p.bandwidth_log_frequency = value; break;
        case SweepVariable::bandwidth_orientation: p.bandwidth_orientation = value; break;
        case SweepVariable::n_orientations:
            if (value != std::round(value)) throw std::invalid_argument("n_orientations must be an integer");
            p.n_orientations = static_cast<int>(value);
            p.orientations.clear();
            break;
        case SweepVariable::n_scales:
            if (value != std::round(value)) throw std::invalid_argument("n_scales must be an integer");
            p.n_scales = static_cast<int>(value);
            break;
        case SweepVariable::scale_ratio: p.scale_ratio = value; break;
    }
    return p;
}

void SweepSpec::validate() const {
    if (values.empty()) throw std::invalid_argument("sweep: no values");
    if (!(target_extraction > 0.0 && target_extraction < 1.0))
        throw std::invalid_argument("sweep: target_extraction must lie in (0, 1)");
    baseline.validate();
    pursuit.validate();
}

std::vector<SweepRow> parameter_sweep(const std::vector<NamedImage>& corpus, const SweepSpec& spec) {
    spec.validate();
    if (corpus.empty()) throw std::invalid_argument("parameter_sweep: empty corpus");
    const int n = corpus.front().image.width();
    const double residual = 1.0 - spec.target_extraction;
    PursuitParams pp = spec.pursuit;
    pp.energy_threshold = residual;
    const auto order = order_by_id(corpus);

    auto code_lengths = [&](const BankParams& params) {
        LogGaborBank bank(params, n);
        const double bits = std::log2(static_cast<double>(bank.coefficient_count()));
        std::vector<double> out(order.size());
        parallel_for(order.size(), spec.workers, [&](std::size_t k) {
            const auto edges = extract(corpus[order[k]].image, bank, pp);
            out[k] = edges_to_reach(energy_curve(edges, pp.alpha), residual) * bits;
        });
        return out;
    };

    const auto base = code_lengths(spec.baseline);
    std::vector<SweepRow> rows;
    for (double value : spec.values) {
        SweepRow row;
        row.value = value;
        try {
            const auto params = with_value(spec.baseline, spec.variable, value);
            const auto lengths = params == spec.baseline ? base : code_lengths(params);
            double s = 0.0, ss = 0.0;
            for (std::size_t k = 0; k < lengths.size(); ++k) {
                const double g = lengths[k] / base[k];
                row.gains.push_back(g);
                s += g;
                ss += g * g;
            }
            row.gain_mean = s / lengths.size();
            row.gain_std = std::sqrt(std::max(0.0, ss / lengths.size() - row.gain_mean * row.gain_mean));
        } catch (const std::invalid_argument& e) {
            row.ok = false;
            row.error = e.what();
            row.gain_mean = row.gain_std = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

NoiseReport noise_robustness(const std::vector<NamedImage>& raw, const LogGaborBank& bank,
                             const PursuitParams& pparams, const WhiteningParams& whitening, bool snr_halving,
                             std::uint64_t seed, int workers) {
    if (raw.empty()) throw std::invalid_argument("noise_robustness: empty corpus");
    std::vector<NamedImage> clean, noisy;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto i : order_by_id(raw)) {
        const auto& img = raw[i].image;
        clean.push_back({raw[i].id, preprocess(img, whitening)});
        Image n = img;
        if (snr_halving) {
            const double sd = std::sqrt(img.variance());
            for (double& v : n.values()) v += sd * g(rng);
        }
        noisy.push_back({raw[i].id, preprocess(n, whitening)});
    }
    NoiseReport r;
    r.clean = efficiency_experiment(clean, bank, pparams, workers);
    r.noisy = snr_halving ? efficiency_experiment(noisy, bank, pparams, workers) : r.clean;
    r.clean_bpp_at_015 = r.clean.bits_per_pixel_at(0.15);
    r.noisy_bpp_at_015 = r.noisy.bits_per_pixel_at(0.15);
    return r;
}

void write_efficiency_csv(const std::filesystem::path& path, const EfficiencyTable& table) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.precision(12);
    f << "image_id,N,E_N,bpp\n";
    for (const auto& r : table.rows) f << r.image_id << ',' << r.N << ',' << r.E_N << ',' << r.bits_per_pixel << '\n';
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

void write_sweep_csv(const std::filesystem::path& path, SweepVariable variable, const std::vector<SweepRow>& rows) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.precision(12);
    f << "param,value,gain_mean,gain_std\n";
    for (const auto& r : rows) {
        f << to_string(variable) << ',' << r.value << ',';
        if (r.ok)
            f << r.gain_mean << ',' << r.gain_std << '\n';
        else
            f << "error,error\n";
    }
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace sparselets
