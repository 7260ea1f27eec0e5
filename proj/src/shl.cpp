#include "sparselets/shl.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sparselets {

HomeoMode parse_homeo_mode(const std::string& name) {
    if (name == "none" || name == "off") return HomeoMode::none;
    if (name == "gain_variance" || name == "variance" || name == "gain") return HomeoMode::gain_variance;
    if (name == "histogram_equalization" || name == "histogram" || name == "hist") return HomeoMode::histogram_equalization;
    throw std::invalid_argument("unknown homeostasis mode '" + name + "'");
}

std::string to_string(HomeoMode mode) {
    switch (mode) {
        case HomeoMode::none: return "none";
        case HomeoMode::gain_variance: return "gain_variance";
        case HomeoMode::histogram_equalization: return "histogram_equalization";
    }
    throw std::invalid_argument("unknown homeostasis mode");
}

void SHLParams::validate() const {
    if (patch_side < 2) throw std::invalid_argument("shl: patch_side must be >= 2");
    if (n_atoms < 1) throw std::invalid_argument("shl: n_atoms must be >= 1");
    if (!(eta > 0.0)) throw std::invalid_argument("shl: eta must be positive");
    if (!(burn_in_fraction >= 0.0 && burn_in_fraction <= 1.0))
        throw std::invalid_argument("shl: burn_in_fraction must lie in [0, 1]");
    if (l0_target < 1 || l0_target > n_atoms) throw std::invalid_argument("shl: l0_target must lie in [1, n_atoms]");
    if (n_steps < 0) throw std::invalid_argument("shl: n_steps must be non-negative");
    if (batch_size < 1) throw std::invalid_argument("shl: batch_size must be >= 1");
    if (!(homeo_rate > 0.0 && homeo_rate <= 1.0)) throw std::invalid_argument("shl: homeo_rate must lie in (0, 1]");
    if (log_interval < 1) throw std::invalid_argument("shl: log_interval must be >= 1");
}

double SHLParams::eta_at(int step) const {
    const double burn = std::max(1.0, burn_in_fraction * n_steps);
    return step < burn ? eta : eta * burn / (step + 1.0);
}

// ---------------------------------------------------------------------------

void SparseVector::add(int i, double v) {
    auto it = std::lower_bound(index.begin(), index.end(), i);
    const auto k = it - index.begin();
    if (it != index.end() && *it == i) {
        value[k] += v;
        if (value[k] == 0.0) {
            index.erase(it);
            value.erase(value.begin() + k);
        }
    } else if (v != 0.0) {
        index.insert(it, i);
        value.insert(value.begin() + k, v);
    }
}

double SparseVector::get(int i) const {
    auto it = std::lower_bound(index.begin(), index.end(), i);
    return it != index.end() && *it == i ? value[it - index.begin()] : 0.0;
}

Eigen::VectorXd SparseVector::dense(int m) const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(m);
    for (std::size_t k = 0; k < index.size(); ++k) d(index[k]) = value[k];
    return d;
}

// ---------------------------------------------------------------------------

Dictionary::Dictionary(Eigen::MatrixXd atoms, HomeoMode mode) : atoms_(std::move(atoms)), mode_(mode) {
    if (atoms_.rows() < 1 || atoms_.cols() < 1) throw std::invalid_argument("dictionary: empty atom matrix");
    for (int i = 0; i < M(); ++i)
        if (!(atoms_.col(i).norm() > 0.0)) throw std::invalid_argument("dictionary: zero atom column");
    normalize_columns();
    gains_ = Eigen::VectorXd::Ones(M());
    variance_ = Eigen::VectorXd::Constant(M(), 1.0 / M());
    histogram_ = Eigen::MatrixXd::Constant(kHistogramBins, M(), 1.0 / kHistogramBins);
    refresh_cdf();
}

Dictionary Dictionary::random(int L, int M, std::uint64_t seed, HomeoMode mode) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd a(L, M);
    for (int j = 0; j < M; ++j)
        for (int i = 0; i < L; ++i) a(i, j) = g(rng);
    return Dictionary(std::move(a), mode);
}

void Dictionary::normalize_columns() {
    for (int i = 0; i < M(); ++i) {
        const double n = atoms_.col(i).norm();
        if (!(n > 0.0)) throw std::runtime_error("dictionary: atom collapsed to zero");
        atoms_.col(i) /= n;
    }
}

double Dictionary::max_norm_error() const {
    double e = 0.0;
    for (int i = 0; i < M(); ++i) e = std::max(e, std::abs(atoms_.col(i).norm() - 1.0));
    return e;
}

void Dictionary::refresh_cdf() {
    cdf_.resize(kHistogramBins + 1, M());
    for (int i = 0; i < M(); ++i) {
        const double total = histogram_.col(i).sum();
        cdf_(0, i) = 0.0;
        for (int b = 0; b < kHistogramBins; ++b)
            cdf_(b + 1, i) = cdf_(b, i) + (total > 0.0 ? histogram_(b, i) / total : 1.0 / kHistogramBins);
    }
}

double Dictionary::score(int i, double c) const {
    const double m = std::abs(c);
    switch (mode_) {
        case HomeoMode::none: return m;
        case HomeoMode::gain_variance: return gains_(i) * m;
        case HomeoMode::histogram_equalization: {
            const double u = std::min(m, 1.0) * kHistogramBins;
            const int b = std::min(static_cast<int>(u), kHistogramBins - 1);
            return cdf_(b, i) + (u - b) * (cdf_(b + 1, i) - cdf_(b, i));
        }
    }
    return m;
}

bool Dictionary::operator==(const Dictionary& o) const {
    return mode_ == o.mode_ && atoms_ == o.atoms_ && gains_ == o.gains_ && variance_ == o.variance_ &&
           histogram_ == o.histogram_;
}

// ---------------------------------------------------------------------------

namespace {

SparseVector run_mp(const Eigen::VectorXd& patch, const Dictionary& dict, int l0_target, Eigen::VectorXd* residual,
                    bool plain, Eigen::MatrixXd* step_corr = nullptr) {
    if (patch.size() != dict.L()) throw std::invalid_argument("code_mp: patch length does not match dictionary");
    if (l0_target < 0) throw std::invalid_argument("code_mp: negative l0_target");
    const auto& phi = dict.atoms();
    Eigen::VectorXd r = patch;
    const double e0 = r.squaredNorm();
    SparseVector code;
    if (step_corr) step_corr->resize(dict.M(), 0);
    for (int step = 0; step < l0_target; ++step) {
        if (!(r.squaredNorm() > 1e-12 * e0)) break;
        const Eigen::VectorXd corr = phi.transpose() * r;
        if (step_corr) {
            step_corr->conservativeResize(Eigen::NoChange, step + 1);
            step_corr->col(step) = corr;
        }
        int best = -1;
        double best_s = -1.0, best_c = -1.0;
        for (int i = 0; i < dict.M(); ++i) {
            const double c = std::abs(corr(i));
            const double s = plain ? c : dict.score(i, corr(i));
            if (s > best_s || (s == best_s && c > best_c)) {
                best = i;
                best_s = s;
                best_c = c;
            }
        }
        const double a = corr(best);
        if (a == 0.0) break;
        code.add(best, a);
        r.noalias() -= a * phi.col(best);
    }
    if (residual) *residual = r;
    return code;
}

}  // namespace

SparseVector code_mp_traced(const Eigen::VectorXd& patch, const Dictionary& dict, int l0_target,
                            Eigen::VectorXd* residual, Eigen::MatrixXd* step_correlations) {
    return run_mp(patch, dict, l0_target, residual, false, step_correlations);
}

SparseVector code_mp(const Eigen::VectorXd& patch, const Dictionary& dict, int l0_target, Eigen::VectorXd* residual) {
    return run_mp(patch, dict, l0_target, residual, false);
}

SparseVector code_mp_plain(const Eigen::VectorXd& patch, const Dictionary& dict, int l0_target,
                           Eigen::VectorXd* residual) {
    return run_mp(patch, dict, l0_target, residual, true);
}

void hebbian_update(Dictionary& dict, const Eigen::VectorXd& patch, const SparseVector& code, double eta) {
    if (patch.size() != dict.L()) throw std::invalid_argument("hebbian_update: patch length does not match");
    if (code.l0() == 0) return;
    Eigen::VectorXd r = patch;
    for (int k = 0; k < code.l0(); ++k) r.noalias() -= code.value[k] * dict.atoms().col(code.index[k]);
    for (int k = 0; k < code.l0(); ++k) {
        auto col = dict.atoms().col(code.index[k]);
        col += eta * code.value[k] * r;
        col /= col.norm();
    }
}

void homeostasis_update(Dictionary& dict, const SparseVector& code, const Eigen::MatrixXd& correlations,
                        double rate) {
    if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("homeostasis: rate must lie in (0, 1]");
    switch (dict.mode()) {
        case HomeoMode::none: return;
        case HomeoMode::gain_variance: {
            auto& v = dict.variance();
            v *= 1.0 - rate;
            for (int k = 0; k < code.l0(); ++k) v(code.index[k]) += rate * code.value[k] * code.value[k];
            Eigen::ArrayXd g = v.array().max(1e-300).rsqrt();
            const double log_mean = g.log().mean();
            dict.gains() = (g / std::exp(log_mean)).matrix();
            return;
        }
        case HomeoMode::histogram_equalization: {
            if (correlations.rows() != dict.M()) throw std::invalid_argument("homeostasis: correlation count mismatch");
            if (correlations.cols() == 0) return;
            auto& h = dict.histogram();
            h *= 1.0 - rate;
            const double w = rate / correlations.cols();
            for (int k = 0; k < correlations.cols(); ++k)
                for (int i = 0; i < dict.M(); ++i) {
                    const int b = std::min(static_cast<int>(std::abs(correlations(i, k)) * Dictionary::kHistogramBins),
                                           Dictionary::kHistogramBins - 1);
                    h(b, i) += w;
                }
            dict.refresh_cdf();
            return;
        }
    }
}

// ---------------------------------------------------------------------------

ImagePatchSource::ImagePatchSource(std::vector<Image> whitened, int patch_side)
    : images_(std::move(whitened)), side_(patch_side) {
    if (images_.empty()) throw std::invalid_argument("patch source: empty corpus");
    for (auto& img : images_) {
        if (img.width() < side_ || img.height() < side_) throw std::invalid_argument("patch source: image too small");
        const double mean = img.mean();
        for (double& v : img.values()) v -= mean;
        const double var = img.variance();
        if (!(var > 0.0)) throw std::invalid_argument("patch source: blank image");
        img *= 1.0 / std::sqrt(var);
    }
}

Eigen::VectorXd ImagePatchSource::draw(std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, images_.size() - 1);
    Eigen::VectorXd p(side_ * side_);
    for (int attempt = 0; attempt < 10000; ++attempt) {
        const auto& img = images_[pick(rng)];
        std::uniform_int_distribution<int> px(0, img.width() - side_), py(0, img.height() - side_);
        const int x0 = px(rng), y0 = py(rng);
        for (int y = 0; y < side_; ++y)
            for (int x = 0; x < side_; ++x) p(y * side_ + x) = img(x0 + x, y0 + y);
        const double mean = p.mean();
        p.array() -= mean;
        const double var = p.squaredNorm() / p.size();
        if (var < 1e-4) continue;
        return p / p.norm();
    }
    throw std::runtime_error("patch source: no patch above the variance floor");
}

void TrainingLog::write_csv(const std::filesystem::path& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << "step,eta,residual,kurtosis,min_pick_rate,max_pick_rate\n";
    f.precision(10);
    for (const auto& r : records)
        f << r.step << ',' << r.eta << ',' << r.residual << ',' << r.kurtosis << ',' << r.min_pick_rate << ','
          << r.max_pick_rate << '\n';
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

LearnResult learn(PatchSource& source, const SHLParams& params) {
    params.validate();
    const int L = params.patch_side * params.patch_side;
    if (source.dimension() != L) throw std::invalid_argument("learn: patch source dimension does not match patch_side");
    return learn(source, params, Dictionary::random(L, params.n_atoms, params.seed, params.homeo_mode));
}

LearnResult learn(PatchSource& source, const SHLParams& params, Dictionary dict) {
    params.validate();
    if (source.dimension() != dict.L()) throw std::invalid_argument("learn: patch source dimension mismatch");
    dict.set_mode(params.homeo_mode);
    std::mt19937_64 rng(params.seed ^ 0x9e3779b97f4a7c15ULL);
    TrainingLog log;
    log.pick_counts.assign(dict.M(), 0);

    std::vector<long> window_picks(dict.M(), 0);
    long window_patches = 0;
    double window_residual = 0.0, s2 = 0.0, s4 = 0.0;
    long window_entries = 0;

    std::vector<Eigen::VectorXd> batch(params.batch_size);
    std::vector<SparseVector> codes(params.batch_size);
    std::vector<Eigen::MatrixXd> corrs(params.batch_size);
    Eigen::MatrixXd delta(dict.L(), dict.M());
    for (int step = 0; step < params.n_steps; ++step) {
        delta.setZero();
        for (int b = 0; b < params.batch_size; ++b) {
            batch[b] = source.draw(rng);
            if (batch[b].size() != dict.L()) throw std::runtime_error("learn: patch source returned a wrong size");
            Eigen::VectorXd r;
            codes[b] = code_mp_traced(batch[b], dict, params.l0_target, &r, &corrs[b]);
            for (int k = 0; k < codes[b].l0(); ++k) {
                delta.col(codes[b].index[k]) += codes[b].value[k] * r;
                ++window_picks[codes[b].index[k]];
                ++log.pick_counts[codes[b].index[k]];
                s2 += codes[b].value[k] * codes[b].value[k];
                s4 += std::pow(codes[b].value[k], 4);
            }
            const double e0 = batch[b].squaredNorm();
            window_residual += e0 > 0.0 ? r.squaredNorm() / e0 : 0.0;
            window_entries += dict.M();
            ++window_patches;
        }
        dict.atoms() += params.eta_at(step) * delta;
        dict.normalize_columns();
        for (int b = 0; b < params.batch_size; ++b) homeostasis_update(dict, codes[b], corrs[b], params.homeo_rate);
        log.patches += params.batch_size;

        if ((step + 1) % params.log_interval == 0 || step + 1 == params.n_steps) {
            TrainingRecord rec;
            rec.step = step + 1;
            rec.eta = params.eta_at(step);
            rec.residual = window_residual / window_patches;
            const double m2 = s2 / window_entries, m4 = s4 / window_entries;
            rec.kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;
            const auto [lo, hi] = std::minmax_element(window_picks.begin(), window_picks.end());
            rec.min_pick_rate = static_cast<double>(*lo) / window_patches;
            rec.max_pick_rate = static_cast<double>(*hi) / window_patches;
            log.records.push_back(rec);
            std::fill(window_picks.begin(), window_picks.end(), 0);
            window_patches = window_entries = 0;
            window_residual = s2 = s4 = 0.0;
        }
    }
    return {std::move(dict), std::move(log)};
}

// ---------------------------------------------------------------------------

double kurtosis(const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("kurtosis: no samples");
    double mean = 0.0;
    for (double v : samples) mean += v;
    mean /= samples.size();
    double m2 = 0.0, m4 = 0.0;
    for (double v : samples) {
        const double d = (v - mean) * (v - mean);
        m2 += d;
        m4 += d * d;
    }
    m2 /= samples.size();
    m4 /= samples.size();
    if (!(m2 > 0.0)) throw std::invalid_argument("kurtosis: zero variance");
    return m4 / (m2 * m2) - 3.0;
}

double code_kurtosis(const Dictionary& dict, const std::vector<Eigen::VectorXd>& patches, int l0_target) {
    std::vector<double> all;
    all.reserve(patches.size() * dict.M());
    for (const auto& p : patches) {
        const auto d = code_mp_plain(p, dict, l0_target).dense(dict.M());
        all.insert(all.end(), d.data(), d.data() + d.size());
    }
    return kurtosis(all);
}

std::vector<double> pick_rates(const Dictionary& dict, const std::vector<Eigen::VectorXd>& patches, int l0_target) {
    if (patches.empty()) throw std::invalid_argument("pick_rates: no patches");
    std::vector<double> rate(dict.M(), 0.0);
    for (const auto& p : patches)
        for (int i : code_mp(p, dict, l0_target).index) rate[i] += 1.0;
    for (double& r : rate) r /= patches.size();
    return rate;
}

std::vector<EfficiencyPoint> efficiency_report(const Dictionary& dict, const std::vector<Eigen::VectorXd>& patches,
                                               const std::vector<int>& grid) {
    if (patches.empty()) throw std::invalid_argument("efficiency_report: no patches");
    std::vector<EfficiencyPoint> out;
    for (int n : grid) {
        double s = 0.0, ss = 0.0;
        for (const auto& p : patches) {
            Eigen::VectorXd r;
            code_mp_plain(p, dict, n, &r);
            const double e = p.norm() > 0.0 ? r.norm() / p.norm() : 0.0;
            s += e;
            ss += e * e;
        }
        const double mean = s / patches.size();
        out.push_back({n, mean, std::sqrt(std::max(0.0, ss / patches.size() - mean * mean))});
    }
    return out;
}

ParametricCosts parametric_costs(const Eigen::VectorXd& patch, const Dictionary& dict, const SparseVector& code,
                                 double sigma_n, double beta, double sigma, double lambda) {
    if (!(sigma_n > 0.0)) throw std::invalid_argument("parametric_costs: sigma_n must be positive");
    if (!(sigma > 0.0)) throw std::invalid_argument("parametric_costs: sigma must be positive");
    Eigen::VectorXd r = patch;
    for (int k = 0; k < code.l0(); ++k) r -= code.value[k] * dict.atoms().col(code.index[k]);
    const double fit = r.squaredNorm() / (2.0 * sigma_n * sigma_n);
    double prior = 0.0;
    for (double a : code.value) prior += std::log1p(a * a / (sigma * sigma));
    return {fit + beta * prior, fit + lambda * code.l0()};
}

// ---------------------------------------------------------------------------

namespace {

constexpr char kDictMagic[8] = {'S', 'P', 'L', 'D', 'I', 'C', 'T', '1'};

template <typename T>
void put(std::ostream& f, const T& v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& f) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw std::runtime_error("dictionary file truncated");
    return v;
}

}  // namespace

void save_dictionary(const std::filesystem::path& path, const Dictionary& dict, int patch_side) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.write(kDictMagic, sizeof kDictMagic);
    put<std::int32_t>(f, dict.L());
    put<std::int32_t>(f, dict.M());
    put<std::int32_t>(f, patch_side);
    put<std::int32_t>(f, static_cast<std::int32_t>(dict.mode()));
    put<std::int32_t>(f, Dictionary::kHistogramBins);
    // Eigen storage is column-major.
    f.write(reinterpret_cast<const char*>(dict.atoms().data()), sizeof(double) * dict.atoms().size());
    f.write(reinterpret_cast<const char*>(dict.gains().data()), sizeof(double) * dict.M());
    f.write(reinterpret_cast<const char*>(dict.variance().data()), sizeof(double) * dict.M());
    f.write(reinterpret_cast<const char*>(dict.histogram().data()), sizeof(double) * dict.histogram().size());
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

Dictionary load_dictionary(const std::filesystem::path& path, int* patch_side) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    char magic[8];
    f.read(magic, sizeof magic);
    if (!f || std::memcmp(magic, kDictMagic, sizeof magic) != 0)
        throw std::runtime_error("not a dictionary file: " + path.string());
    const int L = get<std::int32_t>(f), M = get<std::int32_t>(f), side = get<std::int32_t>(f);
    const int mode = get<std::int32_t>(f), bins = get<std::int32_t>(f);
    if (L < 1 || M < 1 || bins != Dictionary::kHistogramBins || mode < 0 || mode > 2)
        throw std::runtime_error("dictionary file has an invalid header: " + path.string());
    Eigen::MatrixXd atoms(L, M);
    f.read(reinterpret_cast<char*>(atoms.data()), sizeof(double) * atoms.size());
    Dictionary d(atoms, static_cast<HomeoMode>(mode));
    d.atoms() = atoms;  // keep stored values bit-exact
    f.read(reinterpret_cast<char*>(d.gains().data()), sizeof(double) * M);
    f.read(reinterpret_cast<char*>(d.variance().data()), sizeof(double) * M);
    f.read(reinterpret_cast<char*>(d.histogram().data()), sizeof(double) * d.histogram().size());
    if (!f) throw std::runtime_error("dictionary file truncated: " + path.string());
    d.refresh_cdf();
    if (patch_side) *patch_side = side;
    return d;
}

}  // namespace sparselets
