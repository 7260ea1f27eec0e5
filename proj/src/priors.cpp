#include "sparselets/priors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace sparselets {

using nlohmann::json;
using std::numbers::pi;

// ---------------------------------------------------------------------------
// Orientation histogram

OrientationHistogram::OrientationHistogram(int n_bins, bool modulus_weighted)
    : mass_(n_bins > 0 ? n_bins : throw std::invalid_argument("orientation histogram: n_bins must be >= 1"), 0.0),
      modulus_weighted_(modulus_weighted) {}

OrientationHistogram OrientationHistogram::from_weights(std::vector<double> weights, bool modulus_weighted) {
    OrientationHistogram h(static_cast<int>(weights.size()), modulus_weighted);
    for (double w : weights)
        if (!(w >= 0.0)) throw std::invalid_argument("orientation histogram: negative weight");
    h.mass_ = std::move(weights);
    if (!(h.total() > 0.0)) throw std::invalid_argument("orientation histogram: all weights are zero");
    return h;
}

double OrientationHistogram::bin_width() const { return pi / n_bins(); }
double OrientationHistogram::bin_center(int k) const { return -pi / 2.0 + (k + 1) * bin_width(); }
double OrientationHistogram::origin() const { return -pi / 2.0 + 0.5 * bin_width(); }

int OrientationHistogram::bin_of(double theta) const { return angle_bin(theta, n_bins()); }

void OrientationHistogram::add(double theta, double weight) {
    if (!(weight >= 0.0)) throw std::invalid_argument("orientation histogram: negative weight");
    mass_[bin_of(theta)] += weight;
}

void OrientationHistogram::merge(const OrientationHistogram& other) {
    if (other.n_bins() != n_bins()) throw std::invalid_argument("orientation histogram: bin count mismatch");
    for (int k = 0; k < n_bins(); ++k) mass_[k] += other.mass_[k];
}

double OrientationHistogram::total() const {
    double t = 0.0;
    for (double m : mass_) t += m;
    return t;
}

std::vector<double> OrientationHistogram::weights() const {
    const double t = total();
    if (!(t > 0.0)) throw std::runtime_error("orientation histogram: empty");
    std::vector<double> w(mass_);
    for (double& v : w) v /= t;
    return w;
}

std::vector<double> OrientationHistogram::cdf() const {
    const auto w = weights();
    std::vector<double> c(w.size() + 1, 0.0);
    for (std::size_t k = 0; k < w.size(); ++k) c[k + 1] = c[k] + w[k];
    c.back() = 1.0;
    return c;
}

double OrientationHistogram::quantile(double u) const {
    if (!(u >= 0.0 && u <= 1.0)) throw std::invalid_argument("orientation histogram: quantile outside [0, 1]");
    const auto c = cdf();
    // First bin whose upper cdf edge reaches u and that carries mass.
    int k = 0;
    while (k < n_bins() - 1 && (c[k + 1] < u || c[k + 1] == c[k])) ++k;
    const double span = c[k + 1] - c[k];
    const double frac = span > 0.0 ? std::clamp((u - c[k]) / span, 0.0, 1.0) : 0.5;
    return wrap_half_pi(origin() + (k + frac) * bin_width());
}

double OrientationHistogram::max_deviation_from_uniform() const {
    const auto w = weights();
    double m = 0.0;
    for (double v : w) m = std::max(m, std::abs(v - 1.0 / n_bins()));
    return m;
}

std::string OrientationHistogram::to_json() const {
    return json{{"version", 1}, {"kind", "orientation_histogram"}, {"modulus_weighted", modulus_weighted_},
                {"mass", mass_}}
        .dump();
}

OrientationHistogram OrientationHistogram::from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        if (j.at("version").get<int>() != 1) throw std::runtime_error("orientation histogram: unsupported version");
        return from_weights(j.at("mass").get<std::vector<double>>(), j.value("modulus_weighted", true));
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("orientation histogram: malformed JSON: ") + e.what());
    }
}

OrientationHistogram orientation_stats(const std::vector<EdgeList>& corpus, int n_bins, bool modulus_weighted) {
    if (corpus.empty()) throw std::invalid_argument("orientation_stats: empty corpus");
    OrientationHistogram h(n_bins, modulus_weighted);
    for (const auto& list : corpus)
        for (const auto& e : list.edges) h.add(e.theta, modulus_weighted ? std::abs(e.coeff) : 1.0);
    if (!(h.total() > 0.0)) throw std::invalid_argument("orientation_stats: corpus holds no edges");
    return h;
}

OrientationHistogram channel_usage(const std::vector<EdgeList>& corpus, int n_orientations, bool modulus_weighted) {
    if (corpus.empty()) throw std::invalid_argument("channel_usage: empty corpus");
    std::vector<double> mass(n_orientations, 0.0);
    for (const auto& list : corpus)
        for (const auto& e : list.edges) {
            if (e.address.orientation >= n_orientations)
                throw std::invalid_argument("channel_usage: orientation index out of range");
            mass[e.address.orientation] += modulus_weighted ? std::abs(e.coeff) : 1.0;
        }
    return OrientationHistogram::from_weights(std::move(mass), modulus_weighted);
}

std::vector<double> equalize_orientations(const OrientationHistogram& hist, int n_orientations) {
    if (n_orientations < 1) throw std::invalid_argument("equalize_orientations: n_orientations must be >= 1");
    std::vector<double> out;
    for (int k = 0; k < n_orientations; ++k) out.push_back(hist.quantile((k + 0.5) / n_orientations));
    std::sort(out.begin(), out.end());
    return out;
}

// ---------------------------------------------------------------------------
// Chevron map

namespace {
// Angles are snapped to an integer grid of pi / kAngleQuanta before binning so
// that values computed along different rounding paths (a rotated or swapped
// pair) share a bin even when they sit on a bin edge. The grid contains every
// multiple of pi / 48, where edges of the default bank's relative angles fall.
constexpr long long kAngleQuanta = 737280;

// Orientation difference on the grid, in (-pi/2, pi/2].
double snapped_difference(double raw) {
    long long q = std::llround(raw / pi * kAngleQuanta) % kAngleQuanta;
    if (q > kAngleQuanta / 2) q -= kAngleQuanta;
    if (q <= -kAngleQuanta / 2) q += kAngleQuanta;
    return static_cast<double>(q) * pi / kAngleQuanta;
}
}  // namespace

int angle_bin(double angle, int n) {
    const long long q = std::llround(angle / pi * kAngleQuanta);
    const long long u = ((q + kAngleQuanta / 2) % kAngleQuanta + kAngleQuanta) % kAngleQuanta;
    // floor((u / P) * n - 1/2) in integers
    const long long num = 2 * u * n - kAngleQuanta;
    const long long den = 2 * kAngleQuanta;
    const long long t = num >= 0 ? num / den : -((-num + den - 1) / den);
    return static_cast<int>(((t % n) + n) % n);
}

double angle_bin_center(int k, int n) { return -pi / 2.0 + (k + 1) * pi / n; }

void ChevronBins::validate() const {
    if (n_psi < 1 || n_theta < 1 || n_sigma < 1) throw std::invalid_argument("chevron: bin counts must be >= 1");
    if (d_edges.size() < 2) throw std::invalid_argument("chevron: need at least one distance bin");
    for (std::size_t i = 1; i < d_edges.size(); ++i)
        if (!(d_edges[i] > d_edges[i - 1])) throw std::invalid_argument("chevron: distance edges must increase");
    if (d_edges.front() < 0.0) throw std::invalid_argument("chevron: negative distance edge");
    if (!(log2_sigma_max > 0.0)) throw std::invalid_argument("chevron: log2_sigma_max must be positive");
}

PairGeometry pair_geometry(const EdgePoint& a, const EdgePoint& b) {
    PairGeometry g;
    const double dx = b.x - a.x, dy = b.y - a.y;
    g.theta = snapped_difference(b.theta - a.theta);
    g.phi = wrap_half_pi(std::atan2(dy, dx) - a.theta);
    g.psi = wrap_half_pi(g.phi - g.theta / 2.0);
    g.d = std::hypot(dx, dy) / a.wavelength;
    g.log2_sigma = std::log2(b.wavelength / a.wavelength);
    return g;
}

ChevronHistogram::ChevronHistogram(ChevronBins bins) : bins_(std::move(bins)) {
    bins_.validate();
    counts_.assign(static_cast<std::size_t>(bins_.n_psi) * bins_.n_theta * (bins_.d_edges.size() - 1) * bins_.n_sigma,
                   0.0);
}

long ChevronHistogram::cell(int psi, int theta, int d, int sigma) const {
    const long nd = static_cast<long>(bins_.d_edges.size()) - 1;
    return ((static_cast<long>(sigma) * nd + d) * bins_.n_theta + theta) * bins_.n_psi + psi;
}

long ChevronHistogram::cell(const PairGeometry& g) const {
    if (!(g.d > 0.0)) return -1;
    const auto& e = bins_.d_edges;
    if (g.d < e.front() || g.d > e.back()) return -1;
    int d = static_cast<int>(std::upper_bound(e.begin(), e.end(), g.d) - e.begin()) - 1;
    d = std::min(d, static_cast<int>(e.size()) - 2);
    int s = 0;
    if (bins_.n_sigma > 1) {
        const double u = (g.log2_sigma + bins_.log2_sigma_max) / (2.0 * bins_.log2_sigma_max);
        s = std::clamp(static_cast<int>(std::floor(u * bins_.n_sigma)), 0, bins_.n_sigma - 1);
    }
    return cell(angle_bin(g.psi, bins_.n_psi), angle_bin(g.theta, bins_.n_theta), d, s);
}

void ChevronHistogram::add(const PairGeometry& g, double mass) {
    const long c = cell(g);
    if (c < 0) return;
    counts_[c] += mass;
    ++pairs_;
}

void ChevronHistogram::merge(const ChevronHistogram& other) {
    if (!(other.bins_ == bins_)) throw std::invalid_argument("chevron: binning mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    pairs_ += other.pairs_;
}

double ChevronHistogram::total() const {
    double t = 0.0;
    for (double c : counts_) t += c;
    return t;
}

double ChevronHistogram::ratio(long c) const {
    if (c < 0 || c >= static_cast<long>(counts_.size())) throw std::out_of_range("chevron: cell out of range");
    const long slice = static_cast<long>(bins_.n_psi) * bins_.n_theta;
    const long first = (c / slice) * slice;
    double sum = 0.0;
    for (long i = first; i < first + slice; ++i) sum += counts_[i];
    if (!(sum > 0.0)) return 1.0;
    return counts_[c] * slice / sum;
}

std::vector<double> ChevronHistogram::ratio_map() const {
    const long slice = static_cast<long>(bins_.n_psi) * bins_.n_theta;
    std::vector<double> m(slice, 0.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < counts_.size(); ++i) {
        m[i % slice] += counts_[i];
        sum += counts_[i];
    }
    for (double& v : m) v = sum > 0.0 ? v * slice / sum : 1.0;
    return m;
}

std::string ChevronHistogram::to_json() const {
    json bins = {{"n_psi", bins_.n_psi},
                 {"n_theta", bins_.n_theta},
                 {"d_edges", bins_.d_edges},
                 {"n_sigma", bins_.n_sigma},
                 {"log2_sigma_max", bins_.log2_sigma_max},
                 {"modulus_weighted", bins_.modulus_weighted}};
    return json{{"version", 1},
                {"kind", "chevron_histogram"},
                {"bins", bins},
                {"layout", "sigma, d, theta, psi (psi fastest)"},
                {"pairs", pairs_},
                {"counts", counts_}}
        .dump();
}

ChevronHistogram ChevronHistogram::from_json(const std::string& text) {
    try {
        const auto j = json::parse(text);
        if (j.at("version").get<int>() != 1) throw std::runtime_error("chevron: unsupported version");
        const auto& b = j.at("bins");
        ChevronBins bins;
        bins.n_psi = b.at("n_psi").get<int>();
        bins.n_theta = b.at("n_theta").get<int>();
        bins.d_edges = b.at("d_edges").get<std::vector<double>>();
        bins.n_sigma = b.at("n_sigma").get<int>();
        bins.log2_sigma_max = b.at("log2_sigma_max").get<double>();
        bins.modulus_weighted = b.at("modulus_weighted").get<bool>();
        ChevronHistogram h(bins);
        auto counts = j.at("counts").get<std::vector<double>>();
        if (counts.size() != h.counts_.size()) throw std::runtime_error("chevron: count tensor size mismatch");
        h.counts_ = std::move(counts);
        h.pairs_ = j.value("pairs", std::size_t{0});
        return h;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("chevron: malformed JSON: ") + e.what());
    }
}

EdgePoint edge_point(const Edge& e, const BankParams& params) {
    return {static_cast<double>(e.address.x), static_cast<double>(e.address.y), e.theta,
            1.0 / params.center_frequency(e.address.scale), std::abs(e.coeff)};
}

ChevronHistogram chevron_stats(const std::vector<EdgeList>& corpus, const ChevronBins& bins) {
    ChevronHistogram h(bins);
    std::vector<EdgePoint> pts;
    for (const auto& list : corpus) {
        pts.clear();
        for (const auto& e : list.edges) pts.push_back(edge_point(e, list.bank_params));
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double reach = bins.max_distance() * pts[i].wavelength;
            for (std::size_t j = 0; j < pts.size(); ++j) {
                if (i == j) continue;
                if (std::abs(pts[j].x - pts[i].x) > reach || std::abs(pts[j].y - pts[i].y) > reach) continue;
                const double mass = bins.modulus_weighted ? pts[i].modulus * pts[j].modulus : 1.0;
                h.add(pair_geometry(pts[i], pts[j]), mass);
            }
        }
    }
    return h;
}

void save_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text << '\n';
    if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string load_text(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot read " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

// ---------------------------------------------------------------------------
// Co-occurrence guided pursuit

void CoocParams::validate() const {
    if (!(eta >= 0.0)) throw std::invalid_argument("cooc: eta must be non-negative");
    if (!(neighborhood_radius >= 0.0)) throw std::invalid_argument("cooc: neighborhood_radius must be non-negative");
    if (!(epsilon_prob > 0.0)) throw std::invalid_argument("cooc: epsilon_prob must be positive");
}

namespace {

double effective_radius(const ChevronHistogram& prior, const CoocParams& params) {
    const double r = prior.bins().max_distance();
    return params.neighborhood_radius > 0.0 ? std::min(r, params.neighborhood_radius) : r;
}

}  // namespace

double cooc_log_prob(const ChevronHistogram& prior, const CoocParams& params, const EdgePoint& a,
                     const EdgePoint& b) {
    const auto g = pair_geometry(a, b);
    if (g.d > effective_radius(prior, params)) return 0.0;
    const long c = prior.cell(g);
    if (c < 0) return 0.0;
    return std::log(std::max(prior.ratio(c), params.epsilon_prob));
}

double prior_score(const ChevronHistogram& prior, const CoocParams& params, cdouble coefficient,
                   const EdgePoint& candidate, const std::vector<EdgePoint>& extracted) {
    double s = 0.0;
    for (const auto& e : extracted) s += e.modulus * cooc_log_prob(prior, params, e, candidate);
    return 0.5 * std::norm(coefficient) + params.eta * s;
}

EdgeList extract_with_prior(const Image& img, const LogGaborBank& bank, const ChevronHistogram& prior,
                            const PursuitParams& pparams, const CoocParams& cparams) {
    cparams.validate();
    if (cparams.eta == 0.0) return extract(img, bank, pparams);

    std::vector<double> log_ratio(prior.cell_count());
    for (std::size_t c = 0; c < log_ratio.size(); ++c)
        log_ratio[c] = std::log(std::max(prior.ratio(static_cast<long>(c)), cparams.epsilon_prob));
    const double radius = effective_radius(prior, cparams);

    Pursuit engine(img, bank, pparams);
    engine.enable_bias();
    engine.on_accept([&](Pursuit& p, const Edge& edge, double modulus_change) {
        if (modulus_change == 0.0) return;
        const EdgePoint a = edge_point(edge, bank.params());
        const double reach = radius * a.wavelength;
        const double weight = cparams.eta * modulus_change;
        auto bias = p.bias();
        for (int c = 0; c < static_cast<int>(bank.channels().size()); ++c) {
            const auto& ch = bank.channel(c);
            const int gx0 = std::max(0, static_cast<int>(std::ceil((a.x - reach) / ch.stride)));
            const int gx1 = std::min(ch.grid - 1, static_cast<int>(std::floor((a.x + reach) / ch.stride)));
            const int gy0 = std::max(0, static_cast<int>(std::ceil((a.y - reach) / ch.stride)));
            const int gy1 = std::min(ch.grid - 1, static_cast<int>(std::floor((a.y + reach) / ch.stride)));
            if (gx0 > gx1 || gy0 > gy1) continue;
            EdgePoint b{0.0, 0.0, ch.theta, ch.wavelength(), 0.0};
            for (int gy = gy0; gy <= gy1; ++gy) {
                b.y = static_cast<double>(gy) * ch.stride;
                for (int gx = gx0; gx <= gx1; ++gx) {
                    b.x = static_cast<double>(gx) * ch.stride;
                    const auto g = pair_geometry(a, b);
                    if (g.d > radius) continue;
                    const long cell = prior.cell(g);
                    if (cell < 0) continue;
                    bias[ch.offset + static_cast<std::size_t>(gy) * ch.grid + gx] += weight * log_ratio[cell];
                }
            }
            p.invalidate(c, gx0, gy0, gx1 - gx0 + 1, gy1 - gy0 + 1);
        }
    });
    engine.run();
    return engine.take_edges();
}

}  // namespace sparselets
