#pragma once

#include "sparselets/loggabor.hpp"
#include "sparselets/pursuit.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sparselets {

// ---------------------------------------------------------------------------
// First order: orientation histogram and equalization

/// Histogram over orientations in (-pi/2, pi/2], circular with period pi.
/// Bin k is centered on -pi/2 + (k + 1) * pi / n, so with n equal to the
/// orientation count of a default bank every channel sits at a bin center.
class OrientationHistogram {
public:
    explicit OrientationHistogram(int n_bins = 24, bool modulus_weighted = true);
    /// Histogram with the given (non-negative, not all zero) bin masses.
    static OrientationHistogram from_weights(std::vector<double> weights, bool modulus_weighted = true);

    int n_bins() const { return static_cast<int>(mass_.size()); }
    bool modulus_weighted() const { return modulus_weighted_; }
    double bin_width() const;
    double bin_center(int k) const;
    /// Lower edge of bin 0; the cdf runs over [origin, origin + pi).
    double origin() const;
    int bin_of(double theta) const;

    void add(double theta, double weight = 1.0);
    void merge(const OrientationHistogram& other);
    double total() const;
    /// Normalized bin masses (sum to one).
    std::vector<double> weights() const;
    /// n_bins + 1 values from 0 to 1 at the bin edges.
    std::vector<double> cdf() const;
    /// Inverse cdf with linear interpolation inside bins, wrapped to (-pi/2, pi/2].
    double quantile(double u) const;
    /// max_k |w_k - 1/n|.
    double max_deviation_from_uniform() const;

    std::string to_json() const;
    static OrientationHistogram from_json(const std::string& text);

private:
    std::vector<double> mass_;
    bool modulus_weighted_ = true;
};

/// Orientation histogram of edges weighted by modulus (or counts).
OrientationHistogram orientation_stats(const std::vector<EdgeList>& corpus, int n_bins = 24,
                                       bool modulus_weighted = true);

/// Occupancy of each orientation channel of a bank (by index), normalized.
OrientationHistogram channel_usage(const std::vector<EdgeList>& corpus, int n_orientations,
                                   bool modulus_weighted = true);

/// theta_k = cdf^-1((k + 1/2) / n), wrapped into (-pi/2, pi/2] and sorted.
std::vector<double> equalize_orientations(const OrientationHistogram& hist, int n_orientations);

// ---------------------------------------------------------------------------
// Second order: chevron map

struct ChevronBins {
    // One theta bin per orientation of the default bank: coarser bins hold
    // unequal numbers of lattice differences, which flattens the co-linear peak.
    int n_psi = 24;
    int n_theta = 24;
    /// Distance bin edges in wavelengths of the reference edge; the first
    /// bin starts at zero (coincident centers are skipped).
    std::vector<double> d_edges{0.0, 0.5, 1.0, 2.0, 4.0};
    int n_sigma = 1;               // bins of log2 scale ratio; 1 marginalizes scale
    double log2_sigma_max = 3.0;   // half-range of the log2 scale-ratio bins
    bool modulus_weighted = true;  // pair mass = product of moduli, else 1

    void validate() const;
    double max_distance() const { return d_edges.back(); }
    bool operator==(const ChevronBins&) const = default;
};

/// Relative geometry of edge b seen from reference edge a.
struct PairGeometry {
    double theta = 0.0;  // orientation difference, (-pi/2, pi/2], on the binning grid
    double phi = 0.0;    // azimuth of b relative to a's orientation, (-pi/2, pi/2]
    double psi = 0.0;    // phi - theta / 2, (-pi/2, pi/2]
    double d = 0.0;      // center distance in wavelengths of a
    double log2_sigma = 0.0;  // log2(wavelength b / wavelength a)
};

struct EdgePoint {
    double x = 0.0, y = 0.0, theta = 0.0, wavelength = 1.0, modulus = 1.0;
};

PairGeometry pair_geometry(const EdgePoint& a, const EdgePoint& b);

/// Angular bin on period pi with bin k centered on -pi/2 + (k + 1) * pi / n;
/// n even puts a bin center at 0. Angles are snapped to a pi / 737280 grid
/// first, so the result does not depend on rounding at bin edges.
int angle_bin(double angle, int n);
double angle_bin_center(int k, int n);

class ChevronHistogram {
public:
    explicit ChevronHistogram(ChevronBins bins = {});

    const ChevronBins& bins() const { return bins_; }
    /// Cell of a geometry, or -1 when it falls outside the distance range.
    long cell(const PairGeometry& g) const;
    long cell(int psi, int theta, int d, int sigma) const;
    std::size_t cell_count() const { return counts_.size(); }

    void add(const PairGeometry& g, double mass);
    void merge(const ChevronHistogram& other);
    double total() const;
    std::size_t pair_count() const { return pairs_; }
    std::span<const double> counts() const { return counts_; }

    /// Ratio to a uniform prior over (psi, theta), conditional on the distance
    /// and scale bin of the cell; 1 everywhere in an empty slice.
    double ratio(long cell) const;
    /// Marginal (psi, theta) ratio map, n_psi * n_theta values (theta-major rows).
    std::vector<double> ratio_map() const;
    double ratio_map_at(int psi, int theta) const { return ratio_map()[theta * bins_.n_psi + psi]; }

    std::string to_json() const;
    static ChevronHistogram from_json(const std::string& text);

private:
    ChevronBins bins_;
    std::vector<double> counts_;
    std::size_t pairs_ = 0;
};

EdgePoint edge_point(const Edge& e, const BankParams& params);

/// Every ordered pair within the distance range of the bins (both references,
/// hence symmetric under swapping).
ChevronHistogram chevron_stats(const std::vector<EdgeList>& corpus, const ChevronBins& bins = {});

void save_text(const std::filesystem::path& path, const std::string& text);
std::string load_text(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Co-occurrence guided pursuit

struct CoocParams {
    double eta = 0.15;
    /// Maximum pair distance in wavelengths of the extracted edge; 0 uses the
    /// prior's distance range.
    double neighborhood_radius = 4.0;
    /// Floor on the ratio-normalized probability.
    double epsilon_prob = 1e-3;

    void validate() const;
    bool operator==(const CoocParams&) const = default;
};

/// log max(ratio, epsilon) for candidate b given extracted edge a, or 0 when
/// b lies outside the neighborhood of a.
double cooc_log_prob(const ChevronHistogram& prior, const CoocParams& params, const EdgePoint& a,
                     const EdgePoint& b);

/// |a|^2 / 2 + eta * sum_i |s_i| log p(candidate | edge_i).
double prior_score(const ChevronHistogram& prior, const CoocParams& params, cdouble coefficient,
                   const EdgePoint& candidate, const std::vector<EdgePoint>& extracted);

/// Pursuit whose selection maximizes prior_score; subtraction, accumulation
/// and stopping are those of extract(). eta = 0 is exactly extract().
EdgeList extract_with_prior(const Image& img, const LogGaborBank& bank, const ChevronHistogram& prior,
                            const PursuitParams& pparams, const CoocParams& cparams);

}  // namespace sparselets
