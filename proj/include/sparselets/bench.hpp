#pragma once

#include "sparselets/image.hpp"
#include "sparselets/loggabor.hpp"
#include "sparselets/pursuit.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sparselets {

struct NamedImage {
    std::string id;
    Image image;
};

/// Manifest images (raw, centered crops) named by file stem.
std::vector<NamedImage> load_named_corpus(const std::filesystem::path& manifest, int target_size,
                                          const std::string& split = {}, int limit = 0);
/// preprocess() applied to every image.
std::vector<NamedImage> preprocess_corpus(const std::vector<NamedImage>& raw, const WhiteningParams& whitening);

struct EfficiencyRecord {
    std::string image_id;
    int N = 0;
    double E_N = 1.0;
    double bits_per_pixel = 0.0;
};

struct EfficiencySummary {
    int N = 0;
    double mean = 0.0, std = 0.0;  // of E_N over images
    double bits_per_pixel = 0.0;
};

struct EfficiencyTable {
    std::vector<EfficiencyRecord> rows;
    std::vector<EfficiencySummary> summary;
    /// Per image (sorted by id) full E_N curves, N = 0..steps.
    std::vector<std::string> ids;
    std::vector<std::vector<double>> curves;
    std::size_t coefficient_count = 0;
    int image_size = 0;

    /// Mean over images of the edge count reaching a residual fraction,
    /// interpolated in log N; +inf if some image never reaches it.
    double mean_edges_at(double residual_fraction) const;
    double bits_per_pixel_at(double residual_fraction) const;
    /// Mean E_N over images at N (curves that stopped early hold their last value).
    double mean_energy_at(int n) const;
};

/// 0, 1, 2, 4, ... and max_n.
std::vector<int> log_grid(int max_n);

/// N log2(M) / L.
double bits_per_pixel(int n, std::size_t coefficient_count, int image_size);

/// Edge count at which a curve first reaches `residual_fraction`, linearly
/// interpolated in log N between neighbouring steps (in N below N = 1).
/// Returns +inf when never reached.
double edges_to_reach(const std::vector<double>& curve, double residual_fraction);

/// Extracts every (whitened, masked) image and tabulates E_N from the energy
/// identity on a log grid of N. Rows and summary are ordered by image id.
/// Images are spread over `workers` threads (0 = every core); the result
/// does not depend on the count.
EfficiencyTable efficiency_experiment(const std::vector<NamedImage>& corpus, const LogGaborBank& bank,
                                      const PursuitParams& pparams, int workers = 0);

enum class SweepVariable { bandwidth_log_frequency, bandwidth_orientation, n_orientations, n_scales, scale_ratio };
SweepVariable parse_sweep_variable(const std::string& name);
std::string to_string(SweepVariable v);
BankParams with_value(BankParams base, SweepVariable v, double value);

struct SweepSpec {
    SweepVariable variable = SweepVariable::bandwidth_orientation;
    std::vector<double> values;
    double target_extraction = 0.85;
    BankParams baseline;
    PursuitParams pursuit;  // stopping threshold is set from target_extraction
    int workers = 0;        // threads over images, 0 = every core

    void validate() const;
};

struct SweepRow {
    double value = 0.0;
    bool ok = true;
    std::string error;  // why the bank could not be built
    double gain_mean = 0.0, gain_std = 0.0;
    std::vector<double> gains;  // per image, sorted by image id
};

/// gain = code length (edges x log2 M) to extract target_extraction of the
/// energy, relative to the baseline bank, per image; mean and std over images.
std::vector<SweepRow> parameter_sweep(const std::vector<NamedImage>& corpus, const SweepSpec& spec);

struct NoiseReport {
    EfficiencyTable clean, noisy;
    double clean_bpp_at_015 = 0.0, noisy_bpp_at_015 = 0.0;
};

/// Adds pixelwise Gaussian noise with variance equal to the image variance
/// to raw images (when snr_halving), then preprocesses and extracts both.
NoiseReport noise_robustness(const std::vector<NamedImage>& raw, const LogGaborBank& bank,
                             const PursuitParams& pparams, const WhiteningParams& whitening, bool snr_halving,
                             std::uint64_t seed, int workers = 0);

void write_efficiency_csv(const std::filesystem::path& path, const EfficiencyTable& table);
void write_sweep_csv(const std::filesystem::path& path, SweepVariable variable, const std::vector<SweepRow>& rows);

}  // namespace sparselets
