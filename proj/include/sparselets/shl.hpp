#pragma once

#include "sparselets/image.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace sparselets {

enum class HomeoMode { none, gain_variance, histogram_equalization };

HomeoMode parse_homeo_mode(const std::string& name);
std::string to_string(HomeoMode mode);

struct SHLParams {
    int patch_side = 12;
    int n_atoms = 324;
    /// Learning rate, constant during the burn-in then decayed as 1/t.
    double eta = 0.01;
    double burn_in_fraction = 0.1;
    int l0_target = 8;
    int n_steps = 20000;
    int batch_size = 16;
    HomeoMode homeo_mode = HomeoMode::histogram_equalization;
    double homeo_rate = 0.005;
    int log_interval = 500;
    std::uint64_t seed = 42;

    void validate() const;
    /// Learning rate at a (0-based) step.
    double eta_at(int step) const;
    bool operator==(const SHLParams&) const = default;
};

/// Sparse code: sorted atom indices with nonzero real coefficients.
struct SparseVector {
    std::vector<int> index;
    std::vector<double> value;

    int l0() const { return static_cast<int>(index.size()); }
    /// Adds to an entry, creating it when absent and erasing it when it cancels.
    void add(int i, double v);
    double get(int i) const;
    Eigen::VectorXd dense(int m) const;
};

/// Patch dictionary: L x M atoms (column-normalized), per-atom gains and
/// homeostasis statistics.
class Dictionary {
public:
    static constexpr int kHistogramBins = 128;

    /// Columns are normalized; a zero column is an error.
    explicit Dictionary(Eigen::MatrixXd atoms, HomeoMode mode = HomeoMode::none);
    /// White-noise atoms, normalized.
    static Dictionary random(int L, int M, std::uint64_t seed, HomeoMode mode = HomeoMode::none);

    int L() const { return static_cast<int>(atoms_.rows()); }
    int M() const { return static_cast<int>(atoms_.cols()); }
    HomeoMode mode() const { return mode_; }
    void set_mode(HomeoMode mode) { mode_ = mode; }

    const Eigen::MatrixXd& atoms() const { return atoms_; }
    Eigen::MatrixXd& atoms() { return atoms_; }
    const Eigen::VectorXd& gains() const { return gains_; }
    Eigen::VectorXd& gains() { return gains_; }
    const Eigen::VectorXd& variance() const { return variance_; }
    Eigen::VectorXd& variance() { return variance_; }
    /// Per-atom distribution of |<patch, atom>| over [0, 1], kHistogramBins x M.
    const Eigen::MatrixXd& histogram() const { return histogram_; }
    Eigen::MatrixXd& histogram() { return histogram_; }

    void normalize_columns();
    double max_norm_error() const;
    /// Recomputes the cumulative tables used by histogram-equalized scoring.
    void refresh_cdf();
    /// Selection score of atom i for a correlation c (larger wins).
    double score(int i, double c) const;

    bool operator==(const Dictionary& other) const;

private:
    Eigen::MatrixXd atoms_;
    Eigen::VectorXd gains_;
    Eigen::VectorXd variance_;
    Eigen::MatrixXd histogram_;
    Eigen::MatrixXd cdf_;  // kHistogramBins + 1 rows
    HomeoMode mode_ = HomeoMode::none;
};

/// Matching Pursuit (alpha = 1) for l0_target steps or until the residual
/// energy drops below 1e-12. Selection follows dict.score; stored
/// coefficients are raw projections. `residual` receives the final residual.
SparseVector code_mp(const Eigen::VectorXd& patch, const Dictionary& dict, int l0_target,
                     Eigen::VectorXd* residual = nullptr);
/// code_mp that also returns the correlation vector Phi^T r_k of every step,
/// one column per step.
SparseVector code_mp_traced(const Eigen::VectorXd& patch, const Dictionary& dict, int l0_target,
                            Eigen::VectorXd* residual, Eigen::MatrixXd* step_correlations);
/// Same with plain |correlation| selection whatever the dictionary mode.
SparseVector code_mp_plain(const Eigen::VectorXd& patch, const Dictionary& dict, int l0_target,
                           Eigen::VectorXd* residual = nullptr);

/// phi_i += eta * a_i * (patch - Phi a) for active atoms, then renormalization.
void hebbian_update(Dictionary& dict, const Eigen::VectorXd& patch, const SparseVector& code, double eta);

/// Updates homeostasis statistics from one coded patch. gain_variance uses
/// the code; histogram_equalization uses correlation vectors, one per column
/// (learn passes Phi^T r_k for every pursuit step, the values the score is
/// applied to), each weighted rate / columns.
void homeostasis_update(Dictionary& dict, const SparseVector& code, const Eigen::MatrixXd& correlations,
                        double rate);

/// Source of training patches (zero-mean, unit norm).
class PatchSource {
public:
    virtual ~PatchSource() = default;
    virtual int dimension() const = 0;
    virtual Eigen::VectorXd draw(std::mt19937_64& rng) = 0;
};

/// Random patches of whitened images, each normalized to unit variance,
/// rejected when the raw patch variance is below 1e-4, then made zero-mean
/// and unit-norm.
class ImagePatchSource : public PatchSource {
public:
    ImagePatchSource(std::vector<Image> whitened, int patch_side);
    int dimension() const override { return side_ * side_; }
    Eigen::VectorXd draw(std::mt19937_64& rng) override;
    std::size_t image_count() const { return images_.size(); }

private:
    std::vector<Image> images_;
    int side_;
};

class FunctionPatchSource : public PatchSource {
public:
    FunctionPatchSource(int dimension, std::function<Eigen::VectorXd(std::mt19937_64&)> fn)
        : dim_(dimension), fn_(std::move(fn)) {}
    int dimension() const override { return dim_; }
    Eigen::VectorXd draw(std::mt19937_64& rng) override { return fn_(rng); }

private:
    int dim_;
    std::function<Eigen::VectorXd(std::mt19937_64&)> fn_;
};

struct TrainingRecord {
    int step = 0;
    double eta = 0.0;
    double residual = 0.0;  // mean ||r||^2 / ||x||^2 at l0_target
    double kurtosis = 0.0;  // of coded coefficients, zeros included
    double min_pick_rate = 0.0;
    double max_pick_rate = 0.0;
};

struct TrainingLog {
    std::vector<TrainingRecord> records;
    std::vector<long> pick_counts;  // per atom over the whole run
    long patches = 0;

    void write_csv(const std::filesystem::path& path) const;
};

struct LearnResult {
    Dictionary dict;
    TrainingLog log;
};

/// Batch-synchronous code -> Hebbian update -> homeostasis for n_steps.
LearnResult learn(PatchSource& source, const SHLParams& params);
/// Continues from a given dictionary.
LearnResult learn(PatchSource& source, const SHLParams& params, Dictionary initial);

/// Excess kurtosis m4 / m2^2 - 3 of the given samples (central moments).
double kurtosis(const std::vector<double>& samples);
/// Kurtosis of all code entries (zeros included) under plain MP.
double code_kurtosis(const Dictionary& dict, const std::vector<Eigen::VectorXd>& patches, int l0_target);
/// Fraction of patches selecting each atom under the dictionary's own scoring.
std::vector<double> pick_rates(const Dictionary& dict, const std::vector<Eigen::VectorXd>& patches, int l0_target);

struct EfficiencyPoint {
    int l0 = 0;
    double mean = 0.0;  // mean ||x - Phi a|| / ||x||
    double std = 0.0;
};

/// Relative L2 residual after N plain MP steps, for each N in the grid.
std::vector<EfficiencyPoint> efficiency_report(const Dictionary& dict, const std::vector<Eigen::VectorXd>& patches,
                                               const std::vector<int>& grid);

struct ParametricCosts {
    double c1 = 0.0;
    double c0 = 0.0;
};

/// C1 = ||x - Phi a||^2 / (2 sigma_n^2) + beta sum log(1 + a_i^2 / sigma^2),
/// C0 = ||x - Phi a||^2 / (2 sigma_n^2) + lambda ||a||_0.
ParametricCosts parametric_costs(const Eigen::VectorXd& patch, const Dictionary& dict, const SparseVector& code,
                                 double sigma_n, double beta, double sigma, double lambda);

void save_dictionary(const std::filesystem::path& path, const Dictionary& dict, int patch_side);
Dictionary load_dictionary(const std::filesystem::path& path, int* patch_side = nullptr);

}  // namespace sparselets
