#pragma once

#include "sparselets/fft.hpp"
#include "sparselets/image.hpp"

#include <cstdint>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sparselets {

struct BankParams {
    /// Number of scales; 0 selects every dyadic (or scale_ratio) level whose
    /// center frequency stays at or above one cycle per image.
    int n_scales = 0;
    int n_orientations = 24;
    /// Standard deviation of the radial envelope in natural-log frequency units.
    double bandwidth_log_frequency = 0.4;
    /// Standard deviation of the angular envelope, radians.
    double bandwidth_orientation = std::numbers::pi / 8.0;
    double scale_ratio = 2.0;
    /// Center frequency of the finest scale, cycles per pixel.
    double f_max = 0.25;
    /// Positions of a channel are sampled with the largest power-of-two stride
    /// not exceeding wavelength / samples_per_wavelength; 0 samples every pixel.
    double samples_per_wavelength = 4.0;
    /// Explicit orientation centers in (-pi/2, pi/2]; overrides n_orientations
    /// when non-empty (used for histogram-equalized sampling).
    std::vector<double> orientations;

    void validate() const;
    int orientation_count() const;
    double orientation(int k) const;
    /// Resolved scale count for a given image side.
    int scale_count(int image_size) const;
    double center_frequency(int scale) const;

    bool operator==(const BankParams&) const = default;
};

/// Default orientation grid: theta_k = -pi/2 + (k + 1) * pi / n, k = 0..n-1.
/// The grid contains 0 and pi/2 whenever n is even.
double uniform_orientation(int k, int n);

/// Wraps an angle into (-pi/2, pi/2].
double wrap_half_pi(double angle);
/// Wraps an angle into (-pi, pi].
double wrap_pi(double angle);

/// Envelope value before normalization for an atom centered on frequency
/// `center` (cycles/pixel) and orientation `theta`, at frequency (fx, fy) in
/// cycles/pixel. The atom is single-lobed: zero outside the half-plane facing
/// the direction theta + pi/2, and zero at DC.
double log_gabor_envelope(const BankParams& params, double center, double theta, double fx, double fy);

/// Position, scale and orientation of one atom. x, y are pixels and must be
/// multiples of the channel stride.
struct Address {
    int scale = 0;
    int orientation = 0;
    int x = 0;
    int y = 0;
    bool operator==(const Address&) const = default;
};

struct Channel {
    int scale = 0;
    int orientation = 0;
    double frequency = 0.0;  // cycles/pixel
    double theta = 0.0;      // edge orientation, radians
    int stride = 1;          // pixel spacing of sampled positions
    int grid = 0;            // positions per side (image_size / stride)
    std::size_t offset = 0;  // first linear index of the channel in a stack

    double wavelength() const { return 1.0 / frequency; }
    std::size_t position_count() const { return static_cast<std::size_t>(grid) * grid; }
};

/// Spatial cross-correlations between the atoms of one source channel and
/// those of every other channel, cropped where they fall below a tolerance.
/// Used by the pursuit to update coefficients without re-analysis.
struct CrossKernel {
    int target = 0;         // target channel index
    int lo = 0;             // first grid offset per dimension
    int len = 0;            // window length per dimension (grid units)
    int phases_per_dim = 1; // source positions modulo target stride / source stride
    // For phase p, entry (my, mx): correlation at displacement
    // (target_stride * (lo + mx) - px, target_stride * (lo + my) - py).
    std::vector<ComplexBuffer> direct;   // <atom_i, atom_c> terms
    std::vector<ComplexBuffer> mirrored; // <conj atom_i, atom_c> terms; empty when negligible
};

struct KernelSet {
    double tolerance = 0.0;
    std::vector<CrossKernel> kernels;
    std::size_t bytes() const;
};

namespace detail {
struct BankData;
}

/// Over-complete log-Gabor filter bank defined in the frequency domain.
/// Copies share immutable state.
class LogGaborBank {
public:
    LogGaborBank(const BankParams& params, int image_size);

    const BankParams& params() const;
    int image_size() const;
    int n_scales() const;
    int n_orientations() const;
    std::span<const Channel> channels() const;
    const Channel& channel(int index) const;
    int channel_index(int scale, int orientation) const;

    /// Total number of atoms M (sampled positions over all channels).
    std::size_t coefficient_count() const;
    /// Unit-normalized frequency envelope of a channel, image_size^2 bins.
    std::span<const double> envelope(int channel) const;
    /// Complex spatial atom of a channel centered at pixel (0, 0); its real
    /// and imaginary parts are orthogonal and each has unit norm.
    std::span<const cdouble> atom(int channel) const;

    bool valid(const Address& a) const;
    std::size_t linear_index(const Address& a) const;
    Address address(std::size_t linear) const;
    int channel_of(std::size_t linear) const;
    /// Orientation in radians of an address.
    double theta(const Address& a) const { return channel(channel_index(a.scale, a.orientation)).theta; }

    /// Cross-correlation kernels for atoms of channel `source`, computed once
    /// per (source, tolerance) and cached. Thread-safe.
    const KernelSet& kernels(int source, double tolerance) const;

    bool same_as(const LogGaborBank& other) const;
    std::shared_ptr<const detail::BankData> data() const { return data_; }
    explicit LogGaborBank(std::shared_ptr<const detail::BankData> data) : data_(std::move(data)) {}

private:
    std::shared_ptr<const detail::BankData> data_;
};

/// Complex coefficients of every atom: channel-major, then row-major positions.
class CoefficientStack {
public:
    explicit CoefficientStack(const LogGaborBank& bank);

    std::size_t size() const { return values_.size(); }
    std::span<cdouble> values() { return values_; }
    std::span<const cdouble> values() const { return values_; }
    std::span<cdouble> channel(int c);
    std::span<const cdouble> channel(int c) const;
    cdouble& operator[](std::size_t i) { return values_[i]; }
    cdouble operator[](std::size_t i) const { return values_[i]; }
    cdouble at(const Address& a) const { return values_[bank_.linear_index(a)]; }
    const LogGaborBank& bank() const { return bank_; }

private:
    LogGaborBank bank_;
    ComplexBuffer values_;
};

/// Linear transform: every atom's complex inner product <img, atom>.
CoefficientStack analyze(const Image& img, const LogGaborBank& bank);

/// Re(coeff * atom) placed at `address`. Its norm equals |coeff|.
Image synthesize_atom(const LogGaborBank& bank, const Address& address, cdouble coeff);

/// Adds Re(coeff * atom at address) into `img` in place.
void add_atom(Image& img, const LogGaborBank& bank, const Address& address, cdouble coeff);

/// Complex inner product sum_y img(y) * conj(atom(y - address)), computed directly.
cdouble atom_inner_product(const Image& img, const LogGaborBank& bank, const Address& address);

/// Smallest radius (pixels) of a disk around the atom center holding `fraction` of its energy.
double atom_support_radius(const LogGaborBank& bank, int scale, double fraction = 0.99);

/// Envelopes of one scale, tiled orientation by orientation and fftshifted, for figures.
Image envelope_figure(const LogGaborBank& bank, int scale);

}  // namespace sparselets
