#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace sparselets {

/// Real-valued luminance grid stored row-major: value(x, y) = data[y * width + x].
class Image {
public:
    Image() = default;
    Image(int width, int height);
    Image(int width, int height, std::vector<double> values);

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return values_.empty(); }
    bool is_square() const { return width_ == height_; }
    /// Side length; throws std::invalid_argument unless the image is square.
    int side() const;
    std::size_t pixel_count() const { return values_.size(); }

    double& operator()(int x, int y) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
    double operator()(int x, int y) const { return values_[static_cast<std::size_t>(y) * width_ + x]; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    /// Sum of squared pixel values.
    double energy() const;
    double mean() const;
    double variance() const;

    Image& operator+=(const Image& other);
    Image& operator-=(const Image& other);
    Image& operator*=(double factor);

    friend Image operator+(Image a, const Image& b) { return a += b; }
    friend Image operator-(Image a, const Image& b) { return a -= b; }
    friend Image operator*(Image a, double c) { return a *= c; }
    friend Image operator*(double c, Image a) { return a *= c; }
    bool operator==(const Image&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<double> values_;
};

double inner_product(const Image& a, const Image& b);

/// Cutoff and roll-off of the whitening filter W(f) = f * exp(-(f / f0)^steepness).
struct WhiteningParams {
    /// Cutoff as a fraction of the Nyquist frequency (N/2 cycles per image).
    double f0_nyquist_fraction = 0.45;
    double steepness = 4.0;

    void validate() const;
    double cutoff_cycles_per_image(int side) const { return f0_nyquist_fraction * side / 2.0; }
    bool operator==(const WhiteningParams&) const = default;
};

/// Decodes an 8/16-bit PGM (P2/P5) or PNG file to raw luminance. Color PNGs
/// are reduced by averaging their channels. No centering or cropping.
Image read_image_file(const std::filesystem::path& path);

/// Reads a grayscale file, crops its center to target_size x target_size and
/// removes the mean. Throws std::runtime_error when the file cannot be decoded
/// or is smaller than the target.
Image load_image(const std::filesystem::path& path, int target_size);

/// Writes a 16-bit PGM or PNG (chosen by extension). Values are mapped
/// linearly from [min, max] to the full range; the mapping is recorded in a
/// PGM comment so read_image_file can undo it.
void save_image(const std::filesystem::path& path, const Image& img);

/// Central square crop of side `size`.
Image crop_center(const Image& img, int size);

/// Block-average downsampling by an integer factor.
Image downsample(const Image& img, int factor);

/// Circular shift by (dx, dy) with wrap-around.
Image circular_shift(const Image& img, int dx, int dy);

/// Multiplies the spectrum by W(f), f being the radial frequency in cycles per
/// image, and zeroes the DC term. Output is real.
Image whiten(const Image& img, const WhiteningParams& params);

/// Zeroes pixels farther than side/2 from the center pixel (side/2, side/2),
/// with a raised-cosine taper over the last `taper_width` pixels inside the rim.
Image apply_circular_mask(const Image& img, double taper_width = 8.0);

/// Weight applied by apply_circular_mask at distance r from the center.
double circular_mask_weight(double r, int side, double taper_width = 8.0);

/// whiten followed by apply_circular_mask, then the mean removed in proportion
/// to the mask window (zero-mean, still zero outside the rim). The input
/// conditioning for extraction.
Image preprocess(const Image& img, const WhiteningParams& params);

struct CorpusEntry {
    std::filesystem::path path;
    std::string split;  // empty when the manifest line carries no tag
};

/// Manifest: one image path per line (relative to the manifest directory),
/// optionally followed by a split tag; '#' starts a comment.
std::vector<CorpusEntry> read_manifest(const std::filesystem::path& manifest);

/// Loads every manifest entry whose split matches (empty filter keeps all),
/// at most `limit` images when limit > 0.
std::vector<Image> load_corpus(const std::filesystem::path& manifest, int target_size,
                               const std::string& split = {}, int limit = 0);

}  // namespace sparselets
