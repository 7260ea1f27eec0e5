#include "sparselets/image.hpp"

#include "sparselets/fft.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sparselets {

namespace fs = std::filesystem;

Image::Image(int width, int height) : Image(width, height, std::vector<double>()) {}

Image::Image(int width, int height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
    if (width < 0 || height < 0) throw std::invalid_argument("Image: negative dimensions");
    const auto n = static_cast<std::size_t>(width) * height;
    if (values_.empty()) values_.assign(n, 0.0);
    if (values_.size() != n) throw std::invalid_argument("Image: value count does not match dimensions");
}

int Image::side() const {
    if (!is_square()) throw std::invalid_argument("image must be square");
    return width_;
}

double Image::energy() const {
    double e = 0.0;
    for (double v : values_) e += v * v;
    return e;
}

double Image::mean() const {
    if (values_.empty()) return 0.0;
    return std::accumulate(values_.begin(), values_.end(), 0.0) / static_cast<double>(values_.size());
}

double Image::variance() const {
    if (values_.empty()) return 0.0;
    const double m = mean();
    double acc = 0.0;
    for (double v : values_) acc += (v - m) * (v - m);
    return acc / static_cast<double>(values_.size());
}

Image& Image::operator+=(const Image& other) {
    if (other.width_ != width_ || other.height_ != height_) throw std::invalid_argument("Image: size mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
    return *this;
}

Image& Image::operator-=(const Image& other) {
    if (other.width_ != width_ || other.height_ != height_) throw std::invalid_argument("Image: size mismatch");
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= other.values_[i];
    return *this;
}

Image& Image::operator*=(double factor) {
    for (double& v : values_) v *= factor;
    return *this;
}

double inner_product(const Image& a, const Image& b) {
    if (a.width() != b.width() || a.height() != b.height()) throw std::invalid_argument("inner_product: size mismatch");
    double acc = 0.0;
    auto va = a.values();
    auto vb = b.values();
    for (std::size_t i = 0; i < va.size(); ++i) acc += va[i] * vb[i];
    return acc;
}

void WhiteningParams::validate() const {
    if (!(f0_nyquist_fraction > 0.0)) throw std::invalid_argument("whitening: f0 must be positive");
    if (!(steepness > 0.0)) throw std::invalid_argument("whitening: steepness must be positive");
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

namespace {

constexpr const char* kRangeTag = "sparselets-range";

struct PgmHeader {
    char kind = 0;
    int width = 0;
    int height = 0;
    int maxval = 0;
    bool has_range = false;
    double lo = 0.0;
    double hi = 0.0;
};

// Reads the next whitespace-delimited token, collecting '#' comment lines.
std::string next_token(std::istream& in, PgmHeader& header) {
    std::string token;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            std::string comment;
            std::getline(in, comment);
            std::istringstream cs(comment);
            std::string tag;
            double lo, hi;
            if (cs >> tag >> lo >> hi && tag == kRangeTag) {
                header.has_range = true;
                header.lo = lo;
                header.hi = hi;
            }
            if (!token.empty()) return token;
            continue;
        }
        if (std::isspace(c)) {
            if (!token.empty()) return token;
            continue;
        }
        token.push_back(static_cast<char>(c));
    }
    return token;
}

Image read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open image file: " + path.string());
    PgmHeader h;
    const std::string magic = next_token(in, h);
    if (magic != "P2" && magic != "P5") throw std::runtime_error("not a grayscale PGM file: " + path.string());
    h.kind = magic[1];
    try {
        h.width = std::stoi(next_token(in, h));
        h.height = std::stoi(next_token(in, h));
        h.maxval = std::stoi(next_token(in, h));
    } catch (const std::exception&) {
        throw std::runtime_error("malformed PGM header: " + path.string());
    }
    if (h.width <= 0 || h.height <= 0 || h.maxval <= 0 || h.maxval > 65535)
        throw std::runtime_error("unsupported PGM dimensions or depth: " + path.string());

    const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
    std::vector<double> values(n);
    if (h.kind == '5') {
        const int bytes = h.maxval < 256 ? 1 : 2;
        std::vector<unsigned char> raw(n * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw std::runtime_error("truncated PGM data: " + path.string());
        for (std::size_t i = 0; i < n; ++i)
            values[i] = bytes == 1 ? raw[i] : (raw[2 * i] << 8 | raw[2 * i + 1]);
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            if (!(in >> values[i])) throw std::runtime_error("truncated PGM data: " + path.string());
        }
    }
    if (h.has_range) {
        const double scale = (h.hi - h.lo) / h.maxval;
        for (double& v : values) v = h.lo + v * scale;
    }
    return Image(h.width, h.height, std::move(values));
}

struct PngFile {
    FILE* fp = nullptr;
    ~PngFile() {
        if (fp) std::fclose(fp);
    }
};

Image read_png(const fs::path& path) {
    PngFile file{std::fopen(path.c_str(), "rb")};
    if (!file.fp) throw std::runtime_error("cannot open image file: " + path.string());
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, file.fp) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw std::runtime_error("not a PNG file: " + path.string());

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng initialization failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("cannot decode PNG file: " + path.string());
    }
    png_init_io(png, file.fp);
    png_set_sig_bytes(png, 8);
    png_read_png(png, info, PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_STRIP_ALPHA, nullptr);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    const int depth = png_get_bit_depth(png, info);
    const int channels = png_get_channels(png, info);
    png_bytepp rows = png_get_rows(png, info);

    std::vector<double> values(static_cast<std::size_t>(width) * height);
    const int bytes = depth == 16 ? 2 : 1;
    for (int y = 0; y < height; ++y) {
        const png_bytep row = rows[y];
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int c = 0; c < channels; ++c) {
                const png_bytep p = row + (static_cast<std::size_t>(x) * channels + c) * bytes;
                acc += bytes == 2 ? (p[0] << 8 | p[1]) : p[0];
            }
            values[static_cast<std::size_t>(y) * width + x] = acc / channels;
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return Image(width, height, std::move(values));
}

std::vector<std::uint16_t> quantize16(const Image& img, double& lo, double& hi) {
    auto v = img.values();
    lo = v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
    hi = v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
    const double span = hi > lo ? hi - lo : 1.0;
    std::vector<std::uint16_t> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = static_cast<std::uint16_t>(std::lround((v[i] - lo) / span * 65535.0));
    if (!(hi > lo)) hi = lo + 1.0;
    return out;
}

void write_pgm(const fs::path& path, const Image& img) {
    double lo, hi;
    const auto q = quantize16(img, lo, hi);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write image file: " + path.string());
    char range[128];
    std::snprintf(range, sizeof range, "# %s %.17g %.17g\n", kRangeTag, lo, hi);
    out << "P5\n" << range << img.width() << ' ' << img.height() << "\n65535\n";
    for (auto v : q) {
        const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
        out.write(bytes, 2);
    }
    if (!out) throw std::runtime_error("failed writing image file: " + path.string());
}

void write_png(const fs::path& path, const Image& img) {
    double lo, hi;
    const auto q = quantize16(img, lo, hi);
    PngFile file{std::fopen(path.c_str(), "wb")};
    if (!file.fp) throw std::runtime_error("cannot write image file: " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng initialization failed");
    }
    std::vector<unsigned char> row(static_cast<std::size_t>(img.width()) * 2);
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("failed writing PNG file: " + path.string());
    }
    png_init_io(png, file.fp);
    png_set_IHDR(png, info, img.width(), img.height(), 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const auto v = q[static_cast<std::size_t>(y) * img.width() + x];
            row[2 * x] = static_cast<unsigned char>(v >> 8);
            row[2 * x + 1] = static_cast<unsigned char>(v & 0xff);
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::string lower_extension(const fs::path& path) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext;
}

}  // namespace

Image read_image_file(const fs::path& path) {
    if (!fs::exists(path)) throw std::runtime_error("image file not found: " + path.string());
    const auto ext = lower_extension(path);
    if (ext == ".png") return read_png(path);
    if (ext == ".pgm" || ext == ".pnm") return read_pgm(path);
    throw std::runtime_error("unsupported image format (expected .pgm or .png): " + path.string());
}

Image load_image(const fs::path& path, int target_size) {
    if (target_size <= 0) throw std::invalid_argument("load_image: target size must be positive");
    Image raw = read_image_file(path);
    if (raw.width() < target_size || raw.height() < target_size)
        throw std::runtime_error("image " + path.string() + " is smaller than the requested " +
                                 std::to_string(target_size) + " pixels");
    Image out = crop_center(raw, target_size);
    const double m = out.mean();
    for (double& v : out.values()) v -= m;
    return out;
}

void save_image(const fs::path& path, const Image& img) {
    const auto ext = lower_extension(path);
    if (ext == ".png") return write_png(path, img);
    if (ext == ".pgm" || ext == ".pnm") return write_pgm(path, img);
    throw std::runtime_error("unsupported output image format (expected .pgm or .png): " + path.string());
}

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

Image crop_center(const Image& img, int size) {
    if (size > img.width() || size > img.height()) throw std::invalid_argument("crop_center: crop larger than image");
    const int x0 = (img.width() - size) / 2;
    const int y0 = (img.height() - size) / 2;
    Image out(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) out(x, y) = img(x0 + x, y0 + y);
    return out;
}

Image downsample(const Image& img, int factor) {
    if (factor < 1 || img.width() % factor || img.height() % factor)
        throw std::invalid_argument("downsample: factor must divide both dimensions");
    const int w = img.width() / factor;
    const int h = img.height() / factor;
    Image out(w, h);
    const double norm = 1.0 / (factor * factor);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int j = 0; j < factor; ++j)
                for (int i = 0; i < factor; ++i) acc += img(x * factor + i, y * factor + j);
            out(x, y) = acc * norm;
        }
    return out;
}

Image circular_shift(const Image& img, int dx, int dy) {
    const int w = img.width();
    const int h = img.height();
    Image out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out(((x + dx) % w + w) % w, ((y + dy) % h + h) % h) = img(x, y);
    return out;
}

// ---------------------------------------------------------------------------
// Whitening and masking
// ---------------------------------------------------------------------------

Image whiten(const Image& img, const WhiteningParams& params) {
    params.validate();
    const int n = img.side();
    if (n == 0) return img;
    const auto fft = Fft2d::get(n);
    ComplexBuffer buf(img.pixel_count());
    auto src = img.values();
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = src[i];
    fft->forward(buf);
    const double f0 = params.cutoff_cycles_per_image(n);
    for (int ky = 0; ky < n; ++ky) {
        const double fy = signed_frequency(ky, n);
        for (int kx = 0; kx < n; ++kx) {
            const double fx = signed_frequency(kx, n);
            const double f = std::hypot(fx, fy);
            const double w = f * std::exp(-std::pow(f / f0, params.steepness));
            buf[static_cast<std::size_t>(ky) * n + kx] *= w;
        }
    }
    fft->inverse(buf);
    Image out(n, n);
    const double norm = 1.0 / (static_cast<double>(n) * n);
    auto dst = out.values();
    for (std::size_t i = 0; i < buf.size(); ++i) dst[i] = buf[i].real() * norm;
    return out;
}

double circular_mask_weight(double r, int side, double taper_width) {
    const double rim = side / 2.0;
    if (r >= rim) return 0.0;
    const double inner = rim - taper_width;
    if (taper_width <= 0.0 || r <= inner) return 1.0;
    const double c = std::cos(std::numbers::pi / 2.0 * (r - inner) / taper_width);
    return c * c;
}

Image apply_circular_mask(const Image& img, double taper_width) {
    const int n = img.side();
    Image out(n, n);
    const double c = n / 2;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) out(x, y) = img(x, y) * circular_mask_weight(std::hypot(x - c, y - c), n, taper_width);
    return out;
}

// Masking a zero-mean image brings back a mean, and no atom carries DC, so the
// mean is removed again in proportion to the window to keep the rim at zero.
Image preprocess(const Image& img, const WhiteningParams& params) {
    Image out = apply_circular_mask(whiten(img, params));
    const int n = out.side();
    if (n == 0) return out;
    const double c = n / 2;
    std::vector<double> window(out.pixel_count());
    double wsum = 0.0, sum = 0.0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double w = circular_mask_weight(std::hypot(x - c, y - c), n);
            window[static_cast<std::size_t>(y) * n + x] = w;
            wsum += w;
            sum += out(x, y);
        }
    const double level = sum / wsum;
    auto v = out.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= level * window[i];
    return out;
}

// ---------------------------------------------------------------------------
// Corpus
// ---------------------------------------------------------------------------

std::vector<CorpusEntry> read_manifest(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw std::runtime_error("cannot open manifest: " + manifest.string());
    const fs::path base = manifest.parent_path();
    std::vector<CorpusEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string file, split;
        if (!(ls >> file)) continue;
        ls >> split;
        fs::path p(file);
        entries.push_back({p.is_absolute() ? p : base / p, split});
    }
    return entries;
}

std::vector<Image> load_corpus(const fs::path& manifest, int target_size, const std::string& split, int limit) {
    std::vector<Image> images;
    for (const auto& e : read_manifest(manifest)) {
        if (!split.empty() && e.split != split) continue;
        images.push_back(load_image(e.path, target_size));
        if (limit > 0 && static_cast<int>(images.size()) >= limit) break;
    }
    if (images.empty()) throw std::runtime_error("manifest yields no images: " + manifest.string());
    return images;
}

}  // namespace sparselets
