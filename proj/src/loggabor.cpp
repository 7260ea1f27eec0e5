#include "sparselets/loggabor.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

namespace sparselets {

using std::numbers::pi;

double wrap_half_pi(double angle) {
    double a = std::fmod(angle + pi / 2.0, pi);
    if (a <= 0.0) a += pi;
    return a - pi / 2.0;
}

double wrap_pi(double angle) {
    double a = std::fmod(angle + pi, 2.0 * pi);
    if (a <= 0.0) a += 2.0 * pi;
    return a - pi;
}

double uniform_orientation(int k, int n) { return -pi / 2.0 + (k + 1) * pi / n; }

void BankParams::validate() const {
    if (orientations.empty() && n_orientations < 1) throw std::invalid_argument("bank: n_orientations must be >= 1");
    for (double t : orientations)
        if (!(t > -pi / 2.0 && t <= pi / 2.0)) throw std::invalid_argument("bank: orientation outside (-pi/2, pi/2]");
    if (n_scales < 0) throw std::invalid_argument("bank: n_scales must be >= 0 (0 = automatic)");
    if (!(bandwidth_log_frequency > 0.0)) throw std::invalid_argument("bank: B_f must be positive");
    if (!(bandwidth_orientation > 0.0 && bandwidth_orientation < pi))
        throw std::invalid_argument("bank: B_theta must lie in (0, pi)");
    if (!(scale_ratio > 1.0)) throw std::invalid_argument("bank: scale_ratio must exceed 1");
    if (!(f_max > 0.0)) throw std::invalid_argument("bank: f_max must be positive");
    if (f_max > 0.5) throw std::invalid_argument("bank: f_max places a center frequency above Nyquist");
    if (!(samples_per_wavelength >= 0.0)) throw std::invalid_argument("bank: samples_per_wavelength must be >= 0");
}

int BankParams::orientation_count() const {
    return orientations.empty() ? n_orientations : static_cast<int>(orientations.size());
}

double BankParams::orientation(int k) const {
    return orientations.empty() ? uniform_orientation(k, n_orientations) : orientations[k];
}

double BankParams::center_frequency(int scale) const { return f_max / std::pow(scale_ratio, scale); }

int BankParams::scale_count(int image_size) const {
    if (n_scales > 0) return n_scales;
    int s = 0;
    while (center_frequency(s) * image_size >= 1.0 - 1e-9) ++s;
    return s;
}

namespace {
// Raised-cosine roll-off applied near the edge of the sampled frequency square
// so that envelopes reaching Nyquist do not wrap discontinuously.
double nyquist_taper(double fx, double fy) {
    const double m = std::max(std::abs(fx), std::abs(fy));
    constexpr double start = 0.4;
    constexpr double stop = 0.5;
    if (m <= start) return 1.0;
    if (m >= stop) return 0.0;
    const double c = std::cos(pi / 2.0 * (m - start) / (stop - start));
    return c * c;
}
}  // namespace

double log_gabor_envelope(const BankParams& params, double center, double theta, double fx, double fy) {
    const double f = std::hypot(fx, fy);
    if (f == 0.0) return 0.0;
    const double d = wrap_pi(std::atan2(fy, fx) - (theta + pi / 2.0));
    if (std::abs(d) >= pi / 2.0) return 0.0;
    const double lr = std::log(f / center);
    const double radial = std::exp(-lr * lr / (2.0 * params.bandwidth_log_frequency * params.bandwidth_log_frequency));
    const double angular = std::exp(-d * d / (2.0 * params.bandwidth_orientation * params.bandwidth_orientation));
    return radial * angular * nyquist_taper(fx, fy);
}

namespace detail {

struct BankData {
    BankParams params;
    int n = 0;
    int n_scales = 0;
    int n_orientations = 0;
    std::vector<Channel> channels;
    std::vector<std::vector<double>> envelopes;
    std::vector<ComplexBuffer> atoms;
    std::size_t total = 0;

    mutable std::mutex kernel_mutex;
    mutable std::map<std::pair<int, double>, std::unique_ptr<KernelSet>> kernel_cache;
};

}  // namespace detail

namespace {

std::size_t index2(int x, int y, int n) { return static_cast<std::size_t>(y) * n + x; }

int choose_stride(double wavelength, double samples_per_wavelength, int n) {
    int k = 1;
    if (samples_per_wavelength <= 0.0) return 1;
    while (2.0 * k <= wavelength / samples_per_wavelength && n % (2 * k) == 0 && n / (2 * k) >= 4) k *= 2;
    return k;
}

}  // namespace

LogGaborBank::LogGaborBank(const BankParams& params, int image_size) {
    params.validate();
    if (image_size < 16) throw std::invalid_argument("bank: image size must be at least 16");
    auto d = std::make_shared<detail::BankData>();
    d->params = params;
    d->n = image_size;
    d->n_scales = params.scale_count(image_size);
    d->n_orientations = params.orientation_count();
    if (d->n_scales < 1) throw std::invalid_argument("bank: no scale fits above one cycle per image");
    if (params.center_frequency(d->n_scales - 1) * image_size < 1.0 - 1e-9)
        throw std::invalid_argument("bank: coarsest center frequency falls below one cycle per image");

    const int n = image_size;
    const auto nn = static_cast<std::size_t>(n) * n;
    const auto fft = Fft2d::get(n);
    std::size_t offset = 0;
    for (int s = 0; s < d->n_scales; ++s) {
        for (int o = 0; o < d->n_orientations; ++o) {
            Channel ch;
            ch.scale = s;
            ch.orientation = o;
            ch.frequency = params.center_frequency(s);
            ch.theta = params.orientation(o);
            ch.stride = choose_stride(ch.wavelength(), params.samples_per_wavelength, n);
            ch.grid = n / ch.stride;
            ch.offset = offset;
            offset += ch.position_count();

            std::vector<double> env(nn, 0.0);
            double energy = 0.0;
            for (int ky = 0; ky < n; ++ky) {
                if (2 * ky == n) continue;  // Nyquist row has no distinct conjugate
                const double fy = static_cast<double>(signed_frequency(ky, n)) / n;
                for (int kx = 0; kx < n; ++kx) {
                    if (2 * kx == n) continue;
                    const double fx = static_cast<double>(signed_frequency(kx, n)) / n;
                    const double v = log_gabor_envelope(params, ch.frequency, ch.theta, fx, fy);
                    env[index2(kx, ky, n)] = v;
                    energy += v * v;
                }
            }
            if (!(energy > 0.0)) throw std::invalid_argument("bank: an envelope vanishes on the sampling grid");
            // sum |env|^2 / N^2 = 2 gives real and imaginary atom parts of unit norm each.
            const double scale = std::sqrt(2.0 * static_cast<double>(nn) / energy);
            for (double& v : env) v *= scale;

            ComplexBuffer atom(nn);
            for (std::size_t i = 0; i < nn; ++i) atom[i] = env[i];
            fft->inverse(atom);
            const double norm = 1.0 / static_cast<double>(nn);
            for (auto& v : atom) v *= norm;

            d->channels.push_back(ch);
            d->envelopes.push_back(std::move(env));
            d->atoms.push_back(std::move(atom));
        }
    }
    d->total = offset;
    data_ = std::move(d);
}

const BankParams& LogGaborBank::params() const { return data_->params; }
int LogGaborBank::image_size() const { return data_->n; }
int LogGaborBank::n_scales() const { return data_->n_scales; }
int LogGaborBank::n_orientations() const { return data_->n_orientations; }
std::span<const Channel> LogGaborBank::channels() const { return data_->channels; }
const Channel& LogGaborBank::channel(int index) const { return data_->channels.at(index); }
std::size_t LogGaborBank::coefficient_count() const { return data_->total; }
std::span<const double> LogGaborBank::envelope(int c) const { return data_->envelopes.at(c); }
std::span<const cdouble> LogGaborBank::atom(int c) const { return data_->atoms.at(c); }

int LogGaborBank::channel_index(int scale, int orientation) const {
    if (scale < 0 || scale >= data_->n_scales || orientation < 0 || orientation >= data_->n_orientations)
        throw std::out_of_range("bank: scale or orientation index out of range");
    return scale * data_->n_orientations + orientation;
}

bool LogGaborBank::valid(const Address& a) const {
    if (a.scale < 0 || a.scale >= data_->n_scales || a.orientation < 0 || a.orientation >= data_->n_orientations)
        return false;
    const auto& ch = data_->channels[channel_index(a.scale, a.orientation)];
    return a.x >= 0 && a.y >= 0 && a.x < data_->n && a.y < data_->n && a.x % ch.stride == 0 && a.y % ch.stride == 0;
}

std::size_t LogGaborBank::linear_index(const Address& a) const {
    if (!valid(a)) throw std::out_of_range("bank: address outside the coefficient stack");
    const auto& ch = data_->channels[channel_index(a.scale, a.orientation)];
    return ch.offset + static_cast<std::size_t>(a.y / ch.stride) * ch.grid + a.x / ch.stride;
}

int LogGaborBank::channel_of(std::size_t linear) const {
    if (linear >= data_->total) throw std::out_of_range("bank: linear index out of range");
    const auto& chans = data_->channels;
    auto it = std::upper_bound(chans.begin(), chans.end(), linear,
                               [](std::size_t v, const Channel& ch) { return v < ch.offset; });
    return static_cast<int>(std::distance(chans.begin(), it)) - 1;
}

Address LogGaborBank::address(std::size_t linear) const {
    const auto& ch = data_->channels[channel_of(linear)];
    const auto local = linear - ch.offset;
    return {ch.scale, ch.orientation, static_cast<int>(local % ch.grid) * ch.stride,
            static_cast<int>(local / ch.grid) * ch.stride};
}

bool LogGaborBank::same_as(const LogGaborBank& other) const {
    return data_ == other.data_ || (data_->n == other.data_->n && data_->params == other.data_->params);
}

// ---------------------------------------------------------------------------
// Cross-correlation kernels
// ---------------------------------------------------------------------------

std::size_t KernelSet::bytes() const {
    std::size_t b = 0;
    for (const auto& k : kernels) {
        for (const auto& p : k.direct) b += p.size() * sizeof(cdouble);
        for (const auto& p : k.mirrored) b += p.size() * sizeof(cdouble);
    }
    return b;
}

namespace {

KernelSet build_kernels(const detail::BankData& d, int source, double tolerance) {
    const int n = d.n;
    const auto nn = static_cast<std::size_t>(n) * n;
    const auto fft = Fft2d::get(n);
    const auto& env_i = d.envelopes[source];
    const auto& src = d.channels[source];
    const double norm = 1.0 / static_cast<double>(nn);

    KernelSet set;
    set.tolerance = tolerance;
    ComplexBuffer direct(nn), mirrored(nn);
    for (int c = 0; c < static_cast<int>(d.channels.size()); ++c) {
        const auto& env_c = d.envelopes[c];
        const auto& tgt = d.channels[c];
        // |kernel(d)| <= sum |product| / N^2, so small sums can be skipped outright.
        double bound_direct = 0.0, bound_mirror = 0.0;
        for (int ky = 0; ky < n; ++ky) {
            const int my = (n - ky) % n;
            for (int kx = 0; kx < n; ++kx) {
                const double ec = env_c[index2(kx, ky, n)];
                if (ec == 0.0) continue;
                bound_direct += env_i[index2(kx, ky, n)] * ec;
                bound_mirror += env_i[index2((n - kx) % n, my, n)] * ec;
            }
        }
        bound_direct *= norm;
        bound_mirror *= norm;
        const bool use_direct = bound_direct > 0.0 && bound_direct >= tolerance;
        const bool use_mirror = bound_mirror > 0.0 && bound_mirror >= tolerance;
        if (!use_direct && !use_mirror) continue;

        if (use_direct) {
            for (std::size_t i = 0; i < nn; ++i) direct[i] = env_i[i] * env_c[i];
            fft->inverse(direct);
            for (auto& v : direct) v *= norm;
        }
        if (use_mirror) {
            for (int ky = 0; ky < n; ++ky)
                for (int kx = 0; kx < n; ++kx)
                    mirrored[index2(kx, ky, n)] = env_i[index2((n - kx) % n, (n - ky) % n, n)] * env_c[index2(kx, ky, n)];
            fft->inverse(mirrored);
            for (auto& v : mirrored) v *= norm;
        }

        // Chebyshev radius (circular) of the entries above tolerance.
        int radius = 0;
        if (tolerance <= 0.0) {
            radius = n;
        } else {
            for (int y = 0; y < n; ++y) {
                const int dy = std::min(y, n - y);
                for (int x = 0; x < n; ++x) {
                    const auto i = index2(x, y, n);
                    const bool big = (use_direct && std::abs(direct[i]) >= tolerance) ||
                                     (use_mirror && std::abs(mirrored[i]) >= tolerance);
                    if (big) radius = std::max(radius, std::max(dy, std::min(x, n - x)));
                }
            }
        }

        CrossKernel k;
        k.target = c;
        const int stride = tgt.stride;
        k.lo = -((radius + stride - 1) / stride);
        const int hi = (radius + stride) / stride + 1;
        k.len = hi - k.lo + 1;
        if (k.len >= tgt.grid) {
            k.lo = -tgt.grid / 2;
            k.len = tgt.grid;
        }
        k.phases_per_dim = src.stride >= stride ? 1 : stride / src.stride;
        const auto window = static_cast<std::size_t>(k.len) * k.len;
        for (int py = 0; py < k.phases_per_dim; ++py) {
            for (int px = 0; px < k.phases_per_dim; ++px) {
                ComplexBuffer wd, wm;
                if (use_direct) wd.resize(window);
                if (use_mirror) wm.resize(window);
                for (int my = 0; my < k.len; ++my) {
                    const int dy = ((stride * (k.lo + my) - py * src.stride) % n + n) % n;
                    for (int mx = 0; mx < k.len; ++mx) {
                        const int dx = ((stride * (k.lo + mx) - px * src.stride) % n + n) % n;
                        const auto w = static_cast<std::size_t>(my) * k.len + mx;
                        if (use_direct) wd[w] = direct[index2(dx, dy, n)];
                        if (use_mirror) wm[w] = mirrored[index2(dx, dy, n)];
                    }
                }
                k.direct.push_back(std::move(wd));
                if (use_mirror) k.mirrored.push_back(std::move(wm));
            }
        }
        set.kernels.push_back(std::move(k));
    }
    return set;
}

}  // namespace

const KernelSet& LogGaborBank::kernels(int source, double tolerance) const {
    if (source < 0 || source >= static_cast<int>(data_->channels.size()))
        throw std::out_of_range("bank: kernel source channel out of range");
    std::lock_guard lock(data_->kernel_mutex);
    auto& slot = data_->kernel_cache[{source, tolerance}];
    if (!slot) slot = std::make_unique<KernelSet>(build_kernels(*data_, source, tolerance));
    return *slot;
}

// ---------------------------------------------------------------------------
// Coefficient stack and transforms
// ---------------------------------------------------------------------------

CoefficientStack::CoefficientStack(const LogGaborBank& bank) : bank_(bank), values_(bank.coefficient_count()) {}

std::span<cdouble> CoefficientStack::channel(int c) {
    const auto& ch = bank_.channel(c);
    return std::span<cdouble>(values_).subspan(ch.offset, ch.position_count());
}

std::span<const cdouble> CoefficientStack::channel(int c) const {
    const auto& ch = bank_.channel(c);
    return std::span<const cdouble>(values_).subspan(ch.offset, ch.position_count());
}

CoefficientStack analyze(const Image& img, const LogGaborBank& bank) {
    const int n = bank.image_size();
    if (img.width() != n || img.height() != n) throw std::invalid_argument("analyze: image size does not match bank");
    const auto nn = static_cast<std::size_t>(n) * n;
    ComplexBuffer spectrum(nn);
    auto src = img.values();
    for (std::size_t i = 0; i < nn; ++i) spectrum[i] = src[i];
    Fft2d::get(n)->forward(spectrum);

    CoefficientStack stack(bank);
    const double norm = 1.0 / static_cast<double>(nn);
    ComplexBuffer folded;
    for (int c = 0; c < static_cast<int>(bank.channels().size()); ++c) {
        const auto& ch = bank.channel(c);
        const auto env = bank.envelope(c);
        const int g = ch.grid;
        folded.assign(static_cast<std::size_t>(g) * g, cdouble{});
        // Sampling every stride-th position folds the spectrum onto a g x g grid.
        for (int ky = 0; ky < n; ++ky) {
            const std::size_t row = static_cast<std::size_t>(ky % g) * g;
            for (int kx = 0; kx < n; ++kx) {
                const double e = env[index2(kx, ky, n)];
                if (e != 0.0) folded[row + kx % g] += spectrum[index2(kx, ky, n)] * e;
            }
        }
        Fft2d::get(g)->inverse(folded);
        auto out = stack.channel(c);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = folded[i] * norm;
    }
    return stack;
}

cdouble atom_inner_product(const Image& img, const LogGaborBank& bank, const Address& address) {
    if (!bank.valid(address)) throw std::out_of_range("atom_inner_product: invalid address");
    const int n = bank.image_size();
    if (img.width() != n || img.height() != n) throw std::invalid_argument("atom_inner_product: size mismatch");
    const auto atom = bank.atom(bank.channel_index(address.scale, address.orientation));
    double re = 0.0, im = 0.0;
    for (int y = 0; y < n; ++y) {
        const int ay = (y - address.y + n) % n;
        const cdouble* arow = atom.data() + static_cast<std::size_t>(ay) * n;
        for (int x = 0; x < n; ++x) {
            const cdouble a = arow[(x - address.x + n) % n];
            const double v = img(x, y);
            re += v * a.real();
            im -= v * a.imag();
        }
    }
    return {re, im};
}

void add_atom(Image& img, const LogGaborBank& bank, const Address& address, cdouble coeff) {
    if (!bank.valid(address)) throw std::out_of_range("add_atom: invalid address");
    const int n = bank.image_size();
    if (img.width() != n || img.height() != n) throw std::invalid_argument("add_atom: size mismatch");
    const auto atom = bank.atom(bank.channel_index(address.scale, address.orientation));
    const double cr = coeff.real(), ci = coeff.imag();
    for (int y = 0; y < n; ++y) {
        const int ay = (y - address.y + n) % n;
        const cdouble* arow = atom.data() + static_cast<std::size_t>(ay) * n;
        for (int x = 0; x < n; ++x) {
            const cdouble a = arow[(x - address.x + n) % n];
            img(x, y) += cr * a.real() - ci * a.imag();
        }
    }
}

Image synthesize_atom(const LogGaborBank& bank, const Address& address, cdouble coeff) {
    Image out(bank.image_size(), bank.image_size());
    add_atom(out, bank, address, coeff);
    return out;
}

double atom_support_radius(const LogGaborBank& bank, int scale, double fraction) {
    const int n = bank.image_size();
    const auto atom = bank.atom(bank.channel_index(scale, 0));
    std::vector<std::pair<double, double>> radial;
    radial.reserve(atom.size());
    double total = 0.0;
    for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x) {
            const double e = std::norm(atom[index2(x, y, n)]);
            radial.emplace_back(std::hypot(std::min(x, n - x), std::min(y, n - y)), e);
            total += e;
        }
    std::sort(radial.begin(), radial.end());
    double acc = 0.0;
    for (const auto& [r, e] : radial) {
        acc += e;
        if (acc >= fraction * total) return r;
    }
    return radial.back().first;
}

Image envelope_figure(const LogGaborBank& bank, int scale) {
    const int n = bank.image_size();
    const int o = bank.n_orientations();
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(o))));
    const int rows = (o + cols - 1) / cols;
    Image out(cols * n, rows * n);
    for (int k = 0; k < o; ++k) {
        const auto env = bank.envelope(bank.channel_index(scale, k));
        const int ox = (k % cols) * n, oy = (k / cols) * n;
        for (int y = 0; y < n; ++y)
            for (int x = 0; x < n; ++x) out(ox + (x + n / 2) % n, oy + (y + n / 2) % n) = env[index2(x, y, n)];
    }
    return out;
}

}  // namespace sparselets
