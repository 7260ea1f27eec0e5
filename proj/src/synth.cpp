#include "sparselets/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace sparselets {

void SyntheticStimulusSpec::validate(int image_size) const {
    if (!(radius > 0.0 && radius < image_size / 2.0))
        throw std::invalid_argument("synth: radius must lie in (0, image_size / 2)");
    if (n_clutter < 0) throw std::invalid_argument("synth: n_clutter must be non-negative");
    if (clutter_scale_min > clutter_scale_max) throw std::invalid_argument("synth: empty clutter scale range");
    if (!(spacing > 0.0)) throw std::invalid_argument("synth: spacing must be positive");
}

double SyntheticStimulus::rim_distance(double x, double y) const {
    return std::abs(std::hypot(x - center_x, y - center_y) - radius);
}

namespace {

int nearest_orientation(const LogGaborBank& bank, double theta) {
    int best = 0;
    double best_d = 1e9;
    for (int k = 0; k < bank.n_orientations(); ++k) {
        const double d = std::abs(wrap_half_pi(bank.params().orientation(k) - theta));
        const double dd = std::min(d, std::numbers::pi - d);
        if (dd < best_d - 1e-12) {
            best_d = dd;
            best = k;
        }
    }
    return best;
}

int snap(double v, int stride, int n) {
    const int q = static_cast<int>(std::lround(v / stride)) * stride;
    return ((q % n) + n) % n;
}

}  // namespace

SyntheticStimulus make_circle_in_noise(const SyntheticStimulusSpec& spec, const LogGaborBank& bank) {
    const int n = bank.image_size();
    spec.validate(n);
    if (spec.circle_scale < 0 || spec.circle_scale >= bank.n_scales())
        throw std::invalid_argument("synth: circle_scale outside the bank");

    SyntheticStimulus out;
    out.image = Image(n, n);
    out.center_x = out.center_y = n / 2.0;
    out.radius = spec.radius;

    const auto& ref = bank.channel(bank.channel_index(spec.circle_scale, 0));
    const double arc = spec.spacing * ref.wavelength();
    const int count = std::max(3, static_cast<int>(std::floor(2.0 * std::numbers::pi * spec.radius / arc)));
    for (int k = 0; k < count; ++k) {
        const double phi = 2.0 * std::numbers::pi * k / count;
        Address a;
        a.scale = spec.circle_scale;
        a.orientation = nearest_orientation(bank, wrap_half_pi(phi + std::numbers::pi / 2.0));
        const int stride = bank.channel(bank.channel_index(a.scale, a.orientation)).stride;
        a.x = snap(out.center_x + spec.radius * std::cos(phi), stride, n);
        a.y = snap(out.center_y + spec.radius * std::sin(phi), stride, n);
        if (!out.circle.empty() && out.circle.back() == a) continue;
        out.circle.push_back(a);
        add_atom(out.image, bank, a, spec.circle_amplitude);
    }

    std::mt19937_64 rng(spec.seed);
    const int s_lo = std::clamp(spec.clutter_scale_min, 0, bank.n_scales() - 1);
    const int s_hi = std::clamp(spec.clutter_scale_max, 0, bank.n_scales() - 1);
    std::uniform_int_distribution<int> pick_scale(s_lo, s_hi);
    std::uniform_int_distribution<int> pick_orientation(0, bank.n_orientations() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int k = 0; k < spec.n_clutter; ++k) {
        Address a;
        a.scale = pick_scale(rng);
        a.orientation = pick_orientation(rng);
        const auto& ch = bank.channel(bank.channel_index(a.scale, a.orientation));
        std::uniform_int_distribution<int> pick_pos(0, ch.grid - 1);
        a.x = pick_pos(rng) * ch.stride;
        a.y = pick_pos(rng) * ch.stride;
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        out.clutter.push_back(a);
        add_atom(out.image, bank, a, std::polar(spec.clutter_amplitude, phase));
    }
    return out;
}

}  // namespace sparselets
