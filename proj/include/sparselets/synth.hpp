#pragma once

#include "sparselets/image.hpp"
#include "sparselets/loggabor.hpp"

#include <cstdint>
#include <vector>

namespace sparselets {

struct SyntheticStimulusSpec {
    double radius = 64.0;  // pixels, circle centered at (N/2, N/2)
    int n_clutter = 200;
    int clutter_scale_min = 1;
    int clutter_scale_max = 3;  // inclusive; clamped to the bank
    std::uint64_t seed = 1;
    /// Scale-1 atoms (8 px wavelength by default) on the default radius turn by
    /// about one orientation step (7.5 degrees) from one to the next, a
    /// contour-like curvature.
    int circle_scale = 1;
    /// Arc spacing between circle atoms, in wavelengths of circle_scale.
    double spacing = 1.0;
    double circle_amplitude = 1.0;
    double clutter_amplitude = 1.0;

    void validate(int image_size) const;
    bool operator==(const SyntheticStimulusSpec&) const = default;
};

struct SyntheticStimulus {
    Image image;
    std::vector<Address> circle;   // planted tangential atoms
    std::vector<Address> clutter;  // planted distractors
    double center_x = 0.0, center_y = 0.0, radius = 0.0;

    /// Distance of a pixel position from the circle rim.
    double rim_distance(double x, double y) const;
};

/// Atoms placed tangentially along a circle plus randomly placed clutter
/// atoms with random phase. Deterministic in the seed.
SyntheticStimulus make_circle_in_noise(const SyntheticStimulusSpec& spec, const LogGaborBank& bank);

}  // namespace sparselets
