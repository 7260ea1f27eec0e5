#include "sparselets/loggabor.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace sparselets;
using std::numbers::pi;

namespace {

BankParams small_params() {
    BankParams p;
    p.n_scales = 2;
    p.n_orientations = 4;
    return p;
}

// Norm of Re(c * atom) computed pixel by pixel.
double real_part_norm(const LogGaborBank& bank, int ch, cdouble c) {
    double s = 0.0;
    for (cdouble v : bank.atom(ch)) s += std::pow((c * v).real(), 2);
    return std::sqrt(s);
}

}  // namespace

TEST_SUITE("loggabor") {

TEST_CASE("envelope peaks at the tuned frequency and orientation") {
    const BankParams p;
    for (double theta : {0.0, pi / 3.0, -pi / 4.0, pi / 2.0}) {
        const double fs = 0.125;
        const double dir = theta + pi / 2.0;
        CHECK(log_gabor_envelope(p, fs, theta, fs * std::cos(dir), fs * std::sin(dir)) == doctest::Approx(1.0).epsilon(1e-14));
        // opposite half-plane is empty
        CHECK(log_gabor_envelope(p, fs, theta, -fs * std::cos(dir), -fs * std::sin(dir)) == 0.0);
    }
}

TEST_CASE("envelope falls to exp(-1/2) one bandwidth away") {
    const BankParams p;
    const double fs = 0.0625, theta = 0.0;
    const double f = fs * std::exp(p.bandwidth_log_frequency);
    CHECK(log_gabor_envelope(p, fs, theta, 0.0, f) == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
    const double a = pi / 2.0 + p.bandwidth_orientation;
    CHECK(log_gabor_envelope(p, fs, theta, fs * std::cos(a), fs * std::sin(a)) ==
          doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("every envelope vanishes at DC and lives in one half-plane") {
    const LogGaborBank bank(BankParams{}, 32);
    const int n = 32;
    for (int c = 0; c < static_cast<int>(bank.channels().size()); ++c) {
        const auto env = bank.envelope(c);
        CHECK(env[0] == 0.0);
        const double dir = bank.channel(c).theta + pi / 2.0;
        bool ok = true;
        for (int ky = 0; ky < n; ++ky)
            for (int kx = 0; kx < n; ++kx) {
                const double fx = kx <= n / 2 ? kx : kx - n, fy = ky <= n / 2 ? ky : ky - n;
                if (env[ky * n + kx] != 0.0 && fx * std::cos(dir) + fy * std::sin(dir) <= 0.0) ok = false;
            }
        CHECK(ok);
    }
}

TEST_CASE("atoms have unit-norm orthogonal quadrature parts") {
    const LogGaborBank bank(BankParams{}, 32);
    for (int c = 0; c < static_cast<int>(bank.channels().size()); ++c) {
        CHECK(real_part_norm(bank, c, 1.0) == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(real_part_norm(bank, c, cdouble(0.0, 1.0)) == doctest::Approx(1.0).epsilon(1e-10));
        double dot = 0.0;
        for (cdouble v : bank.atom(c)) dot += v.real() * v.imag();
        CHECK(std::abs(dot) < 1e-10);
    }
}

TEST_CASE("synthesized atoms have the norm of their coefficient") {
    const LogGaborBank bank(BankParams{}, 64);
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const auto a = bank.address(rng() % bank.coefficient_count());
        const cdouble c = std::polar(0.1 + (rng() % 100) / 10.0, (rng() % 628) / 100.0);
        CHECK(std::sqrt(synthesize_atom(bank, a, c).energy()) == doctest::Approx(std::abs(c)).epsilon(1e-10));
    }
}

TEST_CASE("analysis recovers the coefficient of a synthesized atom") {
    const LogGaborBank bank(BankParams{}, 64);
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t j = rng() % bank.coefficient_count();
        const cdouble c = std::polar(1.0 + (rng() % 100) / 50.0, (rng() % 628) / 100.0);
        const auto stack = analyze(synthesize_atom(bank, bank.address(j), c), bank);
        CHECK(std::abs(stack[j] - c) < 1e-8);
    }
}

TEST_CASE("a pure atom is the global maximum of its own analysis") {
    const LogGaborBank bank(BankParams{}, 64);
    for (std::size_t j : {std::size_t{0}, bank.coefficient_count() / 3, bank.coefficient_count() - 1}) {
        const auto stack = analyze(synthesize_atom(bank, bank.address(j), 1.0), bank);
        CHECK(std::abs(stack[j]) == doctest::Approx(1.0).epsilon(1e-8));
        std::size_t best = 0;
        for (std::size_t i = 0; i < stack.size(); ++i)
            if (std::abs(stack[i]) > std::abs(stack[best])) best = i;
        CHECK(best == j);
    }
}

TEST_CASE("two distant atoms are recovered up to their direct cross-talk") {
    const LogGaborBank bank(BankParams{}, 64);
    const Address aj{0, 3, 8, 8}, ak{0, 17, 40, 44};
    Image img = synthesize_atom(bank, aj, 0.5);
    add_atom(img, bank, ak, 0.3);
    const auto stack = analyze(img, bank);
    // cross-talk measured independently of the FFT path
    const cdouble cross_j = atom_inner_product(synthesize_atom(bank, ak, 1.0), bank, aj);
    const cdouble cross_k = atom_inner_product(synthesize_atom(bank, aj, 1.0), bank, ak);
    CHECK(std::abs(stack.at(aj) - 0.5) <= 0.3 * std::abs(cross_j) + 1e-10);
    CHECK(std::abs(stack.at(ak) - 0.3) <= 0.5 * std::abs(cross_k) + 1e-10);
}

TEST_CASE("analysis of zero is zero") {
    const LogGaborBank bank(BankParams{}, 32);
    for (cdouble v : analyze(Image(32, 32), bank).values()) CHECK(v == cdouble(0.0));
}

TEST_CASE("FFT analysis agrees with direct inner products") {
    const LogGaborBank bank(BankParams{}, 32);
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        const auto img = testing::random_image(32, seed);
        const auto stack = analyze(img, bank);
        double total_fft = 0.0, total_direct = 0.0, worst = 0.0;
        for (std::size_t i = 0; i < stack.size(); ++i) {
            const cdouble d = atom_inner_product(img, bank, bank.address(i));
            total_fft += std::norm(stack[i]);
            total_direct += std::norm(d);
            worst = std::max(worst, std::abs(d - stack[i]));
        }
        CHECK(total_fft == doctest::Approx(total_direct).epsilon(1e-8));
        CHECK(worst < 1e-9 * std::sqrt(img.energy()));
    }
}

TEST_CASE("analysis is translation covariant on the coarsest grid") {
    const int n = 64;
    const LogGaborBank bank(BankParams{}, n);
    int step = 1;
    for (const auto& ch : bank.channels()) step = std::max(step, ch.stride);
    const auto img = testing::random_image(n, 21);
    const auto a = analyze(img, bank);
    const int dx = step, dy = 2 * step;
    const auto b = analyze(circular_shift(img, dx, dy), bank);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto addr = bank.address(i);
        addr.x = (addr.x + dx) % n;
        addr.y = (addr.y + dy) % n;
        worst = std::max(worst, std::abs(b.at(addr) - a[i]));
    }
    CHECK(worst < 1e-10 * std::sqrt(img.energy()));
}

TEST_CASE("layout: addresses round-trip through linear indices") {
    const LogGaborBank bank(BankParams{}, 64);
    std::size_t expected = 0;
    for (const auto& ch : bank.channels()) {
        CHECK(ch.offset == expected);
        CHECK(ch.grid * ch.stride == 64);
        CHECK(ch.stride <= std::max(1.0, ch.wavelength() / 4.0));
        expected += ch.position_count();
    }
    CHECK(bank.coefficient_count() == expected);
    for (std::size_t i = 0; i < bank.coefficient_count(); i += 97) CHECK(bank.linear_index(bank.address(i)) == i);
}

TEST_CASE("scale count and orientation grid") {
    const BankParams p;
    // 0.25 cycles/pixel halving down to one cycle per image
    CHECK(p.scale_count(256) == 7);
    CHECK(p.scale_count(64) == 5);
    BankParams golden = p;
    golden.scale_ratio = std::numbers::phi;
    CHECK(golden.scale_count(256) == 1 + static_cast<int>(std::floor(std::log(64.0) / std::log(std::numbers::phi) + 1e-9)));
    bool has_zero = false, has_vertical = false;
    for (int k = 0; k < 24; ++k) {
        has_zero |= std::abs(uniform_orientation(k, 24)) < 1e-15;
        has_vertical |= std::abs(uniform_orientation(k, 24) - pi / 2.0) < 1e-15;
    }
    CHECK(has_zero);
    CHECK(has_vertical);
}

TEST_CASE("angle wrapping") {
    CHECK(wrap_half_pi(pi) == doctest::Approx(0.0));
    CHECK(wrap_half_pi(-pi / 2.0) == doctest::Approx(pi / 2.0));
    CHECK(wrap_pi(-pi) == doctest::Approx(pi));
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int i = 0; i < 1000; ++i) {
        const double a = u(rng), w = wrap_half_pi(a);
        CHECK(w > -pi / 2.0);
        CHECK(w <= pi / 2.0);
        const double k = (a - w) / pi;
        CHECK(std::abs(k - std::round(k)) < 1e-9);
    }
}

TEST_CASE("invalid configurations throw") {
    CHECK_THROWS_AS(LogGaborBank(BankParams{}, 8), std::invalid_argument);
    BankParams p;
    p.f_max = 0.6;
    CHECK_THROWS_AS(LogGaborBank(p, 64), std::invalid_argument);
    p = {};
    p.bandwidth_orientation = 4.0;
    CHECK_THROWS_AS(LogGaborBank(p, 64), std::invalid_argument);
    p = {};
    p.n_scales = 12;
    CHECK_THROWS_AS(LogGaborBank(p, 64), std::invalid_argument);
    p = {};
    p.orientations = {0.0, 2.0};
    CHECK_THROWS_AS(LogGaborBank(p, 64), std::invalid_argument);
    const LogGaborBank bank(small_params(), 16);
    CHECK_THROWS(analyze(Image(32, 32), bank));
    CHECK_THROWS(synthesize_atom(bank, Address{5, 0, 0, 0}, 1.0));
    CHECK_THROWS(synthesize_atom(bank, Address{0, 0, 16, 0}, 1.0));
}

TEST_CASE("explicit orientations override the uniform grid") {
    BankParams p = small_params();
    p.orientations = {-0.3, 0.1, 0.7};
    const LogGaborBank bank(p, 16);
    CHECK(bank.n_orientations() == 3);
    CHECK(bank.channel(bank.channel_index(1, 2)).theta == 0.7);
}

}
