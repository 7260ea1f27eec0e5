#include "sparselets/image.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <complex>
#include <fstream>
#include <functional>
#include <numbers>

using namespace sparselets;

namespace {

void write_pgm8(const std::filesystem::path& p, int w, int h, const std::function<int(int, int)>& f) {
    std::ofstream o(p, std::ios::binary);
    o << "P5\n" << w << " " << h << "\n255\n";
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) o.put(static_cast<char>(f(x, y)));
}

double whitening_gain(double f, double f0, double steepness) { return f * std::exp(-std::pow(f / f0, steepness)); }

}  // namespace

TEST_SUITE("image") {

TEST_CASE("energy is the sum of squared pixels") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto img = testing::random_image(32, seed, 3.0);
        double e = 0.0;
        for (double v : img.values()) e += v * v;
        CHECK(std::abs(img.energy() - e) <= 1e-12 * e);
    }
}

TEST_CASE("square images only") {
    CHECK_THROWS(whiten(Image(16, 8), WhiteningParams{}));
}

TEST_CASE("constant file loads as zeros") {
    const auto dir = testing::scratch_dir("image_constant");
    write_pgm8(dir / "c.pgm", 64, 64, [](int, int) { return 128; });
    const auto img = load_image(dir / "c.pgm", 64);
    CHECK(img.width() == 64);
    for (double v : img.values()) CHECK(v == 0.0);
}

TEST_CASE("full-size load has the centered energy") {
    const auto path = testing::data_dir() / "corpus" / "astronaut_0.pgm";
    const auto raw = read_image_file(path);
    REQUIRE(raw.width() == 256);
    double mean = 0.0;
    for (double v : raw.values()) mean += v;
    mean /= raw.values().size();
    double e = 0.0;
    for (double v : raw.values()) e += (v - mean) * (v - mean);
    const auto img = load_image(path, 256);
    CHECK(img.energy() == doctest::Approx(e).epsilon(1e-12));
}

TEST_CASE("central crop matches index arithmetic") {
    const auto path = testing::data_dir() / "corpus" / "camera_0.pgm";
    const auto raw = read_image_file(path);
    const auto img = load_image(path, 64);
    const int off = (raw.width() - 64) / 2;
    double mean = 0.0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) mean += raw(off + x, off + y);
    mean /= 64.0 * 64.0;
    double worst = 0.0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) worst = std::max(worst, std::abs(img(x, y) - (raw(off + x, off + y) - mean)));
    CHECK(worst < 1e-12);
}

TEST_CASE("load errors") {
    const auto dir = testing::scratch_dir("image_errors");
    CHECK_THROWS_AS(load_image(dir / "missing.pgm", 64), std::runtime_error);
    write_pgm8(dir / "small.pgm", 32, 32, [](int x, int y) { return x + y; });
    CHECK_THROWS_AS(load_image(dir / "small.pgm", 64), std::runtime_error);
    std::ofstream(dir / "junk.pgm") << "not an image";
    CHECK_THROWS_AS(load_image(dir / "junk.pgm", 16), std::runtime_error);
}

TEST_CASE("16-bit PGM and PNG round trips") {
    const auto dir = testing::scratch_dir("image_roundtrip");
    const auto img = testing::random_image(32, 7);
    const double range = *std::max_element(img.values().begin(), img.values().end()) -
                         *std::min_element(img.values().begin(), img.values().end());
    save_image(dir / "a.pgm", img);
    CHECK(testing::max_abs_diff(read_image_file(dir / "a.pgm"), img) <= range / 65535.0);
    save_image(dir / "a.png", img);
    const auto png = read_image_file(dir / "a.png");
    CHECK(png.width() == 32);
    // PNG carries no range, so compare after affine normalisation.
    const auto a = img.values(), b = png.values();
    const double amin = *std::min_element(a.begin(), a.end()), bmin = *std::min_element(b.begin(), b.end());
    const double bmax = *std::max_element(b.begin(), b.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs((a[i] - amin) / range - (b[i] - bmin) / (bmax - bmin)));
    CHECK(worst <= 2.0 / 65535.0);
    CHECK_THROWS(save_image(dir / "a.bmp", img));
}

TEST_CASE("whitening of zero and DC") {
    Image zero(32, 32);
    CHECK(whiten(zero, {}).energy() == 0.0);
    Image dc(32, 32);
    for (double& v : dc.values()) v = 5.0;
    CHECK(whiten(dc, {}).energy() < 1e-20);
}

TEST_CASE("whitened impulse spectrum equals the filter gain") {
    const int n = 16;
    Image impulse(n, n);
    impulse(0, 0) = 1.0;
    const WhiteningParams p;
    const auto out = whiten(impulse, p);
    const double f0 = 0.45 * n / 2.0;
    double worst = 0.0;
    for (int ky = 0; ky < n; ++ky)
        for (int kx = 0; kx < n; ++kx) {
            std::complex<double> s = 0.0;
            for (int y = 0; y < n; ++y)
                for (int x = 0; x < n; ++x)
                    s += out(x, y) * std::polar(1.0, -2.0 * std::numbers::pi * (kx * x + ky * y) / n);
            const double fx = kx <= n / 2 ? kx : kx - n, fy = ky <= n / 2 ? ky : ky - n;
            worst = std::max(worst, std::abs(std::abs(s) - whitening_gain(std::hypot(fx, fy), f0, 4.0)));
        }
    CHECK(worst < 1e-12);
}

TEST_CASE("whitening is linear") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto i1 = testing::random_image(32, 100 + trial), i2 = testing::random_image(32, 200 + trial);
        const double a = u(rng), b = u(rng);
        Image mix = i1;
        mix *= a;
        Image t = i2;
        t *= b;
        mix += t;
        Image expect = whiten(i1, {});
        expect *= a;
        Image w2 = whiten(i2, {});
        w2 *= b;
        expect += w2;
        const double scale = std::sqrt(expect.energy() / expect.values().size());
        CHECK(testing::max_abs_diff(whiten(mix, {}), expect) <= 1e-10 * scale);
    }
}

TEST_CASE("preprocessing commutes with scaling") {
    const auto img = testing::random_image(64, 3);
    for (double c : {-2.5, 0.1, 7.0}) {
        Image scaled = img;
        scaled *= c;
        Image expect = preprocess(img, {});
        expect *= c;
        const double scale = std::sqrt(expect.energy() / expect.values().size());
        CHECK(testing::max_abs_diff(preprocess(scaled, {}), expect) <= 1e-12 * scale);
    }
}

TEST_CASE("preprocessed images are zero-mean and vanish outside the rim") {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        Image img = testing::random_image(64, seed);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) img(x, y) += 0.2 * x;  // low-frequency ramp
        const auto out = preprocess(img, {});
        const double sd = std::sqrt(out.variance());
        CHECK(std::abs(out.mean()) < 1e-12 * sd);
        CHECK(out(0, 0) == 0.0);
        CHECK(out(63, 2) == 0.0);
    }
}

TEST_CASE("circular mask") {
    const int n = 64;
    Image ones(n, n);
    for (double& v : ones.values()) v = 1.0;
    const auto m = apply_circular_mask(ones);
    CHECK(m(n / 2, n / 2) == 1.0);
    CHECK(m(0, 0) == 0.0);
    CHECK(m(n - 1, n - 1) == 0.0);
    // rim radius n/2, taper 8: four pixels inside the rim sits halfway down the taper
    CHECK(m(n / 2 + n / 2 - 4, n / 2) == doctest::Approx(std::pow(std::cos(std::numbers::pi / 4.0), 2)).epsilon(1e-12));
    CHECK(m(n / 2 + n / 2 - 4, n / 2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("corpus images are zero-mean") {
    const auto images = load_corpus(testing::corpus_manifest(), 128, "", 6);
    CHECK(images.size() == 6);
    for (const auto& img : images) CHECK(std::abs(img.mean()) < 1e-9 * std::sqrt(img.variance()));
}

TEST_CASE("manifest splits and comments") {
    const auto dir = testing::scratch_dir("image_manifest");
    write_pgm8(dir / "a.pgm", 32, 32, [](int x, int) { return x; });
    write_pgm8(dir / "b.pgm", 32, 32, [](int, int y) { return y; });
    std::ofstream(dir / "m.txt") << "# header\na.pgm train\n\nb.pgm test # trailing\n";
    const auto entries = read_manifest(dir / "m.txt");
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].split == "train");
    CHECK(entries[1].split == "test");
    CHECK(load_corpus(dir / "m.txt", 16, "test").size() == 1);
    CHECK_THROWS(load_corpus(dir / "m.txt", 16, "validation"));
}

TEST_CASE("whitening parameters are validated") {
    CHECK_THROWS(whiten(Image(16, 16), WhiteningParams{0.0, 4.0}));
    CHECK_THROWS(whiten(Image(16, 16), WhiteningParams{0.45, -1.0}));
}

}
