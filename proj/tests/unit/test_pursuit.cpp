#include "sparselets/pursuit.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace sparselets;

namespace {

BankParams reduced() {
    BankParams p;
    p.n_scales = 2;
    p.n_orientations = 4;
    return p;
}

PursuitParams exact_params(double alpha, int steps) {
    PursuitParams p;
    p.alpha = alpha;
    p.max_edges = steps;
    p.energy_threshold = 0.0;
    p.kernel_tolerance = 0.0;
    return p;
}

std::size_t brute_argmax(const Image& img, const LogGaborBank& bank) {
    std::size_t best = 0;
    double m = -1.0;
    for (std::size_t i = 0; i < bank.coefficient_count(); ++i) {
        const double v = std::abs(atom_inner_product(img, bank, bank.address(i)));
        if (v > m * (1.0 + 1e-12)) {
            m = v;
            best = i;
        }
    }
    return best;
}

Image natural(int size, int index) {
    const auto entries = read_manifest(testing::corpus_manifest());
    return preprocess(load_image(entries.at(index).path, size), {});
}

}  // namespace

TEST_SUITE("pursuit") {

TEST_CASE("best_match on hand-built stacks") {
    const LogGaborBank bank(reduced(), 16);
    CoefficientStack stack(bank);
    CHECK_FALSE(best_match(stack).has_value());
    stack[37] = cdouble(0.0, 0.7);
    auto m = best_match(stack);
    REQUIRE(m);
    CHECK(m->index == 37);
    CHECK(m->value == cdouble(0.0, 0.7));
    CHECK(m->address == bank.address(37));
    stack[12] = cdouble(0.7, 0.0);  // exact tie resolves to the lower index
    CHECK(best_match(stack)->index == 12);
    stack[5] = 0.7 * (1.0 - 1e-14);  // within the tie tolerance
    CHECK(best_match(stack)->index == 5);
    CHECK(best_match(stack, 0.0)->index == 12);
}

TEST_CASE("pursue_step on an empty stack throws") {
    const LogGaborBank bank(reduced(), 16);
    CHECK_THROWS_AS(pursue_step(Image(16, 16), CoefficientStack(bank), 0.8), NothingToMatch);
}

TEST_CASE("single atoms are removed exactly") {
    const LogGaborBank bank(BankParams{}, 64);
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 8; ++trial) {
        const auto addr = bank.address(rng() % bank.coefficient_count());
        const cdouble c = std::polar(2.0, 0.3 * trial);
        const auto img = synthesize_atom(bank, addr, c);
        auto full = pursue_step(img, analyze(img, bank), 1.0);
        CHECK(full.edge.address == addr);
        CHECK(full.residual.energy() < 1e-12 * img.energy());
        auto partial = pursue_step(img, analyze(img, bank), 0.8);
        CHECK(partial.residual.energy() == doctest::Approx(0.04 * img.energy()).epsilon(1e-8));
        CHECK(std::abs(partial.edge.coeff - 0.8 * c) < 1e-8);
    }
}

TEST_CASE("selection matches an exhaustive scan") {
    const LogGaborBank bank(reduced(), 16);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Image residual = testing::random_image(16, 1000 + seed);
        auto stack = analyze(residual, bank);
        for (int step = 0; step < 5; ++step) {
            const std::size_t expect = brute_argmax(residual, bank);
            auto r = pursue_step(residual, stack, 0.8);
            CHECK(bank.linear_index(r.edge.address) == expect);
            residual = std::move(r.residual);
            stack = std::move(r.stack);
        }
    }
}

TEST_CASE("incremental stack tracks the analysis of the residual") {
    const LogGaborBank bank(BankParams{}, 32);
    Image residual = testing::random_image(32, 4);
    auto stack = analyze(residual, bank);
    for (int step = 0; step < 20; ++step) {
        auto r = pursue_step(residual, stack, 0.8);
        residual = std::move(r.residual);
        stack = std::move(r.stack);
    }
    const auto exact = analyze(residual, bank);
    double worst = 0.0;
    for (std::size_t i = 0; i < exact.size(); ++i) worst = std::max(worst, std::abs(exact[i] - stack[i]));
    CHECK(worst < 1e-10 * std::sqrt(residual.energy() + 1.0));
}

TEST_CASE("energy identity holds step by step") {
    const LogGaborBank bank(BankParams{}, 64);
    for (double alpha : {0.3, 0.8, 1.0}) {
        const auto img = natural(64, 1);
        const auto edges = extract(img, bank, exact_params(alpha, 300));
        const auto formula = energy_curve(edges, alpha);
        const auto measured = measured_energy_curve(edges);
        REQUIRE(formula.size() == measured.size());
        CHECK(formula.front() == 1.0);
        double worst = 0.0;
        for (std::size_t k = 0; k < formula.size(); ++k) worst = std::max(worst, std::abs(formula[k] - measured[k]));
        CHECK(worst < 1e-6);
        for (std::size_t k = 1; k < measured.size(); ++k) CHECK(measured[k] <= measured[k - 1]);
    }
}

TEST_CASE("sparse coefficients accumulate alpha times the selected projections") {
    const LogGaborBank bank(BankParams{}, 64);
    const auto edges = extract(natural(64, 4), bank, exact_params(0.8, 400));
    std::vector<cdouble> sum(edges.size());
    for (const auto& s : edges.steps) sum[s.edge] += 0.8 * s.selected;
    double worst = 0.0;
    for (std::size_t i = 0; i < edges.size(); ++i) worst = std::max(worst, std::abs(sum[i] - edges.edges[i].coeff));
    CHECK(worst < 1e-12);
    CHECK(edges.steps.size() == 400);
    CHECK(edges.repeat_count() == edges.steps.size() - edges.size());
}

TEST_CASE("reconstruction plus residual equals the input") {
    const LogGaborBank bank(BankParams{}, 64);
    const auto img = natural(64, 2);
    Pursuit p(img, bank, exact_params(0.8, 200));
    p.run();
    const auto sum = reconstruct(p.edges(), bank) + p.residual();
    CHECK(testing::max_abs_diff(sum, img) < 1e-9 * std::sqrt(img.energy()));
}

TEST_CASE("threshold stopping bounds the reconstruction error") {
    const LogGaborBank bank(BankParams{}, 64);
    const auto img = natural(64, 0);
    PursuitParams p;
    p.max_edges = 100000;
    const auto edges = extract(img, bank, p);
    const auto err = img - reconstruct(edges, bank);
    CHECK(err.energy() / img.energy() <= 0.03 + 1e-6);
    // one fewer step would not have been enough
    const auto measured = measured_energy_curve(edges);
    CHECK(measured[measured.size() - 2] > 0.03);
}

TEST_CASE("max_edges stops first when the threshold is unreachable") {
    const LogGaborBank bank(BankParams{}, 64);
    PursuitParams p;
    p.max_edges = 10;
    CHECK(extract(natural(64, 3), bank, p).steps.size() == 10);
}

TEST_CASE("degenerate inputs") {
    const LogGaborBank bank(BankParams{}, 32);
    const auto edges = extract(Image(32, 32), bank, PursuitParams{});
    CHECK(edges.empty());
    CHECK(energy_curve(edges, 0.8) == std::vector<double>{1.0});
    CHECK(reconstruct(edges, bank).energy() == 0.0);
    CHECK_THROWS(extract(Image(64, 64), bank, PursuitParams{}));
    PursuitParams bad;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(extract(testing::random_image(32, 1), bank, bad), std::invalid_argument);
    bad = {};
    bad.alpha = 1.5;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("one-edge reconstruction is the synthesized atom") {
    const LogGaborBank bank(BankParams{}, 32);
    const auto img = testing::random_image(32, 8);
    const auto edges = extract(img, bank, exact_params(0.8, 1));
    REQUIRE(edges.size() == 1);
    const auto& e = edges.edges[0];
    CHECK(testing::max_abs_diff(reconstruct(edges, bank), synthesize_atom(bank, e.address, e.coeff)) < 1e-14);
}

TEST_CASE("reconstruction rejects a foreign bank") {
    const LogGaborBank bank(BankParams{}, 32);
    const auto edges = extract(testing::random_image(32, 2), bank, exact_params(0.8, 5));
    BankParams other;
    other.n_orientations = 12;
    CHECK_THROWS(reconstruct(edges, LogGaborBank(other, 32)));
    CHECK_THROWS(reconstruct(edges, LogGaborBank(BankParams{}, 64)));
}

TEST_CASE("extraction is translation equivariant on the coarsest grid") {
    const int n = 64;
    const LogGaborBank bank(BankParams{}, n);
    int step = 1;
    for (const auto& ch : bank.channels()) step = std::max(step, ch.stride);
    const auto img = testing::random_image(n, 77);
    const auto a = extract(img, bank, exact_params(0.8, 30));
    const auto b = extract(circular_shift(img, step, 3 * step), bank, exact_params(0.8, 30));
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t k = 0; k < a.steps.size(); ++k) {
        auto addr = a.edges[a.steps[k].edge].address;
        addr.x = (addr.x + step) % n;
        addr.y = (addr.y + 3 * step) % n;
        CHECK(b.edges[b.steps[k].edge].address == addr);
        CHECK(std::abs(std::abs(a.steps[k].selected) - std::abs(b.steps[k].selected)) < 1e-8);
    }
}

TEST_CASE("phase rotation rotates the coefficient only") {
    const LogGaborBank bank(BankParams{}, 64);
    const Address addr{1, 5, 20, 24};
    for (double phi : {0.4, 1.3, -2.2}) {
        const auto a = extract(synthesize_atom(bank, addr, 1.5), bank, exact_params(0.8, 1));
        const auto b = extract(synthesize_atom(bank, addr, std::polar(1.5, phi)), bank, exact_params(0.8, 1));
        CHECK(a.edges[0].address == b.edges[0].address);
        CHECK(std::abs(b.edges[0].coeff - a.edges[0].coeff * std::polar(1.0, phi)) < 1e-10);
    }
}

TEST_CASE("well-separated planted atoms are all recovered") {
    const LogGaborBank bank(BankParams{}, 64);
    const std::vector<Address> planted{{1, 2, 8, 8}, {1, 14, 40, 8}, {1, 20, 8, 40}, {1, 7, 40, 40}};
    Image img(64, 64);
    for (std::size_t i = 0; i < planted.size(); ++i) add_atom(img, bank, planted[i], std::polar(1.0 + 0.1 * i, 0.5 * i));
    const auto edges = extract(img, bank, exact_params(1.0, 4));
    std::set<std::size_t> got, want;
    for (const auto& e : edges.edges) got.insert(bank.linear_index(e.address));
    for (const auto& a : planted) want.insert(bank.linear_index(a));
    CHECK(got == want);
}

TEST_CASE("residual energy decays with more edges on natural images") {
    const LogGaborBank bank(BankParams{}, 128);
    for (int i = 0; i < 3; ++i) {
        PursuitParams p;
        p.energy_threshold = 0.0;
        p.max_edges = 512;
        const auto curve = energy_curve(extract(natural(128, i), bank, p), p.alpha);
        CHECK(curve[512] < curve[256]);
        CHECK(curve[256] < curve[128]);
    }
}

TEST_CASE("approximate kernels keep the identity and stay close to the exact run") {
    const LogGaborBank bank(BankParams{}, 64);
    const auto img = natural(64, 5);
    PursuitParams fast;
    fast.energy_threshold = 0.0;
    fast.max_edges = 300;
    const auto a = extract(img, bank, fast);
    const auto formula = energy_curve(a, fast.alpha);
    const auto measured = measured_energy_curve(a);
    for (std::size_t k = 0; k < formula.size(); ++k) CHECK(std::abs(formula[k] - measured[k]) < 1e-6);
    const auto b = extract(img, bank, exact_params(0.8, 300));
    CHECK(std::abs(formula.back() - energy_curve(b, 0.8).back()) < 0.01);
}

TEST_CASE("JSON round trip") {
    const LogGaborBank bank(BankParams{}, 32);
    const auto edges = extract(testing::random_image(32, 12), bank, exact_params(0.7, 40));
    const auto text = edges_to_json(edges);
    const auto back = edges_from_json(text);
    CHECK(edges_to_json(back) == text);
    CHECK(back.size() == edges.size());
    CHECK(back.bank_params == edges.bank_params);
    for (std::size_t i = 0; i < edges.size(); ++i) {
        CHECK(back.edges[i].address == edges.edges[i].address);
        CHECK(back.edges[i].coeff == edges.edges[i].coeff);
    }
    const auto dir = testing::scratch_dir("pursuit_json");
    save_edges(dir / "e.json", edges);
    CHECK(edges_to_json(load_edges(dir / "e.json")) == text);
    CHECK_THROWS(edges_from_json("{not json"));
    CHECK_THROWS(edges_from_json(R"({"header": {"version": 99}, "edges": []})"));
    CHECK_THROWS(load_edges(dir / "missing.json"));
}

TEST_CASE("pursuit objects share banks and stop when exhausted") {
    const LogGaborBank bank(reduced(), 16);
    const auto img = synthesize_atom(bank, bank.address(3), 1.0);
    Pursuit p(img, bank, exact_params(1.0, 10));
    int accepted = 0;
    double change = 0.0;
    p.on_accept([&](Pursuit&, const Edge&, double d) {
        ++accepted;
        change += d;
    });
    p.run();
    CHECK(accepted == p.steps_taken());
    CHECK(change == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(p.done());
}

}
