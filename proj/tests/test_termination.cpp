#include "doctest.h"

#include <cmath>
#include <vector>

#include "mf/rng.hpp"
#include "mf/termination.hpp"

using namespace mf;

namespace {

TerminationDistribution random_distribution(SeededRng& rng, int max_samples, int channels) {
    int n = static_cast<int>(rng.next_u32() % (max_samples + 1));
    std::vector<double> alphas(n);
    for (double& a : alphas) a = rng.next_double();
    TerminationDistribution d = weights_from_alphas(alphas);
    d.features.resize(n);
    for (auto& f : d.features) {
        f.resize(channels);
        for (double& v : f) v = rng.uniform(-2, 2);
    }
    d.background.resize(channels);
    for (double& v : d.background) v = rng.uniform(-2, 2);
    return d;
}

}  // namespace

TEST_CASE("weights_from_alphas basic cases") {
    auto d1 = weights_from_alphas(std::vector<double>{1.0});
    REQUIRE(d1.weights.size() == 1);
    CHECK(d1.weights[0] == doctest::Approx(1.0));
    CHECK(d1.residual == doctest::Approx(0.0));

    auto d2 = weights_from_alphas(std::vector<double>{0.5, 0.5});
    CHECK(d2.weights[0] == doctest::Approx(0.5));
    CHECK(d2.weights[1] == doctest::Approx(0.25));
    CHECK(d2.residual == doctest::Approx(0.25));

    auto d3 = weights_from_alphas(std::vector<double>{});
    CHECK(d3.weights.empty());
    CHECK(d3.residual == doctest::Approx(1.0));
}

TEST_CASE("weights_from_alphas rejects out-of-range alphas") {
    CHECK_THROWS(weights_from_alphas(std::vector<double>{-0.1}));
    CHECK_THROWS(weights_from_alphas(std::vector<double>{1.1}));
}

TEST_CASE("weights normalize for random alphas") {
    SeededRng rng(100, 0);
    for (int trial = 0; trial < 200; ++trial) {
        int n = static_cast<int>(rng.next_u32() % 65);
        std::vector<double> alphas(n);
        for (double& a : alphas) a = rng.next_double();
        auto d = weights_from_alphas(alphas);
        double total = d.residual;
        for (double w : d.weights) {
            CHECK(w >= 0.0);
            total += w;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("raw moment worked cases") {
    TerminationDistribution d;
    d.weights = {0.5, 0.25};
    d.features = {{1.0}, {1.0}};
    d.residual = 0.25;
    d.background = {0.0};
    CHECK(raw_moment(d, 1, true)[0] == doctest::Approx(0.75));

    TerminationDistribution e;
    e.weights = {0.5, 0.5};
    e.features = {{0.0}, {1.0}};
    e.residual = 0.0;
    e.background = {0.0};
    CHECK(raw_moment(e, 1, true)[0] == doctest::Approx(0.5));
    CHECK(raw_moment(e, 2, true)[0] == doctest::Approx(0.5));
}

TEST_CASE("raw moment matches extended precision brute force") {
    SeededRng rng(101, 0);
    for (int trial = 0; trial < 200; ++trial) {
        auto d = random_distribution(rng, 16, 3);
        for (int j = 1; j <= 3; ++j) {
            auto got = raw_moment(d, j, true);
            for (int c = 0; c < 3; ++c) {
                long double acc = 0.0L;
                for (size_t i = 0; i < d.weights.size(); ++i) {
                    long double p = 1.0L;
                    for (int k = 0; k < j; ++k) p *= d.features[i][c];
                    acc += static_cast<long double>(d.weights[i]) * p;
                }
                long double pb = 1.0L;
                for (int k = 0; k < j; ++k) pb *= d.background[c];
                acc += static_cast<long double>(d.residual) * pb;
                CHECK(got[c] == doctest::Approx(static_cast<double>(acc)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("variance of constant features is zero") {
    TerminationDistribution d;
    d.weights = {0.3, 0.4};
    d.features = {{0.7, -1.0}, {0.7, -1.0}};
    d.residual = 0.3;
    d.background = {0.7, -1.0};
    auto v = variance(d, true);
    CHECK(v[0] == 0.0);
    CHECK(v[1] == 0.0);
}

TEST_CASE("variance worked cases") {
    TerminationDistribution e;
    e.weights = {0.5, 0.5};
    e.features = {{0.0}, {1.0}};
    e.residual = 0.0;
    e.background = {0.0};
    CHECK(variance(e, true)[0] == doctest::Approx(0.25));

    TerminationDistribution d;
    d.weights = {0.5, 0.25};
    d.features = {{0.0}, {1.0}};
    d.residual = 0.25;
    d.background = {1.0};
    CHECK(raw_moment(d, 1, true)[0] == doctest::Approx(0.5));
    CHECK(raw_moment(d, 2, true)[0] == doctest::Approx(0.5));
    CHECK(variance(d, true)[0] == doctest::Approx(0.25));
}

TEST_CASE("variance clamp window") {
    CHECK(clamp_variance(-1e-10) == 0.0);
    CHECK(clamp_variance(-1e-9) == 0.0);
    CHECK(clamp_variance(0.5) == 0.5);
    CHECK_THROWS(clamp_variance(-1e-6));
}

TEST_CASE("central moments: symmetry and constants") {
    TerminationDistribution sym;
    sym.weights = {0.5, 0.5};
    sym.features = {{-1.0}, {1.0}};
    sym.residual = 0.0;
    sym.background = {0.0};
    CHECK(central_moment(sym, 3, false)[0] == doctest::Approx(0.0).epsilon(1e-12));

    TerminationDistribution cst;
    cst.weights = {0.6};
    cst.features = {{0.4}};
    cst.residual = 0.4;
    cst.background = {0.4};
    for (int k = 2; k <= 4; ++k)
        CHECK(central_moment(cst, k, true)[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("central moment k=4 matches binomial expansion of raw moments") {
    SeededRng rng(102, 0);
    for (int trial = 0; trial < 100; ++trial) {
        auto d = random_distribution(rng, 16, 2);
        auto m = moments(d, 4, true);
        auto mu4 = central_moment(d, 4, true);
        for (int c = 0; c < 2; ++c) {
            double m1 = m.raw[0][c], m2 = m.raw[1][c], m3 = m.raw[2][c], m4 = m.raw[3][c];
            double expand = m4 - 4 * m3 * m1 + 6 * m2 * m1 * m1 - 3 * m1 * m1 * m1 * m1;
            CHECK(mu4[c] == doctest::Approx(expand).epsilon(1e-9).scale(1.0));
        }
    }
}

TEST_CASE("central moment 2 equals variance") {
    SeededRng rng(103, 0);
    for (int trial = 0; trial < 100; ++trial) {
        auto d = random_distribution(rng, 32, 3);
        auto v = variance(d, true);
        auto mu2 = central_moment(d, 2, true);
        for (int c = 0; c < 3; ++c) CHECK(mu2[c] == doctest::Approx(v[c]).epsilon(1e-9).scale(1.0));
    }
}

TEST_CASE("moments bundle is consistent with raw_moment") {
    SeededRng rng(104, 0);
    auto d = random_distribution(rng, 20, 2);
    auto m = moments(d, 3, true);
    REQUIRE(m.order() == 3);
    for (int j = 1; j <= 3; ++j) {
        auto rj = raw_moment(d, j, true);
        for (int c = 0; c < 2; ++c) CHECK(m.raw[j - 1][c] == rj[c]);
    }
    auto v = variance(d, true);
    for (int c = 0; c < 2; ++c) CHECK(m.variance[c] == v[c]);
}

TEST_CASE("sample_termination degenerate cases") {
    TerminationDistribution opaque;
    opaque.weights = {1.0};
    opaque.features = {{0.0}};
    opaque.residual = 0.0;
    opaque.background = {0.0};
    SeededRng rng(105, 0);
    for (int i = 0; i < 100; ++i) CHECK(sample_termination(opaque, rng) == 0);

    TerminationDistribution empty;
    empty.residual = 1.0;
    empty.background = {0.0};
    for (int i = 0; i < 100; ++i) CHECK(sample_termination(empty, rng) == kBackgroundIndex);
}

TEST_CASE("sample_termination frequencies match masses within 3 sigma") {
    TerminationDistribution d;
    d.weights = {0.5, 0.25};
    d.features = {{0.0}, {1.0}};
    d.residual = 0.25;
    d.background = {2.0};
    SeededRng rng(106, 0);
    const int n = 100000;
    int counts[3] = {0, 0, 0};
    for (int i = 0; i < n; ++i) {
        int idx = sample_termination(d, rng);
        ++counts[idx == kBackgroundIndex ? 2 : idx];
    }
    double masses[3] = {0.5, 0.25, 0.25};
    for (int k = 0; k < 3; ++k) {
        double p = masses[k];
        double sigma = std::sqrt(p * (1 - p) / n);
        CHECK(std::abs(counts[k] / double(n) - p) < 3 * sigma);
    }
}

TEST_CASE("validate rejects broken invariants") {
    TerminationDistribution d;
    d.weights = {0.5, 0.25};
    d.features = {{0.0}, {1.0}};
    d.residual = 0.25;
    d.background = {0.0};
    CHECK_NOTHROW(d.validate());

    TerminationDistribution neg = d;
    neg.weights[0] = -0.1;
    CHECK_THROWS(neg.validate());

    TerminationDistribution unnorm = d;
    unnorm.residual = 0.5;
    CHECK_THROWS(unnorm.validate());

    TerminationDistribution misaligned = d;
    misaligned.features.pop_back();
    CHECK_THROWS(misaligned.validate());
}
