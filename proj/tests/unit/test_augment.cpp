#include <doctest.h>

#include <cmath>
#include <numeric>

#include "bioembed/errors.hpp"
#include "bioembed/mixup.hpp"
#include "support.hpp"

using namespace bioembed;

TEST_CASE("no mixing when n = 0") {
    auto rng = stream(1, "mix");
    for (int i = 0; i < 100; ++i) {
        const auto spec = sample_mixture_spec({0, 91.3, 100.0, 1.0}, rng);
        CHECK(spec.components == 1);
        CHECK(spec.weights == std::vector<double>{1.0});
    }
}

TEST_CASE("component count and weight statistics") {
    const MixupConfig cfg{2, 91.3, 100.0, 1.0};
    auto rng = stream(2, "mix");
    const int draws = 100000;
    double sum = 0.0, sum_sq = 0.0;
    std::map<int, std::pair<std::vector<double>, int>> weights_by_n;
    for (int i = 0; i < draws; ++i) {
        const auto spec = sample_mixture_spec(cfg, rng);
        REQUIRE(spec.components >= 1);
        REQUIRE(spec.components <= 3);
        REQUIRE(static_cast<int>(spec.weights.size()) == spec.components);
        CHECK(std::abs(std::accumulate(spec.weights.begin(), spec.weights.end(), 0.0) - 1.0) <= 1e-12);
        const double k = spec.components - 1;
        sum += k;
        sum_sq += k * k;
        auto& acc = weights_by_n[spec.components];
        if (acc.first.empty()) acc.first.assign(spec.weights.size(), 0.0);
        for (std::size_t j = 0; j < spec.weights.size(); ++j) acc.first[j] += spec.weights[j];
        ++acc.second;
    }
    // Beta-binomial moments.
    const double a = 91.3, b = 100.0, n = 2.0;
    const double mean = n * a / (a + b);
    const double var = n * a * b * (a + b + n) / ((a + b) * (a + b) * (a + b + 1));
    const double se = std::sqrt(var / draws);
    CHECK(std::abs(sum / draws - mean) < 3 * se);
    CHECK(std::abs(sum_sq / draws - sum * sum / draws / draws - var) < 0.05 * var);

    // Symmetric Dirichlet(omega = 1) on N coordinates: mean 1/N, variance (N-1)/(N^2 (N+1)).
    for (const auto& [components, acc] : weights_by_n) {
        if (components == 1) continue;
        const double N = components;
        const double se_w = std::sqrt((N - 1) / (N * N * (N + 1)) / acc.second);
        for (double total : acc.first) CHECK(std::abs(total / acc.second - 1.0 / N) < 3 * se_w);
    }
}

TEST_CASE("mixup config validation") {
    auto rng = stream(3, "mix");
    CHECK_THROWS_AS(sample_mixture_spec({-1, 1.0, 1.0, 1.0}, rng), ValidationError);
    CHECK_THROWS_AS(sample_mixture_spec({2, 0.0, 1.0, 1.0}, rng), ValidationError);
    CHECK_THROWS_AS(sample_mixture_spec({2, 1.0, 1.0, -1.0}, rng), ValidationError);
}

TEST_CASE("mix_signals") {
    auto rng = stream(4, "mix");
    const auto x = testsupport::white_noise(1000, 0.5, rng);
    CHECK(mix_signals({x}, {1.0}) == x);

    const auto doubled = mix_signals({x, x}, {0.5, 0.5});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(doubled[i] == doctest::Approx(x[i] * std::sqrt(2.0)).epsilon(1e-6));

    const auto y = testsupport::white_noise(1000, 0.5, rng);
    const auto z = testsupport::white_noise(1000, 0.5, rng);
    CHECK(mix_signals({x, y, z}, {0.0, 1.0, 0.0}) == y);

    const auto a = mix_signals({x, y, z}, {0.2, 0.3, 0.5});
    const auto b = mix_signals({z, x, y}, {0.5, 0.2, 0.3});
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-6));

    CHECK_THROWS_AS(mix_signals({x, std::vector<float>(10)}, {0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(mix_signals({x, y}, {1.0}), ValidationError);
}

TEST_CASE("mixed independent unit-RMS noise keeps unit RMS") {
    auto rng = stream(5, "mix");
    const MixupConfig cfg{4, 1.0, 1.0, 1.0};
    for (int trial = 0; trial < 50; ++trial) {
        auto spec = sample_mixture_spec(cfg, rng);
        std::vector<std::vector<float>> parts;
        for (int i = 0; i < spec.components; ++i) parts.push_back(testsupport::white_noise(160000, 1.0, rng));
        CHECK(std::abs(testsupport::rms(mix_signals(parts, spec.weights)) - 1.0) < 0.05);
    }
}

TEST_CASE("merge_targets is a union") {
    const LabelVocabulary vocab({"a", "b", "c"});
    CHECK(merge_targets({{"a"}}, vocab) == std::vector<int>{1, 0, 0});
    CHECK(merge_targets({{"a"}, {"a", "b"}}, vocab) == std::vector<int>{1, 1, 0});
    CHECK(merge_targets({{"a"}, {"b"}, {"c"}}, vocab) == std::vector<int>{1, 1, 1});
    CHECK_THROWS_AS(merge_targets({{"zzz"}}, vocab), ValidationError);
}
