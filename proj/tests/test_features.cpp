#include <doctest.h>

#include <cmath>

#include "fedsup/features.hpp"
#include "fedsup/rng.hpp"
#include "oracles.hpp"

using namespace fedsup;

TEST_CASE("gabor_kernel matches the closed-form formula per pixel") {
    GaborParams p;
    p.theta = 0.0;
    p.lambda = 4.0;
    p.sigma = 2.0;
    p.gamma = 0.5;
    p.psi = 0.0;
    p.size = 7;
    const Tensor k = gabor_kernel(p);

    // center pixel with psi = 0 is exactly exp(0) * cos(0) = 1
    CHECK(k.data[3 * 7 + 3] == 1.0f);

    // theta = 0, psi = 0: symmetric under y -> -y
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x)
            CHECK(k.data[static_cast<std::size_t>(y) * 7 + x] ==
                  k.data[static_cast<std::size_t>(6 - y) * 7 + x]);

    // direct per-pixel evaluation of the formula, independent arithmetic
    for (int y = -3; y <= 3; ++y)
        for (int x = -3; x <= 3; ++x) {
            const double xr = x * std::cos(p.theta) + y * std::sin(p.theta);
            const double yr = -x * std::sin(p.theta) + y * std::cos(p.theta);
            const double expected =
                std::exp(-(xr * xr + p.gamma * p.gamma * yr * yr) / (2.0 * p.sigma * p.sigma)) *
                std::cos(2.0 * 3.14159265358979323846 * xr / p.lambda + p.psi);
            CHECK(std::fabs(k.data[static_cast<std::size_t>(y + 3) * 7 + (x + 3)] - expected) <
                  1e-6);
        }

    // a rotated, phase-shifted kernel also matches the formula
    GaborParams q = p;
    q.theta = 1.1;
    q.psi = 0.7;
    q.gamma = 0.8;
    const Tensor kq = gabor_kernel(q);
    for (int y = -3; y <= 3; ++y)
        for (int x = -3; x <= 3; ++x) {
            const double xr = x * std::cos(q.theta) + y * std::sin(q.theta);
            const double yr = -x * std::sin(q.theta) + y * std::cos(q.theta);
            const double expected =
                std::exp(-(xr * xr + q.gamma * q.gamma * yr * yr) / (2.0 * q.sigma * q.sigma)) *
                std::cos(2.0 * 3.14159265358979323846 * xr / q.lambda + q.psi);
            CHECK(std::fabs(kq.data[static_cast<std::size_t>(y + 3) * 7 + (x + 3)] - expected) <
                  1e-6);
        }

    GaborParams bad = p;
    bad.size = 6;
    CHECK_THROWS_AS(gabor_kernel(bad), std::invalid_argument);
    bad = p;
    bad.lambda = 0.0;
    CHECK_THROWS_AS(gabor_kernel(bad), std::invalid_argument);
}

TEST_CASE("gabor_bank: channel count, DC rejection and conv oracle") {
    RngStream rng(5);
    Tensor image = Tensor::zeros({16, 16});
    for (auto& v : image.data) v = rng.next_float();

    // K=4, S=2 stacks 8 channels
    GaborBankParams p;
    p.orientations = 4;
    p.scales = 2;
    p.size = 7;
    const Tensor bank = gabor_bank(image, p);
    CHECK(bank.shape == std::vector<int>{10, 10, 8});

    // constant image with odd-phase kernels: responses vanish
    Tensor flat = Tensor::zeros({16, 16});
    for (auto& v : flat.data) v = 0.7f;
    GaborBankParams odd = p;
    odd.psi = 3.14159265358979323846 / 2.0;
    const Tensor zero_resp = gabor_bank(flat, odd);
    for (float v : zero_resp.data) CHECK(std::fabs(v) < 1e-5);

    // single-kernel bank equals the naive quadruple-loop convolution
    GaborBankParams single;
    single.orientations = 1;
    single.scales = 1;
    single.size = 7;
    const Tensor one = gabor_bank(image, single);
    GaborParams gp;
    gp.theta = 0.0;
    gp.lambda = single.base_lambda;
    gp.sigma = single.sigma_ratio * gp.lambda;
    gp.gamma = single.gamma;
    gp.psi = single.psi;
    gp.size = 7;
    const Tensor naive = oracle::naive_conv2d(image, gabor_kernel(gp));
    REQUIRE(one.shape[0] == naive.shape[0]);
    for (std::size_t i = 0; i < naive.data.size(); ++i)
        CHECK(std::fabs(one.data[i] - naive.data[i]) < 1e-5);

    // image smaller than the kernel is rejected
    Tensor small = Tensor::zeros({5, 5});
    CHECK_THROWS_AS(gabor_bank(small, p), std::invalid_argument);
}

TEST_CASE("gabor_bank distributes over image addition") {
    RngStream rng(6);
    Tensor a = Tensor::zeros({14, 14}), b = Tensor::zeros({14, 14}), sum = Tensor::zeros({14, 14});
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        a.data[i] = rng.next_float();
        b.data[i] = rng.next_float();
        sum.data[i] = a.data[i] + b.data[i];
    }
    GaborBankParams p;
    p.size = 7;
    const Tensor ra = gabor_bank(a, p), rb = gabor_bank(b, p), rsum = gabor_bank(sum, p);
    for (std::size_t i = 0; i < rsum.data.size(); ++i)
        CHECK(std::fabs(rsum.data[i] - (ra.data[i] + rb.data[i])) < 1e-4);
}

TEST_CASE("lbp_map codes") {
    // constant image: every neighbor >= center, code 255
    Tensor flat = Tensor::zeros({5, 5});
    for (auto& v : flat.data) v = 0.3f;
    const Tensor flat_codes = lbp_map(flat);
    CHECK(flat_codes.shape == std::vector<int>{3, 3});
    for (float c : flat_codes.data) CHECK(c == 255.0f);

    // center strictly above all neighbors: code 0
    Tensor peak = Tensor::zeros({3, 3});
    peak.data = {1, 2, 3, 4, 9, 6, 7, 8, 5};
    CHECK(lbp_map(peak).data[0] == 0.0f);

    // worked 3x3 patch: clockwise-from-top-left bits 00011110 = 30
    Tensor patch = Tensor::zeros({3, 3});
    patch.data = {1, 2, 3, 4, 5, 6, 7, 8, 9};
    CHECK(lbp_map(patch).data[0] == 30.0f);

    // codes stay in [0,255] and survive monotone intensity transforms
    RngStream rng(9);
    Tensor img = Tensor::zeros({8, 8});
    for (auto& v : img.data) v = rng.next_float();
    const Tensor base = lbp_map(img);
    Tensor warped = img;
    for (auto& v : warped.data) v = 3.0f * v * v * v + 0.5f * v + 1.0f;
    const Tensor warped_codes = lbp_map(warped);
    for (std::size_t i = 0; i < base.data.size(); ++i) {
        CHECK(base.data[i] >= 0.0f);
        CHECK(base.data[i] <= 255.0f);
        CHECK(base.data[i] == warped_codes.data[i]);
    }

    Tensor tiny = Tensor::zeros({2, 2});
    CHECK_THROWS_AS(lbp_map(tiny), std::invalid_argument);
}

TEST_CASE("perclos sliding windows") {
    const auto O = EyeState::open;
    const auto C = EyeState::closed;

    FrameStateSequence all_open{{O, O, O, O, O}, 30.0};
    for (double v : perclos(all_open, 3)) CHECK(v == 0.0);

    FrameStateSequence all_closed{{C, C, C, C}, 30.0};
    for (double v : perclos(all_closed, 2)) CHECK(v == 1.0);

    FrameStateSequence mixed{{C, O, O, C, C, O, O, O, O, O}, 10.0};
    const auto vals = perclos(mixed, 10);
    REQUIRE(vals.size() == 1);
    CHECK(vals[0] == 0.3);

    const auto sliding = perclos(mixed, 5);
    REQUIRE(sliding.size() == 6);
    CHECK(sliding[0] == 3.0 / 5.0);

    CHECK_THROWS_AS(perclos(mixed, 0), std::invalid_argument);
    CHECK_THROWS_AS(perclos(mixed, 11), std::invalid_argument);
    CHECK_THROWS_AS(perclos(FrameStateSequence{{}, 30.0}, 1), std::invalid_argument);
}

TEST_CASE("fatigue judgments") {
    CHECK(fatigue_judgment({0.1}, 0.4)[0] == FatigueState::alert);
    CHECK(fatigue_judgment({0.4}, 0.4)[0] == FatigueState::fatigued);  // inclusive boundary

    // raising the threshold never adds fatigued windows
    const std::vector<double> values = {0.05, 0.2, 0.35, 0.4, 0.6, 0.9};
    std::size_t prev = values.size() + 1;
    for (double thr : {0.1, 0.3, 0.5, 0.7}) {
        const auto states = fatigue_judgment(values, thr);
        std::size_t fatigued = 0;
        for (auto s : states)
            if (s == FatigueState::fatigued) ++fatigued;
        CHECK(fatigued <= prev);
        prev = fatigued;
    }
    CHECK_THROWS_AS(fatigue_judgment({0.5}, 0.0), std::invalid_argument);

    const auto O = EyeState::open;
    const auto C = EyeState::closed;
    FrameStateSequence seq{{O, C, C, C, O, C}, 30.0};
    CHECK(fatigue_judgment_consecutive(seq, 3));
    CHECK_FALSE(fatigue_judgment_consecutive(seq, 4));
}

TEST_CASE("texture_feature_map keeps the input shape") {
    RngStream rng(11);
    Tensor img = Tensor::zeros({24, 24, 1});
    for (auto& v : img.data) v = rng.next_float();
    const Tensor map = texture_feature_map(img);
    CHECK(map.shape == std::vector<int>{24, 24, 1});
    for (float v : map.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f + 1e-6f);
    }
}
