#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "fedsup/binio.hpp"
#include "fedsup/nn.hpp"
#include "oracles.hpp"

using namespace fedsup;

namespace {

// conv -> relu -> pool -> flatten -> dense -> softmax, 37 parameters
NetworkSpec micro_net() {
    NetworkSpec spec;
    spec.input_h = 6;
    spec.input_w = 6;
    spec.input_c = 1;
    spec.num_classes = 3;
    spec.layers = {LayerSpec::conv2d(2, 2, 2), LayerSpec::relu(),    LayerSpec::maxpool2d(2),
                   LayerSpec::flatten(),       LayerSpec::dense(3),  LayerSpec::softmax()};
    return spec;
}

// dense-only: flatten -> dense -> relu -> dense -> softmax
NetworkSpec micro_mlp() {
    NetworkSpec spec;
    spec.input_h = 3;
    spec.input_w = 3;
    spec.input_c = 1;
    spec.num_classes = 2;
    spec.layers = {LayerSpec::flatten(), LayerSpec::dense(5), LayerSpec::relu(),
                   LayerSpec::dense(2),  LayerSpec::softmax()};
    return spec;
}

Tensor random_batch(int b, const NetworkSpec& spec, RngStream& rng) {
    Tensor batch = Tensor::zeros({b, spec.input_h, spec.input_w, spec.input_c});
    for (auto& v : batch.data) v = rng.next_float();
    return batch;
}

ModelParams scaled_random_params(const NetworkSpec& spec, std::uint64_t seed, float scale) {
    ModelParams p = init_params(spec, RngStream(seed));
    for (auto& e : p.entries) {
        for (auto& v : e.weight.data) v *= scale;
        RngStream brng(seed ^ 0xabcdef);
        for (auto& v : e.bias.data) v = 0.1f * brng.next_normal();
    }
    return p;
}

}  // namespace

TEST_CASE("landmark net follows the table stack") {
    const NetworkSpec spec = build_landmark_net();
    // final dense layer has 10 units
    int last_dense_units = 0;
    int dropout_count = 0;
    for (const auto& l : spec.layers) {
        if (l.kind == LayerKind::dense) last_dense_units = l.units;
        if (l.kind == LayerKind::dropout) ++dropout_count;
    }
    CHECK(last_dense_units == 10);
    CHECK(dropout_count == 3);
    CHECK(spec.num_classes == 10);
    // shape inference succeeds for 32x32x1 and ends at 10 classes
    const auto shapes = infer_shapes(spec);
    CHECK(shapes.back().units() == 10);
}

TEST_CASE("blink net follows the table stack") {
    const NetworkSpec spec = build_blink_net();
    int last_dense_units = 0;
    int dropout_count = 0;
    for (const auto& l : spec.layers) {
        if (l.kind == LayerKind::dense) last_dense_units = l.units;
        if (l.kind == LayerKind::dropout) ++dropout_count;
    }
    CHECK(last_dense_units == 2);
    CHECK(dropout_count == 2);
    const auto shapes = infer_shapes(spec);  // 24x24x1 composes
    CHECK(shapes.back().units() == 2);
}

TEST_CASE("shape inference rejects bad stacks") {
    NetworkSpec spec = micro_net();
    spec.layers[0] = LayerSpec::conv2d(9, 9, 2);  // kernel larger than input
    CHECK_THROWS_AS(validate(spec), std::invalid_argument);

    spec = micro_net();
    spec.layers.back() = LayerSpec::dense(3);  // no final softmax
    CHECK_THROWS_AS(validate(spec), std::invalid_argument);

    spec = micro_net();
    spec.num_classes = 4;  // softmax width mismatch
    CHECK_THROWS_AS(validate(spec), std::invalid_argument);
}

TEST_CASE("init_params is deterministic with zero biases and He spread") {
    const NetworkSpec spec = build_blink_net();
    const ModelParams a = init_params(spec, RngStream(11));
    const ModelParams b = init_params(spec, RngStream(11));
    REQUIRE(a.entries.size() == b.entries.size());
    for (std::size_t e = 0; e < a.entries.size(); ++e) {
        CHECK(a.entries[e].weight.data == b.entries[e].weight.data);
        for (float v : a.entries[e].bias.data) CHECK(v == 0.0f);
    }

    // empirical std of a large dense weight tensor within 5% of sqrt(2/fan_in)
    const ParamEntry* big = nullptr;
    for (const auto& e : a.entries)
        if (e.weight.size() >= 10000) big = &e;
    REQUIRE(big != nullptr);
    const int fan_in = big->weight.shape[0];
    double mean = 0.0;
    for (float v : big->weight.data) mean += v;
    mean /= static_cast<double>(big->weight.size());
    double var = 0.0;
    for (float v : big->weight.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(big->weight.size() - 1);
    const double want = std::sqrt(2.0 / fan_in);
    CHECK(std::sqrt(var) == doctest::Approx(want).epsilon(0.05));
}

TEST_CASE("forward with zero params is uniform") {
    const NetworkSpec spec = micro_net();
    ModelParams zeros = init_params(spec, RngStream(1));
    for (auto& e : zeros.entries) {
        std::fill(e.weight.data.begin(), e.weight.data.end(), 0.0f);
        std::fill(e.bias.data.begin(), e.bias.data.end(), 0.0f);
    }
    RngStream rng(2);
    const Tensor batch = random_batch(4, spec, rng);
    RngStream fwd(3);
    const Tensor probs = forward(spec, zeros, batch, false, fwd);
    for (float p : probs.data) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
}

TEST_CASE("forward softmax rows sum to one with entries in (0,1)") {
    const NetworkSpec spec = micro_net();
    const ModelParams params = scaled_random_params(spec, 4, 1.0f);
    RngStream rng(5);
    const Tensor batch = random_batch(7, spec, rng);
    RngStream fwd(6);
    const Tensor probs = forward(spec, params, batch, false, fwd);
    for (int b = 0; b < 7; ++b) {
        double sum = 0.0;
        for (int c = 0; c < 3; ++c) {
            const float p = probs.data[static_cast<std::size_t>(b) * 3 + c];
            CHECK(p > 0.0f);
            CHECK(p < 1.0f);
            sum += p;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-5));
    }
}

TEST_CASE("dropout rate 0 enabled equals disabled; same stream repeats") {
    NetworkSpec spec = micro_net();
    spec.layers.insert(spec.layers.begin() + 3, LayerSpec::dropout(0.0f));
    const ModelParams params = scaled_random_params(spec, 7, 1.0f);
    RngStream rng(8);
    const Tensor batch = random_batch(3, spec, rng);

    RngStream r1(9), r2(9), r3(9);
    const Tensor on = forward(spec, params, batch, true, r1);
    const Tensor off = forward(spec, params, batch, false, r2);
    CHECK(on.data == off.data);

    // nonzero rate: same stream state gives identical outputs
    spec.layers[3] = LayerSpec::dropout(0.4f);
    RngStream r4(10), r5(10);
    const Tensor a = forward(spec, params, batch, true, r4);
    const Tensor b = forward(spec, params, batch, true, r5);
    CHECK(a.data == b.data);
}

TEST_CASE("dropout is unbiased under inverted scaling") {
    // net: flatten -> dropout -> softmax over (a, 0). The second logit stays
    // 0, so logit(p_0) recovers mask * a exactly; its average over 10 000
    // draws must come back to a.
    NetworkSpec spec;
    spec.input_h = 1;
    spec.input_w = 1;
    spec.input_c = 2;
    spec.num_classes = 2;
    spec.layers = {LayerSpec::flatten(), LayerSpec::dropout(0.3f), LayerSpec::softmax()};
    validate(spec);
    const ModelParams no_params;

    const float a = 1.5f;
    Tensor batch = Tensor::zeros({1, 1, 1, 2});
    batch.data = {a, 0.0f};

    RngStream rng(123);
    const int draws = 10000;
    double acc = 0.0;
    for (int d = 0; d < draws; ++d) {
        const Tensor probs = forward(spec, no_params, batch, true, rng);
        const double p0 = probs.data[0];
        acc += std::log(p0 / (1.0 - p0));
    }
    CHECK(acc / draws == doctest::Approx(a).epsilon(0.02));
}

TEST_CASE("loss of zero params on two classes is ln 2") {
    const NetworkSpec spec = micro_mlp();
    ModelParams zeros = init_params(spec, RngStream(1));
    for (auto& e : zeros.entries) {
        std::fill(e.weight.data.begin(), e.weight.data.end(), 0.0f);
        std::fill(e.bias.data.begin(), e.bias.data.end(), 0.0f);
    }
    RngStream rng(2);
    const Tensor batch = random_batch(6, spec, rng);
    RngStream fwd(3);
    const LossGrads lg = loss_and_grads(spec, zeros, batch, {0, 1, 0, 1, 0, 1}, fwd);
    CHECK(lg.loss == doctest::Approx(std::log(2.0)).epsilon(1e-5));
}

TEST_CASE("duplicating every sample leaves the mean loss unchanged") {
    const NetworkSpec spec = micro_mlp();
    const ModelParams params = scaled_random_params(spec, 21, 1.0f);
    RngStream rng(22);
    const Tensor batch = random_batch(3, spec, rng);
    const std::vector<int> labels = {0, 1, 1};

    Tensor doubled = Tensor::zeros({6, spec.input_h, spec.input_w, spec.input_c});
    const std::size_t n = batch.data.size();
    std::copy(batch.data.begin(), batch.data.end(), doubled.data.begin());
    std::copy(batch.data.begin(), batch.data.end(),
              doubled.data.begin() + static_cast<std::ptrdiff_t>(n));
    std::vector<int> labels2 = {0, 1, 1, 0, 1, 1};

    RngStream f1(5), f2(5);
    const float a = loss_and_grads(spec, params, batch, labels, f1).loss;
    const float b = loss_and_grads(spec, params, doubled, labels2, f2).loss;
    CHECK(a == doctest::Approx(b).epsilon(1e-6));
}

TEST_CASE("invalid labels and shape mismatches are rejected") {
    const NetworkSpec spec = micro_mlp();
    const ModelParams params = scaled_random_params(spec, 31, 1.0f);
    RngStream rng(32);
    const Tensor batch = random_batch(2, spec, rng);
    RngStream fwd(33);
    CHECK_THROWS_AS(loss_and_grads(spec, params, batch, {0, 2}, fwd), std::invalid_argument);
    CHECK_THROWS_AS(loss_and_grads(spec, params, batch, {0}, fwd), std::invalid_argument);

    Tensor bad = Tensor::zeros({2, spec.input_h + 1, spec.input_w, spec.input_c});
    CHECK_THROWS_AS(forward(spec, params, bad, false, fwd), std::invalid_argument);
}

TEST_CASE("analytic gradients match the double-precision FD oracle") {
    // spot check here; the acceptance suite runs the full 100 instances
    RngStream trial_rng(77);
    for (int trial = 0; trial < 10; ++trial) {
        const NetworkSpec spec = trial % 2 == 0 ? micro_net() : micro_mlp();
        const ModelParams params = scaled_random_params(spec, 100 + trial, 0.8f);
        Tensor batch = random_batch(2, spec, trial_rng);
        std::vector<int> labels(2);
        for (auto& l : labels) l = static_cast<int>(trial_rng.next_below(spec.num_classes));

        RngStream fwd(1);
        const LossGrads lg = loss_and_grads(spec, params, batch, labels, fwd);
        const ModelParams fd = oracle::ref_fd_grads(spec, params, batch, labels, 1e-3);

        for (std::size_t e = 0; e < lg.grads.entries.size(); ++e) {
            const auto check = [&](const Tensor& a, const Tensor& f) {
                for (std::size_t i = 0; i < a.data.size(); ++i) {
                    const double ga = a.data[i], gf = f.data[i];
                    const double err = std::fabs(ga - gf);
                    const double rel = err / std::max({std::fabs(ga), std::fabs(gf), 1e-12});
                    CHECK((rel < 1e-3 || err < 1e-6));
                }
            };
            check(lg.grads.entries[e].weight, fd.entries[e].weight);
            check(lg.grads.entries[e].bias, fd.entries[e].bias);
        }
    }
}

TEST_CASE("sgd_step arithmetic") {
    ModelParams p;
    p.entries.push_back({0, Tensor({1}, {1.0f}), Tensor({1}, {0.0f})});
    ModelParams g;
    g.entries.push_back({0, Tensor({1}, {0.5f}), Tensor({1}, {0.0f})});

    const ModelParams stepped = sgd_step(p, g, 0.1f);
    CHECK(stepped.entries[0].weight.data[0] == doctest::Approx(0.95f));

    const ModelParams frozen = sgd_step(p, g, 0.0f);
    CHECK(frozen.entries[0].weight.data[0] == 1.0f);

    // two steps with the same grads equal one step at twice the rate
    const ModelParams twice = sgd_step(sgd_step(p, g, 0.1f), g, 0.1f);
    const ModelParams doubled = sgd_step(p, g, 0.2f);
    CHECK(twice.entries[0].weight.data[0] ==
          doctest::Approx(doubled.entries[0].weight.data[0]).epsilon(1e-7));

    ModelParams bad = g;
    bad.entries[0].weight = Tensor({2}, {0.0f, 0.0f});
    CHECK_THROWS_AS(sgd_step(p, bad, 0.1f), std::invalid_argument);
}

TEST_CASE("evaluate: exact fractions, tie-break and order invariance") {
    const NetworkSpec spec = micro_mlp();
    ModelParams zeros = init_params(spec, RngStream(1));
    for (auto& e : zeros.entries) {
        std::fill(e.weight.data.begin(), e.weight.data.end(), 0.0f);
        std::fill(e.bias.data.begin(), e.bias.data.end(), 0.0f);
    }
    // balanced two-class set: uniform output ties to class 0, so exactly half match
    RngStream rng(3);
    std::vector<Tensor> images;
    std::vector<int> labels;
    for (int i = 0; i < 10; ++i) {
        Tensor img = Tensor::zeros({3, 3, 1});
        for (auto& v : img.data) v = rng.next_float();
        images.push_back(img);
        labels.push_back(i % 2);
    }
    CHECK(evaluate(spec, zeros, images, labels) == 0.5f);

    // permuting the samples does not change accuracy
    const ModelParams params = scaled_random_params(spec, 41, 1.0f);
    const float base = evaluate(spec, params, images, labels);
    std::vector<Tensor> shuffled_images;
    std::vector<int> shuffled_labels;
    const std::vector<int> perm = {7, 2, 9, 0, 4, 1, 8, 3, 6, 5};
    for (int idx : perm) {
        shuffled_images.push_back(images[static_cast<std::size_t>(idx)]);
        shuffled_labels.push_back(labels[static_cast<std::size_t>(idx)]);
    }
    CHECK(evaluate(spec, params, shuffled_images, shuffled_labels) == base);

    // all-correct set scores 1.0
    std::vector<int> predicted;
    for (const auto& img : images) {
        RngStream f(0);
        const Tensor p = forward(spec, params, pack_batch({img}, 0, 1), false, f);
        predicted.push_back(p.data[0] >= p.data[1] ? 0 : 1);
    }
    CHECK(evaluate(spec, params, images, predicted) == 1.0f);

    CHECK_THROWS_AS(evaluate(spec, params, {}, {}), std::invalid_argument);
}

TEST_CASE("params serialization round-trips and reports corruption offsets") {
    const NetworkSpec spec = micro_net();
    const ModelParams params = init_params(spec, RngStream(5));
    const auto bytes = serialize_params(params);
    CHECK(static_cast<std::int64_t>(bytes.size()) == serialized_params_size(params));

    const ModelParams back = deserialize_params(bytes);
    REQUIRE(back.entries.size() == params.entries.size());
    for (std::size_t e = 0; e < back.entries.size(); ++e) {
        CHECK(back.entries[e].layer == params.entries[e].layer);
        CHECK(back.entries[e].weight.data == params.entries[e].weight.data);
        CHECK(back.entries[e].bias.data == params.entries[e].bias.data);
    }

    // truncation is a FormatError, not a crash
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + 17);
    CHECK_THROWS_AS(deserialize_params(cut), FormatError);

    std::vector<std::uint8_t> wrong = bytes;
    wrong[0] = 'X';
    CHECK_THROWS_AS(deserialize_params(wrong), FormatError);

    const auto tmp = std::filesystem::temp_directory_path() / "fedsup_params_test.fsup";
    save_params(params, tmp);
    const ModelParams loaded = load_params(tmp);
    CHECK(loaded.entries.size() == params.entries.size());
    std::filesystem::remove(tmp);
}
