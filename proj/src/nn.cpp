#include "fedsup/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "fedsup/binio.hpp"
#include "fedsup/kernels.hpp"

namespace fedsup {

LayerSpec LayerSpec::conv2d(int kh, int kw, int oc) {
    LayerSpec l{LayerKind::conv2d};
    l.kernel_h = kh;
    l.kernel_w = kw;
    l.out_channels = oc;
    return l;
}
LayerSpec LayerSpec::maxpool2d(int pool) {
    LayerSpec l{LayerKind::maxpool2d};
    l.pool = pool;
    return l;
}
LayerSpec LayerSpec::dense(int units) {
    LayerSpec l{LayerKind::dense};
    l.units = units;
    return l;
}
LayerSpec LayerSpec::relu() { return LayerSpec{LayerKind::relu}; }
LayerSpec LayerSpec::softmax() { return LayerSpec{LayerKind::softmax}; }
LayerSpec LayerSpec::dropout(float rate) {
    LayerSpec l{LayerKind::dropout};
    l.rate = rate;
    return l;
}
LayerSpec LayerSpec::flatten() { return LayerSpec{LayerKind::flatten}; }

std::vector<ActivationShape> infer_shapes(const NetworkSpec& spec) {
    if (spec.input_h < 1 || spec.input_w < 1 || spec.input_c < 1)
        throw std::invalid_argument("network: invalid input shape");
    if (spec.num_classes < 1)
        throw std::invalid_argument("network: num_classes must be positive");
    if (spec.layers.empty())
        throw std::invalid_argument("network: no layers");

    std::vector<ActivationShape> shapes;
    shapes.reserve(spec.layers.size());
    ActivationShape cur{spec.input_h, spec.input_w, spec.input_c, false};

    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const std::string where = "layer " + std::to_string(i);
        switch (l.kind) {
            case LayerKind::conv2d: {
                if (l.kernel_h < 1 || l.kernel_w < 1 || l.out_channels < 1)
                    throw std::invalid_argument(where + ": conv kernel dims and channels must be >= 1");
                if (cur.flat) throw std::invalid_argument(where + ": conv2d needs a spatial input");
                if (cur.h < l.kernel_h || cur.w < l.kernel_w)
                    throw std::invalid_argument(where + ": conv kernel larger than input");
                cur = {cur.h - l.kernel_h + 1, cur.w - l.kernel_w + 1, l.out_channels, false};
                break;
            }
            case LayerKind::maxpool2d: {
                if (l.pool < 1) throw std::invalid_argument(where + ": pool size must be >= 1");
                if (cur.flat) throw std::invalid_argument(where + ": maxpool2d needs a spatial input");
                if (cur.h < l.pool || cur.w < l.pool)
                    throw std::invalid_argument(where + ": pool window larger than input");
                cur = {(cur.h - l.pool) / l.pool + 1, (cur.w - l.pool) / l.pool + 1, cur.c, false};
                break;
            }
            case LayerKind::dense: {
                if (l.units < 1) throw std::invalid_argument(where + ": dense units must be >= 1");
                if (!cur.flat) throw std::invalid_argument(where + ": dense needs a flat input (add flatten)");
                cur = {0, 0, l.units, true};
                break;
            }
            case LayerKind::relu:
            case LayerKind::dropout: {
                if (l.kind == LayerKind::dropout && !(l.rate >= 0.0f && l.rate < 1.0f))
                    throw std::invalid_argument(where + ": dropout rate must be in [0,1)");
                break;  // shape preserved
            }
            case LayerKind::flatten: {
                cur = {0, 0, cur.units(), true};
                break;
            }
            case LayerKind::softmax: {
                if (!cur.flat) throw std::invalid_argument(where + ": softmax needs a flat input");
                if (i + 1 != spec.layers.size())
                    throw std::invalid_argument(where + ": softmax must be the final layer");
                if (cur.units() != spec.num_classes)
                    throw std::invalid_argument(where + ": softmax width " + std::to_string(cur.units()) +
                                                " != num_classes " + std::to_string(spec.num_classes));
                break;
            }
        }
        shapes.push_back(cur);
    }
    if (spec.layers.back().kind != LayerKind::softmax)
        throw std::invalid_argument("network: final layer must be softmax");
    return shapes;
}

void validate(const NetworkSpec& spec) { (void)infer_shapes(spec); }

std::int64_t ModelParams::param_count() const {
    std::int64_t n = 0;
    for (const auto& e : entries) n += e.weight.size() + e.bias.size();
    return n;
}

NetworkSpec build_landmark_net(int input_h, int input_w, int input_c,
                               float conv_dropout, float dense_dropout) {
    NetworkSpec spec;
    spec.input_h = input_h;
    spec.input_w = input_w;
    spec.input_c = input_c;
    spec.num_classes = 10;
    spec.layers = {
        LayerSpec::conv2d(3, 3, 32),  LayerSpec::relu(),
        LayerSpec::maxpool2d(2),      LayerSpec::dropout(conv_dropout),
        LayerSpec::conv2d(3, 3, 64),  LayerSpec::relu(),
        LayerSpec::maxpool2d(2),
        LayerSpec::conv2d(2, 2, 128), LayerSpec::relu(),
        LayerSpec::flatten(),
        LayerSpec::dense(1024),       LayerSpec::relu(),
        LayerSpec::dropout(dense_dropout),
        LayerSpec::dense(1024),       LayerSpec::relu(),
        LayerSpec::dropout(dense_dropout),
        LayerSpec::dense(10),         LayerSpec::softmax(),
    };
    validate(spec);
    return spec;
}

NetworkSpec build_blink_net(int input_h, int input_w, int input_c,
                            float conv_dropout, float dense_dropout) {
    NetworkSpec spec;
    spec.input_h = input_h;
    spec.input_w = input_w;
    spec.input_c = input_c;
    spec.num_classes = 2;
    spec.layers = {
        LayerSpec::conv2d(3, 3, 32), LayerSpec::relu(),
        LayerSpec::maxpool2d(2),     LayerSpec::dropout(conv_dropout),
        LayerSpec::conv2d(3, 3, 64), LayerSpec::relu(),
        LayerSpec::maxpool2d(2),
        LayerSpec::flatten(),
        LayerSpec::dense(128),       LayerSpec::relu(),
        LayerSpec::dropout(dense_dropout),
        LayerSpec::dense(2),         LayerSpec::softmax(),
    };
    validate(spec);
    return spec;
}

ModelParams init_params(const NetworkSpec& spec, RngStream rng) {
    const auto shapes = infer_shapes(spec);
    ModelParams params;
    ActivationShape in{spec.input_h, spec.input_w, spec.input_c, false};
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (l.kind == LayerKind::conv2d) {
            const int fan_in = l.kernel_h * l.kernel_w * in.c;
            const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
            Tensor w = Tensor::zeros({l.kernel_h, l.kernel_w, in.c, l.out_channels});
            for (auto& v : w.data) v = stddev * rng.next_normal();
            Tensor b = Tensor::zeros({l.out_channels});
            params.entries.push_back({static_cast<int>(i), std::move(w), std::move(b)});
        } else if (l.kind == LayerKind::dense) {
            const int fan_in = in.units();
            const float stddev = std::sqrt(2.0f / static_cast<float>(fan_in));
            Tensor w = Tensor::zeros({fan_in, l.units});
            for (auto& v : w.data) v = stddev * rng.next_normal();
            Tensor b = Tensor::zeros({l.units});
            params.entries.push_back({static_cast<int>(i), std::move(w), std::move(b)});
        }
        in = shapes[i];
    }
    return params;
}

namespace {

struct Trace {
    // acts[0] is the input batch; acts[i+1] the output of layer i.
    std::vector<Tensor> acts;
    std::vector<std::vector<std::int32_t>> pool_argmax;
    std::vector<std::vector<float>> dropout_mask;  // 0 or 1/(1-rate)
};

// Positions of the parameter entry for each layer, -1 when parameterless.
std::vector<int> param_positions(const NetworkSpec& spec, const ModelParams& params) {
    std::vector<int> pos(spec.layers.size(), -1);
    for (std::size_t e = 0; e < params.entries.size(); ++e) {
        const int layer = params.entries[e].layer;
        if (layer < 0 || layer >= static_cast<int>(spec.layers.size()))
            throw std::invalid_argument("params: entry references layer " + std::to_string(layer));
        pos[static_cast<std::size_t>(layer)] = static_cast<int>(e);
    }
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerKind k = spec.layers[i].kind;
        const bool needs = (k == LayerKind::conv2d || k == LayerKind::dense);
        if (needs && pos[i] < 0)
            throw std::invalid_argument("params: missing entry for layer " + std::to_string(i));
    }
    return pos;
}

void check_param_shapes(const NetworkSpec& spec, const ModelParams& params) {
    const auto shapes = infer_shapes(spec);
    ActivationShape in{spec.input_h, spec.input_w, spec.input_c, false};
    const auto pos = param_positions(spec, params);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (pos[i] >= 0) {
            const ParamEntry& e = params.entries[static_cast<std::size_t>(pos[i])];
            std::vector<int> want_w, want_b;
            if (l.kind == LayerKind::conv2d) {
                want_w = {l.kernel_h, l.kernel_w, in.c, l.out_channels};
                want_b = {l.out_channels};
            } else {
                want_w = {in.units(), l.units};
                want_b = {l.units};
            }
            if (e.weight.shape != want_w || e.bias.shape != want_b)
                throw std::invalid_argument("params: layer " + std::to_string(i) + " expects weight " +
                                            shape_to_string(want_w) + ", got " +
                                            shape_to_string(e.weight.shape));
        }
        in = shapes[i];
    }
}

Tensor forward_impl(const NetworkSpec& spec, const ModelParams& params,
                    const Tensor& batch, bool dropout_enabled, RngStream& rng,
                    Trace* trace) {
    const auto shapes = infer_shapes(spec);
    check_param_shapes(spec, params);
    const auto pos = param_positions(spec, params);

    if (batch.shape.size() != 4 || batch.shape[1] != spec.input_h ||
        batch.shape[2] != spec.input_w || batch.shape[3] != spec.input_c)
        throw std::invalid_argument("forward: batch shape " + shape_to_string(batch.shape) +
                                    " does not match network input (B," +
                                    std::to_string(spec.input_h) + "," + std::to_string(spec.input_w) +
                                    "," + std::to_string(spec.input_c) + ")");
    const int B = batch.shape[0];

    if (trace) {
        trace->acts.clear();
        trace->pool_argmax.assign(spec.layers.size(), {});
        trace->dropout_mask.assign(spec.layers.size(), {});
        trace->acts.reserve(spec.layers.size() + 1);
        trace->acts.push_back(batch);
    }

    Tensor cur = batch;
    ActivationShape in{spec.input_h, spec.input_w, spec.input_c, false};

    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        const ActivationShape& out_shape = shapes[i];
        Tensor out;
        switch (l.kind) {
            case LayerKind::conv2d: {
                const ParamEntry& e = params.entries[static_cast<std::size_t>(pos[i])];
                kernels::Conv2dShape ks{B, in.h, in.w, in.c, l.kernel_h, l.kernel_w, l.out_channels};
                out = Tensor::zeros({B, out_shape.h, out_shape.w, out_shape.c});
                kernels::conv2d_forward(cur.data.data(), e.weight.data.data(),
                                        e.bias.data.data(), out.data.data(), ks);
                break;
            }
            case LayerKind::maxpool2d: {
                kernels::Pool2dShape ps{B, in.h, in.w, in.c, l.pool};
                out = Tensor::zeros({B, out_shape.h, out_shape.w, out_shape.c});
                std::vector<std::int32_t> argmax(out.data.size());
                kernels::maxpool_forward(cur.data.data(), out.data.data(), argmax.data(), ps);
                if (trace) trace->pool_argmax[i] = std::move(argmax);
                break;
            }
            case LayerKind::dense: {
                const ParamEntry& e = params.entries[static_cast<std::size_t>(pos[i])];
                kernels::DenseShape ds{B, in.units(), l.units};
                out = Tensor::zeros({B, l.units});
                kernels::dense_forward(cur.data.data(), e.weight.data.data(),
                                       e.bias.data.data(), out.data.data(), ds);
                break;
            }
            case LayerKind::relu: {
                out = cur;
                for (auto& v : out.data) v = v > 0.0f ? v : 0.0f;
                break;
            }
            case LayerKind::dropout: {
                out = cur;
                if (dropout_enabled && l.rate > 0.0f) {
                    const float keep = 1.0f - l.rate;
                    const float scale = 1.0f / keep;
                    std::vector<float> mask(out.data.size());
                    for (std::size_t k = 0; k < mask.size(); ++k)
                        mask[k] = rng.next_float() < keep ? scale : 0.0f;
                    for (std::size_t k = 0; k < mask.size(); ++k) out.data[k] *= mask[k];
                    if (trace) trace->dropout_mask[i] = std::move(mask);
                }
                break;
            }
            case LayerKind::flatten: {
                out = Tensor({B, out_shape.units()}, cur.data);
                break;
            }
            case LayerKind::softmax: {
                out = Tensor::zeros({B, out_shape.units()});
                kernels::softmax_rows(cur.data.data(), out.data.data(), B, out_shape.units());
                break;
            }
        }
        cur = std::move(out);
        if (trace) trace->acts.push_back(cur);
        in = out_shape;
    }
    return cur;
}

ModelParams zeros_like(const ModelParams& params) {
    ModelParams z;
    z.entries.reserve(params.entries.size());
    for (const auto& e : params.entries)
        z.entries.push_back({e.layer, Tensor::zeros(e.weight.shape), Tensor::zeros(e.bias.shape)});
    return z;
}

}  // namespace

Tensor forward(const NetworkSpec& spec, const ModelParams& params,
               const Tensor& batch, bool dropout_enabled, RngStream& rng) {
    return forward_impl(spec, params, batch, dropout_enabled, rng, nullptr);
}

LossGrads loss_and_grads(const NetworkSpec& spec, const ModelParams& params,
                         const Tensor& batch, const std::vector<int>& labels,
                         RngStream& rng) {
    const int B = batch.shape.empty() ? 0 : batch.shape[0];
    if (static_cast<int>(labels.size()) != B)
        throw std::invalid_argument("loss_and_grads: labels size != batch size");
    for (int lbl : labels)
        if (lbl < 0 || lbl >= spec.num_classes)
            throw std::invalid_argument("loss_and_grads: label " + std::to_string(lbl) +
                                        " outside [0," + std::to_string(spec.num_classes) + ")");

    Trace trace;
    const Tensor probs = forward_impl(spec, params, batch, /*dropout_enabled=*/true, rng, &trace);
    const int C = spec.num_classes;

    double loss_acc = 0.0;
    for (int b = 0; b < B; ++b) {
        const float p = probs.data[static_cast<std::size_t>(b) * C + labels[static_cast<std::size_t>(b)]];
        loss_acc -= std::log(static_cast<double>(std::max(p, 1e-30f)));
    }
    const float loss = static_cast<float>(loss_acc / B);

    ModelParams grads = zeros_like(params);
    const auto pos = param_positions(spec, params);
    const auto shapes = infer_shapes(spec);

    // Softmax + cross-entropy gradient in one step: (p - onehot)/B.
    std::vector<float> dcur(probs.data.size());
    const float inv_b = 1.0f / static_cast<float>(B);
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const std::size_t k = static_cast<std::size_t>(b) * C + c;
            dcur[k] = (probs.data[k] - (labels[static_cast<std::size_t>(b)] == c ? 1.0f : 0.0f)) * inv_b;
        }

    for (int i = static_cast<int>(spec.layers.size()) - 1; i >= 0; --i) {
        const LayerSpec& l = spec.layers[i];
        const Tensor& input = trace.acts[static_cast<std::size_t>(i)];
        const ActivationShape in_shape =
            i == 0 ? ActivationShape{spec.input_h, spec.input_w, spec.input_c, false}
                   : shapes[static_cast<std::size_t>(i - 1)];
        std::vector<float> dprev;
        switch (l.kind) {
            case LayerKind::softmax: {
                // handled jointly with the loss above
                dprev = std::move(dcur);
                break;
            }
            case LayerKind::conv2d: {
                ParamEntry& g = grads.entries[static_cast<std::size_t>(pos[static_cast<std::size_t>(i)])];
                const ParamEntry& e = params.entries[static_cast<std::size_t>(pos[static_cast<std::size_t>(i)])];
                kernels::Conv2dShape ks{B, in_shape.h, in_shape.w, in_shape.c,
                                        l.kernel_h, l.kernel_w, l.out_channels};
                kernels::conv2d_backward_params(input.data.data(), dcur.data(),
                                                g.weight.data.data(), g.bias.data.data(), ks);
                dprev.resize(input.data.size());
                kernels::conv2d_backward_input(dcur.data(), e.weight.data.data(), dprev.data(), ks);
                break;
            }
            case LayerKind::dense: {
                ParamEntry& g = grads.entries[static_cast<std::size_t>(pos[static_cast<std::size_t>(i)])];
                const ParamEntry& e = params.entries[static_cast<std::size_t>(pos[static_cast<std::size_t>(i)])];
                kernels::DenseShape ds{B, in_shape.units(), l.units};
                kernels::dense_backward_params(input.data.data(), dcur.data(),
                                               g.weight.data.data(), g.bias.data.data(), ds);
                dprev.resize(input.data.size());
                kernels::dense_backward_input(dcur.data(), e.weight.data.data(), dprev.data(), ds);
                break;
            }
            case LayerKind::maxpool2d: {
                const auto& argmax = trace.pool_argmax[static_cast<std::size_t>(i)];
                dprev.resize(input.data.size());
                kernels::maxpool_backward(dcur.data(), argmax.data(), dprev.data(),
                                          static_cast<std::int64_t>(dprev.size()),
                                          static_cast<std::int64_t>(dcur.size()));
                break;
            }
            case LayerKind::relu: {
                dprev = std::move(dcur);
                for (std::size_t k = 0; k < dprev.size(); ++k)
                    if (input.data[k] <= 0.0f) dprev[k] = 0.0f;
                break;
            }
            case LayerKind::dropout: {
                dprev = std::move(dcur);
                const auto& mask = trace.dropout_mask[static_cast<std::size_t>(i)];
                if (!mask.empty())
                    for (std::size_t k = 0; k < dprev.size(); ++k) dprev[k] *= mask[k];
                break;
            }
            case LayerKind::flatten: {
                dprev = std::move(dcur);  // same storage, different view
                break;
            }
        }
        dcur = std::move(dprev);
    }

    return {loss, std::move(grads)};
}

ModelParams sgd_step(const ModelParams& params, const ModelParams& grads, float eta) {
    if (eta < 0.0f) throw std::invalid_argument("sgd_step: eta must be >= 0");
    if (params.entries.size() != grads.entries.size())
        throw std::invalid_argument("sgd_step: entry count mismatch");
    ModelParams out = params;
    for (std::size_t e = 0; e < out.entries.size(); ++e) {
        const ParamEntry& g = grads.entries[e];
        ParamEntry& p = out.entries[e];
        if (!p.weight.same_shape(g.weight) || !p.bias.same_shape(g.bias) || p.layer != g.layer)
            throw std::invalid_argument("sgd_step: shape mismatch at entry " + std::to_string(e));
        for (std::size_t k = 0; k < p.weight.data.size(); ++k)
            p.weight.data[k] -= eta * g.weight.data[k];
        for (std::size_t k = 0; k < p.bias.data.size(); ++k)
            p.bias.data[k] -= eta * g.bias.data[k];
    }
    return out;
}

Tensor pack_batch(const std::vector<Tensor>& images, std::size_t first, std::size_t count) {
    if (count == 0 || first + count > images.size())
        throw std::invalid_argument("pack_batch: bad range");
    const auto& s0 = images[first].shape;
    if (s0.size() != 3) throw std::invalid_argument("pack_batch: images must be (H,W,C)");
    Tensor batch = Tensor::zeros({static_cast<int>(count), s0[0], s0[1], s0[2]});
    const std::size_t stride = images[first].data.size();
    for (std::size_t i = 0; i < count; ++i) {
        const Tensor& img = images[first + i];
        if (img.shape != s0) throw std::invalid_argument("pack_batch: inconsistent image shapes");
        std::memcpy(batch.data.data() + i * stride, img.data.data(), stride * sizeof(float));
    }
    return batch;
}

float evaluate(const NetworkSpec& spec, const ModelParams& params,
               const std::vector<Tensor>& images, const std::vector<int>& labels) {
    if (images.empty()) throw std::invalid_argument("evaluate: empty dataset");
    if (images.size() != labels.size())
        throw std::invalid_argument("evaluate: images/labels size mismatch");
    RngStream unused(0);  // dropout disabled, never drawn from
    const int C = spec.num_classes;
    std::size_t correct = 0;
    constexpr std::size_t kEvalBatch = 256;
    for (std::size_t first = 0; first < images.size(); first += kEvalBatch) {
        const std::size_t count = std::min(kEvalBatch, images.size() - first);
        const Tensor probs = forward(spec, params, pack_batch(images, first, count),
                                     /*dropout_enabled=*/false, unused);
        for (std::size_t b = 0; b < count; ++b) {
            int best = 0;
            const float* row = probs.data.data() + b * C;
            for (int c = 1; c < C; ++c)
                if (row[c] > row[best]) best = c;
            if (best == labels[first + b]) ++correct;
        }
    }
    return static_cast<float>(static_cast<double>(correct) / images.size());
}

namespace {
constexpr char kParamsMagic[4] = {'F', 'S', 'U', 'P'};
constexpr std::uint32_t kParamsVersion = 1;

void write_tensor_record(BinWriter& w, int layer, const Tensor& t) {
    w.u32(static_cast<std::uint32_t>(layer));
    w.u32(static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) w.u32(static_cast<std::uint32_t>(d));
    w.f32_array(t.data.data(), t.data.size());
}

Tensor read_tensor_record(BinReader& r, std::uint32_t* layer_out) {
    *layer_out = r.u32("record layer index");
    const std::uint32_t rank = r.u32("record rank");
    if (rank == 0 || rank > 8) throw FormatError("implausible tensor rank", r.offset() - 4);
    std::vector<int> shape(rank);
    std::int64_t n = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
        const std::uint32_t d = r.u32("record dim");
        if (d == 0 || d > (1u << 28)) throw FormatError("implausible tensor dim", r.offset() - 4);
        shape[i] = static_cast<int>(d);
        n *= d;
        if (n > (static_cast<std::int64_t>(1) << 32)) throw FormatError("tensor too large", r.offset() - 4);
    }
    std::vector<float> data(static_cast<std::size_t>(n));
    r.f32_array(data.data(), data.size(), "record payload");
    return Tensor(std::move(shape), std::move(data));
}
}  // namespace

std::vector<std::uint8_t> serialize_params(const ModelParams& params) {
    BinWriter w;
    w.magic(kParamsMagic);
    w.u32(kParamsVersion);
    w.u32(static_cast<std::uint32_t>(params.entries.size() * 2));
    for (const auto& e : params.entries) {
        write_tensor_record(w, e.layer, e.weight);
        write_tensor_record(w, e.layer, e.bias);
    }
    return w.bytes();
}

ModelParams deserialize_params(const std::vector<std::uint8_t>& bytes) {
    BinReader r(bytes);
    r.expect_magic(kParamsMagic, "params header");
    const std::uint32_t version = r.u32("params version");
    if (version != kParamsVersion)
        throw FormatError("unsupported params version " + std::to_string(version), r.offset() - 4);
    const std::uint32_t records = r.u32("params record count");
    if (records % 2 != 0) throw FormatError("odd record count", r.offset() - 4);
    ModelParams params;
    params.entries.reserve(records / 2);
    for (std::uint32_t i = 0; i < records; i += 2) {
        std::uint32_t layer_w = 0, layer_b = 0;
        Tensor w = read_tensor_record(r, &layer_w);
        Tensor b = read_tensor_record(r, &layer_b);
        if (layer_w != layer_b)
            throw FormatError("weight/bias records disagree on layer index", r.offset());
        params.entries.push_back({static_cast<int>(layer_w), std::move(w), std::move(b)});
    }
    r.expect_end("params payload");
    return params;
}

void save_params(const ModelParams& params, const std::filesystem::path& path) {
    BinWriter w;
    const auto bytes = serialize_params(params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_params(bytes);
}

std::int64_t serialized_params_size(const ModelParams& params) {
    std::int64_t n = 12;  // magic + version + record count
    for (const auto& e : params.entries) {
        n += 8 + 4 * static_cast<std::int64_t>(e.weight.shape.size()) + 4 * e.weight.size();
        n += 8 + 4 * static_cast<std::int64_t>(e.bias.shape.size()) + 4 * e.bias.size();
    }
    return n;
}

}  // namespace fedsup
