#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "fedsup/rng.hpp"
#include "fedsup/tensor.hpp"

// Minimal differentiable network core: the layer set needed by the two eye
// CNNs (valid stride-1 convolutions, max pooling with stride == window,
// dense, ReLU, inverted dropout, softmax), cross-entropy loss with manual
// backpropagation, and plain SGD.
namespace fedsup {

enum class LayerKind { conv2d, maxpool2d, dense, relu, softmax, dropout, flatten };

struct LayerSpec {
    LayerKind kind;
    int kernel_h = 0, kernel_w = 0, out_channels = 0;  // conv2d
    int pool = 0;                                      // maxpool2d
    int units = 0;                                     // dense
    float rate = 0.0f;                                 // dropout, in [0,1)

    static LayerSpec conv2d(int kh, int kw, int oc);
    static LayerSpec maxpool2d(int pool);
    static LayerSpec dense(int units);
    static LayerSpec relu();
    static LayerSpec softmax();
    static LayerSpec dropout(float rate);
    static LayerSpec flatten();
};

struct NetworkSpec {
    int input_h = 0, input_w = 0, input_c = 0;
    int num_classes = 0;
    std::vector<LayerSpec> layers;
};

// Shape of one activation: spatial (h,w,c) until a flatten, then flat units.
struct ActivationShape {
    int h = 0, w = 0, c = 0;
    bool flat = false;
    int units() const { return flat ? c : h * w * c; }
};

// Per-layer output shapes (index i = output of layer i). Throws
// std::invalid_argument when consecutive layers do not compose or the final
// layer is not a softmax over num_classes.
std::vector<ActivationShape> infer_shapes(const NetworkSpec& spec);
void validate(const NetworkSpec& spec);

struct ParamEntry {
    int layer = 0;  // index into NetworkSpec::layers
    Tensor weight;
    Tensor bias;
};

struct ModelParams {
    std::vector<ParamEntry> entries;

    std::int64_t param_count() const;
};

// Table II stack: the 10-way eye-landmark CNN.
NetworkSpec build_landmark_net(int input_h = 32, int input_w = 32, int input_c = 1,
                               float conv_dropout = 0.25f, float dense_dropout = 0.5f);
// Table III stack: the 2-way eye-state CNN.
NetworkSpec build_blink_net(int input_h = 24, int input_w = 24, int input_c = 1,
                            float conv_dropout = 0.25f, float dense_dropout = 0.5f);

// He fan-in normal weights, zero biases. Deterministic per stream.
ModelParams init_params(const NetworkSpec& spec, RngStream rng);

// Batch forward pass. batch is (B,H,W,C); returns (B,num_classes)
// probabilities. With dropout enabled each dropout layer applies an
// independent 0/1 mask with keep probability (1-rate) and scales survivors
// by 1/(1-rate); disabled, it is the identity.
Tensor forward(const NetworkSpec& spec, const ModelParams& params,
               const Tensor& batch, bool dropout_enabled, RngStream& rng);

struct LossGrads {
    float loss = 0.0f;
    ModelParams grads;
};

// Mean cross-entropy over the batch, dropout enabled (training mode), plus
// gradients for every parameter tensor.
LossGrads loss_and_grads(const NetworkSpec& spec, const ModelParams& params,
                         const Tensor& batch, const std::vector<int>& labels,
                         RngStream& rng);

// params - eta * grads, element-wise.
ModelParams sgd_step(const ModelParams& params, const ModelParams& grads, float eta);

// Fraction of samples whose argmax prediction (dropout disabled, ties to the
// lowest class index) equals the label.
float evaluate(const NetworkSpec& spec, const ModelParams& params,
               const std::vector<Tensor>& images, const std::vector<int>& labels);

// Stack images[first, first+count) into a (count,H,W,C) batch.
Tensor pack_batch(const std::vector<Tensor>& images, std::size_t first, std::size_t count);

// Binary checkpoint format, little-endian: magic "FSUP", version u32, record
// count u32; one record per tensor (weight then bias per entry): layer index
// u32, rank u32, dims u32 each, raw f32 payload.
std::vector<std::uint8_t> serialize_params(const ModelParams& params);
ModelParams deserialize_params(const std::vector<std::uint8_t>& bytes);
void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);
std::int64_t serialized_params_size(const ModelParams& params);

}  // namespace fedsup
