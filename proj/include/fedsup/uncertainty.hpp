#pragma once

#include <cstdint>
#include <vector>

#include "fedsup/nn.hpp"
#include "fedsup/rng.hpp"
#include "fedsup/tensor.hpp"

// Stochastic-dropout inference: M forward passes with dropout active
// approximate the predictive posterior; the mean and variance of the
// predicted-class probability give per-image confidence and uncertainty,
// and the uncertainty drives the client's upload filter.
namespace fedsup {

struct UncertaintyRecord {
    std::uint64_t sample_id = 0;
    double r = 0.0;       // confidence, mean predicted-class probability
    double alpha = 0.0;   // uncertainty, population variance of that probability
    int predicted_class = 0;
};

struct ClientConfig {
    int passes = 3;          // M stochastic passes
    double epsilon = 0.025;  // upload threshold on alpha
};

struct McPrediction {
    std::vector<double> mean_probs;  // per-class mean over the M passes
    Tensor per_pass;                 // (M, num_classes) f32 probabilities
};

// M forward passes with dropout enabled on a single (H,W,C) image.
McPrediction mc_predict(const NetworkSpec& spec, const ModelParams& params,
                        const Tensor& image, int passes, RngStream& rng);

struct ConfidenceUncertainty {
    double r = 0.0;
    double alpha = 0.0;
    int predicted_class = 0;
};

// predicted_class = argmax of the per-class mean (ties to the lowest index);
// r and alpha are the mean and population variance of that class's
// probability across the passes.
ConfidenceUncertainty confidence_uncertainty(const Tensor& per_pass);

struct UploadEntry {
    std::uint64_t sample_id = 0;
    int image_index = 0;  // into the client's local image list
    double alpha = 0.0;
};

struct UploadDict {
    std::vector<UploadEntry> entries;
};

inline std::uint64_t make_sample_id(std::uint32_t client_id, std::uint32_t index) {
    return (static_cast<std::uint64_t>(client_id) << 32) | index;
}

// Algorithm-1 client pass: score every local image against the latest cloud
// params and keep those with alpha >= epsilon. One UncertaintyRecord per
// image is appended to records_out (in image order) when it is non-null.
UploadDict client_upload(std::uint32_t client_id, const NetworkSpec& spec,
                         const ModelParams& cloud_params,
                         const std::vector<Tensor>& local_images,
                         const ClientConfig& config, RngStream rng,
                         std::vector<UncertaintyRecord>* records_out);

}  // namespace fedsup
