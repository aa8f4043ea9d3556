#include "fedsup/uncertainty.hpp"

#include <cstring>
#include <stdexcept>

namespace fedsup {

McPrediction mc_predict(const NetworkSpec& spec, const ModelParams& params,
                        const Tensor& image, int passes, RngStream& rng) {
    if (passes < 1) throw std::invalid_argument("mc_predict: M must be >= 1");
    if (image.shape.size() != 3)
        throw std::invalid_argument("mc_predict: image must be (H,W,C)");

    const int C = spec.num_classes;
    Tensor batch = Tensor::zeros({1, image.shape[0], image.shape[1], image.shape[2]});
    std::memcpy(batch.data.data(), image.data.data(), image.data.size() * sizeof(float));

    McPrediction out;
    out.per_pass = Tensor::zeros({passes, C});
    out.mean_probs.assign(static_cast<std::size_t>(C), 0.0);
    for (int m = 0; m < passes; ++m) {
        const Tensor probs = forward(spec, params, batch, /*dropout_enabled=*/true, rng);
        for (int c = 0; c < C; ++c) {
            const float p = probs.data[static_cast<std::size_t>(c)];
            out.per_pass.data[static_cast<std::size_t>(m) * C + c] = p;
            out.mean_probs[static_cast<std::size_t>(c)] += p;
        }
    }
    for (auto& v : out.mean_probs) v /= passes;
    return out;
}

ConfidenceUncertainty confidence_uncertainty(const Tensor& per_pass) {
    if (per_pass.shape.size() != 2 || per_pass.shape[0] < 1 || per_pass.shape[1] < 1)
        throw std::invalid_argument("confidence_uncertainty: need a nonempty (M,C) matrix");
    const int M = per_pass.shape[0];
    const int C = per_pass.shape[1];

    ConfidenceUncertainty out;
    // argmax of the column means, ties to the lowest class index
    double best_mean = -1.0;
    for (int c = 0; c < C; ++c) {
        double mean = 0.0;
        for (int m = 0; m < M; ++m) mean += per_pass.data[static_cast<std::size_t>(m) * C + c];
        mean /= M;
        if (mean > best_mean) {
            best_mean = mean;
            out.predicted_class = c;
        }
    }

    double r = 0.0;
    for (int m = 0; m < M; ++m)
        r += per_pass.data[static_cast<std::size_t>(m) * C + out.predicted_class];
    r /= M;

    double alpha = 0.0;
    for (int m = 0; m < M; ++m) {
        const double d = r - per_pass.data[static_cast<std::size_t>(m) * C + out.predicted_class];
        alpha += d * d;
    }
    alpha /= M;  // population variance

    out.r = r;
    out.alpha = alpha;
    return out;
}

UploadDict client_upload(std::uint32_t client_id, const NetworkSpec& spec,
                         const ModelParams& cloud_params,
                         const std::vector<Tensor>& local_images,
                         const ClientConfig& config, RngStream rng,
                         std::vector<UncertaintyRecord>* records_out) {
    if (config.passes < 1) throw std::invalid_argument("client_upload: M must be >= 1");
    if (config.epsilon < 0.0) throw std::invalid_argument("client_upload: epsilon must be >= 0");

    UploadDict dict;
    for (std::size_t i = 0; i < local_images.size(); ++i) {
        RngStream image_rng = rng.derive(i);
        const McPrediction pred =
            mc_predict(spec, cloud_params, local_images[i], config.passes, image_rng);
        const ConfidenceUncertainty cu = confidence_uncertainty(pred.per_pass);

        const std::uint64_t sid = make_sample_id(client_id, static_cast<std::uint32_t>(i));
        if (records_out)
            records_out->push_back({sid, cu.r, cu.alpha, cu.predicted_class});
        if (cu.alpha >= config.epsilon)
            dict.entries.push_back({sid, static_cast<int>(i), cu.alpha});
    }
    return dict;
}

}  // namespace fedsup
