#include "fedsup/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedsup {

namespace {

constexpr double kTwoPi = 6.283185307179586477;

// Accepts (H,W) or (H,W,1); returns H, W and a pointer to pixel (0,0).
const float* grayscale_view(const Tensor& image, int* h, int* w) {
    if (image.shape.size() == 2) {
        *h = image.shape[0];
        *w = image.shape[1];
    } else if (image.shape.size() == 3 && image.shape[2] == 1) {
        *h = image.shape[0];
        *w = image.shape[1];
    } else {
        throw std::invalid_argument("expected a grayscale (H,W) or (H,W,1) image, got " +
                                    shape_to_string(image.shape));
    }
    return image.data.data();
}

}  // namespace

Tensor gabor_kernel(const GaborParams& p) {
    if (p.size < 3 || p.size % 2 == 0)
        throw std::invalid_argument("gabor_kernel: size must be odd and >= 3");
    if (p.lambda <= 0.0 || p.sigma <= 0.0)
        throw std::invalid_argument("gabor_kernel: lambda and sigma must be positive");

    Tensor k = Tensor::zeros({p.size, p.size});
    const int half = p.size / 2;
    const double ct = std::cos(p.theta), st = std::sin(p.theta);
    for (int y = -half; y <= half; ++y)
        for (int x = -half; x <= half; ++x) {
            const double xr = x * ct + y * st;
            const double yr = -x * st + y * ct;
            const double envelope =
                std::exp(-(xr * xr + p.gamma * p.gamma * yr * yr) / (2.0 * p.sigma * p.sigma));
            const double carrier = std::cos(kTwoPi * xr / p.lambda + p.psi);
            k.data[static_cast<std::size_t>(y + half) * p.size + (x + half)] =
                static_cast<float>(envelope * carrier);
        }
    return k;
}

namespace {

// Valid-mode 2-D correlation of a grayscale image with one kernel, written
// into channel `ch` of a (H',W',channels) stack.
void convolve_into(const float* img, int h, int w, const Tensor& kernel,
                   Tensor& out, int ch, int channels) {
    const int ks = kernel.shape[0];
    const int oh = h - ks + 1, ow = w - ks + 1;
    for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
            float acc = 0.0f;
            for (int ky = 0; ky < ks; ++ky)
                for (int kx = 0; kx < ks; ++kx)
                    acc += img[(oy + ky) * w + (ox + kx)] *
                           kernel.data[static_cast<std::size_t>(ky) * ks + kx];
            out.data[(static_cast<std::size_t>(oy) * ow + ox) * channels + ch] = acc;
        }
}

}  // namespace

Tensor gabor_bank(const Tensor& image, const GaborBankParams& p) {
    if (p.orientations < 1 || p.scales < 1)
        throw std::invalid_argument("gabor_bank: need at least one orientation and scale");
    int h = 0, w = 0;
    const float* img = grayscale_view(image, &h, &w);
    if (h < p.size || w < p.size)
        throw std::invalid_argument("gabor_bank: image " + shape_to_string(image.shape) +
                                    " smaller than kernel size " + std::to_string(p.size));

    const int channels = p.orientations * p.scales;
    Tensor out = Tensor::zeros({h - p.size + 1, w - p.size + 1, channels});
    for (int k = 0; k < p.orientations; ++k)
        for (int s = 0; s < p.scales; ++s) {
            GaborParams gp;
            gp.theta = k * (kTwoPi / 2.0) / p.orientations;
            gp.lambda = p.base_lambda * std::pow(2.0, s);
            gp.sigma = p.sigma_ratio * gp.lambda;
            gp.gamma = p.gamma;
            gp.psi = p.psi;
            gp.size = p.size;
            convolve_into(img, h, w, gabor_kernel(gp), out, k * p.scales + s, channels);
        }
    return out;
}

Tensor gabor_bank(const Tensor& image, int orientations, int scales) {
    GaborBankParams p;
    p.orientations = orientations;
    p.scales = scales;
    return gabor_bank(image, p);
}

Tensor lbp_map(const Tensor& image) {
    int h = 0, w = 0;
    const float* img = grayscale_view(image, &h, &w);
    if (h < 3 || w < 3)
        throw std::invalid_argument("lbp_map: image must be at least 3x3");

    // clockwise from top-left, the first entry lands in the MSB
    static constexpr int kOffsets[8][2] = {
        {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}, {0, -1}};

    Tensor out = Tensor::zeros({h - 2, w - 2});
    for (int y = 1; y < h - 1; ++y)
        for (int x = 1; x < w - 1; ++x) {
            const float center = img[y * w + x];
            unsigned code = 0;
            for (int n = 0; n < 8; ++n) {
                code <<= 1;
                if (img[(y + kOffsets[n][0]) * w + (x + kOffsets[n][1])] >= center) code |= 1u;
            }
            out.data[static_cast<std::size_t>(y - 1) * (w - 2) + (x - 1)] =
                static_cast<float>(code);
        }
    return out;
}

std::vector<double> perclos(const FrameStateSequence& seq, int window_frames) {
    if (seq.states.empty()) throw std::invalid_argument("perclos: empty frame sequence");
    if (seq.fps <= 0.0) throw std::invalid_argument("perclos: fps must be positive");
    const int n = static_cast<int>(seq.states.size());
    if (window_frames < 1 || window_frames > n)
        throw std::invalid_argument("perclos: window must be in [1, sequence length]");

    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n - window_frames + 1));
    int closed = 0;
    for (int i = 0; i < window_frames; ++i)
        closed += seq.states[static_cast<std::size_t>(i)] == EyeState::closed ? 1 : 0;
    out.push_back(static_cast<double>(closed) / window_frames);
    for (int i = window_frames; i < n; ++i) {
        closed += seq.states[static_cast<std::size_t>(i)] == EyeState::closed ? 1 : 0;
        closed -= seq.states[static_cast<std::size_t>(i - window_frames)] == EyeState::closed ? 1 : 0;
        out.push_back(static_cast<double>(closed) / window_frames);
    }
    return out;
}

std::vector<FatigueState> fatigue_judgment(const std::vector<double>& perclos_values,
                                           double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("fatigue_judgment: threshold must be in (0,1)");
    std::vector<FatigueState> out;
    out.reserve(perclos_values.size());
    for (double v : perclos_values)
        out.push_back(v >= threshold ? FatigueState::fatigued : FatigueState::alert);
    return out;
}

bool fatigue_judgment_consecutive(const FrameStateSequence& seq, int min_consecutive) {
    if (min_consecutive < 1)
        throw std::invalid_argument("fatigue_judgment_consecutive: need min_consecutive >= 1");
    int run = 0;
    for (EyeState s : seq.states) {
        run = s == EyeState::closed ? run + 1 : 0;
        if (run >= min_consecutive) return true;
    }
    return false;
}

Tensor texture_feature_map(const Tensor& image) {
    int h = 0, w = 0;
    grayscale_view(image, &h, &w);

    GaborBankParams bank;
    bank.size = std::min({11, h, w});
    if (bank.size % 2 == 0) --bank.size;
    if (bank.size < 3) throw std::invalid_argument("texture_feature_map: image too small");
    const Tensor gabor = gabor_bank(image, bank);
    const Tensor lbp = lbp_map(image);

    Tensor out = Tensor::zeros({h, w, 1});

    // mean |response| over bank channels, normalized by the map maximum
    const int gh = gabor.shape[0], gw = gabor.shape[1], gc = gabor.shape[2];
    std::vector<float> mean_abs(static_cast<std::size_t>(gh) * gw, 0.0f);
    float peak = 0.0f;
    for (int i = 0; i < gh * gw; ++i) {
        float acc = 0.0f;
        for (int c = 0; c < gc; ++c)
            acc += std::fabs(gabor.data[static_cast<std::size_t>(i) * gc + c]);
        mean_abs[static_cast<std::size_t>(i)] = acc / gc;
        peak = std::max(peak, mean_abs[static_cast<std::size_t>(i)]);
    }
    const float gabor_scale = peak > 0.0f ? 1.0f / peak : 0.0f;
    const int gy0 = (h - gh) / 2, gx0 = (w - gw) / 2;
    for (int y = 0; y < gh; ++y)
        for (int x = 0; x < gw; ++x)
            out.data[(static_cast<std::size_t>(y + gy0) * w + (x + gx0))] +=
                0.5f * gabor_scale * mean_abs[static_cast<std::size_t>(y) * gw + x];

    const int lh = lbp.shape[0], lw = lbp.shape[1];
    const int ly0 = (h - lh) / 2, lx0 = (w - lw) / 2;
    for (int y = 0; y < lh; ++y)
        for (int x = 0; x < lw; ++x)
            out.data[(static_cast<std::size_t>(y + ly0) * w + (x + lx0))] +=
                0.5f * (lbp.data[static_cast<std::size_t>(y) * lw + x] / 255.0f);
    return out;
}

}  // namespace fedsup
