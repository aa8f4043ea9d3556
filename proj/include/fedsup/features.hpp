#pragma once

#include <cstdint>
#include <vector>

#include "fedsup/tensor.hpp"

// Classical eye-feature extraction: a real Gabor filter bank and local
// binary patterns for texture, plus the PERCLOS fatigue criterion over
// frame sequences.
namespace fedsup {

struct GaborParams {
    double theta = 0.0;   // orientation, radians
    double lambda = 4.0;  // wavelength, px
    double sigma = 2.24;  // Gaussian envelope std, px
    double gamma = 0.5;   // spatial aspect ratio
    double psi = 0.0;     // phase, radians
    int size = 7;         // odd kernel side length
};

// g(x,y) = exp(-(x'^2 + gamma^2 y'^2)/(2 sigma^2)) * cos(2 pi x'/lambda + psi)
// with x' = x cos(theta) + y sin(theta), y' = -x sin(theta) + y cos(theta),
// coordinates centered on the kernel midpoint.
Tensor gabor_kernel(const GaborParams& p);

struct GaborBankParams {
    int orientations = 4;      // theta_k = k*pi/K
    int scales = 2;            // lambda_s = base_lambda * 2^s
    double base_lambda = 4.0;
    double gamma = 0.5;
    double psi = 0.0;
    double sigma_ratio = 0.56;  // sigma = sigma_ratio * lambda
    int size = 11;              // shared odd kernel size for all bank kernels
};

// Valid-mode convolution of a grayscale (H,W) or (H,W,1) image with every
// bank kernel, stacked along channels. Channel index = orientation * scales
// + scale. Output is (H-size+1, W-size+1, K*S).
Tensor gabor_bank(const Tensor& image, const GaborBankParams& p);
Tensor gabor_bank(const Tensor& image, int orientations, int scales);

// 8-bit local binary pattern codes for every interior pixel: 3x3 neighbors
// ordered clockwise from the top-left, bit set iff neighbor >= center,
// first neighbor in the most significant bit. Output is (H-2, W-2).
Tensor lbp_map(const Tensor& image);

enum class EyeState : std::uint8_t { open = 0, closed = 1 };

struct FrameStateSequence {
    std::vector<EyeState> states;
    double fps = 30.0;
};

// Sliding-window fraction of closed frames, one value per window position.
std::vector<double> perclos(const FrameStateSequence& seq, int window_frames);

enum class FatigueState : std::uint8_t { alert = 0, fatigued = 1 };

// fatigued iff the PERCLOS value reaches the threshold (inclusive).
std::vector<FatigueState> fatigue_judgment(const std::vector<double>& perclos_values,
                                           double threshold);

// Alternative rule: fatigued when any run of consecutive closed frames
// reaches min_consecutive.
bool fatigue_judgment_consecutive(const FrameStateSequence& seq, int min_consecutive);

// Single-channel (H,W,1) texture summary of an (H,W,1) image: mean absolute
// Gabor-bank response blended with the LBP map, both zero-padded back to the
// input size. Feeds the optional feature-pretraining mode.
Tensor texture_feature_map(const Tensor& image);

}  // namespace fedsup
