#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace fedsup {

// Deterministic splittable random stream. A stream is identified by a
// (seed, stream id) pair; equal pairs produce equal draw sequences on every
// platform and under every execution schedule. derive() builds child streams
// from the identity only, so concurrent workers can each own an independent
// stream without coordination.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
        : key_(mix(mix(seed) ^ (0x9E3779B97F4A7C15ULL * (stream_id + 1)))),
          state_(key_) {}

    RngStream derive(std::uint64_t substream) const {
        return RngStream(key_, substream);
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    // Uniform in [0, n). Bias is below 2^-64 for the n used here.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Uniform in [0, 1) with 24 random mantissa bits.
    float next_float() {
        return static_cast<float>(next_u64() >> 40) * 0x1.0p-24f;
    }

    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller, computed in double and rounded once to
    // f32 so the value is stable at that width across libm versions.
    float next_normal() {
        const double u1 = next_double();
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        return static_cast<float>(r * std::cos(6.283185307179586477 * u2));
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t state_;
};

// Stream id namespaces used by the federation loop. Keeping them in one place
// guarantees distinct subsystems never collide on a derived stream.
namespace rng_tag {
inline constexpr std::uint64_t init = 1;       // parameter initialization
inline constexpr std::uint64_t select = 2;     // per-round edge selection
inline constexpr std::uint64_t client = 3;     // per-round client inference
inline constexpr std::uint64_t train = 4;      // per-round edge training
inline constexpr std::uint64_t split = 5;      // train/eval split
inline constexpr std::uint64_t pretrain = 6;   // optional warm-start phase
}  // namespace rng_tag

}  // namespace fedsup
