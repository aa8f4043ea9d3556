// Kernel throughput: OpenMP-parallel production kernels against the serial
// reference, plus one end-to-end training-step comparison.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fedsup/kernels.hpp"
#include "fedsup/nn.hpp"
#include "fedsup/rng.hpp"

using namespace fedsup;
namespace k = fedsup::kernels;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

std::vector<float> random_vec(std::size_t n, RngStream& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = rng.next_float() - 0.5f;
    return v;
}

void report(const char* name, double serial_ms, double omp_ms) {
    std::printf("%-28s serial %8.3f ms   omp %8.3f ms   speedup %.2fx\n", name, serial_ms,
                omp_ms, serial_ms / omp_ms);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns run serial code\n");
#endif

    RngStream rng(42);

    {
        k::Conv2dShape s{16, 24, 24, 16, 3, 3, 32};
        const auto in = random_vec(static_cast<std::size_t>(s.batch) * s.in_h * s.in_w * s.in_c, rng);
        const auto w = random_vec(static_cast<std::size_t>(s.k_h) * s.k_w * s.in_c * s.out_c, rng);
        const auto bias = random_vec(static_cast<std::size_t>(s.out_c), rng);
        std::vector<float> out(static_cast<std::size_t>(s.batch) * s.out_h() * s.out_w() * s.out_c);
        report("conv2d forward",
               time_ms([&] { k::serial::conv2d_forward(in.data(), w.data(), bias.data(), out.data(), s); }, 10),
               time_ms([&] { k::conv2d_forward(in.data(), w.data(), bias.data(), out.data(), s); }, 10));

        std::vector<float> dout = random_vec(out.size(), rng);
        std::vector<float> din(in.size());
        report("conv2d backward input",
               time_ms([&] { k::serial::conv2d_backward_input(dout.data(), w.data(), din.data(), s); }, 10),
               time_ms([&] { k::conv2d_backward_input(dout.data(), w.data(), din.data(), s); }, 10));

        std::vector<float> dw(w.size()), dbias(bias.size());
        report("conv2d backward params",
               time_ms([&] { k::serial::conv2d_backward_params(in.data(), dout.data(), dw.data(), dbias.data(), s); }, 10),
               time_ms([&] { k::conv2d_backward_params(in.data(), dout.data(), dw.data(), dbias.data(), s); }, 10));
    }

    {
        k::DenseShape s{64, 1024, 256};
        const auto in = random_vec(static_cast<std::size_t>(s.batch) * s.in_units, rng);
        const auto w = random_vec(static_cast<std::size_t>(s.in_units) * s.out_units, rng);
        const auto bias = random_vec(static_cast<std::size_t>(s.out_units), rng);
        std::vector<float> out(static_cast<std::size_t>(s.batch) * s.out_units);
        report("dense forward",
               time_ms([&] { k::serial::dense_forward(in.data(), w.data(), bias.data(), out.data(), s); }, 20),
               time_ms([&] { k::dense_forward(in.data(), w.data(), bias.data(), out.data(), s); }, 20));

        std::vector<float> dout = random_vec(out.size(), rng);
        std::vector<float> dw(w.size()), dbias(bias.size());
        report("dense backward params",
               time_ms([&] { k::serial::dense_backward_params(in.data(), dout.data(), dw.data(), dbias.data(), s); }, 20),
               time_ms([&] { k::dense_backward_params(in.data(), dout.data(), dw.data(), dbias.data(), s); }, 20));
    }

    {
        // one full loss_and_grads step on the eye-state net (OpenMP path only;
        // the layer stack always calls the production kernels)
        const NetworkSpec spec = build_blink_net(24, 24, 1, 0.0f, 0.0f);
        const ModelParams params = init_params(spec, RngStream(1));
        Tensor batch = Tensor::zeros({32, 24, 24, 1});
        for (auto& v : batch.data) v = rng.next_float();
        std::vector<int> labels(32);
        for (auto& l : labels) l = static_cast<int>(rng.next_below(2));
        RngStream fwd_rng(2);
        const double ms = time_ms(
            [&] {
                RngStream r = fwd_rng;
                (void)loss_and_grads(spec, params, batch, labels, r);
            },
            5);
        std::printf("%-28s %8.3f ms per 32-image step\n", "blink-net loss_and_grads", ms);
    }
    return 0;
}
