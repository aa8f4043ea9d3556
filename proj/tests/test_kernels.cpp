#include <doctest.h>

#include <vector>

#include "fedsup/kernels.hpp"
#include "fedsup/rng.hpp"

using namespace fedsup;
namespace k = fedsup::kernels;

namespace {
std::vector<float> random_vec(std::size_t n, RngStream& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = rng.next_float() * 2.0f - 1.0f;
    return v;
}
}  // namespace

// The OpenMP kernels must reproduce the serial reference bit for bit,
// whatever the thread count.
TEST_CASE("parallel kernels match the serial reference bitwise") {
    RngStream rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        const int b = 1 + static_cast<int>(rng.next_below(4));
        const int ih = 6 + static_cast<int>(rng.next_below(10));
        const int iw = 6 + static_cast<int>(rng.next_below(10));
        const int ic = 1 + static_cast<int>(rng.next_below(3));
        const int kk = 2 + static_cast<int>(rng.next_below(2));
        const int oc = 1 + static_cast<int>(rng.next_below(8));

        k::Conv2dShape cs{b, ih, iw, ic, kk, kk, oc};
        const auto in = random_vec(static_cast<std::size_t>(b) * ih * iw * ic, rng);
        const auto w = random_vec(static_cast<std::size_t>(kk) * kk * ic * oc, rng);
        const auto bias = random_vec(static_cast<std::size_t>(oc), rng);
        const std::size_t out_n = static_cast<std::size_t>(b) * cs.out_h() * cs.out_w() * oc;

        std::vector<float> out_a(out_n), out_b(out_n);
        k::conv2d_forward(in.data(), w.data(), bias.data(), out_a.data(), cs);
        k::serial::conv2d_forward(in.data(), w.data(), bias.data(), out_b.data(), cs);
        CHECK(out_a == out_b);

        const auto dout = random_vec(out_n, rng);
        std::vector<float> din_a(in.size()), din_b(in.size());
        k::conv2d_backward_input(dout.data(), w.data(), din_a.data(), cs);
        k::serial::conv2d_backward_input(dout.data(), w.data(), din_b.data(), cs);
        CHECK(din_a == din_b);

        std::vector<float> dw_a(w.size()), dw_b(w.size()), db_a(bias.size()), db_b(bias.size());
        k::conv2d_backward_params(in.data(), dout.data(), dw_a.data(), db_a.data(), cs);
        k::serial::conv2d_backward_params(in.data(), dout.data(), dw_b.data(), db_b.data(), cs);
        CHECK(dw_a == dw_b);
        CHECK(db_a == db_b);

        k::Pool2dShape ps{b, ih, iw, ic, 2};
        const std::size_t pool_n = static_cast<std::size_t>(b) * ps.out_h() * ps.out_w() * ic;
        std::vector<float> pout_a(pool_n), pout_b(pool_n);
        std::vector<std::int32_t> arg_a(pool_n), arg_b(pool_n);
        k::maxpool_forward(in.data(), pout_a.data(), arg_a.data(), ps);
        k::serial::maxpool_forward(in.data(), pout_b.data(), arg_b.data(), ps);
        CHECK(pout_a == pout_b);
        CHECK(arg_a == arg_b);

        const auto pdout = random_vec(pool_n, rng);
        std::vector<float> pdin_a(in.size()), pdin_b(in.size());
        k::maxpool_backward(pdout.data(), arg_a.data(), pdin_a.data(),
                            static_cast<std::int64_t>(in.size()), static_cast<std::int64_t>(pool_n));
        k::serial::maxpool_backward(pdout.data(), arg_b.data(), pdin_b.data(),
                                    static_cast<std::int64_t>(in.size()),
                                    static_cast<std::int64_t>(pool_n));
        CHECK(pdin_a == pdin_b);

        k::DenseShape ds{b, 17, 9};
        const auto din = random_vec(static_cast<std::size_t>(b) * ds.in_units, rng);
        const auto dw = random_vec(static_cast<std::size_t>(ds.in_units) * ds.out_units, rng);
        const auto dbias = random_vec(static_cast<std::size_t>(ds.out_units), rng);
        std::vector<float> y_a(static_cast<std::size_t>(b) * ds.out_units), y_b(y_a.size());
        k::dense_forward(din.data(), dw.data(), dbias.data(), y_a.data(), ds);
        k::serial::dense_forward(din.data(), dw.data(), dbias.data(), y_b.data(), ds);
        CHECK(y_a == y_b);

        const auto dy = random_vec(y_a.size(), rng);
        std::vector<float> dx_a(din.size()), dx_b(din.size());
        k::dense_backward_input(dy.data(), dw.data(), dx_a.data(), ds);
        k::serial::dense_backward_input(dy.data(), dw.data(), dx_b.data(), ds);
        CHECK(dx_a == dx_b);

        std::vector<float> gw_a(dw.size()), gw_b(dw.size()), gb_a(dbias.size()), gb_b(dbias.size());
        k::dense_backward_params(din.data(), dy.data(), gw_a.data(), gb_a.data(), ds);
        k::serial::dense_backward_params(din.data(), dy.data(), gw_b.data(), gb_b.data(), ds);
        CHECK(gw_a == gw_b);
        CHECK(gb_a == gb_b);

        std::vector<float> sm_a(y_a.size()), sm_b(y_a.size());
        k::softmax_rows(y_a.data(), sm_a.data(), b, ds.out_units);
        k::serial::softmax_rows(y_a.data(), sm_b.data(), b, ds.out_units);
        CHECK(sm_a == sm_b);
    }
}

TEST_CASE("maxpool keeps the first maximum in scan order") {
    // 2x2 window with a tie: the earlier element wins
    const std::vector<float> in = {3.0f, 3.0f, 1.0f, 0.0f};
    k::Pool2dShape ps{1, 2, 2, 1, 2};
    std::vector<float> out(1);
    std::vector<std::int32_t> argmax(1);
    k::maxpool_forward(in.data(), out.data(), argmax.data(), ps);
    CHECK(out[0] == 3.0f);
    CHECK(argmax[0] == 0);
}
