#pragma once

#include <cstdint>

// Dense compute kernels behind the network layers. Every kernel exists twice:
// the OpenMP-parallel production version in fedsup::kernels and a plain serial
// reference in fedsup::kernels::serial. Both call the same per-element inner
// routines, so their outputs are bit-identical for any thread count; the test
// suite asserts that and tools/bench compares their throughput.
//
// Layouts (row-major):
//   activations  in[b][y][x][c]
//   conv weights w[ky][kx][ic][oc], bias[oc]
//   dense weights w[i][j] (in_units x out_units), bias[j]
namespace fedsup::kernels {

struct Conv2dShape {
    int batch, in_h, in_w, in_c;
    int k_h, k_w, out_c;
    int out_h() const { return in_h - k_h + 1; }
    int out_w() const { return in_w - k_w + 1; }
};

struct Pool2dShape {
    int batch, in_h, in_w, ch;
    int pool;  // window size == stride
    int out_h() const { return (in_h - pool) / pool + 1; }
    int out_w() const { return (in_w - pool) / pool + 1; }
};

struct DenseShape {
    int batch, in_units, out_units;
};

void conv2d_forward(const float* in, const float* w, const float* bias,
                    float* out, const Conv2dShape& s);
void conv2d_backward_input(const float* dout, const float* w, float* din,
                           const Conv2dShape& s);
void conv2d_backward_params(const float* in, const float* dout, float* dw,
                            float* dbias, const Conv2dShape& s);

// argmax stores, per output element, the flat input index of the window max
// (first max in scan order); backward routes gradients through it.
void maxpool_forward(const float* in, float* out, std::int32_t* argmax,
                     const Pool2dShape& s);
void maxpool_backward(const float* dout, const std::int32_t* argmax,
                      float* din, std::int64_t in_size, std::int64_t out_size);

void dense_forward(const float* in, const float* w, const float* bias,
                   float* out, const DenseShape& s);
void dense_backward_input(const float* dout, const float* w, float* din,
                          const DenseShape& s);
void dense_backward_params(const float* in, const float* dout, float* dw,
                           float* dbias, const DenseShape& s);

// Row-wise softmax over a (rows x cols) matrix, max-subtracted.
void softmax_rows(const float* in, float* out, int rows, int cols);

namespace serial {
void conv2d_forward(const float* in, const float* w, const float* bias,
                    float* out, const Conv2dShape& s);
void conv2d_backward_input(const float* dout, const float* w, float* din,
                           const Conv2dShape& s);
void conv2d_backward_params(const float* in, const float* dout, float* dw,
                            float* dbias, const Conv2dShape& s);
void maxpool_forward(const float* in, float* out, std::int32_t* argmax,
                     const Pool2dShape& s);
void maxpool_backward(const float* dout, const std::int32_t* argmax,
                      float* din, std::int64_t in_size, std::int64_t out_size);
void dense_forward(const float* in, const float* w, const float* bias,
                   float* out, const DenseShape& s);
void dense_backward_input(const float* dout, const float* w, float* din,
                          const DenseShape& s);
void dense_backward_params(const float* in, const float* dout, float* dw,
                           float* dbias, const DenseShape& s);
void softmax_rows(const float* in, float* out, int rows, int cols);
}  // namespace serial

}  // namespace fedsup::kernels
