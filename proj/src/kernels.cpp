#include "fedsup/kernels.hpp"

#include <cmath>

namespace fedsup::kernels {

namespace {

// Per-element routines shared by the serial and OpenMP variants. Each one
// accumulates with a fixed inner-loop order, so a given output element gets
// the same f32 result no matter which thread computes it.

inline float conv_out_at(const float* in, const float* w, const float* bias,
                         const Conv2dShape& s, int b, int oy, int ox, int oc) {
    float acc = bias[oc];
    for (int ky = 0; ky < s.k_h; ++ky) {
        const float* in_row = in + (((static_cast<std::int64_t>(b) * s.in_h + oy + ky) * s.in_w + ox) * s.in_c);
        const float* w_row = w + ((static_cast<std::int64_t>(ky) * s.k_w) * s.in_c + 0) * s.out_c;
        for (int kx = 0; kx < s.k_w; ++kx) {
            const float* in_px = in_row + kx * s.in_c;
            const float* w_px = w_row + (kx * s.in_c) * s.out_c;
            for (int ic = 0; ic < s.in_c; ++ic)
                acc += in_px[ic] * w_px[ic * s.out_c + oc];
        }
    }
    return acc;
}

inline float conv_din_at(const float* dout, const float* w,
                         const Conv2dShape& s, int b, int iy, int ix, int ic) {
    const int oh = s.out_h(), ow = s.out_w();
    float acc = 0.0f;
    for (int ky = 0; ky < s.k_h; ++ky) {
        const int oy = iy - ky;
        if (oy < 0 || oy >= oh) continue;
        for (int kx = 0; kx < s.k_w; ++kx) {
            const int ox = ix - kx;
            if (ox < 0 || ox >= ow) continue;
            const float* dout_px = dout + (((static_cast<std::int64_t>(b) * oh + oy) * ow + ox) * s.out_c);
            const float* w_px = w + (((static_cast<std::int64_t>(ky) * s.k_w + kx) * s.in_c + ic) * s.out_c);
            for (int oc = 0; oc < s.out_c; ++oc)
                acc += dout_px[oc] * w_px[oc];
        }
    }
    return acc;
}

inline float conv_dw_at(const float* in, const float* dout,
                        const Conv2dShape& s, int ky, int kx, int ic, int oc) {
    const int oh = s.out_h(), ow = s.out_w();
    float acc = 0.0f;
    for (int b = 0; b < s.batch; ++b)
        for (int oy = 0; oy < oh; ++oy) {
            const float* in_row = in + (((static_cast<std::int64_t>(b) * s.in_h + oy + ky) * s.in_w + kx) * s.in_c + ic);
            const float* dout_row = dout + (((static_cast<std::int64_t>(b) * oh + oy) * ow) * s.out_c + oc);
            for (int ox = 0; ox < ow; ++ox)
                acc += in_row[ox * s.in_c] * dout_row[ox * s.out_c];
        }
    return acc;
}

inline float conv_dbias_at(const float* dout, const Conv2dShape& s, int oc) {
    const std::int64_t n = static_cast<std::int64_t>(s.batch) * s.out_h() * s.out_w();
    float acc = 0.0f;
    for (std::int64_t i = 0; i < n; ++i) acc += dout[i * s.out_c + oc];
    return acc;
}

inline void pool_at(const float* in, float* out, std::int32_t* argmax,
                    const Pool2dShape& s, int b, int oy, int ox, int c) {
    const int oh = s.out_h(), ow = s.out_w();
    const int iy0 = oy * s.pool, ix0 = ox * s.pool;
    std::int64_t best_idx = ((static_cast<std::int64_t>(b) * s.in_h + iy0) * s.in_w + ix0) * s.ch + c;
    float best = in[best_idx];
    for (int ky = 0; ky < s.pool; ++ky)
        for (int kx = 0; kx < s.pool; ++kx) {
            const std::int64_t idx =
                ((static_cast<std::int64_t>(b) * s.in_h + iy0 + ky) * s.in_w + ix0 + kx) * s.ch + c;
            if (in[idx] > best) {
                best = in[idx];
                best_idx = idx;
            }
        }
    const std::int64_t out_idx = ((static_cast<std::int64_t>(b) * oh + oy) * ow + ox) * s.ch + c;
    out[out_idx] = best;
    argmax[out_idx] = static_cast<std::int32_t>(best_idx);
}

inline float dense_out_at(const float* in, const float* w, const float* bias,
                          const DenseShape& s, int b, int j) {
    const float* x = in + static_cast<std::int64_t>(b) * s.in_units;
    float acc = bias[j];
    for (int i = 0; i < s.in_units; ++i) acc += x[i] * w[static_cast<std::int64_t>(i) * s.out_units + j];
    return acc;
}

inline float dense_din_at(const float* dout, const float* w,
                          const DenseShape& s, int b, int i) {
    const float* dy = dout + static_cast<std::int64_t>(b) * s.out_units;
    const float* wr = w + static_cast<std::int64_t>(i) * s.out_units;
    float acc = 0.0f;
    for (int j = 0; j < s.out_units; ++j) acc += dy[j] * wr[j];
    return acc;
}

inline float dense_dw_at(const float* in, const float* dout,
                         const DenseShape& s, int i, int j) {
    float acc = 0.0f;
    for (int b = 0; b < s.batch; ++b)
        acc += in[static_cast<std::int64_t>(b) * s.in_units + i] *
               dout[static_cast<std::int64_t>(b) * s.out_units + j];
    return acc;
}

inline void softmax_row(const float* in, float* out, int cols) {
    float mx = in[0];
    for (int c = 1; c < cols; ++c) mx = in[c] > mx ? in[c] : mx;
    float sum = 0.0f;
    for (int c = 0; c < cols; ++c) {
        out[c] = std::exp(in[c] - mx);
        sum += out[c];
    }
    const float inv = 1.0f / sum;
    for (int c = 0; c < cols; ++c) out[c] *= inv;
}

}  // namespace

void conv2d_forward(const float* in, const float* w, const float* bias,
                    float* out, const Conv2dShape& s) {
    const int oh = s.out_h(), ow = s.out_w();
    const std::int64_t n = static_cast<std::int64_t>(s.batch) * oh * ow;
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / (oh * ow));
        const int oy = static_cast<int>((p / ow) % oh);
        const int ox = static_cast<int>(p % ow);
        float* o = out + p * s.out_c;
        for (int oc = 0; oc < s.out_c; ++oc) o[oc] = conv_out_at(in, w, bias, s, b, oy, ox, oc);
    }
}

void conv2d_backward_input(const float* dout, const float* w, float* din,
                           const Conv2dShape& s) {
    const std::int64_t n = static_cast<std::int64_t>(s.batch) * s.in_h * s.in_w;
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / (s.in_h * s.in_w));
        const int iy = static_cast<int>((p / s.in_w) % s.in_h);
        const int ix = static_cast<int>(p % s.in_w);
        float* d = din + p * s.in_c;
        for (int ic = 0; ic < s.in_c; ++ic) d[ic] = conv_din_at(dout, w, s, b, iy, ix, ic);
    }
}

void conv2d_backward_params(const float* in, const float* dout, float* dw,
                            float* dbias, const Conv2dShape& s) {
    const std::int64_t nw = static_cast<std::int64_t>(s.k_h) * s.k_w * s.in_c * s.out_c;
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < nw; ++p) {
        const int oc = static_cast<int>(p % s.out_c);
        const int ic = static_cast<int>((p / s.out_c) % s.in_c);
        const int kx = static_cast<int>((p / (s.out_c * s.in_c)) % s.k_w);
        const int ky = static_cast<int>(p / (s.out_c * s.in_c * s.k_w));
        dw[p] = conv_dw_at(in, dout, s, ky, kx, ic, oc);
    }
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < s.out_c; ++oc) dbias[oc] = conv_dbias_at(dout, s, oc);
}

void maxpool_forward(const float* in, float* out, std::int32_t* argmax,
                     const Pool2dShape& s) {
    const int oh = s.out_h(), ow = s.out_w();
    const std::int64_t n = static_cast<std::int64_t>(s.batch) * oh * ow;
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / (oh * ow));
        const int oy = static_cast<int>((p / ow) % oh);
        const int ox = static_cast<int>(p % ow);
        for (int c = 0; c < s.ch; ++c) pool_at(in, out, argmax, s, b, oy, ox, c);
    }
}

void maxpool_backward(const float* dout, const std::int32_t* argmax,
                      float* din, std::int64_t in_size, std::int64_t out_size) {
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < in_size; ++i) din[i] = 0.0f;
    // window stride == window size, so argmax targets are distinct
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < out_size; ++i) din[argmax[i]] = dout[i];
}

void dense_forward(const float* in, const float* w, const float* bias,
                   float* out, const DenseShape& s) {
#pragma omp parallel for schedule(static)
    for (int b = 0; b < s.batch; ++b) {
        float* o = out + static_cast<std::int64_t>(b) * s.out_units;
        for (int j = 0; j < s.out_units; ++j) o[j] = dense_out_at(in, w, bias, s, b, j);
    }
}

void dense_backward_input(const float* dout, const float* w, float* din,
                          const DenseShape& s) {
#pragma omp parallel for schedule(static)
    for (int b = 0; b < s.batch; ++b) {
        float* d = din + static_cast<std::int64_t>(b) * s.in_units;
        for (int i = 0; i < s.in_units; ++i) d[i] = dense_din_at(dout, w, s, b, i);
    }
}

void dense_backward_params(const float* in, const float* dout, float* dw,
                           float* dbias, const DenseShape& s) {
    const std::int64_t nw = static_cast<std::int64_t>(s.in_units) * s.out_units;
#pragma omp parallel for schedule(static)
    for (std::int64_t p = 0; p < nw; ++p) {
        const int i = static_cast<int>(p / s.out_units);
        const int j = static_cast<int>(p % s.out_units);
        dw[p] = dense_dw_at(in, dout, s, i, j);
    }
#pragma omp parallel for schedule(static)
    for (int j = 0; j < s.out_units; ++j) {
        float acc = 0.0f;
        for (int b = 0; b < s.batch; ++b) acc += dout[static_cast<std::int64_t>(b) * s.out_units + j];
        dbias[j] = acc;
    }
}

void softmax_rows(const float* in, float* out, int rows, int cols) {
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r)
        softmax_row(in + static_cast<std::int64_t>(r) * cols, out + static_cast<std::int64_t>(r) * cols, cols);
}

namespace serial {

void conv2d_forward(const float* in, const float* w, const float* bias,
                    float* out, const Conv2dShape& s) {
    const int oh = s.out_h(), ow = s.out_w();
    const std::int64_t n = static_cast<std::int64_t>(s.batch) * oh * ow;
    for (std::int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / (oh * ow));
        const int oy = static_cast<int>((p / ow) % oh);
        const int ox = static_cast<int>(p % ow);
        float* o = out + p * s.out_c;
        for (int oc = 0; oc < s.out_c; ++oc) o[oc] = conv_out_at(in, w, bias, s, b, oy, ox, oc);
    }
}

void conv2d_backward_input(const float* dout, const float* w, float* din,
                           const Conv2dShape& s) {
    const std::int64_t n = static_cast<std::int64_t>(s.batch) * s.in_h * s.in_w;
    for (std::int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / (s.in_h * s.in_w));
        const int iy = static_cast<int>((p / s.in_w) % s.in_h);
        const int ix = static_cast<int>(p % s.in_w);
        float* d = din + p * s.in_c;
        for (int ic = 0; ic < s.in_c; ++ic) d[ic] = conv_din_at(dout, w, s, b, iy, ix, ic);
    }
}

void conv2d_backward_params(const float* in, const float* dout, float* dw,
                            float* dbias, const Conv2dShape& s) {
    const std::int64_t nw = static_cast<std::int64_t>(s.k_h) * s.k_w * s.in_c * s.out_c;
    for (std::int64_t p = 0; p < nw; ++p) {
        const int oc = static_cast<int>(p % s.out_c);
        const int ic = static_cast<int>((p / s.out_c) % s.in_c);
        const int kx = static_cast<int>((p / (s.out_c * s.in_c)) % s.k_w);
        const int ky = static_cast<int>(p / (s.out_c * s.in_c * s.k_w));
        dw[p] = conv_dw_at(in, dout, s, ky, kx, ic, oc);
    }
    for (int oc = 0; oc < s.out_c; ++oc) dbias[oc] = conv_dbias_at(dout, s, oc);
}

void maxpool_forward(const float* in, float* out, std::int32_t* argmax,
                     const Pool2dShape& s) {
    const int oh = s.out_h(), ow = s.out_w();
    const std::int64_t n = static_cast<std::int64_t>(s.batch) * oh * ow;
    for (std::int64_t p = 0; p < n; ++p) {
        const int b = static_cast<int>(p / (oh * ow));
        const int oy = static_cast<int>((p / ow) % oh);
        const int ox = static_cast<int>(p % ow);
        for (int c = 0; c < s.ch; ++c) pool_at(in, out, argmax, s, b, oy, ox, c);
    }
}

void maxpool_backward(const float* dout, const std::int32_t* argmax,
                      float* din, std::int64_t in_size, std::int64_t out_size) {
    for (std::int64_t i = 0; i < in_size; ++i) din[i] = 0.0f;
    for (std::int64_t i = 0; i < out_size; ++i) din[argmax[i]] = dout[i];
}

void dense_forward(const float* in, const float* w, const float* bias,
                   float* out, const DenseShape& s) {
    for (int b = 0; b < s.batch; ++b) {
        float* o = out + static_cast<std::int64_t>(b) * s.out_units;
        for (int j = 0; j < s.out_units; ++j) o[j] = dense_out_at(in, w, bias, s, b, j);
    }
}

void dense_backward_input(const float* dout, const float* w, float* din,
                          const DenseShape& s) {
    for (int b = 0; b < s.batch; ++b) {
        float* d = din + static_cast<std::int64_t>(b) * s.in_units;
        for (int i = 0; i < s.in_units; ++i) d[i] = dense_din_at(dout, w, s, b, i);
    }
}

void dense_backward_params(const float* in, const float* dout, float* dw,
                           float* dbias, const DenseShape& s) {
    const std::int64_t nw = static_cast<std::int64_t>(s.in_units) * s.out_units;
    for (std::int64_t p = 0; p < nw; ++p) {
        const int i = static_cast<int>(p / s.out_units);
        const int j = static_cast<int>(p % s.out_units);
        dw[p] = dense_dw_at(in, dout, s, i, j);
    }
    for (int j = 0; j < s.out_units; ++j) {
        float acc = 0.0f;
        for (int b = 0; b < s.batch; ++b) acc += dout[static_cast<std::int64_t>(b) * s.out_units + j];
        dbias[j] = acc;
    }
}

void softmax_rows(const float* in, float* out, int rows, int cols) {
    for (int r = 0; r < rows; ++r)
        softmax_row(in + static_cast<std::int64_t>(r) * cols, out + static_cast<std::int64_t>(r) * cols, cols);
}

}  // namespace serial

}  // namespace fedsup::kernels
