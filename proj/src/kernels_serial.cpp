#include <cstdint>

#include "hyperquant/kernels.hpp"

// Straight-line loop implementations, no threading. These double as the
// independent oracle the parallel kernels are tested against.

namespace hq::ref {

void gemm_nn(const float* a, const float* b, float* c, int m, int n, int k, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p)
                acc += static_cast<double>(a[static_cast<int64_t>(i) * k + p]) * b[static_cast<int64_t>(p) * n + j];
            float* out = c + static_cast<int64_t>(i) * n + j;
            *out = accumulate ? *out + static_cast<float>(acc) : static_cast<float>(acc);
        }
    }
}

void gemm_nt(const float* a, const float* b, float* c, int m, int n, int k, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p)
                acc += static_cast<double>(a[static_cast<int64_t>(i) * k + p]) * b[static_cast<int64_t>(j) * k + p];
            float* out = c + static_cast<int64_t>(i) * n + j;
            *out = accumulate ? *out + static_cast<float>(acc) : static_cast<float>(acc);
        }
    }
}

void gemm_tn(const float* a, const float* b, float* c, int m, int n, int k, bool accumulate) {
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p)
                acc += static_cast<double>(a[static_cast<int64_t>(p) * m + i]) * b[static_cast<int64_t>(p) * n + j];
            float* out = c + static_cast<int64_t>(i) * n + j;
            *out = accumulate ? *out + static_cast<float>(acc) : static_cast<float>(acc);
        }
    }
}

void conv2d_forward(const float* in, const float* kern, float* out, int n, int c, int h, int w, int f, int kh, int kw,
                    int stride, int pad, int oh, int ow) {
    for (int b = 0; b < n; ++b)
        for (int fo = 0; fo < f; ++fo)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (int ci = 0; ci < c; ++ci)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const int iy = oy * stride - pad + ky;
                                const int ix = ox * stride - pad + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                acc += static_cast<double>(in[((static_cast<int64_t>(b) * c + ci) * h + iy) * w + ix]) *
                                       kern[((static_cast<int64_t>(fo) * c + ci) * kh + ky) * kw + kx];
                            }
                    out[((static_cast<int64_t>(b) * f + fo) * oh + oy) * ow + ox] = static_cast<float>(acc);
                }
}

void conv2d_grad_input(const float* dout, const float* kern, float* din, int n, int c, int h, int w, int f, int kh,
                       int kw, int stride, int pad, int oh, int ow) {
    for (int b = 0; b < n; ++b)
        for (int fo = 0; fo < f; ++fo)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const float g = dout[((static_cast<int64_t>(b) * f + fo) * oh + oy) * ow + ox];
                    for (int ci = 0; ci < c; ++ci)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const int iy = oy * stride - pad + ky;
                                const int ix = ox * stride - pad + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                din[((static_cast<int64_t>(b) * c + ci) * h + iy) * w + ix] +=
                                    g * kern[((static_cast<int64_t>(fo) * c + ci) * kh + ky) * kw + kx];
                            }
                }
}

void conv2d_grad_kernel(const float* dout, const float* in, float* dkern, int n, int c, int h, int w, int f, int kh,
                        int kw, int stride, int pad, int oh, int ow) {
    for (int b = 0; b < n; ++b)
        for (int fo = 0; fo < f; ++fo)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const float g = dout[((static_cast<int64_t>(b) * f + fo) * oh + oy) * ow + ox];
                    for (int ci = 0; ci < c; ++ci)
                        for (int ky = 0; ky < kh; ++ky)
                            for (int kx = 0; kx < kw; ++kx) {
                                const int iy = oy * stride - pad + ky;
                                const int ix = ox * stride - pad + kx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                dkern[((static_cast<int64_t>(fo) * c + ci) * kh + ky) * kw + kx] +=
                                    g * in[((static_cast<int64_t>(b) * c + ci) * h + iy) * w + ix];
                            }
                }
}

}  // namespace hq::ref
