#include "hyperquant/kernels.hpp"

#include <cstdint>

namespace hq::kernels {

void gemm_nn(const float* a, const float* b, float* c, int m, int n, int k, bool accumulate) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            const float* arow = a + static_cast<int64_t>(i) * k;
            for (int p = 0; p < k; ++p) acc += static_cast<double>(arow[p]) * b[static_cast<int64_t>(p) * n + j];
            float* out = c + static_cast<int64_t>(i) * n + j;
            *out = accumulate ? *out + static_cast<float>(acc) : static_cast<float>(acc);
        }
    }
}

void gemm_nt(const float* a, const float* b, float* c, int m, int n, int k, bool accumulate) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            const float* arow = a + static_cast<int64_t>(i) * k;
            const float* brow = b + static_cast<int64_t>(j) * k;
            for (int p = 0; p < k; ++p) acc += static_cast<double>(arow[p]) * brow[p];
            float* out = c + static_cast<int64_t>(i) * n + j;
            *out = accumulate ? *out + static_cast<float>(acc) : static_cast<float>(acc);
        }
    }
}

void gemm_tn(const float* a, const float* b, float* c, int m, int n, int k, bool accumulate) {
#pragma omp parallel for collapse(2) schedule(static)
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
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < n; ++b) {
        for (int fo = 0; fo < f; ++fo) {
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0.0;
                    for (int ci = 0; ci < c; ++ci) {
                        for (int ky = 0; ky < kh; ++ky) {
                            const int iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int ix = ox * stride - pad + kx;
                                if (ix < 0 || ix >= w) continue;
                                acc += static_cast<double>(in[((static_cast<int64_t>(b) * c + ci) * h + iy) * w + ix]) *
                                       kern[((static_cast<int64_t>(fo) * c + ci) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    out[((static_cast<int64_t>(b) * f + fo) * oh + oy) * ow + ox] = static_cast<float>(acc);
                }
            }
        }
    }
}

void conv2d_grad_input(const float* dout, const float* kern, float* din, int n, int c, int h, int w, int f, int kh,
                       int kw, int stride, int pad, int oh, int ow) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < n; ++b) {
        for (int ci = 0; ci < c; ++ci) {
            for (int iy = 0; iy < h; ++iy) {
                for (int ix = 0; ix < w; ++ix) {
                    double acc = 0.0;
                    for (int fo = 0; fo < f; ++fo) {
                        for (int ky = 0; ky < kh; ++ky) {
                            const int num_y = iy + pad - ky;
                            if (num_y < 0 || num_y % stride != 0) continue;
                            const int oy = num_y / stride;
                            if (oy >= oh) continue;
                            for (int kx = 0; kx < kw; ++kx) {
                                const int num_x = ix + pad - kx;
                                if (num_x < 0 || num_x % stride != 0) continue;
                                const int ox = num_x / stride;
                                if (ox >= ow) continue;
                                acc += static_cast<double>(
                                           dout[((static_cast<int64_t>(b) * f + fo) * oh + oy) * ow + ox]) *
                                       kern[((static_cast<int64_t>(fo) * c + ci) * kh + ky) * kw + kx];
                            }
                        }
                    }
                    din[((static_cast<int64_t>(b) * c + ci) * h + iy) * w + ix] += static_cast<float>(acc);
                }
            }
        }
    }
}

void conv2d_grad_kernel(const float* dout, const float* in, float* dkern, int n, int c, int h, int w, int f, int kh,
                        int kw, int stride, int pad, int oh, int ow) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int fo = 0; fo < f; ++fo) {
        for (int ci = 0; ci < c; ++ci) {
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    double acc = 0.0;
                    for (int b = 0; b < n; ++b) {
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * stride - pad + ky;
                            if (iy < 0 || iy >= h) continue;
                            for (int ox = 0; ox < ow; ++ox) {
                                const int ix = ox * stride - pad + kx;
                                if (ix < 0 || ix >= w) continue;
                                acc += static_cast<double>(
                                           dout[((static_cast<int64_t>(b) * f + fo) * oh + oy) * ow + ox]) *
                                       in[((static_cast<int64_t>(b) * c + ci) * h + iy) * w + ix];
                            }
                        }
                    }
                    dkern[((static_cast<int64_t>(fo) * c + ci) * kh + ky) * kw + kx] += static_cast<float>(acc);
                }
            }
        }
    }
}

}  // namespace hq::kernels
