#pragma once

// Dense kernels used by the tape ops. hq::kernels is the OpenMP-parallel set;
// hq::ref is a plain serial implementation of the same contracts, kept as the
// oracle for tests and for the benchmark tool. Every parallel loop assigns
// each output element to exactly one thread with a serial inner reduction, so
// results are bitwise identical for any thread count. Dot products accumulate
// in doubles and store f32.

namespace hq::kernels {

// C[m,n] = A[m,k] * B[k,n]            (accumulate: C += ...)
void gemm_nn(const float* a, const float* b, float* c, int m, int n, int k, bool accumulate = false);
// C[m,n] = A[m,k] * B[n,k]^T
void gemm_nt(const float* a, const float* b, float* c, int m, int n, int k, bool accumulate = false);
// C[m,n] = A[k,m]^T * B[k,n]
void gemm_tn(const float* a, const float* b, float* c, int m, int n, int k, bool accumulate = false);

// Cross-correlation, NCHW input and FCkhkw kernel.
// out[n,f,oy,ox] = sum_{c,ky,kx} in[n,c,oy*s-p+ky,ox*s-p+kx] * kern[f,c,ky,kx]
void conv2d_forward(const float* in, const float* kern, float* out, int n, int c, int h, int w, int f, int kh, int kw,
                    int stride, int pad, int oh, int ow);
// din[n,c,y,x] += sum over contributing output positions of dout * kern
void conv2d_grad_input(const float* dout, const float* kern, float* din, int n, int c, int h, int w, int f, int kh,
                       int kw, int stride, int pad, int oh, int ow);
// dkern[f,c,ky,kx] += sum over batch and output positions of dout * in
void conv2d_grad_kernel(const float* dout, const float* in, float* dkern, int n, int c, int h, int w, int f, int kh,
                        int kw, int stride, int pad, int oh, int ow);

}  // namespace hq::kernels

namespace hq::ref {

void gemm_nn(const float* a, const float* b, float* c, int m, int n, int k, bool accumulate = false);
void gemm_nt(const float* a, const float* b, float* c, int m, int n, int k, bool accumulate = false);
void gemm_tn(const float* a, const float* b, float* c, int m, int n, int k, bool accumulate = false);

void conv2d_forward(const float* in, const float* kern, float* out, int n, int c, int h, int w, int f, int kh, int kw,
                    int stride, int pad, int oh, int ow);
void conv2d_grad_input(const float* dout, const float* kern, float* din, int n, int c, int h, int w, int f, int kh,
                       int kw, int stride, int pad, int oh, int ow);
void conv2d_grad_kernel(const float* dout, const float* in, float* dkern, int n, int c, int h, int w, int f, int kh,
                        int kw, int stride, int pad, int oh, int ow);

}  // namespace hq::ref
