// Times the OpenMP kernels against the serial reference on the shapes the
// training loop actually produces, printing per-kernel speedups.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hyperquant/kernels.hpp"
#include "hyperquant/rng.hpp"

namespace {

using clock_type = std::chrono::steady_clock;

std::vector<float> random_vec(size_t n, hq::Rng& rng) {
    std::vector<float> v(n);
    for (auto& x : v) x = rng.uniform_real(-1.0f, 1.0f);
    return v;
}

template <typename F>
double time_best_of(int reps, F&& fn) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = clock_type::now();
        fn();
        const double dt = std::chrono::duration<double>(clock_type::now() - t0).count();
        if (dt < best) best = dt;
    }
    return best;
}

void bench_gemm(int m, int n, int k) {
    hq::Rng rng(42);
    const auto a = random_vec(static_cast<size_t>(m) * k, rng);
    const auto b = random_vec(static_cast<size_t>(k) * n, rng);
    std::vector<float> c(static_cast<size_t>(m) * n);
    const double ts = time_best_of(5, [&] { hq::ref::gemm_nn(a.data(), b.data(), c.data(), m, n, k); });
    const double tp = time_best_of(5, [&] { hq::kernels::gemm_nn(a.data(), b.data(), c.data(), m, n, k); });
    std::printf("gemm_nn  %4dx%-4dx%-4d  serial %8.3f ms  parallel %8.3f ms  speedup %.2fx\n", m, k, n, ts * 1e3,
                tp * 1e3, ts / tp);
}

void bench_conv(int n, int c, int h, int f, int kk, int stride, int pad) {
    hq::Rng rng(7);
    const int oh = (h + 2 * pad - kk) / stride + 1;
    const auto in = random_vec(static_cast<size_t>(n) * c * h * h, rng);
    const auto kern = random_vec(static_cast<size_t>(f) * c * kk * kk, rng);
    std::vector<float> out(static_cast<size_t>(n) * f * oh * oh);
    const double ts = time_best_of(5, [&] {
        hq::ref::conv2d_forward(in.data(), kern.data(), out.data(), n, c, h, h, f, kk, kk, stride, pad, oh, oh);
    });
    const double tp = time_best_of(5, [&] {
        hq::kernels::conv2d_forward(in.data(), kern.data(), out.data(), n, c, h, h, f, kk, kk, stride, pad, oh, oh);
    });
    std::printf("conv2d   n=%-3d %2dx%2dx%-2d f=%-3d k=%d  serial %8.3f ms  parallel %8.3f ms  speedup %.2fx\n", n, c,
                h, h, f, kk, ts * 1e3, tp * 1e3, ts / tp);
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP enabled, max threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; both columns run serially\n");
#endif
    bench_gemm(64, 64, 2048);
    bench_gemm(2048, 64, 64);
    bench_gemm(256, 256, 256);
    bench_gemm(512, 512, 512);
    bench_conv(64, 8, 8, 16, 3, 2, 1);
    bench_conv(256, 8, 8, 16, 3, 2, 1);
    bench_conv(64, 16, 32, 32, 3, 1, 1);
    return 0;
}
