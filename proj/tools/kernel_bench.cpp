// Micro-benchmark for the scalar vs AVX2 kernel backends.
// Usage: kernel_bench [rows cols iters]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "bindelta/kernels.hpp"
#include "bindelta/rng.hpp"

using namespace bindelta;

namespace {

double bench_gemv(std::size_t rows, std::size_t cols, int iters) {
    Rng rng(1);
    std::vector<double> w(rows * cols), x(cols), b(rows), y(rows);
    for (auto& v : w) v = rng.normal();
    for (auto& v : x) v = rng.normal();
    for (auto& v : b) v = rng.normal();
    const auto t0 = std::chrono::steady_clock::now();
    double sink = 0.0;
    for (int i = 0; i < iters; ++i) {
        kernels::gemv(w.data(), x.data(), b.data(), y.data(), rows, cols);
        sink += y[0];
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (sink == 42.0) std::printf("~");
    return 2.0 * double(rows) * double(cols) * iters / secs * 1e-9; // GFLOP/s
}

double bench_adam(std::size_t n, int iters) {
    Rng rng(2);
    std::vector<double> p(n), m(n, 0.0), v(n, 0.0), g(n);
    for (auto& x : p) x = rng.normal();
    for (auto& x : g) x = rng.normal();
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < iters; ++i)
        kernels::adam_update(p.data(), m.data(), v.data(), g.data(), n, 1e-3, 0.9, 0.999,
                             1e-8, 0.1, 0.001);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return double(n) * iters / secs * 1e-6; // Melem/s
}

} // namespace

int main(int argc, char** argv) {
    std::size_t rows = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 512;
    std::size_t cols = argc > 2 ? std::strtoull(argv[2], nullptr, 10) : 2048;
    int iters = argc > 3 ? int(std::strtol(argv[3], nullptr, 10)) : 2000;

    std::vector<kernels::Backend> backends{kernels::Backend::scalar};
    if (kernels::cpu_supports_avx2()) backends.push_back(kernels::Backend::avx2);

    std::printf("%-8s %20s %18s\n", "backend", "gemv GFLOP/s", "adam Melem/s");
    for (auto b : backends) {
        kernels::force_backend(b);
        const double g = bench_gemv(rows, cols, iters);
        const double a = bench_adam(rows * cols, iters / 10 + 1);
        std::printf("%-8s %20.2f %18.1f\n",
                    std::string(kernels::backend_name()).c_str(), g, a);
    }
    return 0;
}
