#include "bindelta/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace bindelta::kernels {
namespace {

std::atomic<const OpsTable*> g_ops{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

bool detect_avx2() {
#if defined(__x86_64__) || defined(_M_X64) || defined(__i386__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

void install(Backend b) {
    g_backend.store(b, std::memory_order_relaxed);
    g_ops.store(b == Backend::avx2 ? &avx2_table() : &scalar_table(),
                std::memory_order_release);
}

const OpsTable& resolve() {
    const OpsTable* t = g_ops.load(std::memory_order_acquire);
    if (t) return *t;
    Backend pick = detect_avx2() ? Backend::avx2 : Backend::scalar;
    if (const char* env = std::getenv("BINDELTA_KERNELS")) {
        const std::string v(env);
        if (v == "scalar") pick = Backend::scalar;
        else if (v == "avx2" && detect_avx2()) pick = Backend::avx2;
        // anything else: keep the detected backend
    }
    install(pick);
    return *g_ops.load(std::memory_order_acquire);
}

} // namespace

Backend active() {
    resolve();
    return g_backend.load(std::memory_order_relaxed);
}

std::string_view backend_name() {
    return active() == Backend::avx2 ? "avx2" : "scalar";
}

bool cpu_supports_avx2() { return detect_avx2(); }

void force_backend(Backend b) {
    if (b == Backend::avx2 && !detect_avx2())
        throw std::invalid_argument("force_backend: avx2 not supported on this CPU");
    install(b);
}

void gemv(const double* w, const double* x, const double* b, double* y,
          std::size_t rows, std::size_t cols) {
    resolve().gemv(w, x, b, y, rows, cols);
}

void gemv_t_acc(const double* w, const double* g, double* dx,
                std::size_t rows, std::size_t cols) {
    resolve().gemv_t_acc(w, g, dx, rows, cols);
}

void ger_acc(const double* g, const double* x, double* dw,
             std::size_t rows, std::size_t cols) {
    resolve().ger_acc(g, x, dw, rows, cols);
}

double dot(const double* a, const double* b, std::size_t n) {
    return resolve().dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    resolve().axpy(alpha, x, y, n);
}

void scale(double alpha, double* x, std::size_t n) { resolve().scale(alpha, x, n); }

void relu(const double* x, double* y, std::size_t n) { resolve().relu(x, y, n); }

void relu_backward(const double* pre, const double* up, double* out, std::size_t n) {
    resolve().relu_backward(pre, up, out, n);
}

void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2) {
    resolve().adam_update(p, m, v, g, n, lr, beta1, beta2, eps, bc1, bc2);
}

double sum(const double* x, std::size_t n) { return resolve().sum(x, n); }

double max_value(const double* x, std::size_t n) { return resolve().max_value(x, n); }

double squared_distance(const double* a, const double* b, std::size_t n) {
    return resolve().squared_distance(a, b, n);
}

} // namespace bindelta::kernels
