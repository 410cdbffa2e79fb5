#pragma once

#include <cstddef>
#include <string_view>

namespace bindelta::kernels {

/// Backends for the data-parallel inner loops. The scalar backend is the
/// reference implementation; vector backends must agree with it within
/// floating-point reassociation tolerance (see tests/kernels suite).
enum class Backend { scalar, avx2 };

/// Backend in effect. Resolved once on first use: the BINDELTA_KERNELS
/// environment variable ("scalar" or "avx2") wins, otherwise the best
/// ISA the CPU supports.
Backend active();
std::string_view backend_name();
bool cpu_supports_avx2();

/// Force a backend (tests and benchmarks). Throws std::invalid_argument
/// if the CPU cannot run it.
void force_backend(Backend b);

// y = W x + b, W row-major (rows x cols), b may be null.
void gemv(const double* w, const double* x, const double* b, double* y,
          std::size_t rows, std::size_t cols);

// dx += W^T g
void gemv_t_acc(const double* w, const double* g, double* dx,
                std::size_t rows, std::size_t cols);

// dW += g x^T
void ger_acc(const double* g, const double* x, double* dw,
             std::size_t rows, std::size_t cols);

double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

// x *= alpha
void scale(double alpha, double* x, std::size_t n);

// y = max(x, 0)
void relu(const double* x, double* y, std::size_t n);

// out = up where pre > 0, else 0
void relu_backward(const double* pre, const double* up, double* out, std::size_t n);

// Elementwise Adam update with bias correction factors bc1 = 1 - b1^t,
// bc2 = 1 - b2^t already computed by the caller.
void adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                 double lr, double beta1, double beta2, double eps,
                 double bc1, double bc2);

double sum(const double* x, std::size_t n);
double max_value(const double* x, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);

/// One function-pointer table per backend; the dispatcher selects a table
/// at startup and the wrappers above jump through it.
struct OpsTable {
    void (*gemv)(const double*, const double*, const double*, double*, std::size_t, std::size_t);
    void (*gemv_t_acc)(const double*, const double*, double*, std::size_t, std::size_t);
    void (*ger_acc)(const double*, const double*, double*, std::size_t, std::size_t);
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double, double*, std::size_t);
    void (*relu)(const double*, double*, std::size_t);
    void (*relu_backward)(const double*, const double*, double*, std::size_t);
    void (*adam_update)(double*, double*, double*, const double*, std::size_t,
                        double, double, double, double, double, double);
    double (*sum)(const double*, std::size_t);
    double (*max_value)(const double*, std::size_t);
    double (*squared_distance)(const double*, const double*, std::size_t);
};

const OpsTable& scalar_table();
const OpsTable& avx2_table();

} // namespace bindelta::kernels
