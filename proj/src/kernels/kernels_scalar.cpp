#include "bindelta/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

// Reference kernels. Plain loops, no reassociation tricks: these define
// the semantics the vector backends are tested against.

namespace bindelta::kernels {
namespace {

void s_gemv(const double* w, const double* x, const double* b, double* y,
            std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        y[r] = b ? acc + b[r] : acc;
    }
}

void s_gemv_t_acc(const double* w, const double* g, double* dx,
                  std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* wr = w + r * cols;
        const double gr = g[r];
        for (std::size_t c = 0; c < cols; ++c) dx[c] += wr[c] * gr;
    }
}

void s_ger_acc(const double* g, const double* x, double* dw,
               std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        double* dwr = dw + r * cols;
        const double gr = g[r];
        for (std::size_t c = 0; c < cols; ++c) dwr[c] += gr * x[c];
    }
}

double s_dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void s_axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void s_scale(double alpha, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

void s_relu(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void s_relu_backward(const double* pre, const double* up, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = pre[i] > 0.0 ? up[i] : 0.0;
}

void s_adam_update(double* p, double* m, double* v, const double* g, std::size_t n,
                   double lr, double beta1, double beta2, double eps,
                   double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

double s_sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double s_max_value(const double* x, std::size_t n) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) best = std::max(best, x[i]);
    return best;
}

double s_squared_distance(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

} // namespace

const OpsTable& scalar_table() {
    static const OpsTable t{
        s_gemv, s_gemv_t_acc, s_ger_acc, s_dot,  s_axpy,      s_scale,
        s_relu, s_relu_backward, s_adam_update, s_sum, s_max_value, s_squared_distance,
    };
    return t;
}

} // namespace bindelta::kernels
