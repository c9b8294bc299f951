#include "nodulekit/kernels.hpp"

// Reference kernels. Plain sequential loops; the SIMD variants are checked
// against these.

namespace nodulekit::kernels {

namespace {

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double sum_scalar(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void relu_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_mask_scalar(const double* x, double* g, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] <= 0.0) g[i] = 0.0;
}

}  // namespace

const Ops scalar_ops = {
    dot_scalar, axpy_scalar, scale_scalar, sum_scalar, relu_scalar, relu_mask_scalar,
};

}  // namespace nodulekit::kernels
