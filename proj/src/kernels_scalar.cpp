#include "sparsebound/simd.hpp"

// Reference kernels. The 4-lane accumulators mirror the AVX2 register lanes:
// lane j holds the partial sum of elements with index % 4 == j, the tail adds
// an explicit 0.0 to the unused lanes (as a masked vector load does), and the
// final reduction is (l0+l2)+(l1+l3), matching the 128-bit halves reduction.
// Keeping the structure identical is what makes backends bit-comparable.

namespace sparsebound::simd {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += a[i] * b[i];
        acc1 += a[i + 1] * b[i + 1];
        acc2 += a[i + 2] * b[i + 2];
        acc3 += a[i + 3] * b[i + 3];
    }
    if (i < n) {
        acc0 += (i < n) ? a[i] * b[i] : 0.0;
        acc1 += (i + 1 < n) ? a[i + 1] * b[i + 1] : 0.0;
        acc2 += (i + 2 < n) ? a[i + 2] * b[i + 2] : 0.0;
        acc3 += 0.0;
    }
    return (acc0 + acc2) + (acc1 + acc3);
}

double norm_sq_scalar(const double* x, std::size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += x[i] * x[i];
        acc1 += x[i + 1] * x[i + 1];
        acc2 += x[i + 2] * x[i + 2];
        acc3 += x[i + 3] * x[i + 3];
    }
    if (i < n) {
        acc0 += (i < n) ? x[i] * x[i] : 0.0;
        acc1 += (i + 1 < n) ? x[i + 1] * x[i + 1] : 0.0;
        acc2 += (i + 2 < n) ? x[i + 2] * x[i + 2] : 0.0;
        acc3 += 0.0;
    }
    return (acc0 + acc2) + (acc1 + acc3);
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_scalar(double* x, double a, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void relu_scalar(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = (x[i] > 0.0) ? x[i] : 0.0;
}

void relu_grad_accum_scalar(const double* pre, const double* g, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += (pre[i] > 0.0) ? g[i] : 0.0;
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{dot_scalar,  norm_sq_scalar, axpy_scalar,
                                   scale_scalar, relu_scalar,   relu_grad_accum_scalar};
    return table;
}

}  // namespace sparsebound::simd
