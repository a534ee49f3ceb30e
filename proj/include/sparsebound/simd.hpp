#pragma once

#include <cstddef>
#include <string>

namespace sparsebound::simd {

// Numeric inner-loop kernels behind a runtime-dispatched table.
//
// Two backends: a scalar reference and an AVX2 variant. Both use the same
// fixed 4-lane accumulation structure (multiply then add, no FMA, identical
// tail handling and reduction order), so every kernel returns bit-identical
// results on either backend. The equivalence suite asserts exact equality.

enum class Backend { scalar, avx2 };

/// Backend currently in use. Resolved once: AVX2 if the CPU supports it and
/// the build carries the AVX2 object, unless SPARSEBOUND_SIMD=scalar|avx2
/// overrides the pick.
Backend active_backend();
std::string backend_name(Backend b);

/// Test hook: force a backend. Throws if the requested backend is
/// unavailable on this machine/build.
void force_backend(Backend b);

/// True if the AVX2 variant can run here.
bool avx2_available();

/// sum_i a[i]*b[i], 4-lane fixed-order accumulation.
double dot(const double* a, const double* b, std::size_t n);

/// sum_i x[i]^2, same lane structure as dot().
double norm_sq(const double* x, std::size_t n);

/// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);

/// x[i] *= a
void scale(double* x, double a, std::size_t n);

/// y[i] = x[i] > 0 ? x[i] : 0
void relu(const double* x, double* y, std::size_t n);

/// y[i] += pre[i] > 0 ? g[i] : 0   (ReLU'(0) := 0)
void relu_grad_accum(const double* pre, const double* g, double* y, std::size_t n);

/// Kernel table for one backend; both backends fill one of these.
struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    double (*norm_sq)(const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double*, double, std::size_t);
    void (*relu)(const double*, double*, std::size_t);
    void (*relu_grad_accum)(const double*, const double*, double*, std::size_t);
};

const KernelTable& scalar_kernels();
/// nullptr when the build has no AVX2 object (non-x86 or unsupported compiler).
const KernelTable* avx2_kernels();

}  // namespace sparsebound::simd
