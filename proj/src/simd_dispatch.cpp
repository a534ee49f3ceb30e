#include "sparsebound/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace sparsebound::simd {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
#if defined(__GNUC__) || defined(__clang__)
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
#else
    return false;
#endif
}

struct Dispatch {
    const KernelTable* table;
    Backend backend;
};

Dispatch resolve() {
    Backend pick = Backend::scalar;
    if (avx2_kernels() != nullptr && cpu_has_avx2()) pick = Backend::avx2;
    if (const char* env = std::getenv("SPARSEBOUND_SIMD")) {
        const std::string v(env);
        if (v == "scalar") {
            pick = Backend::scalar;
        } else if (v == "avx2") {
            if (avx2_kernels() == nullptr || !cpu_has_avx2())
                throw std::runtime_error("SPARSEBOUND_SIMD=avx2 but AVX2 is unavailable");
            pick = Backend::avx2;
        } else {
            throw std::runtime_error("unknown SPARSEBOUND_SIMD value: " + v);
        }
    }
    if (pick == Backend::avx2) return {avx2_kernels(), Backend::avx2};
    return {&scalar_kernels(), Backend::scalar};
}

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

const KernelTable& table() {
    const KernelTable* t = g_table.load(std::memory_order_acquire);
    if (t == nullptr) {
        const Dispatch d = resolve();
        g_backend.store(d.backend, std::memory_order_relaxed);
        g_table.store(d.table, std::memory_order_release);
        t = d.table;
    }
    return *t;
}

}  // namespace

Backend active_backend() {
    table();
    return g_backend.load(std::memory_order_relaxed);
}

std::string backend_name(Backend b) {
    return b == Backend::avx2 ? "avx2" : "scalar";
}

bool avx2_available() { return avx2_kernels() != nullptr && cpu_has_avx2(); }

void force_backend(Backend b) {
    if (b == Backend::avx2) {
        if (!avx2_available()) throw std::runtime_error("AVX2 backend unavailable");
        g_backend.store(Backend::avx2, std::memory_order_relaxed);
        g_table.store(avx2_kernels(), std::memory_order_release);
    } else {
        g_backend.store(Backend::scalar, std::memory_order_relaxed);
        g_table.store(&scalar_kernels(), std::memory_order_release);
    }
}

double dot(const double* a, const double* b, std::size_t n) { return table().dot(a, b, n); }
double norm_sq(const double* x, std::size_t n) { return table().norm_sq(x, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { table().axpy(a, x, y, n); }
void scale(double* x, double a, std::size_t n) { table().scale(x, a, n); }
void relu(const double* x, double* y, std::size_t n) { table().relu(x, y, n); }
void relu_grad_accum(const double* pre, const double* g, double* y, std::size_t n) {
    table().relu_grad_accum(pre, g, y, n);
}

}  // namespace sparsebound::simd
