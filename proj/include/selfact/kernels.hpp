#pragma once

#include <cstddef>

// Data-parallel primitives behind the numeric pipeline: dot products, axpy
// updates and squared distances carry the convolution, dense-layer and
// cluster-distance inner loops. Every kernel has a scalar reference
// implementation; on x86-64 an AVX2+FMA variant is selected at runtime after
// a CPU check. The two backends are equivalence-tested against each other,
// and everything above this layer is backend-agnostic.

namespace selfact::kern {

struct Ops {
    const char* name;
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
    // x[i] *= alpha
    void (*scal)(std::size_t n, double alpha, double* x);
    // sum_i x[i]^2
    double (*sumsq)(const double* x, std::size_t n);
    // sum_i (a[i] - b[i])^2
    double (*dist2)(const double* a, const double* b, std::size_t n);
};

// Portable reference backend; always available.
const Ops& scalar_ops();

// Vectorized backend, or nullptr when unsupported by the build or the CPU.
const Ops* avx2_ops();

// The backend in use. Defaults to the best available; the SELFACT_KERNELS
// environment variable ("scalar", "avx2", "auto") overrides at startup.
const Ops& active_ops();

// Force a backend by name. Returns false (and leaves the selection alone)
// when the requested backend is unavailable.
bool set_backend(const char* name);

inline double dot(const double* a, const double* b, std::size_t n) {
    return active_ops().dot(a, b, n);
}
inline void axpy(std::size_t n, double alpha, const double* x, double* y) {
    active_ops().axpy(n, alpha, x, y);
}
inline void scal(std::size_t n, double alpha, double* x) {
    active_ops().scal(n, alpha, x);
}
inline double sumsq(const double* x, std::size_t n) {
    return active_ops().sumsq(x, n);
}
inline double dist2(const double* a, const double* b, std::size_t n) {
    return active_ops().dist2(a, b, n);
}

}  // namespace selfact::kern
