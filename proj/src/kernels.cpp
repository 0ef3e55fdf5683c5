#include "selfact/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace selfact::kern {

// ============================================================================
// Scalar reference kernels
// ============================================================================

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scal_scalar(std::size_t n, double alpha, double* x) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sumsq_scalar(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
    return s;
}

double dist2_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

constexpr Ops kScalarOps{"scalar",     dot_scalar,   axpy_scalar,
                         scal_scalar,  sumsq_scalar, dist2_scalar};

}  // namespace

const Ops& scalar_ops() { return kScalarOps; }

// ============================================================================
// Backend selection
// ============================================================================

#if defined(SELFACT_HAVE_AVX2_TU)
const Ops* avx2_ops_impl();  // defined in kernels_avx2.cpp
#endif

const Ops* avx2_ops() {
#if defined(SELFACT_HAVE_AVX2_TU)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
        return avx2_ops_impl();
    }
#endif
    return nullptr;
}

namespace {

const Ops* pick_default() {
    if (const char* env = std::getenv("SELFACT_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return &kScalarOps;
        if (std::strcmp(env, "avx2") == 0 && avx2_ops()) return avx2_ops();
        // "auto" or anything unrecognized falls through
    }
    if (const Ops* v = avx2_ops()) return v;
    return &kScalarOps;
}

std::atomic<const Ops*> g_active{nullptr};

}  // namespace

const Ops& active_ops() {
    const Ops* p = g_active.load(std::memory_order_acquire);
    if (!p) {
        p = pick_default();
        g_active.store(p, std::memory_order_release);
    }
    return *p;
}

bool set_backend(const char* name) {
    if (std::strcmp(name, "scalar") == 0) {
        g_active.store(&kScalarOps, std::memory_order_release);
        return true;
    }
    if (std::strcmp(name, "avx2") == 0) {
        if (const Ops* v = avx2_ops()) {
            g_active.store(v, std::memory_order_release);
            return true;
        }
        return false;
    }
    if (std::strcmp(name, "auto") == 0) {
        g_active.store(pick_default(), std::memory_order_release);
        return true;
    }
    return false;
}

}  // namespace selfact::kern
