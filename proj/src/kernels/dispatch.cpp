#include <cstdlib>
#include <cstring>

#include "evloc/core/types.hpp"
#include "evloc/kernels/kernels.hpp"

namespace evloc::kernels {

namespace {

Mode g_mode = Mode::Auto;
const KernelSet* g_active = nullptr;

void resolve() {
    if (g_active) return;
    Mode want = g_mode;
    if (want == Mode::Auto) {
        // One-time override hook for experiments and equivalence debugging.
        if (const char* env = std::getenv("EVLOC_KERNELS")) {
            if (std::strcmp(env, "scalar") == 0) want = Mode::Scalar;
            else if (std::strcmp(env, "avx2") == 0) want = Mode::Avx2;
        }
    }
    if (want == Mode::Auto)
        want = (cpu_has_avx2() && avx2_set()) ? Mode::Avx2 : Mode::Scalar;
    if (want == Mode::Avx2) {
        if (!cpu_has_avx2() || !avx2_set())
            throw core::UsageError("avx2 kernels requested but not available");
        g_active = avx2_set();
        g_mode = Mode::Avx2;
    } else {
        g_active = &scalar_set();
        g_mode = Mode::Scalar;
    }
}

}  // namespace

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

void set_mode(Mode mode) {
    g_active = nullptr;
    g_mode = mode;
    resolve();
}

Mode active_mode() {
    resolve();
    return g_mode;
}

const char* active_name() {
    resolve();
    return g_mode == Mode::Avx2 ? "avx2" : "scalar";
}

const KernelSet& active() {
    resolve();
    return *g_active;
}

}  // namespace evloc::kernels
