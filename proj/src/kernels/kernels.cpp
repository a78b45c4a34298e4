#include "birf/kernels/kernels.hpp"

#include <chrono>
#include <cstdlib>
#include <cstring>

#include "birf/common.hpp"

namespace birf {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

}  // namespace birf

namespace birf::kernels {

const Ops* avx2_ops_impl();  // defined in the -mavx2 translation unit

const Ops* avx2_ops() {
#if defined(__x86_64__) || defined(_M_X64)
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
        return avx2_ops_impl();
#endif
    return nullptr;
}

const Ops& active() {
    static const Ops* selected = [] {
        const char* env = std::getenv("BIRF_KERNELS");
        if (env && std::strcmp(env, "scalar") == 0) return &scalar_ops();
        if (env && std::strcmp(env, "avx2") == 0) {
            const Ops* a = avx2_ops();
            if (!a) throw ConfigError("BIRF_KERNELS=avx2 requested but CPU lacks AVX2/FMA");
            return a;
        }
        const Ops* a = avx2_ops();
        return a ? a : &scalar_ops();
    }();
    return *selected;
}

}  // namespace birf::kernels
