#include "merge/kernels.hpp"

#include "kernels_impl.hpp"

#include <cstdlib>
#include <string_view>

namespace merge::simd {

namespace {

constexpr KernelTable kScalar{Backend::scalar, scalar::dot, scalar::squared_distance,
                              scalar::sum, scalar::axpy, scalar::scale};

#ifdef MERGE_HAVE_AVX2_KERNELS
constexpr KernelTable kAvx2{Backend::avx2, avx2::dot, avx2::squared_distance,
                            avx2::sum, avx2::axpy, avx2::scale};

bool cpu_has_avx2() noexcept {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}
#endif

const KernelTable* initial_table() noexcept {
    if (const char* env = std::getenv("MERGE_SIMD"); env && std::string_view(env) == "scalar")
        return &kScalar;
    if (const KernelTable* t = avx2_table()) return t;
    return &kScalar;
}

const KernelTable*& current() noexcept {
    static const KernelTable* table = initial_table();
    return table;
}

} // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

const KernelTable* avx2_table() noexcept {
#ifdef MERGE_HAVE_AVX2_KERNELS
    static const bool supported = cpu_has_avx2();
    return supported ? &kAvx2 : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() noexcept { return *current(); }

bool set_backend(Backend b) noexcept {
    if (b == Backend::scalar) {
        current() = &kScalar;
        return true;
    }
    if (const KernelTable* t = avx2_table()) {
        current() = t;
        return true;
    }
    return false;
}

std::string_view backend_name(Backend b) noexcept {
    switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    }
    return "unknown";
}

} // namespace merge::simd
