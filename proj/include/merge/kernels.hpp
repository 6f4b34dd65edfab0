#pragma once

// Inner-loop kernels. Every kernel has a portable scalar reference and, where
// the CPU supports it, an AVX2/FMA variant. The active table is chosen once at
// startup; MERGE_SIMD=scalar in the environment forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace merge::simd {

enum class Backend { scalar, avx2 };

struct KernelTable {
    Backend backend;
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*squared_distance)(const double* a, const double* b, std::size_t n);
    double (*sum)(const double* a, std::size_t n);
    /// y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    /// y = alpha * y
    void (*scale)(double alpha, double* y, std::size_t n);
};

const KernelTable& scalar_table() noexcept;
/// nullptr when the running CPU lacks AVX2 and FMA.
const KernelTable* avx2_table() noexcept;

const KernelTable& active() noexcept;
/// Overrides the runtime choice. Returns false if the backend is unavailable.
bool set_backend(Backend b) noexcept;
std::string_view backend_name(Backend b) noexcept;

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    return active().dot(a.data(), b.data(), a.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
    return active().squared_distance(a.data(), b.data(), a.size());
}
inline double sum(std::span<const double> a) noexcept { return active().sum(a.data(), a.size()); }
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
    active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(double alpha, std::span<double> y) noexcept {
    active().scale(alpha, y.data(), y.size());
}

} // namespace merge::simd
