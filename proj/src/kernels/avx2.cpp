#include "dpmcpm/kernels.hpp"

#if defined(DPMCPM_HAVE_AVX2)

#include <immintrin.h>

#include <algorithm>
#include <limits>

namespace dpmcpm::kernels
{

namespace
{

void accumulate_rows_avx2(const double* table, std::size_t stride, const std::uint32_t* rows,
                          std::size_t row_count, double* out, std::size_t width)
{
    std::size_t h = 0;
    for (; h + 8 <= width; h += 8) {
        __m256d acc0 = _mm256_loadu_pd(out + h);
        __m256d acc1 = _mm256_loadu_pd(out + h + 4);
        for (std::size_t r = 0; r < row_count; ++r) {
            const double* src = table + static_cast<std::size_t>(rows[r]) * stride + h;
            acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(src));
            acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(src + 4));
        }
        _mm256_storeu_pd(out + h, acc0);
        _mm256_storeu_pd(out + h + 4, acc1);
    }
    for (; h + 4 <= width; h += 4) {
        __m256d acc = _mm256_loadu_pd(out + h);
        for (std::size_t r = 0; r < row_count; ++r) {
            acc = _mm256_add_pd(
                acc, _mm256_loadu_pd(table + static_cast<std::size_t>(rows[r]) * stride + h));
        }
        _mm256_storeu_pd(out + h, acc);
    }
    for (; h < width; ++h) {
        double acc = out[h];
        for (std::size_t r = 0; r < row_count; ++r) {
            acc += table[static_cast<std::size_t>(rows[r]) * stride + h];
        }
        out[h] = acc;
    }
}

void multiply_avx2(const double* a, const double* b, double* out, std::size_t n)
{
    std::size_t h = 0;
    for (; h + 4 <= n; h += 4) {
        _mm256_storeu_pd(out + h, _mm256_mul_pd(_mm256_loadu_pd(a + h), _mm256_loadu_pd(b + h)));
    }
    for (; h < n; ++h) {
        out[h] = a[h] * b[h];
    }
}

double dot_avx2(const double* a, const double* b, std::size_t n)
{
    __m256d acc = _mm256_setzero_pd();
    std::size_t h = 0;
    for (; h + 4 <= n; h += 4) {
        // mul then add, never fused, to match the scalar reference
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + h), _mm256_loadu_pd(b + h)));
    }
    const __m128d lo = _mm256_castpd256_pd128(acc);
    const __m128d hi = _mm256_extractf128_pd(acc, 1);
    const __m128d pair = _mm_add_pd(lo, hi);
    double total = _mm_cvtsd_f64(pair) + _mm_cvtsd_f64(_mm_unpackhi_pd(pair, pair));
    for (; h < n; ++h) {
        total += a[h] * b[h];
    }
    return total;
}

double max_avx2(const double* a, std::size_t n)
{
    double m = -std::numeric_limits<double>::infinity();
    std::size_t h = 0;
    if (n >= 4) {
        __m256d acc = _mm256_set1_pd(m);
        for (; h + 4 <= n; h += 4) {
            acc = _mm256_max_pd(acc, _mm256_loadu_pd(a + h));
        }
        alignas(32) double lanes[4];
        _mm256_store_pd(lanes, acc);
        m = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
    }
    for (; h < n; ++h) {
        m = std::max(m, a[h]);
    }
    return m;
}

constexpr KernelSet kAvx2{Isa::avx2, accumulate_rows_avx2, multiply_avx2, dot_avx2, max_avx2};

} // namespace

const KernelSet* avx2_kernels()
{
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") ? &kAvx2 : nullptr;
}

} // namespace dpmcpm::kernels

#else

namespace dpmcpm::kernels
{

const KernelSet* avx2_kernels()
{
    return nullptr;
}

} // namespace dpmcpm::kernels

#endif
