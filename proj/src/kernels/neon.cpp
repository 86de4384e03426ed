#include "dpmcpm/kernels.hpp"

#if defined(__aarch64__) && defined(__ARM_NEON)

#include <arm_neon.h>

#include <algorithm>
#include <limits>

namespace dpmcpm::kernels
{

namespace
{

void accumulate_rows_neon(const double* table, std::size_t stride, const std::uint32_t* rows,
                          std::size_t row_count, double* out, std::size_t width)
{
    std::size_t h = 0;
    for (; h + 4 <= width; h += 4) {
        float64x2_t acc0 = vld1q_f64(out + h);
        float64x2_t acc1 = vld1q_f64(out + h + 2);
        for (std::size_t r = 0; r < row_count; ++r) {
            const double* src = table + static_cast<std::size_t>(rows[r]) * stride + h;
            acc0 = vaddq_f64(acc0, vld1q_f64(src));
            acc1 = vaddq_f64(acc1, vld1q_f64(src + 2));
        }
        vst1q_f64(out + h, acc0);
        vst1q_f64(out + h + 2, acc1);
    }
    for (; h < width; ++h) {
        double acc = out[h];
        for (std::size_t r = 0; r < row_count; ++r) {
            acc += table[static_cast<std::size_t>(rows[r]) * stride + h];
        }
        out[h] = acc;
    }
}

void multiply_neon(const double* a, const double* b, double* out, std::size_t n)
{
    std::size_t h = 0;
    for (; h + 2 <= n; h += 2) {
        vst1q_f64(out + h, vmulq_f64(vld1q_f64(a + h), vld1q_f64(b + h)));
    }
    for (; h < n; ++h) {
        out[h] = a[h] * b[h];
    }
}

// Two 2-lane accumulators emulate the four-lane reduction order.
double dot_neon(const double* a, const double* b, std::size_t n)
{
    float64x2_t acc01 = vdupq_n_f64(0.0);
    float64x2_t acc23 = vdupq_n_f64(0.0);
    std::size_t h = 0;
    for (; h + 4 <= n; h += 4) {
        acc01 = vaddq_f64(acc01, vmulq_f64(vld1q_f64(a + h), vld1q_f64(b + h)));
        acc23 = vaddq_f64(acc23, vmulq_f64(vld1q_f64(a + h + 2), vld1q_f64(b + h + 2)));
    }
    const float64x2_t pair = vaddq_f64(acc01, acc23);
    double total = vgetq_lane_f64(pair, 0) + vgetq_lane_f64(pair, 1);
    for (; h < n; ++h) {
        total += a[h] * b[h];
    }
    return total;
}

double max_neon(const double* a, std::size_t n)
{
    double m = -std::numeric_limits<double>::infinity();
    std::size_t h = 0;
    if (n >= 2) {
        float64x2_t acc = vdupq_n_f64(m);
        for (; h + 2 <= n; h += 2) {
            acc = vmaxq_f64(acc, vld1q_f64(a + h));
        }
        m = std::max(vgetq_lane_f64(acc, 0), vgetq_lane_f64(acc, 1));
    }
    for (; h < n; ++h) {
        m = std::max(m, a[h]);
    }
    return m;
}

constexpr KernelSet kNeon{Isa::neon, accumulate_rows_neon, multiply_neon, dot_neon, max_neon};

} // namespace

const KernelSet* neon_kernels()
{
    return &kNeon;
}

} // namespace dpmcpm::kernels

#else

namespace dpmcpm::kernels
{

const KernelSet* neon_kernels()
{
    return nullptr;
}

} // namespace dpmcpm::kernels

#endif
