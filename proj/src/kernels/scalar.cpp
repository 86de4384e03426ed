#include "dpmcpm/kernels.hpp"

#include <algorithm>
#include <limits>

namespace dpmcpm::kernels
{

namespace
{

void accumulate_rows_scalar(const double* table, std::size_t stride, const std::uint32_t* rows,
                            std::size_t row_count, double* out, std::size_t width)
{
    for (std::size_t r = 0; r < row_count; ++r) {
        const double* src = table + static_cast<std::size_t>(rows[r]) * stride;
        for (std::size_t h = 0; h < width; ++h) {
            out[h] += src[h];
        }
    }
}

void multiply_scalar(const double* a, const double* b, double* out, std::size_t n)
{
    for (std::size_t h = 0; h < n; ++h) {
        out[h] = a[h] * b[h];
    }
}

// Four running sums combined as (s0 + s2) + (s1 + s3), then the tail in order.
// This is the reduction order of the vector kernels.
double dot_scalar(const double* a, const double* b, std::size_t n)
{
    double s[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t h = 0;
    for (; h + 4 <= n; h += 4) {
        for (std::size_t l = 0; l < 4; ++l) {
            s[l] += a[h + l] * b[h + l];
        }
    }
    double total = (s[0] + s[2]) + (s[1] + s[3]);
    for (; h < n; ++h) {
        total += a[h] * b[h];
    }
    return total;
}

double max_scalar(const double* a, std::size_t n)
{
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t h = 0; h < n; ++h) {
        m = std::max(m, a[h]);
    }
    return m;
}

constexpr KernelSet kScalar{Isa::scalar, accumulate_rows_scalar, multiply_scalar, dot_scalar,
                            max_scalar};

} // namespace

const KernelSet& scalar_kernels()
{
    return kScalar;
}

} // namespace dpmcpm::kernels
