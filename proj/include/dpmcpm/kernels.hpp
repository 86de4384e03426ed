#pragma once

// Data-parallel inner loops of the sampler and of post-fit inference.
//
// Probability tables are stored cell-major, component-minor: row r holds the
// value of cell r for every component, padded to `stride` doubles. Scoring a
// data row is then a sum of whole table rows, which vectorizes across
// components without gathers.
//
// Every ISA variant produces bit-identical results to the scalar reference:
// accumulate_rows and multiply are lane-wise, and dot and max use a fixed
// four-lane blocking that the scalar code reproduces.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace dpmcpm::kernels
{

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa);

// out[h] += table[row * stride + h] for each row in rows, in order.
using AccumulateRowsFn = void (*)(const double* table, std::size_t stride,
                                  const std::uint32_t* rows, std::size_t row_count,
                                  double* out, std::size_t width);
// out[h] = a[h] * b[h].
using MultiplyFn = void (*)(const double* a, const double* b, double* out, std::size_t n);
// Sum of a[h] * b[h].
using DotFn = double (*)(const double* a, const double* b, std::size_t n);
// Maximum element; -inf for n == 0.
using MaxFn = double (*)(const double* a, std::size_t n);

struct KernelSet
{
    Isa isa;
    AccumulateRowsFn accumulate_rows;
    MultiplyFn multiply;
    DotFn dot;
    MaxFn max;
};

const KernelSet& scalar_kernels();
// nullptr when the build or the running CPU lacks the ISA.
const KernelSet* avx2_kernels();
const KernelSet* neon_kernels();

// Best kernels for this CPU. DPMCPM_ISA=scalar|avx2|neon in the environment
// overrides the choice on first use; unknown or unavailable names are ignored.
const KernelSet& active();
// Forces a kernel set (tests and benchmarking). Not synchronized with concurrent callers.
void set_active(Isa isa);
bool available(Isa isa);

// Column padding used by table builders: a multiple of four doubles.
constexpr std::size_t padded_width(std::size_t width)
{
    return (width + 3) & ~std::size_t{3};
}

// Span conveniences over the active kernels.
inline void accumulate_rows(std::span<const double> table, std::size_t stride,
                            std::span<const std::uint32_t> rows, std::span<double> out)
{
    active().accumulate_rows(table.data(), stride, rows.data(), rows.size(), out.data(),
                             out.size());
}

inline void multiply(std::span<const double> a, std::span<const double> b, std::span<double> out)
{
    active().multiply(a.data(), b.data(), out.data(), out.size());
}

inline double dot(std::span<const double> a, std::span<const double> b)
{
    return active().dot(a.data(), b.data(), a.size());
}

inline double max(std::span<const double> a)
{
    return active().max(a.data(), a.size());
}

} // namespace dpmcpm::kernels
