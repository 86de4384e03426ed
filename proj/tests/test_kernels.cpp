#include "dpmcpm/kernels.hpp"
#include "dpmcpm/rng.hpp"

#include <doctest.h>

#include <bit>
#include <cmath>
#include <limits>
#include <vector>

using namespace dpmcpm;

namespace
{

std::vector<const kernels::KernelSet*> vector_sets()
{
    std::vector<const kernels::KernelSet*> out;
    if (auto* k = kernels::avx2_kernels()) {
        out.push_back(k);
    }
    if (auto* k = kernels::neon_kernels()) {
        out.push_back(k);
    }
    return out;
}

bool same_bits(double a, double b)
{
    return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

std::vector<double> random_values(Rng& rng, std::size_t n, bool with_inf)
{
    std::vector<double> v(n);
    for (auto& x : v) {
        x = std::log(rng.uniform() + 1e-300) * (1.0 + 10.0 * rng.uniform());
        if (with_inf && rng.bernoulli(0.1)) {
            x = -std::numeric_limits<double>::infinity();
        }
    }
    return v;
}

} // namespace

TEST_SUITE("kernels")
{

TEST_CASE("vector kernels match scalar bit for bit")
{
    const auto& ref = kernels::scalar_kernels();
    Rng rng(42);
    for (const auto* set : vector_sets()) {
        CAPTURE(kernels::isa_name(set->isa));
        for (std::size_t width : {1U, 2U, 3U, 4U, 5U, 7U, 8U, 9U, 13U, 16U, 31U, 64U, 101U}) {
            CAPTURE(width);
            for (bool with_inf : {false, true}) {
                const std::size_t stride = kernels::padded_width(width);
                const auto table = random_values(rng, stride * 12, with_inf);
                const std::vector<std::uint32_t> rows{0, 3, 5, 11, 7};
                std::vector<double> a(width, 0.5);
                std::vector<double> b(width, 0.5);
                ref.accumulate_rows(table.data(), stride, rows.data(), rows.size(), a.data(), width);
                set->accumulate_rows(table.data(), stride, rows.data(), rows.size(), b.data(),
                                     width);
                for (std::size_t h = 0; h < width; ++h) {
                    CHECK(same_bits(a[h], b[h]));
                }

                const auto x = random_values(rng, width, with_inf);
                const auto y = random_values(rng, width, false);
                std::vector<double> m1(width);
                std::vector<double> m2(width);
                ref.multiply(x.data(), y.data(), m1.data(), width);
                set->multiply(x.data(), y.data(), m2.data(), width);
                for (std::size_t h = 0; h < width; ++h) {
                    CHECK(same_bits(m1[h], m2[h]));
                }

                CHECK(same_bits(ref.dot(x.data(), y.data(), width),
                                set->dot(x.data(), y.data(), width)));
                CHECK(same_bits(ref.max(x.data(), width), set->max(x.data(), width)));
            }
        }
    }
}

TEST_CASE("scalar kernels compute the textbook values")
{
    const auto& k = kernels::scalar_kernels();
    const double a[5] = {1, 2, 3, 4, 5};
    const double b[5] = {5, 4, 3, 2, 1};
    CHECK(k.dot(a, b, 5) == 35.0);
    CHECK(k.max(b, 5) == 5.0);
    const double ninf = -std::numeric_limits<double>::infinity();
    const double c[3] = {ninf, ninf, ninf};
    CHECK(k.max(c, 3) == ninf);
    double out[5];
    k.multiply(a, b, out, 5);
    CHECK(out[4] == 5.0);
    const double table[8] = {1, 2, 0, 0, 10, 20, 0, 0};
    const std::uint32_t rows[2] = {0, 1};
    double acc[2] = {0, 0};
    k.accumulate_rows(table, 4, rows, 2, acc, 2);
    CHECK(acc[0] == 11.0);
    CHECK(acc[1] == 22.0);
}

TEST_CASE("dispatch can be forced")
{
    const auto before = kernels::active().isa;
    kernels::set_active(kernels::Isa::scalar);
    CHECK(kernels::active().isa == kernels::Isa::scalar);
    CHECK(kernels::available(kernels::Isa::scalar));
    if (!kernels::available(kernels::Isa::neon)) {
        CHECK_THROWS(kernels::set_active(kernels::Isa::neon));
    }
    kernels::set_active(before);
    CHECK(kernels::padded_width(5) == 8);
    CHECK(kernels::padded_width(8) == 8);
}

}
