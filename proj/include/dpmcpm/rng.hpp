#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace dpmcpm
{

// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seedable, splittable generator. A (seed, stream) pair always yields the
// same sequence; split() derives a child stream without touching the parent.
class Rng
{
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), engine_(mix64(mix64(seed) ^ mix64(stream + 0x5851f42d4c957f2dULL)))
    {
    }

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    Rng split(std::uint64_t child) const
    {
        return Rng(mix64(seed_ ^ mix64(stream_)), child);
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

    // Uniform on [0, 1).
    double uniform() { return std::generate_canonical<double, 64>(engine_); }

    bool bernoulli(double p) { return uniform() < p; }

    double gamma(double shape);

    // Fills out with a Dirichlet(concentration) draw. Sizes must match.
    void dirichlet(std::span<const double> concentration, std::span<double> out);

    // Index drawn proportionally to non-negative weights (need not be normalized).
    std::size_t categorical(std::span<const double> weights);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

} // namespace dpmcpm
