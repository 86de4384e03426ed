#include "dpmcpm/rng.hpp"

#include "dpmcpm/core.hpp"

#include <cmath>

namespace dpmcpm
{

double Rng::gamma(double shape)
{
    std::gamma_distribution<double> dist(shape, 1.0);
    return dist(engine_);
}

void Rng::dirichlet(std::span<const double> concentration, std::span<double> out)
{
    if (concentration.size() != out.size() || out.empty()) {
        throw ContractError("dirichlet: concentration and output sizes differ");
    }
    // Small shapes can underflow every gamma draw to zero; redraw in that case.
    for (int attempt = 0; attempt < 64; ++attempt) {
        double sum = 0.0;
        for (std::size_t c = 0; c < out.size(); ++c) {
            out[c] = gamma(concentration[c]);
            sum += out[c];
        }
        if (sum > 0.0 && std::isfinite(sum)) {
            for (double& v : out) {
                v /= sum;
            }
            return;
        }
    }
    throw NumericError("dirichlet: gamma draws underflowed repeatedly");
}

std::size_t Rng::categorical(std::span<const double> weights)
{
    double total = 0.0;
    for (double w : weights) {
        total += w;
    }
    if (!(total > 0.0) || !std::isfinite(total)) {
        throw NumericError("categorical: weights have no positive mass");
    }
    const double u = uniform() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i] <= 0.0) {
            continue;
        }
        acc += weights[i];
        last = i;
        if (u < acc) {
            return i;
        }
    }
    return last;
}

} // namespace dpmcpm
