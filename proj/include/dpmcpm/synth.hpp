#pragma once

#include "dpmcpm/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace dpmcpm
{

//----------------------------------------------------------------------------
// Generators

struct MixtureSpec
{
    std::size_t n = 50;
    std::size_t p = 20;
    std::size_t k = 3;
    double theta_concentration = 10.0;
    double psi_concentration = 0.5;
    std::size_t cardinality = 2; // d_j for every variable
};

struct MixtureSample
{
    Dataset data;        // complete
    CollapsedModel truth; // generating parameters
};

// Theta ~ Dirichlet(theta_concentration), psi_h^(j) ~ Dirichlet(psi_concentration),
// then z_i ~ theta and x_ij ~ psi_{z_i}^(j).
MixtureSample sample_mixture_dataset(const MixtureSpec& spec, std::uint64_t seed);

struct XorSample
{
    Dataset data;
    JointDistribution truth;
};

// V1 ~ Bern(0.3), V2 ~ Bern(0.5); V3 = V1 xor V2 with probability 0.95, else
// Bern(0.5). Bits are coded as categories bit + 1.
XorSample sample_xor_dataset(std::size_t n, std::uint64_t seed);

// Exact joint table of the xor generator.
JointDistribution xor_truth();

//----------------------------------------------------------------------------
// Missingness

enum class MechanismKind { mcar, mar, mnar };

struct MechanismSpec
{
    MechanismKind kind = MechanismKind::mcar;
    double mcar_rate = 0.2;
    // Missing rate of columns 2..p when x_1 = 1 / x_1 = 2. Column 1 stays observed.
    double mar_rates[2] = {0.1, 0.3};
    // Missing rate of a cell whose true value is 1 / 2.
    double mnar_rates[2] = {0.1, 0.3};

    void validate() const;
};

std::string mechanism_name(MechanismKind kind);
MechanismKind parse_mechanism(const std::string& name);

struct MaskedCell
{
    std::size_t row;
    std::size_t col;
    Code value; // the value before masking
};

struct MaskResult
{
    Dataset masked;
    std::vector<MaskedCell> cells; // row-major
};

// Masks each eligible cell independently at its mechanism rate.
// MAR needs d_1 = 2; MNAR needs a binary schema. The input must be complete.
MaskResult mask(const Dataset& data, const MechanismSpec& spec, std::uint64_t seed);

// Masks exactly round(fraction * observed cells) observed cells, chosen uniformly.
MaskResult mask_fraction(const Dataset& data, double fraction, std::uint64_t seed);

//----------------------------------------------------------------------------
// Ratings

struct RatingTriple
{
    std::int64_t user;
    std::int64_t item;
    double rating;
};

// "userId,movieId,rating[,...]" with a header row; extra columns are ignored.
std::vector<RatingTriple> parse_ratings(const std::string& text);

struct RatingCoding
{
    enum class Kind { binary, five_category };
    Kind kind = Kind::binary;
    double cutoff = 4.0; // binary: rating >= cutoff codes 2, else 1

    Code encode(double rating) const;
};

struct RatingMatrix
{
    Dataset data;
    std::vector<std::int64_t> users; // row order
    std::vector<std::int64_t> items; // column order
};

// Keeps items rated by more than item_threshold of all users, then users who
// rated more than user_threshold of the kept items. Unrated cells are missing.
RatingMatrix preprocess_ratings(const std::vector<RatingTriple>& triples, double item_threshold,
                                double user_threshold, const RatingCoding& coding);

} // namespace dpmcpm
