#pragma once

#include "dpmcpm/core.hpp"
#include "dpmcpm/sampler.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace dpmcpm
{

//----------------------------------------------------------------------------
// Latent-class scoring

// A CollapsedModel laid out for the kernels: log theta and log/linear
// tilde-psi tables, cell-major and component-minor.
class CompiledModel
{
public:
    explicit CompiledModel(const CollapsedModel& model);

    const CategoricalSchema& schema() const { return schema_; }
    std::size_t components() const { return k_; }

    // P(z = h | observed cells of row); missing cells (code 0) are skipped.
    std::vector<double> class_posterior(std::span<const Code> row) const;

    // sum_h posterior[h] * tilde_psi[h][j][c], c = 1..d_j, written to out.
    void mix_cell(std::span<const double> posterior, std::size_t j, std::span<double> out) const;

    std::span<const double> tilde_row(std::size_t j, std::size_t c) const
    {
        return {tilde_.data() + (schema_.collapsed_offset(j) + c - 1) * stride_, k_};
    }
    std::span<const double> theta() const { return {theta_.data(), k_}; }

private:
    CategoricalSchema schema_;
    std::size_t k_ = 0;
    std::size_t stride_ = 0;
    std::vector<double> theta_;
    std::vector<double> log_theta_;
    std::vector<double> tilde_;
    std::vector<double> log_tilde_;
};

std::vector<double> class_posterior(std::span<const Code> row, const CollapsedModel& model);

// Predictive distribution of a missing cell j; ContractError if row[j] is observed.
std::vector<double> predictive_cell(std::span<const Code> row, std::size_t j,
                                    const CollapsedModel& model);

//----------------------------------------------------------------------------
// Imputation

enum class ImputeRule { argmax, sample };

struct ImputeOptions
{
    ImputeRule rule = ImputeRule::argmax;
    std::uint64_t seed = 1;     // used by ImputeRule::sample
    bool last_draw_only = false; // score with the final retained draw instead of averaging
};

struct CellPosterior
{
    std::size_t row;
    std::size_t col;
    std::vector<double> probs; // over categories 1..d_j
};

struct ImputationResult
{
    Dataset completed;
    std::vector<CellPosterior> cell_posteriors; // row-major order of the missing cells
};

ImputationResult impute(const Dataset& data, const PosteriorSample& posterior,
                        const ImputeOptions& options = {});

// Lowest index among the maxima.
std::size_t argmax_category(std::span<const double> probs);

//----------------------------------------------------------------------------
// Distribution estimates

// All draws as one model: their components side by side, each theta scaled by
// 1/D. Its joint and pair marginals are the draw averages.
CollapsedModel posterior_mixture(const PosteriorSample& posterior);

// SizeError when the table would exceed cell_limit cells.
JointDistribution joint_distribution(const CollapsedModel& model,
                                     std::size_t cell_limit = kDefaultCellLimit);

// d_{j1} x d_{j2} table, row index c1 - 1.
std::vector<double> pair_marginal(const CollapsedModel& model, std::size_t j1, std::size_t j2);

std::vector<double> single_marginal(const CollapsedModel& model, std::size_t j);

struct SquareMatrix
{
    std::size_t size = 0;
    std::vector<double> values;

    explicit SquareMatrix(std::size_t n = 0, double fill = 0.0) : size(n), values(n * n, fill) {}
    double& operator()(std::size_t i, std::size_t j) { return values[i * size + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * size + j]; }
};

// Pearson correlation of the integer codes. A variable without variance
// correlates 0 with everything else; the diagonal is 1.
SquareMatrix correlation_matrix(const CollapsedModel& model);

//----------------------------------------------------------------------------
// Independence tests

// {a, b, c, d} is the table [[a, b], [c, d]].
using Table2x2 = std::array<std::uint64_t, 4>;

// Two-sided Fisher exact p-value: total probability of the tables sharing the
// observed margins that are no more likely than the observed one. Returns 1
// when a margin is zero.
double fisher_exact_2x2(const Table2x2& table);

// Integer counts summing to n, by largest remainder of n * probs (ties to the lower index).
std::vector<std::uint64_t> round_to_counts(std::span<const double> probs, std::uint64_t n);

struct PairTest
{
    std::size_t j1;
    std::size_t j2;
    double p_value;
};

// Fisher test for every variable pair on counts built from the model's pair
// marginals. Sorted by ascending p-value, then (j1, j2). Binary schemas only.
std::vector<PairTest> pairwise_independence(const CollapsedModel& model, std::uint64_t n);

//----------------------------------------------------------------------------
// Saturated construction

// One latent class per category combination with positive mass; psi keeps
// the missingness cell (augmented layout, component-major).
struct AugmentedModel
{
    CategoricalSchema schema;
    std::vector<double> theta;
    std::vector<double> psi;
    std::vector<std::size_t> cell_of_class; // joint-table index each class stands for

    std::span<const double> component_psi(std::size_t h, std::size_t j) const
    {
        return {psi.data() + h * schema.augmented_cells() + schema.augmented_offset(j),
                schema.cardinality(j) + 1};
    }
};

AugmentedModel construct_saturated_model(const JointDistribution& pi, const MissingnessTable& q,
                                         std::size_t cell_limit = kDefaultCellLimit);

struct ConstructionReport
{
    double pi_error = 0.0;
    double q_error = 0.0;
};

// Rescales the augmented model, rebuilds the joint table and the implied
// p(r_j = 0 | x = cell), and reports max-abs deviations from pi and q.
// Cells with pi = 0 have no conditional missing rate and are skipped for q.
ConstructionReport verify_construction(const AugmentedModel& model, const JointDistribution& pi,
                                       const MissingnessTable& q);

} // namespace dpmcpm
