#pragma once

#include "dpmcpm/core.hpp"
#include "dpmcpm/rng.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace dpmcpm
{

// Gibbs chain state over the augmented (missingness-as-category) model.
// Components are 0-based. psi is component-major: component h, variable j,
// augmented cell c (0 = missing) at h * augmented_cells + augmented_offset(j) + c.
//
// Between the assignment updates of a sweep a component may hold zero
// members; prune_and_relabel removes those.
struct ModelState
{
    std::vector<std::uint32_t> assignments;
    std::vector<std::size_t> counts;
    std::vector<double> psi;
    std::size_t cells = 0;  // augmented cells per component
    std::uint64_t seed = 0; // seed the chain was started from

    std::size_t components() const { return counts.size(); }
    std::size_t occupied() const;

    std::span<const double> component_psi(std::size_t h) const
    {
        return {psi.data() + h * cells, cells};
    }
    std::span<double> component_psi(std::size_t h) { return {psi.data() + h * cells, cells}; }

    // Throws ValidationError on broken count/assignment/simplex invariants.
    // With require_pruned, also rejects empty or unsorted components.
    void validate(const Dataset& data, bool require_pruned) const;
};

struct GibbsConfig
{
    std::size_t burnin = 200;
    std::size_t samples = 100;
    std::size_t thin = 2;
    std::uint64_t seed = 1;
    std::optional<double> alpha_override;
    std::optional<double> beta_override;
    // Emits "sweep t/T k=K" lines on stderr every this many sweeps; 0 disables.
    std::size_t log_every = 0;

    void validate() const;
    Priors priors_for(const CategoricalSchema& schema) const;
};

struct PosteriorSample
{
    CategoricalSchema schema;
    std::vector<CollapsedModel> draws;
    // Occupied-component count of each retained draw, in draw order.
    std::vector<std::size_t> draw_k;
    std::map<std::size_t, std::size_t> k_histogram;

    // Modal k; ties go to the smaller k.
    std::size_t estimated_k() const;
};

// Step weights for one sample. components[m] is the state index scored by
// probs[m]; the final entry of probs is the new-component weight.
struct AssignmentWeights
{
    std::vector<double> probs;
    std::vector<std::size_t> components;
};

// Log of the prior predictive beta_{j,c} / sum_c beta_{j,c}, flat over augmented cells.
std::vector<double> new_component_log_marginal(const Priors& priors, const CategoricalSchema& schema);

ModelState init_state(const Dataset& data, const Priors& priors, std::uint64_t seed);

AssignmentWeights assignment_weights(std::size_t i, const ModelState& state, const Dataset& data,
                                     const Priors& priors);

// Redraws z_i from weights; a draw of the final entry opens a component whose
// psi comes from the one-observation Dirichlet posterior. Emptied components
// stay in place with zero count until pruning.
void sample_assignment(std::size_t i, const AssignmentWeights& weights, ModelState& state,
                       const Dataset& data, const Priors& priors, Rng& rng);

// Sorts components by descending count (stable on ties) and drops empty ones.
void prune_and_relabel(ModelState& state);

void update_psi(ModelState& state, const Dataset& data, const Priors& priors, Rng& rng);

CollapsedModel collapse_state(const ModelState& state, const Dataset& data);

// One chain. Owns the state, its generator and the log-probability table the
// kernels score against.
class GibbsChain
{
public:
    GibbsChain(const Dataset& data, Priors priors, std::uint64_t seed);

    // Assignment pass over every sample, prune, psi refresh.
    void sweep();

    const ModelState& state() const { return state_; }
    const Priors& priors() const { return priors_; }

private:
    void rebuild_table();
    void push_column(std::size_t h);

    const Dataset& data_;
    Priors priors_;
    Rng rng_;
    ModelState state_;
    std::vector<double> log_new_;
    std::vector<std::uint32_t> row_cells_; // n x p flat augmented cell indices
    // Cell-major, component-minor log psi; stride_ doubles per cell.
    std::vector<double> log_table_;
    std::size_t stride_ = 0;
    std::vector<double> scratch_;
    AssignmentWeights weights_;
};

using SweepObserver = std::function<void(std::size_t sweep, const ModelState&)>;

PosteriorSample run_gibbs(const Dataset& data, const Priors& priors, const GibbsConfig& config,
                          const SweepObserver& observer = {});

} // namespace dpmcpm
