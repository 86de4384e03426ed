#include "dpmcpm/sampler.hpp"

#include "dpmcpm/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>

namespace dpmcpm
{

namespace
{

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double x)
{
    return x > 0.0 ? std::log(x) : kNegInf;
}

std::vector<std::uint32_t> augmented_row_cells(const Dataset& data)
{
    const auto& schema = data.schema();
    std::vector<std::uint32_t> cells(data.rows() * data.cols());
    for (std::size_t i = 0; i < data.rows(); ++i) {
        for (std::size_t j = 0; j < data.cols(); ++j) {
            cells[i * data.cols() + j] =
                static_cast<std::uint32_t>(schema.augmented_offset(j) + data.at(i, j));
        }
    }
    return cells;
}

ModelState init_with(const Dataset& data, const Priors& priors, Rng& rng)
{
    const auto& schema = data.schema();
    priors.validate(schema);
    const std::size_t n = data.rows();
    ModelState state;
    state.seed = rng.seed();
    state.cells = schema.augmented_cells();
    state.assignments.resize(n);
    std::iota(state.assignments.begin(), state.assignments.end(), 0U);
    state.counts.assign(n, 1);
    state.psi.resize(n * state.cells);
    for (std::size_t h = 0; h < n; ++h) {
        auto psi = state.component_psi(h);
        for (std::size_t j = 0; j < schema.variables(); ++j) {
            rng.dirichlet(priors.beta[j],
                          psi.subspan(schema.augmented_offset(j), schema.cardinality(j) + 1));
        }
    }
    return state;
}

// Turns per-component log likelihoods into normalized step weights.
// loglik[h] = sum_j log psi_{h, x_ij}, for every state component h.
void finish_weights(std::size_t i, const ModelState& state, std::span<const double> loglik,
                    double log_new_lik, double alpha, AssignmentWeights& out)
{
    const std::size_t n = state.assignments.size();
    const double log_denominator = std::log(static_cast<double>(n) + alpha - 1.0);
    const std::size_t own = state.assignments[i];

    out.probs.clear();
    out.components.clear();
    for (std::size_t h = 0; h < state.components(); ++h) {
        const std::size_t others = state.counts[h] - (h == own ? 1 : 0);
        if (others == 0) {
            continue;
        }
        out.components.push_back(h);
        out.probs.push_back(std::log(static_cast<double>(others)) - log_denominator + loglik[h]);
    }
    out.probs.push_back(std::log(alpha) - log_denominator + log_new_lik);

    const double top = kernels::max(out.probs);
    if (!std::isfinite(top)) {
        throw NumericError("assignment weights underflowed for sample " + std::to_string(i + 1));
    }
    double total = 0.0;
    for (double& w : out.probs) {
        w = std::exp(w - top);
        total += w;
    }
    for (double& w : out.probs) {
        w /= total;
    }
}

double new_component_loglik(std::size_t i, const Dataset& data, std::span<const double> log_new)
{
    double s = 0.0;
    for (std::size_t j = 0; j < data.cols(); ++j) {
        s += log_new[data.schema().augmented_offset(j) + data.at(i, j)];
    }
    return s;
}

} // namespace

//----------------------------------------------------------------------------
// ModelState

std::size_t ModelState::occupied() const
{
    return static_cast<std::size_t>(
        std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; }));
}

void ModelState::validate(const Dataset& data, bool require_pruned) const
{
    const auto& schema = data.schema();
    if (assignments.size() != data.rows()) {
        throw ValidationError("state has wrong number of assignments");
    }
    if (cells != schema.augmented_cells() || psi.size() != counts.size() * cells) {
        throw ValidationError("state psi has wrong shape");
    }
    std::vector<std::size_t> tally(counts.size(), 0);
    for (auto z : assignments) {
        if (z >= counts.size()) {
            throw ValidationError("assignment refers to a missing component");
        }
        ++tally[z];
    }
    if (tally != counts) {
        throw ValidationError("component counts disagree with assignments");
    }
    for (std::size_t h = 0; h < counts.size(); ++h) {
        if (require_pruned && counts[h] == 0) {
            throw ValidationError("empty component after pruning");
        }
        if (require_pruned && h > 0 && counts[h] > counts[h - 1]) {
            throw ValidationError("components are not sorted by size");
        }
        const auto v = component_psi(h);
        for (std::size_t j = 0; j < schema.variables(); ++j) {
            double sum = 0.0;
            for (std::size_t c = 0; c <= schema.cardinality(j); ++c) {
                const double x = v[schema.augmented_offset(j) + c];
                if (!(x >= 0.0)) {
                    throw ValidationError("negative psi entry");
                }
                sum += x;
            }
            if (std::abs(sum - 1.0) > 1e-10) {
                throw ValidationError("psi vector off the simplex");
            }
        }
    }
}

//----------------------------------------------------------------------------
// GibbsConfig / PosteriorSample

void GibbsConfig::validate() const
{
    if (samples < 1) {
        throw ValidationError("samples must be at least 1");
    }
    if (thin < 1) {
        throw ValidationError("thin must be at least 1");
    }
    if (alpha_override && !(*alpha_override > 0.0)) {
        throw ValidationError("alpha must be positive");
    }
    if (beta_override && !(*beta_override > 0.0)) {
        throw ValidationError("beta must be positive");
    }
}

Priors GibbsConfig::priors_for(const CategoricalSchema& schema) const
{
    return Priors::flat(schema, alpha_override.value_or(0.25), beta_override.value_or(1.0));
}

std::size_t PosteriorSample::estimated_k() const
{
    std::size_t best_k = 0;
    std::size_t best_count = 0;
    for (const auto& [k, count] : k_histogram) {
        if (count > best_count) { // map order: first maximum is the smallest k
            best_k = k;
            best_count = count;
        }
    }
    return best_k;
}

//----------------------------------------------------------------------------
// Steps

std::vector<double> new_component_log_marginal(const Priors& priors, const CategoricalSchema& schema)
{
    std::vector<double> out(schema.augmented_cells());
    for (std::size_t j = 0; j < schema.variables(); ++j) {
        const auto& b = priors.beta[j];
        const double total = std::accumulate(b.begin(), b.end(), 0.0);
        for (std::size_t c = 0; c < b.size(); ++c) {
            out[schema.augmented_offset(j) + c] = std::log(b[c] / total);
        }
    }
    return out;
}

ModelState init_state(const Dataset& data, const Priors& priors, std::uint64_t seed)
{
    Rng rng(seed);
    return init_with(data, priors, rng);
}

AssignmentWeights assignment_weights(std::size_t i, const ModelState& state, const Dataset& data,
                                     const Priors& priors)
{
    if (i >= data.rows()) {
        throw ContractError("sample index out of range");
    }
    const auto& schema = data.schema();
    const std::size_t k = state.components();
    const std::size_t stride = kernels::padded_width(k);
    std::vector<double> table(schema.augmented_cells() * stride, 0.0);
    for (std::size_t h = 0; h < k; ++h) {
        const auto psi = state.component_psi(h);
        for (std::size_t c = 0; c < state.cells; ++c) {
            table[c * stride + h] = safe_log(psi[c]);
        }
    }
    std::vector<std::uint32_t> rows(data.cols());
    for (std::size_t j = 0; j < data.cols(); ++j) {
        rows[j] = static_cast<std::uint32_t>(schema.augmented_offset(j) + data.at(i, j));
    }
    std::vector<double> loglik(k, 0.0);
    kernels::accumulate_rows(table, stride, rows, loglik);

    const auto log_new = new_component_log_marginal(priors, schema);
    AssignmentWeights out;
    finish_weights(i, state, loglik, new_component_loglik(i, data, log_new), priors.alpha, out);
    return out;
}

void sample_assignment(std::size_t i, const AssignmentWeights& weights, ModelState& state,
                       const Dataset& data, const Priors& priors, Rng& rng)
{
    const auto& schema = data.schema();
    --state.counts[state.assignments[i]];

    const std::size_t pick = rng.categorical(weights.probs);
    if (pick < weights.components.size()) {
        const std::size_t h = weights.components[pick];
        state.assignments[i] = static_cast<std::uint32_t>(h);
        ++state.counts[h];
        return;
    }

    const std::size_t h = state.components();
    state.counts.push_back(1);
    state.assignments[i] = static_cast<std::uint32_t>(h);
    state.psi.resize(state.psi.size() + state.cells);
    auto psi = state.component_psi(h);
    std::vector<double> conc;
    for (std::size_t j = 0; j < schema.variables(); ++j) {
        conc = priors.beta[j];
        conc[data.at(i, j)] += 1.0;
        rng.dirichlet(conc, psi.subspan(schema.augmented_offset(j), conc.size()));
    }
}

void prune_and_relabel(ModelState& state)
{
    const std::size_t k = state.components();
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return state.counts[a] > state.counts[b];
    });
    while (!order.empty() && state.counts[order.back()] == 0) {
        order.pop_back();
    }

    std::vector<std::uint32_t> relabel(k, std::numeric_limits<std::uint32_t>::max());
    std::vector<std::size_t> counts(order.size());
    std::vector<double> psi(order.size() * state.cells);
    for (std::size_t h = 0; h < order.size(); ++h) {
        relabel[order[h]] = static_cast<std::uint32_t>(h);
        counts[h] = state.counts[order[h]];
        const auto src = state.component_psi(order[h]);
        std::copy(src.begin(), src.end(), psi.begin() + static_cast<std::ptrdiff_t>(h * state.cells));
    }
    for (auto& z : state.assignments) {
        z = relabel[z];
    }
    state.counts = std::move(counts);
    state.psi = std::move(psi);
}

void update_psi(ModelState& state, const Dataset& data, const Priors& priors, Rng& rng)
{
    const auto& schema = data.schema();
    const std::size_t k = state.components();
    std::vector<double> tally(k * state.cells, 0.0);
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const std::size_t base = state.assignments[i] * state.cells;
        for (std::size_t j = 0; j < data.cols(); ++j) {
            tally[base + schema.augmented_offset(j) + data.at(i, j)] += 1.0;
        }
    }
    std::vector<double> conc;
    for (std::size_t h = 0; h < k; ++h) {
        auto psi = state.component_psi(h);
        for (std::size_t j = 0; j < schema.variables(); ++j) {
            const std::size_t off = schema.augmented_offset(j);
            conc = priors.beta[j];
            for (std::size_t c = 0; c < conc.size(); ++c) {
                conc[c] += tally[h * state.cells + off + c];
            }
            rng.dirichlet(conc, psi.subspan(off, conc.size()));
        }
    }
}

CollapsedModel collapse_state(const ModelState& state, const Dataset& data)
{
    const auto& schema = data.schema();
    CollapsedModel model;
    model.schema = schema;
    const std::size_t k = state.components();
    const double n = static_cast<double>(data.rows());
    model.theta.resize(k);
    model.tilde_psi.resize(k * schema.collapsed_cells());
    for (std::size_t h = 0; h < k; ++h) {
        if (state.counts[h] == 0) {
            throw ContractError("collapse_state needs a pruned state");
        }
        model.theta[h] = static_cast<double>(state.counts[h]) / n;
        const auto psi = state.component_psi(h);
        for (std::size_t j = 0; j < schema.variables(); ++j) {
            const std::size_t off = schema.augmented_offset(j);
            const std::size_t d = schema.cardinality(j);
            if (psi[off] >= 1.0 - 1e-12) {
                throw NumericError("cannot rescale: component " + std::to_string(h + 1) +
                                   ", variable " + std::to_string(j + 1) +
                                   " puts all mass on missingness");
            }
            // Normalizing by the observed mass equals dividing by 1 - psi_0,
            // without the cancellation when psi_0 is near 1.
            double observed = 0.0;
            for (std::size_t c = 1; c <= d; ++c) {
                observed += psi[off + c];
            }
            auto out = model.psi(h, j);
            for (std::size_t c = 1; c <= d; ++c) {
                out[c - 1] = psi[off + c] / observed;
            }
        }
    }
    return model;
}

//----------------------------------------------------------------------------
// GibbsChain

GibbsChain::GibbsChain(const Dataset& data, Priors priors, std::uint64_t seed)
    : data_(data), priors_(std::move(priors)), rng_(seed)
{
    state_ = init_with(data_, priors_, rng_);
    log_new_ = new_component_log_marginal(priors_, data_.schema());
    row_cells_ = augmented_row_cells(data_);
    rebuild_table();
}

void GibbsChain::rebuild_table()
{
    const std::size_t k = state_.components();
    stride_ = kernels::padded_width(std::max<std::size_t>(k, 4));
    log_table_.assign(state_.cells * stride_, 0.0);
    for (std::size_t h = 0; h < k; ++h) {
        const auto psi = state_.component_psi(h);
        for (std::size_t c = 0; c < state_.cells; ++c) {
            log_table_[c * stride_ + h] = safe_log(psi[c]);
        }
    }
}

void GibbsChain::push_column(std::size_t h)
{
    if (h >= stride_) {
        const std::size_t wider = kernels::padded_width(std::max(2 * stride_, h + 1));
        std::vector<double> grown(state_.cells * wider, 0.0);
        for (std::size_t c = 0; c < state_.cells; ++c) {
            std::copy_n(log_table_.begin() + static_cast<std::ptrdiff_t>(c * stride_), stride_,
                        grown.begin() + static_cast<std::ptrdiff_t>(c * wider));
        }
        log_table_ = std::move(grown);
        stride_ = wider;
    }
    const auto psi = state_.component_psi(h);
    for (std::size_t c = 0; c < state_.cells; ++c) {
        log_table_[c * stride_ + h] = safe_log(psi[c]);
    }
}

void GibbsChain::sweep()
{
    const std::size_t p = data_.cols();
    for (std::size_t i = 0; i < data_.rows(); ++i) {
        const std::size_t k = state_.components();
        scratch_.assign(k, 0.0);
        kernels::accumulate_rows(log_table_, stride_,
                                 std::span<const std::uint32_t>(row_cells_.data() + i * p, p),
                                 scratch_);
        finish_weights(i, state_, scratch_, new_component_loglik(i, data_, log_new_),
                       priors_.alpha, weights_);
        sample_assignment(i, weights_, state_, data_, priors_, rng_);
        if (state_.components() > k) {
            push_column(k);
        }
    }
    prune_and_relabel(state_);
    update_psi(state_, data_, priors_, rng_);
    rebuild_table();
}

//----------------------------------------------------------------------------
// Driver

PosteriorSample run_gibbs(const Dataset& data, const Priors& priors, const GibbsConfig& config,
                          const SweepObserver& observer)
{
    config.validate();
    priors.validate(data.schema());

    GibbsChain chain(data, priors, config.seed);
    PosteriorSample out;
    out.schema = data.schema();
    const std::size_t total = config.burnin + config.samples * config.thin;
    for (std::size_t t = 1; t <= total; ++t) {
        chain.sweep();
        const auto& state = chain.state();
        if (observer) {
            observer(t, state);
        }
        if (config.log_every > 0 && (t % config.log_every == 0 || t == total)) {
            std::cerr << "sweep " << t << "/" << total << " k=" << state.components() << "\n";
        }
        if (t > config.burnin && (t - config.burnin) % config.thin == 0) {
            out.draws.push_back(collapse_state(state, data));
            out.draw_k.push_back(state.components());
            ++out.k_histogram[state.components()];
        }
    }
    return out;
}

} // namespace dpmcpm
