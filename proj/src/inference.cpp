#include "dpmcpm/inference.hpp"

#include "dpmcpm/kernels.hpp"
#include "dpmcpm/rng.hpp"

#include <algorithm>
#include <cmath>
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

// Exponentiates log weights after max-subtraction and normalizes in place.
void normalize_log(std::span<double> w, const char* what)
{
    const double top = kernels::max(w);
    if (!std::isfinite(top)) {
        throw NumericError(std::string(what) + ": every component has zero likelihood");
    }
    double total = 0.0;
    for (double& x : w) {
        x = std::exp(x - top);
        total += x;
    }
    for (double& x : w) {
        x /= total;
    }
}

} // namespace

//----------------------------------------------------------------------------
// CompiledModel

CompiledModel::CompiledModel(const CollapsedModel& model)
    : schema_(model.schema), k_(model.components()), stride_(kernels::padded_width(k_))
{
    if (k_ == 0) {
        throw ContractError("model has no components");
    }
    theta_.assign(stride_, 0.0);
    log_theta_.assign(stride_, kNegInf);
    for (std::size_t h = 0; h < k_; ++h) {
        theta_[h] = model.theta[h];
        log_theta_[h] = safe_log(model.theta[h]);
    }
    const std::size_t cells = schema_.collapsed_cells();
    tilde_.assign(cells * stride_, 0.0);
    log_tilde_.assign(cells * stride_, kNegInf);
    for (std::size_t h = 0; h < k_; ++h) {
        for (std::size_t j = 0; j < schema_.variables(); ++j) {
            const auto v = model.psi(h, j);
            const std::size_t off = schema_.collapsed_offset(j);
            for (std::size_t c = 0; c < v.size(); ++c) {
                tilde_[(off + c) * stride_ + h] = v[c];
                log_tilde_[(off + c) * stride_ + h] = safe_log(v[c]);
            }
        }
    }
}

std::vector<double> CompiledModel::class_posterior(std::span<const Code> row) const
{
    if (row.size() != schema_.variables()) {
        throw ContractError("row length does not match model schema");
    }
    std::vector<std::uint32_t> rows;
    rows.reserve(row.size());
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (row[j] == kMissing) {
            continue;
        }
        if (row[j] > schema_.cardinality(j)) {
            throw ContractError("row code exceeds model cardinality");
        }
        rows.push_back(static_cast<std::uint32_t>(schema_.collapsed_offset(j) + row[j] - 1));
    }
    std::vector<double> post(log_theta_.begin(), log_theta_.begin() + static_cast<std::ptrdiff_t>(k_));
    kernels::accumulate_rows(log_tilde_, stride_, rows, post);
    normalize_log(post, "class_posterior");
    return post;
}

void CompiledModel::mix_cell(std::span<const double> posterior, std::size_t j,
                             std::span<double> out) const
{
    for (std::size_t c = 1; c <= schema_.cardinality(j); ++c) {
        out[c - 1] = kernels::dot(posterior, tilde_row(j, c));
    }
}

std::vector<double> class_posterior(std::span<const Code> row, const CollapsedModel& model)
{
    return CompiledModel(model).class_posterior(row);
}

std::vector<double> predictive_cell(std::span<const Code> row, std::size_t j,
                                    const CollapsedModel& model)
{
    if (j >= row.size() || row[j] != kMissing) {
        throw ContractError("predictive_cell: variable " + std::to_string(j + 1) +
                            " is observed");
    }
    const CompiledModel compiled(model);
    const auto post = compiled.class_posterior(row);
    std::vector<double> out(model.schema.cardinality(j));
    compiled.mix_cell(post, j, out);
    return out;
}

//----------------------------------------------------------------------------
// Imputation

std::size_t argmax_category(std::span<const double> probs)
{
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.size(); ++c) {
        if (probs[c] > probs[best]) {
            best = c;
        }
    }
    return best;
}

ImputationResult impute(const Dataset& data, const PosteriorSample& posterior,
                        const ImputeOptions& options)
{
    if (posterior.draws.empty()) {
        throw ContractError("impute: posterior has no draws");
    }
    if (!(posterior.schema == data.schema())) {
        throw ContractError("impute: model schema does not match the dataset");
    }
    std::vector<CompiledModel> models;
    if (options.last_draw_only) {
        models.emplace_back(posterior.draws.back());
    } else {
        models.reserve(posterior.draws.size());
        for (const auto& d : posterior.draws) {
            models.emplace_back(d);
        }
    }
    const double weight = 1.0 / static_cast<double>(models.size());

    Rng rng(options.seed, 0x696d70757465ULL);
    std::vector<Code> cells = data.cells();
    std::vector<CellPosterior> posteriors;
    std::vector<double> mixed;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        const auto row = data.row(i);
        const std::size_t first = posteriors.size();
        for (std::size_t j = 0; j < data.cols(); ++j) {
            if (row[j] == kMissing) {
                posteriors.push_back({i, j, std::vector<double>(data.schema().cardinality(j), 0.0)});
            }
        }
        if (posteriors.size() == first) {
            continue;
        }
        for (const auto& model : models) {
            const auto post = model.class_posterior(row);
            for (std::size_t m = first; m < posteriors.size(); ++m) {
                auto& cell = posteriors[m];
                mixed.resize(cell.probs.size());
                model.mix_cell(post, cell.col, mixed);
                for (std::size_t c = 0; c < mixed.size(); ++c) {
                    cell.probs[c] += weight * mixed[c];
                }
            }
        }
        for (std::size_t m = first; m < posteriors.size(); ++m) {
            auto& cell = posteriors[m];
            const double total = std::accumulate(cell.probs.begin(), cell.probs.end(), 0.0);
            for (double& v : cell.probs) {
                v /= total;
            }
            const std::size_t pick = options.rule == ImputeRule::argmax
                                         ? argmax_category(cell.probs)
                                         : rng.categorical(cell.probs);
            cells[i * data.cols() + cell.col] = static_cast<Code>(pick + 1);
        }
    }
    return {data.with_cells(std::move(cells)), std::move(posteriors)};
}

//----------------------------------------------------------------------------
// Distribution estimates

CollapsedModel posterior_mixture(const PosteriorSample& posterior)
{
    if (posterior.draws.empty()) {
        throw ContractError("posterior has no draws");
    }
    CollapsedModel out;
    out.schema = posterior.schema;
    const double weight = 1.0 / static_cast<double>(posterior.draws.size());
    for (const auto& d : posterior.draws) {
        for (double t : d.theta) {
            out.theta.push_back(t * weight);
        }
        out.tilde_psi.insert(out.tilde_psi.end(), d.tilde_psi.begin(), d.tilde_psi.end());
    }
    return out;
}

JointDistribution joint_distribution(const CollapsedModel& model, std::size_t cell_limit)
{
    const std::size_t size = table_size(model.schema);
    if (size > cell_limit) {
        throw SizeError("joint table would have " +
                        (size == std::numeric_limits<std::size_t>::max() ? std::string("too many")
                                                                         : std::to_string(size)) +
                        " cells (limit " + std::to_string(cell_limit) +
                        "); use pair_marginal instead");
    }
    const CompiledModel compiled(model);
    const std::size_t p = model.schema.variables();
    const std::size_t k = compiled.components();

    JointDistribution out;
    out.schema = model.schema;
    out.table.assign(size, 0.0);

    // partial[l] = theta * prod_{m < l} tilde_psi[., c_m]; the last variable is a dot product.
    std::vector<std::vector<double>> partial(p, std::vector<double>(k));
    std::copy(compiled.theta().begin(), compiled.theta().end(), partial[0].begin());
    std::vector<Code> combo(p, 1);
    auto refresh_from = [&](std::size_t level) {
        for (std::size_t m = level; m + 1 < p; ++m) {
            kernels::multiply(partial[m], compiled.tilde_row(m, combo[m]), partial[m + 1]);
        }
    };
    refresh_from(0);
    std::size_t index = 0;
    const std::size_t last = p - 1;
    while (true) {
        for (Code c = 1; c <= model.schema.cardinality(last); ++c) {
            out.table[index++] = kernels::dot(partial[last], compiled.tilde_row(last, c));
        }
        // odometer over the leading variables, last of them fastest
        std::size_t level = last;
        bool done = true;
        while (level-- > 0) {
            if (combo[level] < model.schema.cardinality(level)) {
                ++combo[level];
                done = false;
                break;
            }
            combo[level] = 1;
        }
        if (done) {
            break;
        }
        refresh_from(level);
    }
    return out;
}

std::vector<double> pair_marginal(const CollapsedModel& model, std::size_t j1, std::size_t j2)
{
    const std::size_t p = model.schema.variables();
    if (j1 >= p || j2 >= p || j1 == j2) {
        throw ContractError("pair_marginal needs two distinct variables");
    }
    const CompiledModel compiled(model);
    const std::size_t d1 = model.schema.cardinality(j1);
    const std::size_t d2 = model.schema.cardinality(j2);
    std::vector<double> weighted(compiled.components());
    std::vector<double> out(d1 * d2);
    for (std::size_t c1 = 1; c1 <= d1; ++c1) {
        kernels::multiply(compiled.theta(), compiled.tilde_row(j1, c1), weighted);
        for (std::size_t c2 = 1; c2 <= d2; ++c2) {
            out[(c1 - 1) * d2 + (c2 - 1)] = kernels::dot(weighted, compiled.tilde_row(j2, c2));
        }
    }
    return out;
}

std::vector<double> single_marginal(const CollapsedModel& model, std::size_t j)
{
    const CompiledModel compiled(model);
    std::vector<double> out(model.schema.cardinality(j));
    compiled.mix_cell(compiled.theta(), j, out);
    return out;
}

SquareMatrix correlation_matrix(const CollapsedModel& model)
{
    const std::size_t p = model.schema.variables();
    const CompiledModel compiled(model);
    std::vector<double> mean(p, 0.0);
    std::vector<double> sd(p, 0.0);
    std::vector<double> marg;
    for (std::size_t j = 0; j < p; ++j) {
        marg.resize(model.schema.cardinality(j));
        compiled.mix_cell(compiled.theta(), j, marg);
        double m1 = 0.0;
        double m2 = 0.0;
        for (std::size_t c = 0; c < marg.size(); ++c) {
            const double x = static_cast<double>(c + 1);
            m1 += x * marg[c];
            m2 += x * x * marg[c];
        }
        mean[j] = m1;
        const double var = m2 - m1 * m1;
        sd[j] = var > 1e-15 ? std::sqrt(var) : 0.0;
    }

    SquareMatrix out(p, 0.0);
    for (std::size_t a = 0; a < p; ++a) {
        out(a, a) = 1.0;
        for (std::size_t b = a + 1; b < p; ++b) {
            if (sd[a] == 0.0 || sd[b] == 0.0) {
                continue;
            }
            const auto table = pair_marginal(model, a, b);
            const std::size_t db = model.schema.cardinality(b);
            double cov = 0.0;
            for (std::size_t c1 = 0; c1 < model.schema.cardinality(a); ++c1) {
                for (std::size_t c2 = 0; c2 < db; ++c2) {
                    cov += (static_cast<double>(c1 + 1) - mean[a]) *
                           (static_cast<double>(c2 + 1) - mean[b]) * table[c1 * db + c2];
                }
            }
            const double r = std::clamp(cov / (sd[a] * sd[b]), -1.0, 1.0);
            out(a, b) = r;
            out(b, a) = r;
        }
    }
    return out;
}

//----------------------------------------------------------------------------
// Fisher exact test

namespace
{

// C(n, k) when it fits below 2^53, else 0.
std::uint64_t exact_choose(std::uint64_t n, std::uint64_t k)
{
    if (k > n) {
        return 0;
    }
    k = std::min(k, n - k);
    unsigned __int128 c = 1;
    for (std::uint64_t i = 1; i <= k; ++i) {
        c = c * (n - k + i) / i;
        if (c >= (static_cast<unsigned __int128>(1) << 53)) {
            return 0;
        }
    }
    return static_cast<std::uint64_t>(c);
}

double log_choose(std::uint64_t n, std::uint64_t k)
{
    return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0);
}

} // namespace

double fisher_exact_2x2(const Table2x2& t)
{
    const std::uint64_t r1 = t[0] + t[1];
    const std::uint64_t r2 = t[2] + t[3];
    const std::uint64_t c1 = t[0] + t[2];
    const std::uint64_t c2 = t[1] + t[3];
    const std::uint64_t n = r1 + r2;
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) {
        return 1.0;
    }
    const std::uint64_t lo = c1 > r2 ? c1 - r2 : 0;
    const std::uint64_t hi = std::min(r1, c1);

    // Exact integer path: every hypergeometric numerator is an integer below C(n, c1).
    if (const std::uint64_t denom = exact_choose(n, c1); denom != 0) {
        auto numerator = [&](std::uint64_t a) {
            return exact_choose(r1, a) * exact_choose(r2, c1 - a);
        };
        const std::uint64_t observed = numerator(t[0]);
        std::uint64_t sum = 0;
        for (std::uint64_t a = lo; a <= hi; ++a) {
            const std::uint64_t v = numerator(a);
            if (v <= observed) {
                sum += v;
            }
        }
        return static_cast<double>(sum) / static_cast<double>(denom);
    }

    const double log_denom = log_choose(n, c1);
    auto log_prob = [&](std::uint64_t a) {
        return log_choose(r1, a) + log_choose(r2, c1 - a) - log_denom;
    };
    const double cutoff = log_prob(t[0]) + std::log1p(1e-12);
    double sum = 0.0;
    for (std::uint64_t a = lo; a <= hi; ++a) {
        const double lp = log_prob(a);
        if (lp <= cutoff) {
            sum += std::exp(lp);
        }
    }
    return std::min(sum, 1.0);
}

std::vector<std::uint64_t> round_to_counts(std::span<const double> probs, std::uint64_t n)
{
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    if (!(total > 0.0)) {
        throw ContractError("round_to_counts: probabilities have no mass");
    }
    std::vector<std::uint64_t> counts(probs.size());
    std::vector<double> remainder(probs.size());
    std::uint64_t assigned = 0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
        const double exact = static_cast<double>(n) * std::max(probs[c], 0.0) / total;
        counts[c] = static_cast<std::uint64_t>(std::floor(exact));
        remainder[c] = exact - static_cast<double>(counts[c]);
        assigned += counts[c];
    }
    std::vector<std::size_t> order(probs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t m = 0; assigned < n; m = (m + 1) % order.size()) {
        ++counts[order[m]];
        ++assigned;
    }
    while (assigned > n) { // floating excess; take from the largest cells
        auto it = std::max_element(counts.begin(), counts.end());
        --*it;
        --assigned;
    }
    return counts;
}

std::vector<PairTest> pairwise_independence(const CollapsedModel& model, std::uint64_t n)
{
    const std::size_t p = model.schema.variables();
    for (std::size_t j = 0; j < p; ++j) {
        if (model.schema.cardinality(j) != 2) {
            throw ContractError("pairwise_independence: variable " + std::to_string(j + 1) +
                                " is not binary");
        }
    }
    if (n == 0) {
        throw ContractError("pairwise_independence: n must be positive");
    }
    std::vector<PairTest> out;
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = a + 1; b < p; ++b) {
            const auto table = pair_marginal(model, a, b);
            const auto counts = round_to_counts(table, n);
            out.push_back({a, b, fisher_exact_2x2({counts[0], counts[1], counts[2], counts[3]})});
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const PairTest& x, const PairTest& y) { return x.p_value < y.p_value; });
    return out;
}

//----------------------------------------------------------------------------
// Saturated construction

AugmentedModel construct_saturated_model(const JointDistribution& pi, const MissingnessTable& q,
                                         std::size_t cell_limit)
{
    if (!(pi.schema == q.schema)) {
        throw ContractError("joint table and missingness table have different schemas");
    }
    const std::size_t size = table_size(pi.schema);
    if (size > cell_limit) {
        throw SizeError("saturated construction needs " + std::to_string(size) + " classes");
    }
    pi.validate();
    q.validate();

    const auto& schema = pi.schema;
    const std::size_t cells = schema.augmented_cells();
    AugmentedModel out;
    out.schema = schema;
    for (std::size_t idx = 0; idx < size; ++idx) {
        if (!(pi.table[idx] > 0.0)) {
            continue;
        }
        const auto combo = pi.combination(idx);
        out.theta.push_back(pi.table[idx]);
        out.cell_of_class.push_back(idx);
        const std::size_t base = out.psi.size();
        out.psi.resize(base + cells, 0.0);
        for (std::size_t j = 0; j < schema.variables(); ++j) {
            const double miss = q.q[j][idx];
            out.psi[base + schema.augmented_offset(j)] = miss;
            out.psi[base + schema.augmented_offset(j) + combo[j]] = 1.0 - miss;
        }
    }
    return out;
}

ConstructionReport verify_construction(const AugmentedModel& model, const JointDistribution& pi,
                                       const MissingnessTable& q)
{
    const auto& schema = model.schema;
    const std::size_t p = schema.variables();
    const std::size_t k = model.theta.size();

    CollapsedModel collapsed;
    collapsed.schema = schema;
    collapsed.theta = model.theta;
    collapsed.tilde_psi.resize(k * schema.collapsed_cells());
    for (std::size_t h = 0; h < k; ++h) {
        for (std::size_t j = 0; j < p; ++j) {
            const auto v = model.component_psi(h, j);
            const double keep = 1.0 - v[0];
            if (!(keep > 0.0)) {
                throw NumericError("cannot rescale a class with missing rate 1");
            }
            auto out = collapsed.psi(h, j);
            for (std::size_t c = 1; c < v.size(); ++c) {
                out[c - 1] = v[c] / keep;
            }
        }
    }

    const auto joint = joint_distribution(collapsed);
    ConstructionReport report;
    for (std::size_t idx = 0; idx < joint.table.size(); ++idx) {
        report.pi_error = std::max(report.pi_error, std::abs(joint.table[idx] - pi.table[idx]));
    }

    // p(r_j = 0 | x) = sum_h p(h | x) psi_{h0}^{(j)}, with p(h | x) from the rescaled model.
    const CompiledModel compiled(collapsed);
    for (std::size_t idx = 0; idx < joint.table.size(); ++idx) {
        if (!(pi.table[idx] > 0.0)) {
            continue;
        }
        const auto combo = joint.combination(idx);
        const auto post = compiled.class_posterior(combo);
        for (std::size_t j = 0; j < p; ++j) {
            double rate = 0.0;
            for (std::size_t h = 0; h < k; ++h) {
                rate += post[h] * model.component_psi(h, j)[0];
            }
            report.q_error = std::max(report.q_error, std::abs(rate - q.q[j][idx]));
        }
    }
    return report;
}

} // namespace dpmcpm
