#include "dpmcpm/metrics.hpp"

#include "dpmcpm/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>

namespace dpmcpm
{

double imputation_accuracy(const Dataset& imputed, const Dataset& truth,
                           const std::vector<MaskedCell>& mask)
{
    if (mask.empty()) {
        throw ContractError("imputation accuracy is undefined for an empty mask");
    }
    if (imputed.rows() != truth.rows() || !(imputed.schema() == truth.schema())) {
        throw ContractError("imputed and true datasets differ in shape");
    }
    std::size_t correct = 0;
    for (const auto& cell : mask) {
        if (imputed.at(cell.row, cell.col) == truth.at(cell.row, cell.col)) {
            ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(mask.size());
}

double correlation_gap(const SquareMatrix& estimated, const SquareMatrix& truth)
{
    if (estimated.size != truth.size) {
        throw ContractError("correlation matrices differ in dimension");
    }
    double gap = 0.0;
    for (std::size_t idx = 0; idx < estimated.values.size(); ++idx) {
        const double d = estimated.values[idx] - truth.values[idx];
        gap += d * d;
    }
    return gap;
}

std::string protocol_name(Protocol protocol)
{
    return protocol == Protocol::mixture ? "mixture" : "xor";
}

Protocol parse_protocol(const std::string& name)
{
    if (name == "mixture") {
        return Protocol::mixture;
    }
    if (name == "xor") {
        return Protocol::xor_;
    }
    throw ValidationError("unknown protocol '" + name + "'");
}

std::size_t ReplicationReport::failures() const
{
    return static_cast<std::size_t>(std::count_if(
        replications.begin(), replications.end(),
        [](const ReplicationResult& r) { return !r.error.empty(); }));
}

MetricSummary summarize(const std::vector<double>& values)
{
    MetricSummary s;
    s.count = values.size();
    if (values.empty()) {
        return s;
    }
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    // the mean can land a rounding error outside [min, max] for near-constant input
    s.mean = std::clamp(s.mean, s.min, s.max);
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) {
            ss += (v - s.mean) * (v - s.mean);
        }
        s.sd = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

std::uint64_t replication_seed(std::uint64_t master, std::size_t r)
{
    return Rng(master).split(r)();
}

ReplicationResult run_replication(const ReplicationConfig& config, std::size_t r)
{
    ReplicationResult out;
    out.index = r;
    out.seed = replication_seed(config.seed, r);
    const std::uint64_t data_seed = mix64(out.seed ^ 1);
    const std::uint64_t mask_seed = mix64(out.seed ^ 2);
    const std::uint64_t chain_seed = mix64(out.seed ^ 3);

    Dataset truth_data;
    std::optional<CollapsedModel> truth_model;
    if (config.protocol == Protocol::mixture) {
        auto sample = sample_mixture_dataset(config.mixture, data_seed);
        truth_data = std::move(sample.data);
        truth_model = std::move(sample.truth);
    } else {
        truth_data = sample_xor_dataset(config.xor_n, data_seed).data;
    }

    const auto masked = mask(truth_data, config.mechanism, mask_seed);
    out.masked_cells = masked.cells.size();

    GibbsConfig gibbs = config.gibbs;
    gibbs.seed = chain_seed;
    gibbs.log_every = 0;
    const auto posterior = run_gibbs(masked.masked, gibbs.priors_for(masked.masked.schema()), gibbs);
    out.k_histogram = posterior.k_histogram;
    out.estimated_k = posterior.estimated_k();

    const auto imputed = impute(masked.masked, posterior);
    out.accuracy = imputation_accuracy(imputed.completed, truth_data, masked.cells);

    if (truth_model) {
        const auto estimated = correlation_matrix(posterior_mixture(posterior));
        out.correlation_gap = correlation_gap(estimated, correlation_matrix(*truth_model));
    }
    return out;
}

ReplicationReport run_replications(const ReplicationConfig& config)
{
    if (config.reps < 1) {
        throw ValidationError("reps must be at least 1");
    }
    config.mechanism.validate();
    config.gibbs.validate();

    ReplicationReport report;
    report.config = config;
    report.replications.resize(config.reps);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t r = next.fetch_add(1); r < config.reps; r = next.fetch_add(1)) {
            try {
                report.replications[r] = run_replication(config, r);
            } catch (const std::exception& e) {
                report.replications[r].index = r;
                report.replications[r].seed = replication_seed(config.seed, r);
                report.replications[r].error = e.what();
            }
        }
    };
    const std::size_t jobs = std::clamp<std::size_t>(config.jobs, 1, config.reps);
    {
        std::vector<std::jthread> pool;
        for (std::size_t t = 1; t < jobs; ++t) {
            pool.emplace_back(worker);
        }
        worker();
    }

    std::vector<double> acc;
    std::vector<double> gap;
    std::vector<double> ks;
    for (const auto& r : report.replications) {
        if (!r.error.empty()) {
            continue;
        }
        acc.push_back(r.accuracy);
        ks.push_back(static_cast<double>(r.estimated_k));
        ++report.k_counts[r.estimated_k];
        if (r.correlation_gap) {
            gap.push_back(*r.correlation_gap);
        }
    }
    report.accuracy = summarize(acc);
    report.estimated_k = summarize(ks);
    if (!gap.empty()) {
        report.correlation_gap = summarize(gap);
    }
    return report;
}

namespace
{

std::string fmt(double v)
{
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

nlohmann::json summary_json(const MetricSummary& s)
{
    nlohmann::json j{{"mean", s.mean}, {"min", s.min}, {"max", s.max}, {"count", s.count}};
    j["sd"] = s.sd ? nlohmann::json(*s.sd) : nlohmann::json(nullptr);
    return j;
}

} // namespace

std::string format_report_csv(const ReplicationReport& report)
{
    std::string out = "replication,seed,accuracy,correlation_gap,estimated_k,masked_cells,error\n";
    for (const auto& r : report.replications) {
        std::string error = r.error;
        std::replace(error.begin(), error.end(), ',', ';');
        std::replace(error.begin(), error.end(), '\n', ' ');
        out += std::to_string(r.index + 1) + "," + std::to_string(r.seed) + "," +
               (r.error.empty() ? fmt(r.accuracy) : "NA") + "," +
               (r.correlation_gap ? fmt(*r.correlation_gap) : "NA") + "," +
               (r.error.empty() ? std::to_string(r.estimated_k) : "NA") + "," +
               std::to_string(r.masked_cells) + "," + error + "\n";
    }
    return out;
}

std::string format_report_json(const ReplicationReport& report)
{
    const auto& c = report.config;
    nlohmann::json mech{{"kind", mechanism_name(c.mechanism.kind)},
                        {"mcarRate", c.mechanism.mcar_rate},
                        {"marRates", {c.mechanism.mar_rates[0], c.mechanism.mar_rates[1]}},
                        {"mnarRates", {c.mechanism.mnar_rates[0], c.mechanism.mnar_rates[1]}}};
    nlohmann::json config{{"protocol", protocol_name(c.protocol)},
                          {"mechanism", mech},
                          {"reps", c.reps},
                          {"seed", c.seed},
                          {"burnin", c.gibbs.burnin},
                          {"samples", c.gibbs.samples},
                          {"thin", c.gibbs.thin},
                          {"alpha", c.gibbs.alpha_override.value_or(0.25)},
                          {"beta", c.gibbs.beta_override.value_or(1.0)}};
    if (c.protocol == Protocol::mixture) {
        config["n"] = c.mixture.n;
        config["p"] = c.mixture.p;
        config["k"] = c.mixture.k;
    } else {
        config["n"] = c.xor_n;
    }
    nlohmann::json kc = nlohmann::json::object();
    for (const auto& [k, count] : report.k_counts) {
        kc[std::to_string(k)] = count;
    }
    nlohmann::json doc{{"config", config},
                       {"accuracy", summary_json(report.accuracy)},
                       {"estimatedK", summary_json(report.estimated_k)},
                       {"estimatedKCounts", kc},
                       {"failures", report.failures()},
                       {"sdConvention", "across-replication standard deviation"}};
    doc["correlationGap"] =
        report.correlation_gap ? summary_json(*report.correlation_gap) : nlohmann::json(nullptr);
    return doc.dump(2) + "\n";
}

std::string format_k_counts_csv(const ReplicationReport& report)
{
    std::string out = "k,replications\n";
    for (const auto& [k, count] : report.k_counts) {
        out += std::to_string(k) + "," + std::to_string(count) + "\n";
    }
    return out;
}

} // namespace dpmcpm
