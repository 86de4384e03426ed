#pragma once

#include "dpmcpm/inference.hpp"
#include "dpmcpm/sampler.hpp"
#include "dpmcpm/synth.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dpmcpm
{

// Fraction of masked cells whose imputed code equals the truth.
// ContractError on an empty mask or mismatched shapes.
double imputation_accuracy(const Dataset& imputed, const Dataset& truth,
                           const std::vector<MaskedCell>& mask);

// Sum of squared entrywise differences.
double correlation_gap(const SquareMatrix& estimated, const SquareMatrix& truth);

enum class Protocol { mixture, xor_ };

std::string protocol_name(Protocol protocol);
Protocol parse_protocol(const std::string& name);

struct ReplicationConfig
{
    Protocol protocol = Protocol::mixture;
    MechanismSpec mechanism;
    std::size_t reps = 20;
    GibbsConfig gibbs;
    std::uint64_t seed = 1;
    std::size_t jobs = 1;
    MixtureSpec mixture;
    std::size_t xor_n = 300;
};

struct ReplicationResult
{
    std::size_t index = 0;
    std::uint64_t seed = 0;
    double accuracy = 0.0;
    std::optional<double> correlation_gap; // mixture protocol only
    std::size_t estimated_k = 0;
    std::size_t masked_cells = 0;
    std::map<std::size_t, std::size_t> k_histogram;
    std::string error; // non-empty when the replication failed
};

struct MetricSummary
{
    double mean = 0.0;
    std::optional<double> sd; // across-replication standard deviation; absent for one value
    double min = 0.0;
    double max = 0.0;
    std::size_t count = 0;
};

struct ReplicationReport
{
    ReplicationConfig config;
    std::vector<ReplicationResult> replications; // by index
    MetricSummary accuracy;
    std::optional<MetricSummary> correlation_gap;
    MetricSummary estimated_k;
    // Histogram of per-replication estimated k.
    std::map<std::size_t, std::size_t> k_counts;

    std::size_t failures() const;
};

MetricSummary summarize(const std::vector<double>& values);

// Seed of replication r: master and index mixed through the splitting hash.
std::uint64_t replication_seed(std::uint64_t master, std::size_t r);

// One replication: synthesize, mask, fit, impute, score.
ReplicationResult run_replication(const ReplicationConfig& config, std::size_t r);

// All replications on up to config.jobs threads; results are independent of the job count.
ReplicationReport run_replications(const ReplicationConfig& config);

// "replication,seed,accuracy,correlation_gap,estimated_k,masked_cells,error"
std::string format_report_csv(const ReplicationReport& report);
std::string format_report_json(const ReplicationReport& report);
// "k,replications" for the per-replication estimated k.
std::string format_k_counts_csv(const ReplicationReport& report);

} // namespace dpmcpm
