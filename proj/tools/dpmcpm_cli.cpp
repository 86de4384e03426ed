// dpmcpm command-line driver: fit, impute, simulate, benchmark, test-independence,
// correlation, preprocess-ratings.
//
// Exit codes: 0 success, 1 runtime or contract error, 2 usage error.

#include "dpmcpm/inference.hpp"
#include "dpmcpm/kernels.hpp"
#include "dpmcpm/metrics.hpp"
#include "dpmcpm/model_io.hpp"
#include "dpmcpm/sampler.hpp"
#include "dpmcpm/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <sstream>
#include <thread>

using namespace dpmcpm;

namespace
{

struct GibbsFlags
{
    std::size_t burnin = 200;
    std::size_t samples = 100;
    std::size_t thin = 2;
    double alpha = 0.25;
    double beta = 1.0;

    void add(CLI::App* app)
    {
        app->add_option("--burnin", burnin, "Burn-in sweeps")->capture_default_str();
        app->add_option("--samples", samples, "Retained draws")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        app->add_option("--thin", thin, "Keep every thin-th sweep after burn-in")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        app->add_option("--alpha", alpha, "CRP concentration")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
        app->add_option("--beta", beta, "Flat Dirichlet prior on every psi cell")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
    }

    GibbsConfig config(std::uint64_t seed) const
    {
        GibbsConfig c;
        c.burnin = burnin;
        c.samples = samples;
        c.thin = thin;
        c.seed = seed;
        c.alpha_override = alpha;
        c.beta_override = beta;
        return c;
    }
};

struct MechanismFlags
{
    std::string mechanism = "mcar";
    double mcar_rate = 0.2;
    std::vector<double> mar_rates{0.1, 0.3};
    std::vector<double> mnar_rates{0.1, 0.3};

    void add(CLI::App* app, bool allow_none)
    {
        std::vector<std::string> kinds{"mcar", "mar", "mnar"};
        if (allow_none) {
            kinds.insert(kinds.begin(), "none");
        }
        app->add_option("--mechanism", mechanism, "Missing mechanism")
            ->check(CLI::IsMember(kinds))
            ->capture_default_str();
        app->add_option("--mcar-rate", mcar_rate, "MCAR missing rate")
            ->check(CLI::Range(0.0, 1.0))
            ->capture_default_str();
        app->add_option("--mar-rates", mar_rates, "MAR rates when x_1 = 1, 2")
            ->expected(2)
            ->check(CLI::Range(0.0, 1.0));
        app->add_option("--mnar-rates", mnar_rates, "MNAR rates for values 1, 2")
            ->expected(2)
            ->check(CLI::Range(0.0, 1.0));
    }

    MechanismSpec spec() const
    {
        MechanismSpec s;
        s.kind = parse_mechanism(mechanism);
        s.mcar_rate = mcar_rate;
        s.mar_rates[0] = mar_rates[0];
        s.mar_rates[1] = mar_rates[1];
        s.mnar_rates[0] = mnar_rates[0];
        s.mnar_rates[1] = mnar_rates[1];
        return s;
    }
};

std::string sibling(const std::string& path, const std::string& suffix)
{
    const auto dot = path.rfind('.');
    const auto slash = path.find_last_of('/');
    if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
        return path.substr(0, dot) + suffix;
    }
    return path + suffix;
}

std::string fmt(double v)
{
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

std::string format_matrix(const SquareMatrix& m, const std::vector<std::string>& names)
{
    std::string out = "variable";
    for (const auto& n : names) {
        out += "," + n;
    }
    out += "\n";
    for (std::size_t i = 0; i < m.size; ++i) {
        out += names[i];
        for (std::size_t j = 0; j < m.size; ++j) {
            out += "," + fmt(m(i, j));
        }
        out += "\n";
    }
    return out;
}

std::vector<std::string> default_names(std::size_t p)
{
    std::vector<std::string> names;
    for (std::size_t j = 0; j < p; ++j) {
        names.push_back("V" + std::to_string(j + 1));
    }
    return names;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dirichlet process mixture of collapsed product-multinomials for incomplete "
                 "categorical data"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "dpmcpm 1.0.0");

    std::uint64_t seed = 1;
    bool quiet = false;

    // fit
    auto* fit = app.add_subcommand("fit", "Run the Gibbs sampler and save the posterior");
    std::string fit_in;
    std::string fit_out;
    std::string fit_khist;
    bool fit_summary = false;
    std::vector<std::size_t> fit_card;
    GibbsFlags fit_gibbs;
    fit->add_option("-i,--input", fit_in, "Input CSV (NA = missing)")->required();
    fit->add_option("-o,--output", fit_out, "Model JSON")->required();
    fit->add_option("--cardinalities", fit_card,
                    "d_j per column, or one value for all (default: column maxima)")
        ->delimiter(',')
        ->check(CLI::Range(std::size_t{2}, std::size_t{65535}));
    fit->add_option("--khist", fit_khist, "k histogram CSV (default: <output>.khist.csv)");
    fit->add_flag("--summary", fit_summary,
                  "Write one draw-averaged model instead of every retained draw");
    fit->add_option("--seed", seed, "RNG seed")->capture_default_str();
    fit->add_flag("-q,--quiet", quiet, "No progress lines");
    fit_gibbs.add(fit);

    // impute
    auto* imp = app.add_subcommand("impute", "Fill missing cells from a fitted model");
    std::string imp_in;
    std::string imp_model;
    std::string imp_out;
    std::string imp_post;
    std::string imp_rule = "argmax";
    bool imp_last = false;
    imp->add_option("-i,--input", imp_in, "Input CSV")->required();
    imp->add_option("-m,--model", imp_model, "Model or posterior JSON")->required();
    imp->add_option("-o,--output", imp_out, "Completed CSV")->required();
    imp->add_option("--posteriors", imp_post,
                    "Cell posterior CSV (default: <output>.posteriors.csv)");
    imp->add_option("--rule", imp_rule, "argmax or sample")
        ->check(CLI::IsMember({"argmax", "sample"}))
        ->capture_default_str();
    imp->add_flag("--last-draw", imp_last, "Score with the final retained draw only");
    imp->add_option("--seed", seed, "RNG seed for --rule sample")->capture_default_str();

    // simulate
    auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset and mask it");
    std::string sim_protocol = "mixture";
    std::string sim_out;
    std::string sim_complete;
    std::string sim_truth;
    double sim_fraction = -1.0;
    MixtureSpec sim_mix;
    std::size_t sim_xor_n = 300;
    MechanismFlags sim_mech;
    sim->add_option("--protocol", sim_protocol, "mixture or xor")
        ->check(CLI::IsMember({"mixture", "xor"}))
        ->capture_default_str();
    sim->add_option("-o,--output", sim_out, "Masked CSV")->required();
    sim->add_option("--complete", sim_complete, "Complete CSV before masking");
    sim->add_option("--truth", sim_truth, "Generating model JSON (mixture only)");
    sim->add_option("--n", sim_mix.n, "Rows (mixture; xor uses --xor-n)")->capture_default_str();
    sim->add_option("--p", sim_mix.p, "Variables (mixture)")->capture_default_str();
    sim->add_option("--k", sim_mix.k, "True components (mixture)")->capture_default_str();
    sim->add_option("--categories", sim_mix.cardinality, "d_j (mixture)")
        ->check(CLI::Range(2, 1000))
        ->capture_default_str();
    sim->add_option("--xor-n", sim_xor_n, "Rows (xor)")->capture_default_str();
    sim->add_option("--mask-fraction", sim_fraction,
                    "Mask exactly this fraction of cells instead of using --mechanism")
        ->check(CLI::Range(0.0, 1.0));
    sim->add_option("--seed", seed, "RNG seed")->capture_default_str();
    sim_mech.add(sim, true);

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Replicated synthesize-mask-fit-impute study");
    std::string bench_protocol = "mixture";
    std::size_t bench_reps = 20;
    std::size_t bench_jobs = std::max(1U, std::thread::hardware_concurrency());
    std::string bench_out;
    std::string bench_summary;
    std::string bench_khist;
    MixtureSpec bench_mix;
    std::size_t bench_xor_n = 300;
    GibbsFlags bench_gibbs;
    MechanismFlags bench_mech;
    bench->add_option("--protocol", bench_protocol, "mixture or xor")
        ->check(CLI::IsMember({"mixture", "xor"}))
        ->capture_default_str();
    bench->add_option("--reps", bench_reps, "Replications")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench->add_option("--jobs", bench_jobs, "Worker threads")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    bench->add_option("-o,--output", bench_out, "Per-replication CSV")->required();
    bench->add_option("--summary", bench_summary, "Summary JSON (default: <output>.summary.json)");
    bench->add_option("--khist", bench_khist, "Estimated-k counts CSV (default: <output>.khist.csv)");
    bench->add_option("--n", bench_mix.n, "Rows (mixture)")->capture_default_str();
    bench->add_option("--p", bench_mix.p, "Variables (mixture)")->capture_default_str();
    bench->add_option("--k", bench_mix.k, "True components (mixture)")->capture_default_str();
    bench->add_option("--xor-n", bench_xor_n, "Rows (xor)")->capture_default_str();
    bench->add_option("--seed", seed, "Master seed")->capture_default_str();
    bench->add_flag("-q,--quiet", quiet, "No progress lines");
    bench_gibbs.add(bench);
    bench_mech.add(bench, false);

    // test-independence
    auto* indep = app.add_subcommand("test-independence",
                                     "Fisher exact test for every variable pair of a binary model");
    std::string indep_model;
    std::string indep_out;
    std::string indep_in;
    std::uint64_t indep_n = 0;
    indep->add_option("-m,--model", indep_model, "Model or posterior JSON")->required();
    indep->add_option("-o,--output", indep_out, "CSV j1,j2,p_value")->required();
    auto* indep_data = indep->add_option("-i,--input", indep_in,
                                         "Fitted dataset; its row count is the default --n");
    indep->add_option("--n", indep_n, "Effective sample size for the count tables")
        ->check(CLI::PositiveNumber);
    indep->callback([&] {
        if (indep_n == 0 && indep_data->count() == 0) {
            throw CLI::RequiredError("--n or --input");
        }
    });

    // correlation
    auto* corr = app.add_subcommand("correlation", "Model-implied correlation matrix");
    std::string corr_model;
    std::string corr_out;
    corr->add_option("-m,--model", corr_model, "Model or posterior JSON")->required();
    corr->add_option("-o,--output", corr_out, "Correlation CSV")->required();

    // preprocess-ratings
    auto* prep = app.add_subcommand("preprocess-ratings",
                                    "Filter and code a userId,movieId,rating table");
    std::string prep_in;
    std::string prep_out;
    double prep_item = 0.25;
    double prep_user = 0.95;
    std::string prep_coding = "binary";
    double prep_cutoff = 4.0;
    prep->add_option("-i,--input", prep_in, "Ratings CSV")->required();
    prep->add_option("-o,--output", prep_out, "Dataset CSV")->required();
    prep->add_option("--item-threshold", prep_item, "Keep items rated by more than this share of users")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    prep->add_option("--user-threshold", prep_user,
                     "Keep users who rated more than this share of kept items")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    prep->add_option("--coding", prep_coding, "binary or five")
        ->check(CLI::IsMember({"binary", "five"}))
        ->capture_default_str();
    prep->add_option("--cutoff", prep_cutoff, "Binary cutoff: rating >= cutoff codes 2")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (fit->parsed()) {
            Dataset data;
            if (fit_card.empty()) {
                data = read_dataset(fit_in);
            } else {
                const auto text = read_file(fit_in);
                const auto header = text.substr(0, text.find('\n'));
                const auto columns =
                    static_cast<std::size_t>(std::count(header.begin(), header.end(), ',')) + 1;
                if (fit_card.size() == 1) {
                    fit_card.assign(columns, fit_card.front());
                }
                const CategoricalSchema schema(fit_card);
                data = parse_dataset(text, &schema);
            }
            GibbsConfig config = fit_gibbs.config(seed);
            config.log_every = quiet ? 0 : 50;
            const auto posterior = run_gibbs(data, config.priors_for(data.schema()), config);
            if (fit_summary) {
                write_file_atomic(fit_out, serialize_model(posterior_mixture(posterior)));
            } else {
                write_file_atomic(fit_out, serialize_posterior(posterior));
            }
            write_file_atomic(fit_khist.empty() ? sibling(fit_out, ".khist.csv") : fit_khist,
                              format_k_histogram(posterior));
            std::cerr << "estimated k=" << posterior.estimated_k() << " ("
                      << posterior.draws.size() << " draws, kernels "
                      << kernels::isa_name(kernels::active().isa) << ")\n";
        } else if (imp->parsed()) {
            const auto posterior = deserialize_posterior(read_file(imp_model));
            const Dataset data = read_dataset(imp_in, &posterior.schema);
            ImputeOptions options;
            options.rule = imp_rule == "sample" ? ImputeRule::sample : ImputeRule::argmax;
            options.seed = seed;
            options.last_draw_only = imp_last;
            const auto result = impute(data, posterior, options);
            std::string cells = "row,column,category,probability\n";
            for (const auto& cell : result.cell_posteriors) {
                for (std::size_t c = 0; c < cell.probs.size(); ++c) {
                    cells += std::to_string(cell.row + 1) + "," + std::to_string(cell.col + 1) +
                             "," + std::to_string(c + 1) + "," + fmt(cell.probs[c]) + "\n";
                }
            }
            write_file_atomic(imp_out, format_dataset(result.completed));
            write_file_atomic(imp_post.empty() ? sibling(imp_out, ".posteriors.csv") : imp_post,
                              cells);
        } else if (sim->parsed()) {
            Dataset complete;
            std::optional<CollapsedModel> truth;
            if (sim_protocol == "mixture") {
                auto sample = sample_mixture_dataset(sim_mix, mix64(seed ^ 1));
                complete = std::move(sample.data);
                truth = std::move(sample.truth);
            } else {
                complete = sample_xor_dataset(sim_xor_n, mix64(seed ^ 1)).data;
            }
            Dataset masked = complete;
            if (sim_fraction >= 0.0) {
                masked = mask_fraction(complete, sim_fraction, mix64(seed ^ 2)).masked;
            } else if (sim_mech.mechanism != "none") {
                masked = mask(complete, sim_mech.spec(), mix64(seed ^ 2)).masked;
            }
            write_file_atomic(sim_out, format_dataset(masked));
            if (!sim_complete.empty()) {
                write_file_atomic(sim_complete, format_dataset(complete));
            }
            if (!sim_truth.empty()) {
                if (!truth) {
                    throw ContractError("--truth is only available for the mixture protocol");
                }
                write_file_atomic(sim_truth, serialize_model(*truth));
            }
        } else if (bench->parsed()) {
            ReplicationConfig config;
            config.protocol = parse_protocol(bench_protocol);
            config.mechanism = bench_mech.spec();
            config.reps = bench_reps;
            config.gibbs = bench_gibbs.config(seed);
            config.seed = seed;
            config.jobs = bench_jobs;
            config.mixture = bench_mix;
            config.xor_n = bench_xor_n;
            const auto report = run_replications(config);
            write_file_atomic(bench_out, format_report_csv(report));
            write_file_atomic(bench_summary.empty() ? sibling(bench_out, ".summary.json")
                                                    : bench_summary,
                              format_report_json(report));
            write_file_atomic(bench_khist.empty() ? sibling(bench_out, ".khist.csv") : bench_khist,
                              format_k_counts_csv(report));
            if (!quiet) {
                std::cerr << protocol_name(config.protocol) << "/"
                          << mechanism_name(config.mechanism.kind)
                          << " accuracy mean=" << report.accuracy.mean
                          << " sd=" << (report.accuracy.sd ? fmt(*report.accuracy.sd) : "NA");
                if (report.correlation_gap) {
                    std::cerr << " gap mean=" << report.correlation_gap->mean;
                }
                std::cerr << "\n";
            }
            if (report.failures() > 0) {
                std::cerr << "error: " << report.failures() << " replication(s) failed\n";
                return 1;
            }
        } else if (indep->parsed()) {
            const auto posterior = deserialize_posterior(read_file(indep_model));
            if (indep_n == 0) {
                indep_n = read_dataset(indep_in, &posterior.schema).rows();
            }
            const auto tests = pairwise_independence(posterior_mixture(posterior), indep_n);
            std::string out = "j1,j2,p_value\n";
            for (const auto& t : tests) {
                out += std::to_string(t.j1 + 1) + "," + std::to_string(t.j2 + 1) + "," +
                       fmt(t.p_value) + "\n";
            }
            write_file_atomic(indep_out, out);
        } else if (corr->parsed()) {
            const auto posterior = deserialize_posterior(read_file(corr_model));
            const auto m = correlation_matrix(posterior_mixture(posterior));
            write_file_atomic(corr_out, format_matrix(m, default_names(m.size)));
        } else if (prep->parsed()) {
            RatingCoding coding;
            coding.kind = prep_coding == "five" ? RatingCoding::Kind::five_category
                                                : RatingCoding::Kind::binary;
            coding.cutoff = prep_cutoff;
            const auto triples = parse_ratings(read_file(prep_in));
            const auto matrix = preprocess_ratings(triples, prep_item, prep_user, coding);
            write_file_atomic(prep_out, format_dataset(matrix.data));
            std::cerr << matrix.users.size() << " users x " << matrix.items.size() << " items, "
                      << fmt(100.0 * static_cast<double>(matrix.data.missing_count()) /
                             static_cast<double>(matrix.data.cells().size()))
                      << "% missing\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
