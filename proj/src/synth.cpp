#include "dpmcpm/synth.hpp"

#include "dpmcpm/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

namespace dpmcpm
{

//----------------------------------------------------------------------------
// Generators

MixtureSample sample_mixture_dataset(const MixtureSpec& spec, std::uint64_t seed)
{
    if (spec.n == 0 || spec.p == 0 || spec.k == 0) {
        throw ValidationError("mixture: n, p and k must be positive");
    }
    if (!(spec.theta_concentration > 0.0) || !(spec.psi_concentration > 0.0)) {
        throw ValidationError("mixture: concentrations must be positive");
    }
    CategoricalSchema schema(std::vector<std::size_t>(spec.p, spec.cardinality));
    Rng rng(seed, 0x6d6978ULL);

    CollapsedModel truth;
    truth.schema = schema;
    truth.theta.resize(spec.k);
    const std::vector<double> theta_conc(spec.k, spec.theta_concentration);
    rng.dirichlet(theta_conc, truth.theta);
    truth.tilde_psi.resize(spec.k * schema.collapsed_cells());
    const std::vector<double> psi_conc(spec.cardinality, spec.psi_concentration);
    for (std::size_t h = 0; h < spec.k; ++h) {
        for (std::size_t j = 0; j < spec.p; ++j) {
            rng.dirichlet(psi_conc, truth.psi(h, j));
        }
    }

    std::vector<Code> cells(spec.n * spec.p);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const std::size_t z = rng.categorical(truth.theta);
        for (std::size_t j = 0; j < spec.p; ++j) {
            cells[i * spec.p + j] = static_cast<Code>(rng.categorical(truth.psi(z, j)) + 1);
        }
    }
    return {Dataset(schema, spec.n, std::move(cells)), std::move(truth)};
}

JointDistribution xor_truth()
{
    JointDistribution truth;
    truth.schema = CategoricalSchema({2, 2, 2});
    truth.table.assign(8, 0.0);
    for (int b1 = 0; b1 < 2; ++b1) {
        for (int b2 = 0; b2 < 2; ++b2) {
            const double p12 = (b1 ? 0.3 : 0.7) * 0.5;
            for (int b3 = 0; b3 < 2; ++b3) {
                const double p3 = ((b1 ^ b2) == b3 ? 0.95 : 0.0) + 0.05 * 0.5;
                const Code combo[3] = {static_cast<Code>(b1 + 1), static_cast<Code>(b2 + 1),
                                       static_cast<Code>(b3 + 1)};
                truth.table[truth.index(combo)] = p12 * p3;
            }
        }
    }
    return truth;
}

XorSample sample_xor_dataset(std::size_t n, std::uint64_t seed)
{
    if (n == 0) {
        throw ValidationError("xor: n must be positive");
    }
    Rng rng(seed, 0x786f72ULL);
    std::vector<Code> cells(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
        const int v1 = rng.bernoulli(0.3) ? 1 : 0;
        const int v2 = rng.bernoulli(0.5) ? 1 : 0;
        const int v3 = rng.bernoulli(0.95) ? (v1 ^ v2) : (rng.bernoulli(0.5) ? 1 : 0);
        cells[i * 3 + 0] = static_cast<Code>(v1 + 1);
        cells[i * 3 + 1] = static_cast<Code>(v2 + 1);
        cells[i * 3 + 2] = static_cast<Code>(v3 + 1);
    }
    return {Dataset(CategoricalSchema({2, 2, 2}), n, std::move(cells)), xor_truth()};
}

//----------------------------------------------------------------------------
// Missingness

void MechanismSpec::validate() const
{
    auto rate_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
    if (!rate_ok(mcar_rate) || !rate_ok(mar_rates[0]) || !rate_ok(mar_rates[1]) ||
        !rate_ok(mnar_rates[0]) || !rate_ok(mnar_rates[1])) {
        throw ValidationError("missing rates must lie in [0, 1]");
    }
}

std::string mechanism_name(MechanismKind kind)
{
    switch (kind) {
    case MechanismKind::mcar:
        return "mcar";
    case MechanismKind::mar:
        return "mar";
    case MechanismKind::mnar:
        return "mnar";
    }
    return "unknown";
}

MechanismKind parse_mechanism(const std::string& name)
{
    std::string lower;
    std::transform(name.begin(), name.end(), std::back_inserter(lower),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "mcar") {
        return MechanismKind::mcar;
    }
    if (lower == "mar") {
        return MechanismKind::mar;
    }
    if (lower == "mnar") {
        return MechanismKind::mnar;
    }
    throw ValidationError("unknown missing mechanism '" + name + "'");
}

MaskResult mask(const Dataset& data, const MechanismSpec& spec, std::uint64_t seed)
{
    spec.validate();
    if (!data.complete()) {
        throw ContractError("mask: input dataset must be complete");
    }
    const auto& schema = data.schema();
    if (spec.kind == MechanismKind::mar && schema.cardinality(0) != 2) {
        throw ContractError("mask: MAR needs a binary first variable");
    }
    if (spec.kind == MechanismKind::mnar && !schema.all_binary()) {
        throw ContractError("mask: MNAR needs binary variables");
    }

    Rng rng(seed, 0x6d61736bULL);
    std::vector<Code> cells = data.cells();
    std::vector<MaskedCell> masked;
    for (std::size_t i = 0; i < data.rows(); ++i) {
        for (std::size_t j = 0; j < data.cols(); ++j) {
            double rate = 0.0;
            switch (spec.kind) {
            case MechanismKind::mcar:
                rate = spec.mcar_rate;
                break;
            case MechanismKind::mar:
                if (j == 0) {
                    continue;
                }
                rate = spec.mar_rates[data.at(i, 0) - 1];
                break;
            case MechanismKind::mnar:
                rate = spec.mnar_rates[data.at(i, j) - 1];
                break;
            }
            if (rng.bernoulli(rate)) {
                masked.push_back({i, j, data.at(i, j)});
                cells[i * data.cols() + j] = kMissing;
            }
        }
    }
    return {data.with_cells(std::move(cells)), std::move(masked)};
}

MaskResult mask_fraction(const Dataset& data, double fraction, std::uint64_t seed)
{
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        throw ValidationError("mask_fraction: fraction must lie in [0, 1]");
    }
    std::vector<std::size_t> observed;
    for (std::size_t idx = 0; idx < data.cells().size(); ++idx) {
        if (data.cells()[idx] != kMissing) {
            observed.push_back(idx);
        }
    }
    const auto count = static_cast<std::size_t>(
        std::llround(fraction * static_cast<double>(observed.size())));
    std::vector<std::size_t> chosen;
    chosen.reserve(count);
    Rng rng(seed, 0x6672616374ULL);
    std::sample(observed.begin(), observed.end(), std::back_inserter(chosen), count, rng);
    std::sort(chosen.begin(), chosen.end());

    std::vector<Code> cells = data.cells();
    std::vector<MaskedCell> masked;
    masked.reserve(chosen.size());
    for (std::size_t idx : chosen) {
        masked.push_back({idx / data.cols(), idx % data.cols(), cells[idx]});
        cells[idx] = kMissing;
    }
    return {data.with_cells(std::move(cells)), std::move(masked)};
}

//----------------------------------------------------------------------------
// Ratings

std::vector<RatingTriple> parse_ratings(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    std::vector<RatingTriple> out;
    bool header = true;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (header) {
            header = false;
            continue;
        }
        std::istringstream fields(line);
        std::string user;
        std::string item;
        std::string rating;
        if (!std::getline(fields, user, ',') || !std::getline(fields, item, ',') ||
            !std::getline(fields, rating, ',')) {
            throw ParseError("ratings line " + std::to_string(lineno) + ": expected 3 fields");
        }
        try {
            std::size_t used = 0;
            RatingTriple t{std::stoll(user, &used), 0, 0.0};
            t.item = std::stoll(item, &used);
            t.rating = std::stod(rating, &used);
            if (!(t.rating > 0.0 && t.rating <= 5.0)) {
                throw ParseError("ratings line " + std::to_string(lineno) +
                                 ": rating outside (0, 5]");
            }
            out.push_back(t);
        } catch (const std::logic_error&) {
            throw ParseError("ratings line " + std::to_string(lineno) + ": not numeric");
        }
    }
    return out;
}

Code RatingCoding::encode(double rating) const
{
    if (kind == Kind::binary) {
        return rating >= cutoff ? 2 : 1;
    }
    // half stars round up: 0.5 -> 1, 3.5 -> 4
    const double up = std::ceil(rating - 1e-9);
    return static_cast<Code>(std::clamp(up, 1.0, 5.0));
}

RatingMatrix preprocess_ratings(const std::vector<RatingTriple>& triples, double item_threshold,
                                double user_threshold, const RatingCoding& coding)
{
    std::map<std::pair<std::int64_t, std::int64_t>, double> rating_of; // (user, item); last wins
    std::set<std::int64_t> all_users;
    for (const auto& t : triples) {
        rating_of[{t.user, t.item}] = t.rating;
        all_users.insert(t.user);
    }
    std::map<std::int64_t, std::size_t> item_raters;
    for (const auto& [key, r] : rating_of) {
        ++item_raters[key.second];
    }

    std::vector<std::int64_t> items;
    const double user_total = static_cast<double>(all_users.size());
    for (const auto& [item, raters] : item_raters) {
        if (static_cast<double>(raters) > item_threshold * user_total) {
            items.push_back(item);
        }
    }
    if (items.empty()) {
        throw ValidationError("preprocess: no item passes the item threshold");
    }
    const std::set<std::int64_t> kept_items(items.begin(), items.end());

    std::map<std::int64_t, std::size_t> user_kept;
    for (const auto& [key, r] : rating_of) {
        if (kept_items.count(key.second) != 0) {
            ++user_kept[key.first];
        }
    }
    std::vector<std::int64_t> users;
    for (const auto& [user, count] : user_kept) {
        if (static_cast<double>(count) > user_threshold * static_cast<double>(items.size())) {
            users.push_back(user);
        }
    }
    if (users.empty()) {
        throw ValidationError("preprocess: no user passes the user threshold");
    }

    std::map<std::int64_t, std::size_t> column_of;
    for (std::size_t j = 0; j < items.size(); ++j) {
        column_of[items[j]] = j;
    }
    std::map<std::int64_t, std::size_t> row_of;
    for (std::size_t i = 0; i < users.size(); ++i) {
        row_of[users[i]] = i;
    }
    std::vector<Code> cells(users.size() * items.size(), kMissing);
    for (const auto& [key, r] : rating_of) {
        const auto row = row_of.find(key.first);
        const auto col = column_of.find(key.second);
        if (row != row_of.end() && col != column_of.end()) {
            cells[row->second * items.size() + col->second] = coding.encode(r);
        }
    }

    const std::size_t d = coding.kind == RatingCoding::Kind::binary ? 2 : 5;
    std::vector<std::string> names;
    for (auto item : items) {
        names.push_back("item" + std::to_string(item));
    }
    return {Dataset(CategoricalSchema(std::vector<std::size_t>(items.size(), d)), users.size(),
                    std::move(cells), std::move(names)),
            std::move(users), std::move(items)};
}

} // namespace dpmcpm
