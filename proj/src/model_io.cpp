#include "dpmcpm/model_io.hpp"

#include <json.hpp>

namespace dpmcpm
{

using nlohmann::json;

namespace
{

json model_to_json(const CollapsedModel& model)
{
    json psi = json::array();
    for (std::size_t h = 0; h < model.components(); ++h) {
        json per_var = json::array();
        for (std::size_t j = 0; j < model.schema.variables(); ++j) {
            const auto v = model.psi(h, j);
            per_var.push_back(std::vector<double>(v.begin(), v.end()));
        }
        psi.push_back(std::move(per_var));
    }
    return json{{"k", model.components()},
                {"cardinalities", model.schema.cardinalities()},
                {"theta", model.theta},
                {"tildePsi", std::move(psi)}};
}

CollapsedModel model_from_json(const json& doc)
{
    CollapsedModel model;
    try {
        const auto k = doc.at("k").get<std::size_t>();
        model.schema = CategoricalSchema(doc.at("cardinalities").get<std::vector<std::size_t>>());
        model.theta = doc.at("theta").get<std::vector<double>>();
        if (model.theta.size() != k) {
            throw ParseError("model: theta has " + std::to_string(model.theta.size()) +
                             " entries but k = " + std::to_string(k));
        }
        const auto& psi = doc.at("tildePsi");
        if (!psi.is_array() || psi.size() != k) {
            throw ParseError("model: tildePsi must list k components");
        }
        model.tilde_psi.resize(k * model.schema.collapsed_cells());
        for (std::size_t h = 0; h < k; ++h) {
            const auto& per_var = psi.at(h);
            if (!per_var.is_array() || per_var.size() != model.schema.variables()) {
                throw ParseError("model: tildePsi[" + std::to_string(h) +
                                 "] must list every variable");
            }
            for (std::size_t j = 0; j < model.schema.variables(); ++j) {
                const auto v = per_var.at(j).get<std::vector<double>>();
                if (v.size() != model.schema.cardinality(j)) {
                    throw ParseError("model: tildePsi vector length does not match cardinality");
                }
                std::copy(v.begin(), v.end(), model.psi(h, j).begin());
            }
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("model: ") + e.what());
    }
    model.validate(1e-8);
    return model;
}

json parse_json(const std::string& text)
{
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
    }
}

} // namespace

std::string serialize_model(const CollapsedModel& model)
{
    return model_to_json(model).dump(2) + "\n";
}

CollapsedModel deserialize_model(const std::string& text)
{
    return model_from_json(parse_json(text));
}

std::string serialize_posterior(const PosteriorSample& posterior)
{
    json draws = json::array();
    for (const auto& m : posterior.draws) {
        draws.push_back(model_to_json(m));
    }
    json hist = json::object();
    for (const auto& [k, count] : posterior.k_histogram) {
        hist[std::to_string(k)] = count;
    }
    json doc{{"format", "dpmcpm-posterior"},
             {"cardinalities", posterior.schema.cardinalities()},
             {"draws", std::move(draws)},
             {"drawK", posterior.draw_k},
             {"kHistogram", std::move(hist)}};
    return doc.dump(1) + "\n";
}

PosteriorSample deserialize_posterior(const std::string& text)
{
    const json doc = parse_json(text);
    PosteriorSample out;
    if (!doc.is_object()) {
        throw ParseError("model document must be a JSON object");
    }
    if (!doc.contains("draws")) {
        auto model = model_from_json(doc);
        out.schema = model.schema;
        out.draw_k.push_back(model.components());
        ++out.k_histogram[model.components()];
        out.draws.push_back(std::move(model));
        return out;
    }
    try {
        out.schema = CategoricalSchema(doc.at("cardinalities").get<std::vector<std::size_t>>());
        for (const auto& d : doc.at("draws")) {
            auto model = model_from_json(d);
            if (!(model.schema == out.schema)) {
                throw ParseError("posterior draw has a different schema");
            }
            out.draw_k.push_back(model.components());
            ++out.k_histogram[model.components()];
            out.draws.push_back(std::move(model));
        }
    } catch (const json::exception& e) {
        throw ParseError(std::string("posterior: ") + e.what());
    }
    if (out.draws.empty()) {
        throw ParseError("posterior has no draws");
    }
    return out;
}

std::string format_k_histogram(const PosteriorSample& posterior)
{
    std::string out = "k,count\n";
    for (const auto& [k, count] : posterior.k_histogram) {
        out += std::to_string(k) + "," + std::to_string(count) + "\n";
    }
    return out;
}

} // namespace dpmcpm
