#pragma once

#include "dpmcpm/core.hpp"
#include "dpmcpm/sampler.hpp"

#include <string>

namespace dpmcpm
{

// JSON model document: {"k", "cardinalities", "theta", "tildePsi"} where
// tildePsi[h][j] is the d_j-vector of component h, variable j. Doubles are
// written in shortest round-trip form, so a load of a dump is bit-exact.
std::string serialize_model(const CollapsedModel& model);
// Throws ParseError on malformed documents, ValidationError when a vector is
// off the simplex by more than 1e-8.
CollapsedModel deserialize_model(const std::string& text);

// Posterior document: {"format": "dpmcpm-posterior", "cardinalities",
// "draws": [model...], "drawK": [...], "kHistogram": {"k": count}}.
std::string serialize_posterior(const PosteriorSample& posterior);
// Accepts a posterior document or a single model document (one draw).
PosteriorSample deserialize_posterior(const std::string& text);

// "k,count" rows, ascending k.
std::string format_k_histogram(const PosteriorSample& posterior);

} // namespace dpmcpm
