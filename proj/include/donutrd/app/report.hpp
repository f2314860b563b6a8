#pragma once

#include <span>
#include <string>

#include <json.hpp>

#include "donutrd/app/config.hpp"
#include "donutrd/diagnostics.hpp"
#include "donutrd/elasticity.hpp"
#include "donutrd/estimators.hpp"
#include "donutrd/synth.hpp"

namespace donutrd::app {

using Json = nlohmann::ordered_json;

inline constexpr const char* kToolVersion = "1.0.0";

Json to_json(const RdSpec& spec);
Json to_json(const Interval& ci);
Json to_json(const HonestCI& ci);
Json to_json(const RdFit& fit, double alpha);
Json to_json(const FuzzyResult& r);
Json to_json(const PedResult& r);
Json to_json(const TrueEstimands& t);
Json to_json(const McSummary& s);
Json to_json(const Provenance& p, const Cohort& cohort);
Json to_json(const Error& e);
Json config_json(const RunConfig& cfg);

/// Non-finite values become null.
Json number(double v);

std::string dump(const Json& j);

}  // namespace donutrd::app
