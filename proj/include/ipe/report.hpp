#pragma once

// JSON and CSV renderings of fits and diagnostics. Output is deterministic:
// keys keep insertion order and doubles print in shortest round-trip form.

#include <string>

#include <json.hpp>

#include "ipe/diagnostics.hpp"
#include "ipe/estimators.hpp"

namespace ipe {

using ojson = nlohmann::ordered_json;

ojson to_json(const SpecFit& fit);
ojson to_json(const WeightReport& report, bool per_agent = true);
ojson to_json(const CharacterizationResult& result);
ojson to_json(const BinReport& report);

// bin,lo,hi,count,probability,weight,contribution,empty
std::string plot_csv(const BinReport& report);

// Two-space indented with a trailing newline.
std::string dump(const ojson& j);

}  // namespace ipe
