#pragma once

#include <json.hpp>

#include "lbe/grid.hpp"
#include "lbe/model.hpp"
#include "lbe/potential.hpp"

namespace lbe {

nlohmann::json potential_to_json(const PotentialSpec& pot);
PotentialSpec potential_from_json(const nlohmann::json& j);

nlohmann::json grid_spec_to_json(const GridSpec& spec);
GridSpec grid_spec_from_json(const nlohmann::json& j);

// Shortest decimal text that reads back to the same double.
std::string format_double(double v);

}  // namespace lbe
