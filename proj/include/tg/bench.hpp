#pragma once

#include <string>
#include <vector>

#include "tg/graph.hpp"

namespace tg {

// Deterministic benchmark graph generators, sized for desk-scale search.
// scale multiplies the base tensor extents (1.0 = training shape).
CompGraph gen_benchmark(const std::string& name, double scale = 1.0);

const std::vector<std::string>& benchmark_names();

}  // namespace tg
