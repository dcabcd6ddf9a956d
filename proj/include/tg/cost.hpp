#pragma once

#include <map>
#include <set>

#include "tg/graph.hpp"

namespace tg {

// Analytic latency model. Values are configuration, not hardware truth:
// chosen so fusion, merge rules and constant folding all give measurable,
// order-consistent improvements at toy shapes.
struct CostParams {
  double launch_overhead = 5.0;  // microseconds per live kernel
  double c_mm = 1e-3;            // per multiply-accumulate, MatMul family
  double c_conv = 1e-3;
  double c_elem = 1e-4;          // per output element, elementwise/data movement
  double c_pool = 2e-4;
  bool fold_enabled = true;
  double noise_std = 0.0;        // multiplicative, seeded; off by default
  unsigned noise_seed = 0;
};

struct CostReport {
  std::map<int, double> per_node;   // microseconds
  double cost_model_total = 0.0;    // exact sum of per_node
  double e2e_total = 0.0;           // folded nodes excluded
  std::set<int> folded;             // node ids pre-computable before inference
};

// launch_overhead + c_kind * work; exactly 0 for Input/Weight/Identity.
double op_cost(const Node& n, const std::vector<Shape>& in_shapes,
               const Shape& out_shape, const CostParams& p);

double cost_model_latency(const CompGraph& g, const CostParams& p);
double simulated_e2e_latency(const CompGraph& g, const CostParams& p);
CostReport cost_report(const CompGraph& g, const CostParams& p);

}  // namespace tg
