#pragma once

#include <map>
#include <vector>

#include "tg/graph.hpp"

namespace tg {

// Dense real tensor for the reference interpreter.
struct TensorND {
  Shape dims;
  std::vector<double> data;

  TensorND() = default;
  explicit TensorND(Shape d) : dims(std::move(d)), data(numel(dims), 0.0) {}
  TensorND(Shape d, std::vector<double> v) : dims(std::move(d)), data(std::move(v)) {}

  int64_t size() const { return static_cast<int64_t>(data.size()); }
};

using TensorMap = std::map<int, TensorND>;

// Direct interpretation in topological order; the semantic-equivalence
// oracle for the rewrite engine. Deterministic.
TensorMap evaluate(const CompGraph& g, const TensorMap& inputs);

// Output tensors only, in graph-output order.
std::vector<TensorND> evaluate_outputs(const CompGraph& g, const TensorMap& inputs);

// Max relative elementwise difference, with absolute fallback near zero.
double max_rel_diff(const TensorND& a, const TensorND& b);

}  // namespace tg
