#pragma once

#include <array>
#include <vector>

#include "tg/graph.hpp"

namespace tg {

// Featurised graph for the GNN encoder. Node order equals topological
// order with node-id tie-break; edge order is (dst index, port).
struct GraphFeatures {
  std::vector<std::array<double, kNumOpKinds>> node_features;  // one-hot
  std::vector<int> edge_src;  // indices into node order
  std::vector<int> edge_dst;
  std::vector<std::array<double, 4>> edge_features;  // shape / M, right-aligned
  std::vector<double> global_feature;                // zeros
  std::vector<int> node_ids;                         // graph node id per row
};

inline constexpr double kEdgeNormDefault = 4096.0;

GraphFeatures featurise(const CompGraph& g, double edge_norm = kEdgeNormDefault,
                        int global_dim = 64);

}  // namespace tg
