#include "tg/features.hpp"

#include <algorithm>
#include <map>

namespace tg {

GraphFeatures featurise(const CompGraph& g, double edge_norm, int global_dim) {
  GraphFeatures f;
  auto order = g.topo_order();
  std::map<int, int> row_of;
  for (size_t i = 0; i < order.size(); ++i) {
    row_of[order[i]] = static_cast<int>(i);
    std::array<double, kNumOpKinds> oh{};
    oh[static_cast<int>(g.node(order[i]).kind)] = 1.0;
    f.node_features.push_back(oh);
    f.node_ids.push_back(order[i]);
  }
  // Edges ordered by (dst row, port). Shape extents right-aligned into 4
  // slots, zeros padded to leading dimensions, then divided by edge_norm.
  std::vector<const Edge*> edges;
  for (const auto& e : g.edges) edges.push_back(&e);
  std::sort(edges.begin(), edges.end(), [&](const Edge* a, const Edge* b) {
    return std::tie(row_of.at(a->dst), a->port, row_of.at(a->src)) <
           std::tie(row_of.at(b->dst), b->port, row_of.at(b->src));
  });
  for (const Edge* e : edges) {
    const Shape& s = g.shape_of(e->src);
    std::array<double, 4> ef{};
    int off = 4 - static_cast<int>(s.size());
    for (size_t i = 0; i < s.size(); ++i)
      ef[off + i] = static_cast<double>(s[i]) / edge_norm;
    f.edge_src.push_back(row_of.at(e->src));
    f.edge_dst.push_back(row_of.at(e->dst));
    f.edge_features.push_back(ef);
  }
  f.global_feature.assign(global_dim, 0.0);
  return f;
}

}  // namespace tg
