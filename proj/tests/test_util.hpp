#pragma once

#include <random>

#include "tg/graph.hpp"
#include "tg/interp.hpp"

namespace tg::testutil {

// Seeded dense inputs for every Input/Weight node of g.
inline TensorMap make_inputs(const CompGraph& g, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TensorMap m;
  for (const auto& n : g.nodes) {
    if (n.kind != OpKind::Input && n.kind != OpKind::Weight) continue;
    TensorND t(g.shape_of(n.id));
    for (auto& x : t.data) x = u(rng);
    m[n.id] = std::move(t);
  }
  return m;
}

// Max relative output difference between two graphs under shared inputs.
// Inputs are matched positionally: the i-th Input/Weight in topological
// order of each graph receives the same tensor.
inline double equiv_diff(const CompGraph& a, const CompGraph& b, uint64_t seed) {
  auto leaves = [](const CompGraph& g) {
    std::vector<int> ids;
    for (int id : g.topo_order()) {
      OpKind k = g.node(id).kind;
      if (k == OpKind::Input || k == OpKind::Weight) ids.push_back(id);
    }
    return ids;
  };
  auto la = leaves(a), lb = leaves(b);
  TensorMap ia = make_inputs(a, seed), ib;
  for (size_t i = 0; i < lb.size() && i < la.size(); ++i) ib[lb[i]] = ia[la[i]];
  auto oa = evaluate_outputs(a, ia);
  auto ob = evaluate_outputs(b, ib);
  double worst = 0.0;
  for (size_t i = 0; i < oa.size(); ++i)
    worst = std::max(worst, max_rel_diff(oa[i], ob[i]));
  return worst;
}

}  // namespace tg::testutil
