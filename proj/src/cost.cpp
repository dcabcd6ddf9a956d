#include "tg/cost.hpp"

#include <random>

#include "tg/rewrite.hpp"

namespace tg {

double op_cost(const Node& n, const std::vector<Shape>& in_shapes,
               const Shape& out_shape, const CostParams& p) {
  double out_elems = static_cast<double>(numel(out_shape));
  double work = 0.0;
  switch (n.kind) {
    case OpKind::Input:
    case OpKind::Weight:
    case OpKind::Identity:
      return 0.0;
    case OpKind::MatMul:
      work = p.c_mm * static_cast<double>(in_shapes[0][0]) * in_shapes[0][1] *
             in_shapes[1][1];
      break;
    case OpKind::Conv2d:
      work = p.c_conv * out_elems * in_shapes[1][1] * in_shapes[1][2] *
             in_shapes[1][3];
      break;
    case OpKind::FusedConvRelu:
      work = p.c_conv * out_elems * in_shapes[1][1] * in_shapes[1][2] *
                 in_shapes[1][3] +
             p.c_elem * out_elems;
      break;
    case OpKind::FusedMatMulAdd:
      work = p.c_mm * static_cast<double>(in_shapes[0][0]) * in_shapes[0][1] *
                 in_shapes[1][1] +
             p.c_elem * out_elems;
      break;
    case OpKind::BatchNorm:
      work = 2.0 * p.c_elem * out_elems;  // scale + shift
      break;
    case OpKind::MaxPool:
      work = p.c_pool * out_elems;
      break;
    case OpKind::Relu:
    case OpKind::Add:
    case OpKind::Mul:
    case OpKind::Concat:
    case OpKind::Split:
    case OpKind::Transpose:
    case OpKind::Reshape:
    case OpKind::Enlarge:
      work = p.c_elem * out_elems;
      break;
  }
  return p.launch_overhead + work;
}

CostReport cost_report(const CompGraph& g, const CostParams& p) {
  CostReport r;
  std::mt19937_64 rng(p.noise_seed);
  std::normal_distribution<double> noise(0.0, p.noise_std);
  for (int id : g.topo_order()) {
    const Node& n = g.node(id);
    std::vector<Shape> in;
    for (const Edge* e : g.in_edges(id)) in.push_back(g.shape_of(e->src));
    double c = op_cost(n, in, g.shape_of(id), p);
    if (p.noise_std > 0.0 && c > 0.0) c *= std::max(0.0, 1.0 + noise(rng));
    r.per_node[id] = c;
    r.cost_model_total += c;
    if (p.fold_enabled && n.kind != OpKind::Input && n.kind != OpKind::Weight &&
        weight_only(g, id))
      r.folded.insert(id);
  }
  r.e2e_total = r.cost_model_total;
  for (int id : r.folded) r.e2e_total -= r.per_node.at(id);
  return r;
}

double cost_model_latency(const CompGraph& g, const CostParams& p) {
  return cost_report(g, p).cost_model_total;
}

double simulated_e2e_latency(const CompGraph& g, const CostParams& p) {
  return cost_report(g, p).e2e_total;
}

}  // namespace tg
