#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "tg/bench.hpp"
#include "tg/cost.hpp"
#include "tg/rewrite.hpp"

using namespace tg;

namespace {

CompGraph foldable_add_graph() {
  // Add(W1, W2) feeds a MatMul whose other input is live.
  CompGraph g;
  int w1 = g.add_node(OpKind::Weight, {{"shape", {3, 4}}});
  int w2 = g.add_node(OpKind::Weight, {{"shape", {3, 4}}});
  int add = g.add_node(OpKind::Add);
  g.add_edge(w1, add, 0);
  g.add_edge(w2, add, 1);
  int x = g.add_node(OpKind::Input, {{"shape", {2, 3}}});
  int mm = g.add_node(OpKind::MatMul);
  g.add_edge(x, mm, 0);
  g.add_edge(add, mm, 1);
  g.outputs = {mm};
  return infer_shapes(std::move(g));
}

}  // namespace

TEST_CASE("op_cost formula instantiation") {
  CostParams p;
  Node mm{0, OpKind::MatMul, {}};
  // [2,3] x [3,4]: work = 2*3*4 = 24 multiply-accumulates.
  CHECK(op_cost(mm, {{2, 3}, {3, 4}}, {2, 4}, p) == doctest::Approx(5.024).epsilon(1e-12));

  Node id{1, OpKind::Identity, {}};
  CHECK(op_cost(id, {{2, 3}}, {2, 3}, p) == 0.0);
  Node in{2, OpKind::Input, {{"shape", {2, 3}}}};
  CHECK(op_cost(in, {}, {2, 3}, p) == 0.0);
  Node w{3, OpKind::Weight, {{"shape", {2, 3}}}};
  CHECK(op_cost(w, {}, {2, 3}, p) == 0.0);

  Node relu{4, OpKind::Relu, {}};
  CHECK(op_cost(relu, {{10, 10}}, {10, 10}, p) ==
        doctest::Approx(5.0 + 1e-4 * 100).epsilon(1e-12));
  Node pool{5, OpKind::MaxPool, {{"kernel", {2}}, {"stride", {2}}}};
  CHECK(op_cost(pool, {{1, 4, 8, 8}}, {1, 4, 4, 4}, p) ==
        doctest::Approx(5.0 + 2e-4 * 64).epsilon(1e-12));
}

TEST_CASE("fused kinds save one launch overhead") {
  CostParams p;
  Shape x{1, 3, 8, 8}, w{4, 3, 3, 3}, out{1, 4, 6, 6};
  Node conv{0, OpKind::Conv2d, {}};
  Node relu{1, OpKind::Relu, {}};
  Node fused{2, OpKind::FusedConvRelu, {}};
  double separate = op_cost(conv, {x, w}, out, p) + op_cost(relu, {out}, out, p);
  double together = op_cost(fused, {x, w}, out, p);
  CHECK(together < separate);
  CHECK(separate - together == doctest::Approx(p.launch_overhead).epsilon(1e-9));

  Node mm{3, OpKind::MatMul, {}};
  Node add{4, OpKind::Add, {}};
  Node fma{5, OpKind::FusedMatMulAdd, {}};
  Shape a{4, 5}, b{5, 6}, o{4, 6};
  double sep = op_cost(mm, {a, b}, o, p) + op_cost(add, {o, o}, o, p);
  CHECK(op_cost(fma, {a, b, o}, o, p) ==
        doctest::Approx(sep - p.launch_overhead).epsilon(1e-9));
}

TEST_CASE("cost_model_latency is the exact per-node sum") {
  CostParams p;
  CompGraph leaves;
  leaves.add_node(OpKind::Input, {{"shape", {4, 4}}});
  leaves.add_node(OpKind::Weight, {{"shape", {4, 4}}});
  leaves = infer_shapes(std::move(leaves));
  CHECK(cost_model_latency(leaves, p) == 0.0);

  for (const auto& name : benchmark_names()) {
    CompGraph g = gen_benchmark(name);
    auto rep = cost_report(g, p);
    double sum = 0.0;
    for (const auto& [id, c] : rep.per_node) sum += c;
    CHECK(rep.cost_model_total == sum);
    CHECK(cost_model_latency(g, p) == rep.cost_model_total);
    CHECK(simulated_e2e_latency(g, p) == rep.e2e_total);
  }
}

TEST_CASE("constant folding excludes weight-only nodes from e2e") {
  CostParams p;
  CompGraph g = foldable_add_graph();
  auto rep = cost_report(g, p);
  int add_id = -1;
  for (const auto& n : g.nodes)
    if (n.kind == OpKind::Add) add_id = n.id;
  CHECK(rep.folded.count(add_id) == 1);
  CHECK(rep.e2e_total == doctest::Approx(rep.cost_model_total - rep.per_node.at(add_id)));
  CHECK(rep.e2e_total < rep.cost_model_total);

  // No weight-only subgraph: the two totals coincide.
  CompGraph flat = gen_benchmark("mini_squeeze");
  auto rf = cost_report(flat, p);
  CHECK(rf.folded.empty());
  CHECK(rf.e2e_total == rf.cost_model_total);

  CostParams off = p;
  off.fold_enabled = false;
  auto ro = cost_report(g, off);
  CHECK(ro.folded.empty());
  CHECK(ro.e2e_total == ro.cost_model_total);
}

TEST_CASE("folded set only holds weight-only nodes") {
  CostParams p;
  for (const auto& name : benchmark_names()) {
    CompGraph g = gen_benchmark(name);
    auto rep = cost_report(g, p);
    for (int id : rep.folded) {
      CHECK(g.has_node(id));
      CHECK(weight_only(g, id));
    }
    CHECK(rep.e2e_total <= rep.cost_model_total);
  }
}

TEST_CASE("a live input dependency defeats folding") {
  CostParams p;
  CompGraph g = foldable_add_graph();
  double folded_e2e = simulated_e2e_latency(g, p);

  // Same graph, but the Add now reads the live Input instead of a Weight.
  CompGraph live;
  int w1 = live.add_node(OpKind::Weight, {{"shape", {3, 4}}});
  int x2 = live.add_node(OpKind::Input, {{"shape", {3, 4}}});
  int add = live.add_node(OpKind::Add);
  live.add_edge(w1, add, 0);
  live.add_edge(x2, add, 1);
  int x = live.add_node(OpKind::Input, {{"shape", {2, 3}}});
  int mm = live.add_node(OpKind::MatMul);
  live.add_edge(x, mm, 0);
  live.add_edge(add, mm, 1);
  live.outputs = {mm};
  live = infer_shapes(std::move(live));
  CHECK(simulated_e2e_latency(live, p) > folded_e2e);
  CHECK(cost_report(live, p).folded.empty());
}

TEST_CASE("determinism and position independence") {
  CostParams p;
  CompGraph g = gen_benchmark("trap");
  auto a = cost_report(g, p);
  auto b = cost_report(g, p);
  CHECK(a.per_node == b.per_node);
  CHECK(a.cost_model_total == b.cost_model_total);
  CHECK(a.e2e_total == b.e2e_total);
  CHECK(a.folded == b.folded);

  // op_cost depends only on kind/shapes/params, not graph context.
  Node mm{42, OpKind::MatMul, {}};
  CHECK(op_cost(mm, {{2, 3}, {3, 4}}, {2, 4}, p) ==
        op_cost(Node{7, OpKind::MatMul, {}}, {{2, 3}, {3, 4}}, {2, 4}, p));
}

TEST_CASE("seeded noise is reproducible and off by default") {
  CompGraph g = gen_benchmark("trap");
  CostParams clean;
  CostParams noisy = clean;
  noisy.noise_std = 0.05;
  noisy.noise_seed = 7;
  double n1 = simulated_e2e_latency(g, noisy);
  double n2 = simulated_e2e_latency(g, noisy);
  CHECK(n1 == n2);
  CostParams other = noisy;
  other.noise_seed = 8;
  CHECK(simulated_e2e_latency(g, other) != n1);
  CHECK(simulated_e2e_latency(g, clean) == simulated_e2e_latency(g, clean));
}
