#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "test_util.hpp"
#include "tg/bench.hpp"
#include "tg/rewrite.hpp"

using namespace tg;

namespace {

CompGraph double_transpose_chain(int chains) {
  CompGraph g;
  for (int c = 0; c < chains; ++c) {
    int x = g.add_node(OpKind::Input, {{"shape", {2, 3}}});
    int t1 = g.add_node(OpKind::Transpose, {{"perm", {1, 0}}});
    g.add_edge(x, t1, 0);
    int t2 = g.add_node(OpKind::Transpose, {{"perm", {1, 0}}});
    g.add_edge(t1, t2, 0);
    int r = g.add_node(OpKind::Relu);
    g.add_edge(t2, r, 0);
    g.outputs.push_back(r);
  }
  return infer_shapes(std::move(g));
}

}  // namespace

TEST_CASE("transpose elimination match counts") {
  const auto& r = rule_by_id("transpose_elim");
  CHECK(match_rule(double_transpose_chain(1), r).size() == 1);
  CHECK(match_rule(double_transpose_chain(2), r).size() == 2);
  CompGraph no_t;
  int x = no_t.add_node(OpKind::Input, {{"shape", {2, 2}}});
  int rl = no_t.add_node(OpKind::Relu);
  no_t.add_edge(x, rl, 0);
  no_t.outputs = {rl};
  CHECK(match_rule(infer_shapes(std::move(no_t)), r).empty());
}

TEST_CASE("apply_match structural effects") {
  CompGraph g = double_transpose_chain(1);
  auto ms = match_rule(g, rule_by_id("transpose_elim"));
  REQUIRE(ms.size() == 1);
  CompGraph h = apply_match(g, ms[0]);
  CHECK(h.nodes.size() == g.nodes.size() - 2);
  CHECK(testutil::equiv_diff(g, h, 3) < 1e-12);
  // input graph unchanged
  CHECK(g.nodes.size() == 4);

  CompGraph ci = gen_benchmark("mini_squeeze");
  auto fm = match_rule(ci, rule_by_id("fuse_conv_relu"));
  REQUIRE(!fm.empty());
  CompGraph fused = apply_match(ci, fm[0]);
  CHECK(fused.nodes.size() == ci.nodes.size() - 1);
  int fused_count = 0;
  for (const auto& n : fused.nodes)
    if (n.kind == OpKind::FusedConvRelu) fused_count++;
  CHECK(fused_count == 1);
}

TEST_CASE("rule soundness spot checks via the interpreter") {
  // Each registry rule is exercised in depth by the acceptance gate; here a
  // cheap sweep over the benchmark graphs catches gross breakage.
  for (const auto& name : benchmark_names()) {
    CompGraph g = gen_benchmark(name);
    for (const auto& c : generate_candidates(g, rule_registry())) {
      double d = testutil::equiv_diff(g, c.graph, 17);
      INFO(name, " rule ", c.rule_id);
      CHECK(d < 1e-5);
    }
  }
}

TEST_CASE("candidate generation is pure, bounded, de-duplicated") {
  CompGraph g = gen_benchmark("mini_attention");
  auto a = generate_candidates(g, rule_registry());
  auto b = generate_candidates(g, rule_registry());
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].rule_id == b[i].rule_id);
    CHECK(a[i].digest == b[i].digest);
  }
  CHECK(a.size() <= kMaxCandidates);
  std::set<uint64_t> digests;
  for (const auto& c : a) CHECK(digests.insert(c.digest).second);

  // Identity(Identity(x)): removing either node leaves the same graph, so
  // the two matches de-duplicate into one candidate.
  CompGraph sym;
  int x = sym.add_node(OpKind::Input, {{"shape", {2, 3}}});
  int i1 = sym.add_node(OpKind::Identity);
  sym.add_edge(x, i1, 0);
  int i2 = sym.add_node(OpKind::Identity);
  sym.add_edge(i1, i2, 0);
  sym.outputs = {i2};
  sym = infer_shapes(std::move(sym));
  CHECK(match_rule(sym, rule_by_id("identity_elim")).size() == 2);
  int merged = 0;
  for (const auto& c : generate_candidates(sym, rule_registry()))
    if (c.rule_id == "identity_elim") merged++;
  CHECK(merged == 1);

  // Distinct weights: the two matches differ in concat order (and so in the
  // per-output split offsets); both survive as candidates.
  CompGraph asym;
  int ax = asym.add_node(OpKind::Input, {{"shape", {2, 3}}});
  int wa = asym.add_node(OpKind::Weight, {{"shape", {3, 4}}});
  int wb = asym.add_node(OpKind::Weight, {{"shape", {3, 4}}});
  int am1 = asym.add_node(OpKind::MatMul);
  asym.add_edge(ax, am1, 0);
  asym.add_edge(wa, am1, 1);
  int am2 = asym.add_node(OpKind::MatMul);
  asym.add_edge(ax, am2, 0);
  asym.add_edge(wb, am2, 1);
  asym.outputs = {am1, am2};
  asym = infer_shapes(std::move(asym));
  int merged2 = 0;
  for (const auto& c : generate_candidates(asym, rule_registry()))
    if (c.rule_id == "merge_matmul") merged2++;
  CHECK(merged2 == 2);
}

TEST_CASE("no-candidate graph and registry integrity") {
  CompGraph g;
  int x = g.add_node(OpKind::Input, {{"shape", {4}}});
  int r = g.add_node(OpKind::Relu);
  g.add_edge(x, r, 0);
  g.outputs = {r};
  CHECK(generate_candidates(infer_shapes(std::move(g)), rule_registry()).empty());

  const auto& rules = rule_registry();
  CHECK(rules.size() == 12);
  std::set<std::string> ids;
  for (const auto& r2 : rules) CHECK(ids.insert(r2.rule_id).second);
}

TEST_CASE("interior-use restriction protects outside consumers") {
  // The first Transpose's output is consumed outside the pattern, so the
  // double-transpose cannot be eliminated.
  CompGraph g;
  int x = g.add_node(OpKind::Input, {{"shape", {2, 3}}});
  int t1 = g.add_node(OpKind::Transpose, {{"perm", {1, 0}}});
  g.add_edge(x, t1, 0);
  int t2 = g.add_node(OpKind::Transpose, {{"perm", {1, 0}}});
  g.add_edge(t1, t2, 0);
  int r = g.add_node(OpKind::Relu);
  g.add_edge(t1, r, 0);
  g.outputs = {t2, r};
  g = infer_shapes(std::move(g));
  CHECK(match_rule(g, rule_by_id("transpose_elim")).empty());
}
