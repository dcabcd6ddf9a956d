#include "tg/bench.hpp"

#include <cmath>

namespace tg {

namespace {

int scaled(int base, double s) {
  return std::max(1, static_cast<int>(std::lround(base * s)));
}

// Reaching the optimum requires matmul re-association (cost-increasing at
// the training shape) before the weight side can be factored and folded;
// greedy takes the locally improving fusion instead and gets stuck.
CompGraph gen_trap(double s) {
  int m = scaled(32, s), k = scaled(32, s), n = scaled(32, s), a = scaled(4, s);
  CompGraph g;
  int x = g.add_node(OpKind::Input, {{"shape", {m, k}}});
  int w1 = g.add_node(OpKind::Weight, {{"shape", {k, a}}});
  int w2 = g.add_node(OpKind::Weight, {{"shape", {a, n}}});
  int w3 = g.add_node(OpKind::Weight, {{"shape", {k, n}}});
  int mm1 = g.add_node(OpKind::MatMul);
  g.add_edge(x, mm1, 0);
  g.add_edge(w1, mm1, 1);
  int mm2 = g.add_node(OpKind::MatMul);
  g.add_edge(mm1, mm2, 0);
  g.add_edge(w2, mm2, 1);
  int mm3 = g.add_node(OpKind::MatMul);
  g.add_edge(x, mm3, 0);
  g.add_edge(w3, mm3, 1);
  int add = g.add_node(OpKind::Add);
  g.add_edge(mm2, add, 0);
  g.add_edge(mm3, add, 1);
  g.outputs = {add};
  return g;
}

// One two-head attention-style block: MatMul/Transpose/Concat/Add heavy,
// few applicable rules but long transformation sequences.
CompGraph gen_mini_attention(double s) {
  int seq = scaled(8, s), dm = 2 * scaled(4, s), dh = scaled(4, s);
  CompGraph g;
  int x = g.add_node(OpKind::Input, {{"shape", {seq, dm}}});
  std::vector<int> head_out;
  for (int h = 0; h < 2; ++h) {
    int wq = g.add_node(OpKind::Weight, {{"shape", {dm, dh}}});
    int wk = g.add_node(OpKind::Weight, {{"shape", {dm, dh}}});
    int wv = g.add_node(OpKind::Weight, {{"shape", {dm, dh}}});
    int q = g.add_node(OpKind::MatMul);
    g.add_edge(x, q, 0);
    g.add_edge(wq, q, 1);
    int kk = g.add_node(OpKind::MatMul);
    g.add_edge(x, kk, 0);
    g.add_edge(wk, kk, 1);
    int v = g.add_node(OpKind::MatMul);
    g.add_edge(x, v, 0);
    g.add_edge(wv, v, 1);
    int kt = g.add_node(OpKind::Transpose, {{"perm", {1, 0}}});
    g.add_edge(kk, kt, 0);
    int score = g.add_node(OpKind::MatMul);
    g.add_edge(q, score, 0);
    g.add_edge(kt, score, 1);
    int out = g.add_node(OpKind::MatMul);
    g.add_edge(score, out, 0);
    g.add_edge(v, out, 1);
    head_out.push_back(out);
  }
  int cat = g.add_node(OpKind::Concat, {{"axis", {1}}});
  g.add_edge(head_out[0], cat, 0);
  g.add_edge(head_out[1], cat, 1);
  int wo = g.add_node(OpKind::Weight, {{"shape", {dm, dm}}});
  int proj = g.add_node(OpKind::MatMul);
  g.add_edge(cat, proj, 0);
  g.add_edge(wo, proj, 1);
  int wb = g.add_node(OpKind::Weight, {{"shape", {seq, dm}}});
  int addb = g.add_node(OpKind::Add);
  g.add_edge(proj, addb, 0);
  g.add_edge(wb, addb, 1);
  int res = g.add_node(OpKind::Add);
  g.add_edge(addb, res, 0);
  g.add_edge(x, res, 1);
  g.outputs = {res};
  return g;
}

// Two parallel conv branches (one with an inference-form BatchNorm) into a
// channel Concat and a pool.
CompGraph gen_mini_inception(double s) {
  int hw = scaled(8, s);
  CompGraph g;
  int x = g.add_node(OpKind::Input, {{"shape", {1, 4, hw, hw}}});
  int wc1 = g.add_node(OpKind::Weight, {{"shape", {8, 4, 3, 3}}});
  int c1 = g.add_node(OpKind::Conv2d, {{"stride", {1}}, {"pad", {1}}});
  g.add_edge(x, c1, 0);
  g.add_edge(wc1, c1, 1);
  int bn_s = g.add_node(OpKind::Weight, {{"shape", {8}}});
  int bn_t = g.add_node(OpKind::Weight, {{"shape", {8}}});
  int bn = g.add_node(OpKind::BatchNorm);
  g.add_edge(c1, bn, 0);
  g.add_edge(bn_s, bn, 1);
  g.add_edge(bn_t, bn, 2);
  int r1 = g.add_node(OpKind::Relu);
  g.add_edge(bn, r1, 0);
  int wc2 = g.add_node(OpKind::Weight, {{"shape", {8, 4, 3, 3}}});
  int c2 = g.add_node(OpKind::Conv2d, {{"stride", {1}}, {"pad", {1}}});
  g.add_edge(x, c2, 0);
  g.add_edge(wc2, c2, 1);
  int r2 = g.add_node(OpKind::Relu);
  g.add_edge(c2, r2, 0);
  int cat = g.add_node(OpKind::Concat, {{"axis", {1}}});
  g.add_edge(r1, cat, 0);
  g.add_edge(r2, cat, 1);
  int pool = g.add_node(OpKind::MaxPool, {{"kernel", {2}}, {"stride", {2}}});
  g.add_edge(cat, pool, 0);
  g.outputs = {pool};
  return g;
}

// Squeeze conv into two expand convs of different kernel sizes.
CompGraph gen_mini_squeeze(double s) {
  int hw = scaled(8, s);
  CompGraph g;
  int x = g.add_node(OpKind::Input, {{"shape", {1, 8, hw, hw}}});
  int ws = g.add_node(OpKind::Weight, {{"shape", {4, 8, 1, 1}}});
  int cs = g.add_node(OpKind::Conv2d);
  g.add_edge(x, cs, 0);
  g.add_edge(ws, cs, 1);
  int rs = g.add_node(OpKind::Relu);
  g.add_edge(cs, rs, 0);
  int we1 = g.add_node(OpKind::Weight, {{"shape", {8, 4, 1, 1}}});
  int ce1 = g.add_node(OpKind::Conv2d);
  g.add_edge(rs, ce1, 0);
  g.add_edge(we1, ce1, 1);
  int re1 = g.add_node(OpKind::Relu);
  g.add_edge(ce1, re1, 0);
  int we3 = g.add_node(OpKind::Weight, {{"shape", {8, 4, 3, 3}}});
  int ce3 = g.add_node(OpKind::Conv2d, {{"pad", {1}}});
  g.add_edge(rs, ce3, 0);
  g.add_edge(we3, ce3, 1);
  int re3 = g.add_node(OpKind::Relu);
  g.add_edge(ce3, re3, 0);
  int cat = g.add_node(OpKind::Concat, {{"axis", {1}}});
  g.add_edge(re1, cat, 0);
  g.add_edge(re3, cat, 1);
  g.outputs = {cat};
  return g;
}

}  // namespace

const std::vector<std::string>& benchmark_names() {
  static const std::vector<std::string> names = {"trap", "mini_attention",
                                                 "mini_inception", "mini_squeeze"};
  return names;
}

CompGraph gen_benchmark(const std::string& name, double scale) {
  CompGraph g;
  if (name == "trap")
    g = gen_trap(scale);
  else if (name == "mini_attention")
    g = gen_mini_attention(scale);
  else if (name == "mini_inception")
    g = gen_mini_inception(scale);
  else if (name == "mini_squeeze")
    g = gen_mini_squeeze(scale);
  else
    throw UnknownBenchmark("unknown benchmark '" + name + "'");
  return relabel_topo(infer_shapes(std::move(g)));
}

}  // namespace tg
