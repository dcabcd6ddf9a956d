#include "tg/rewrite.hpp"

#include <algorithm>
#include <set>

namespace tg {

bool weight_only(const CompGraph& g, int id) {
  const Node& n = g.node(id);
  if (n.kind == OpKind::Weight) return true;
  if (n.kind == OpKind::Input) return false;
  auto ins = g.in_edges(id);
  if (ins.empty()) return false;
  for (const Edge* e : ins)
    if (!weight_only(g, e->src)) return false;
  return true;
}

namespace {

Attrs scalar_attrs(std::initializer_list<std::pair<const char*, int>> kv) {
  Attrs a;
  for (auto& [k, v] : kv) a[k] = {v};
  return a;
}

std::function<Attrs(const MatchCtx&)> copy_attrs_of(int pattern_id) {
  return [pattern_id](const MatchCtx& c) { return c.attrs(pattern_id); };
}

std::vector<RewriteRule> build_registry() {
  std::vector<RewriteRule> rules;

  // 1. Transpose of its own inverse cancels.
  {
    RewriteRule r;
    r.rule_id = "transpose_elim";
    r.description = "Transpose(Transpose(x)) with inverse perms -> x";
    r.source.nodes = {{100, std::nullopt}, {0, OpKind::Transpose}, {1, OpKind::Transpose}};
    r.source.edges = {{100, 0, 0}, {0, 1, 0}};
    r.source.outputs = {1};
    r.target_outputs = {100};
    r.guard = [](const MatchCtx& c) {
      const auto& p1 = attr_seq(c.attrs(0), "perm");
      const auto& p2 = attr_seq(c.attrs(1), "perm");
      if (p1.size() != p2.size()) return false;
      for (size_t i = 0; i < p2.size(); ++i)
        if (p1[p2[i]] != static_cast<int>(i)) return false;
      return true;
    };
    rules.push_back(std::move(r));
  }

  // 2. (A*B)*C -> A*(B*C)
  {
    RewriteRule r;
    r.rule_id = "matmul_assoc_lr";
    r.description = "MatMul associativity, left-nested to right-nested";
    r.source.nodes = {{100, std::nullopt}, {101, std::nullopt}, {102, std::nullopt},
                      {0, OpKind::MatMul}, {1, OpKind::MatMul}};
    r.source.edges = {{100, 0, 0}, {101, 0, 1}, {0, 1, 0}, {102, 1, 1}};
    r.source.outputs = {1};
    r.target_nodes = {{200, OpKind::MatMul, {101, 102}, {}, nullptr},
                      {201, OpKind::MatMul, {100, 200}, {}, nullptr}};
    r.target_outputs = {201};
    rules.push_back(std::move(r));
  }

  // 3. A*(B*C) -> (A*B)*C
  {
    RewriteRule r;
    r.rule_id = "matmul_assoc_rl";
    r.description = "MatMul associativity, right-nested to left-nested";
    r.source.nodes = {{100, std::nullopt}, {101, std::nullopt}, {102, std::nullopt},
                      {0, OpKind::MatMul}, {1, OpKind::MatMul}};
    r.source.edges = {{101, 0, 0}, {102, 0, 1}, {100, 1, 0}, {0, 1, 1}};
    r.source.outputs = {1};
    r.target_nodes = {{200, OpKind::MatMul, {100, 101}, {}, nullptr},
                      {201, OpKind::MatMul, {200, 102}, {}, nullptr}};
    r.target_outputs = {201};
    rules.push_back(std::move(r));
  }

  // 4. Conv2d + Relu -> FusedConvRelu
  {
    RewriteRule r;
    r.rule_id = "fuse_conv_relu";
    r.description = "fuse Conv2d followed by Relu into one kernel";
    r.source.nodes = {{100, std::nullopt}, {101, std::nullopt},
                      {0, OpKind::Conv2d}, {1, OpKind::Relu}};
    r.source.edges = {{100, 0, 0}, {101, 0, 1}, {0, 1, 0}};
    r.source.outputs = {1};
    r.target_nodes = {{200, OpKind::FusedConvRelu, {100, 101}, {}, copy_attrs_of(0)}};
    r.target_outputs = {200};
    rules.push_back(std::move(r));
  }

  // 5. MatMul + Add(bias) -> FusedMatMulAdd
  {
    RewriteRule r;
    r.rule_id = "fuse_matmul_add";
    r.description = "fuse MatMul followed by Add into one kernel";
    r.source.nodes = {{100, std::nullopt}, {101, std::nullopt}, {102, std::nullopt},
                      {0, OpKind::MatMul}, {1, OpKind::Add}};
    r.source.edges = {{100, 0, 0}, {101, 0, 1}, {0, 1, 0}, {102, 1, 1}};
    r.source.outputs = {1};
    // The fused kernel treats the added operand as a bias, so it must be a
    // constant (a Weight or computed only from Weights), not live data.
    r.guard = [](const MatchCtx& c) {
      if (has_attr(c.attrs(1), "bcast")) return false;
      return c.kind(102) == OpKind::Weight || weight_only(*c.g, c.graph_id(102));
    };
    r.target_nodes = {{200, OpKind::FusedMatMulAdd, {100, 101, 102}, {}, nullptr}};
    r.target_outputs = {200};
    rules.push_back(std::move(r));
  }

  // 6. Two MatMuls sharing an input -> one MatMul over concatenated weights.
  {
    RewriteRule r;
    r.rule_id = "merge_matmul";
    r.description = "merge MatMuls sharing an input into Concat weights + Split";
    r.source.nodes = {{100, std::nullopt}, {101, std::nullopt}, {102, std::nullopt},
                      {0, OpKind::MatMul}, {1, OpKind::MatMul}};
    r.source.edges = {{100, 0, 0}, {101, 0, 1}, {100, 1, 0}, {102, 1, 1}};
    r.source.outputs = {0, 1};
    r.guard = [](const MatchCtx& c) {
      return c.kind(101) == OpKind::Weight && c.kind(102) == OpKind::Weight;
    };
    r.target_nodes = {
        {200, OpKind::Concat, {101, 102}, scalar_attrs({{"axis", 1}}), nullptr},
        {201, OpKind::MatMul, {100, 200}, {}, nullptr},
        {202, OpKind::Split, {201}, {},
         [](const MatchCtx& c) {
           return scalar_attrs({{"axis", 1}, {"offset", 0}, {"length", c.shape(101)[1]}});
         }},
        {203, OpKind::Split, {201}, {},
         [](const MatchCtx& c) {
           return scalar_attrs({{"axis", 1}, {"offset", c.shape(101)[1]},
                                {"length", c.shape(102)[1]}});
         }}};
    r.target_outputs = {202, 203};
    rules.push_back(std::move(r));
  }

  // 7. Inverse of 6.
  {
    RewriteRule r;
    r.rule_id = "split_matmul";
    r.description = "split a MatMul over concatenated weights into two MatMuls";
    r.source.nodes = {{100, std::nullopt}, {101, std::nullopt}, {102, std::nullopt},
                      {0, OpKind::Concat}, {1, OpKind::MatMul},
                      {2, OpKind::Split}, {3, OpKind::Split}};
    r.source.edges = {{101, 0, 0}, {102, 0, 1}, {100, 1, 0}, {0, 1, 1},
                      {1, 2, 0}, {1, 3, 0}};
    r.source.outputs = {2, 3};
    r.guard = [](const MatchCtx& c) {
      if (attr_scalar(c.attrs(0), "axis") != 1) return false;
      int na = c.shape(101)[1], nb = c.shape(102)[1];
      return attr_scalar(c.attrs(2), "axis") == 1 &&
             attr_scalar(c.attrs(2), "offset") == 0 &&
             attr_scalar(c.attrs(2), "length") == na &&
             attr_scalar(c.attrs(3), "axis") == 1 &&
             attr_scalar(c.attrs(3), "offset") == na &&
             attr_scalar(c.attrs(3), "length") == nb;
    };
    r.target_nodes = {{200, OpKind::MatMul, {100, 101}, {}, nullptr},
                      {201, OpKind::MatMul, {100, 102}, {}, nullptr}};
    r.target_outputs = {200, 201};
    rules.push_back(std::move(r));
  }

  // 8. X*W1 + X*W2 -> X*(W1+W2) when the weight sides are constant-derivable.
  {
    RewriteRule r;
    r.rule_id = "factor_matmul_add";
    r.description = "factor shared MatMul input out of an Add of two MatMuls";
    r.source.nodes = {{100, std::nullopt}, {101, std::nullopt}, {102, std::nullopt},
                      {0, OpKind::MatMul}, {1, OpKind::MatMul}, {2, OpKind::Add}};
    r.source.edges = {{100, 0, 0}, {101, 0, 1}, {100, 1, 0}, {102, 1, 1},
                      {0, 2, 0}, {1, 2, 1}};
    r.source.outputs = {2};
    r.guard = [](const MatchCtx& c) {
      return !has_attr(c.attrs(2), "bcast") &&
             weight_only(*c.g, c.graph_id(101)) &&
             weight_only(*c.g, c.graph_id(102));
    };
    r.target_nodes = {{200, OpKind::Add, {101, 102}, {}, nullptr},
                      {201, OpKind::MatMul, {100, 200}, {}, nullptr}};
    r.target_outputs = {201};
    rules.push_back(std::move(r));
  }

  // 9. BatchNorm after Conv2d folds into the conv weights (plus a bias add).
  {
    RewriteRule r;
    r.rule_id = "fold_batchnorm";
    r.description = "fold BatchNorm into preceding Conv2d weights";
    r.source.nodes = {{100, std::nullopt}, {101, std::nullopt}, {102, std::nullopt},
                      {103, std::nullopt}, {0, OpKind::Conv2d}, {1, OpKind::BatchNorm}};
    r.source.edges = {{100, 0, 0}, {101, 0, 1}, {0, 1, 0}, {102, 1, 1}, {103, 1, 2}};
    r.source.outputs = {1};
    r.target_nodes = {
        {200, OpKind::Mul, {101, 102}, scalar_attrs({{"bcast", 0}}), nullptr},
        {201, OpKind::Conv2d, {100, 200}, {}, copy_attrs_of(0)},
        {202, OpKind::Add, {201, 103}, scalar_attrs({{"bcast", 1}}), nullptr}};
    r.target_outputs = {202};
    rules.push_back(std::move(r));
  }

  // 10. Two same-geometry Conv2ds sharing input -> one wider conv + Split.
  {
    RewriteRule r;
    r.rule_id = "merge_conv";
    r.description = "merge Conv2ds sharing an input into one wider Conv2d + Split";
    r.source.nodes = {{100, std::nullopt}, {101, std::nullopt}, {102, std::nullopt},
                      {0, OpKind::Conv2d}, {1, OpKind::Conv2d}};
    r.source.edges = {{100, 0, 0}, {101, 0, 1}, {100, 1, 0}, {102, 1, 1}};
    r.source.outputs = {0, 1};
    r.guard = [](const MatchCtx& c) {
      if (c.kind(101) != OpKind::Weight || c.kind(102) != OpKind::Weight)
        return false;
      const Shape &wa = c.shape(101), &wb = c.shape(102);
      return wa[2] == wb[2] && wa[3] == wb[3] &&
             attr_scalar_or(c.attrs(0), "stride", 1) ==
                 attr_scalar_or(c.attrs(1), "stride", 1) &&
             attr_scalar_or(c.attrs(0), "pad", 0) ==
                 attr_scalar_or(c.attrs(1), "pad", 0);
    };
    r.target_nodes = {
        {200, OpKind::Concat, {101, 102}, scalar_attrs({{"axis", 0}}), nullptr},
        {201, OpKind::Conv2d, {100, 200}, {}, copy_attrs_of(0)},
        {202, OpKind::Split, {201}, {},
         [](const MatchCtx& c) {
           return scalar_attrs({{"axis", 1}, {"offset", 0}, {"length", c.shape(101)[0]}});
         }},
        {203, OpKind::Split, {201}, {},
         [](const MatchCtx& c) {
           return scalar_attrs({{"axis", 1}, {"offset", c.shape(101)[0]},
                                {"length", c.shape(102)[0]}});
         }}};
    r.target_outputs = {202, 203};
    rules.push_back(std::move(r));
  }

  // 11. A.W + B.W -> (A+B).W, the inverse of distributing Mul over Add.
  {
    RewriteRule r;
    r.rule_id = "factor_mul_add";
    r.description = "factor a shared weight Mul out of an Add";
    r.source.nodes = {{100, std::nullopt}, {101, std::nullopt}, {102, std::nullopt},
                      {0, OpKind::Mul}, {1, OpKind::Mul}, {2, OpKind::Add}};
    r.source.edges = {{100, 0, 0}, {102, 0, 1}, {101, 1, 0}, {102, 1, 1},
                      {0, 2, 0}, {1, 2, 1}};
    r.source.outputs = {2};
    r.guard = [](const MatchCtx& c) {
      return c.kind(102) == OpKind::Weight && !has_attr(c.attrs(0), "bcast") &&
             !has_attr(c.attrs(1), "bcast") && !has_attr(c.attrs(2), "bcast");
    };
    r.target_nodes = {{200, OpKind::Add, {100, 101}, {}, nullptr},
                      {201, OpKind::Mul, {200, 102}, {}, nullptr}};
    r.target_outputs = {201};
    rules.push_back(std::move(r));
  }

  // 12. Identity(x) -> x
  {
    RewriteRule r;
    r.rule_id = "identity_elim";
    r.description = "remove Identity nodes";
    r.source.nodes = {{100, std::nullopt}, {0, OpKind::Identity}};
    r.source.edges = {{100, 0, 0}};
    r.source.outputs = {0};
    r.target_outputs = {100};
    rules.push_back(std::move(r));
  }

  return rules;
}

}  // namespace

const std::vector<RewriteRule>& rule_registry() {
  static const std::vector<RewriteRule> registry = build_registry();
  return registry;
}

const RewriteRule& rule_by_id(const std::string& rule_id) {
  for (const auto& r : rule_registry())
    if (r.rule_id == rule_id) return r;
  throw InvalidGraph("unknown rule '" + rule_id + "'");
}

namespace {

struct Matcher {
  const CompGraph& g;
  const RewriteRule& rule;
  std::vector<int> concrete;  // pattern ids in assignment order
  std::map<int, int> mapping;
  std::set<int> used;
  std::vector<Match> results;

  Matcher(const CompGraph& graph, const RewriteRule& r) : g(graph), rule(r) {
    std::map<OpKind, int> freq;
    for (const auto& n : g.nodes) freq[n.kind]++;
    for (const auto& pn : rule.source.nodes)
      if (pn.kind) concrete.push_back(pn.id);
    // Seed the search on the rarest OpKind in the pattern.
    std::sort(concrete.begin(), concrete.end(), [&](int a, int b) {
      OpKind ka = *pattern_node(a).kind, kb = *pattern_node(b).kind;
      return std::tie(freq[ka], a) < std::tie(freq[kb], b);
    });
  }

  const PatternNode& pattern_node(int id) const {
    for (const auto& pn : rule.source.nodes)
      if (pn.id == id) return pn;
    throw InvalidGraph("bad pattern node id");
  }

  bool is_placeholder(int pid) const { return !pattern_node(pid).kind; }

  bool edges_consistent(int pid, int gid, std::vector<int>& newly_bound) {
    for (const auto& pe : rule.source.edges) {
      if (pe.dst == pid) {
        // Graph node must have an in-edge at this port; bind or check src.
        const Edge* ge = nullptr;
        for (const Edge* e : g.in_edges(gid))
          if (e->port == pe.port) ge = e;
        if (!ge) return false;
        auto it = mapping.find(pe.src);
        if (it != mapping.end()) {
          if (it->second != ge->src) return false;
        } else if (is_placeholder(pe.src)) {
          if (used.count(ge->src)) return false;
          mapping[pe.src] = ge->src;
          used.insert(ge->src);
          newly_bound.push_back(pe.src);
        }
        // Unassigned concrete src: deferred until it is assigned.
      } else if (pe.src == pid) {
        auto it = mapping.find(pe.dst);
        if (it == mapping.end()) continue;
        bool found = false;
        for (const Edge* e : g.in_edges(it->second))
          if (e->port == pe.port && e->src == gid) found = true;
        if (!found) return false;
      }
    }
    return true;
  }

  bool interior_use_ok() const {
    std::set<int> outs(rule.source.outputs.begin(), rule.source.outputs.end());
    std::set<int> graph_outs(g.outputs.begin(), g.outputs.end());
    for (const auto& pn : rule.source.nodes) {
      if (!pn.kind || outs.count(pn.id)) continue;
      int gid = mapping.at(pn.id);
      if (graph_outs.count(gid)) return false;
      for (const Edge* e : g.out_edges(gid)) {
        bool covered = false;
        for (const auto& pe : rule.source.edges)
          if (pe.src == pn.id && pe.port == e->port &&
              mapping.count(pe.dst) && mapping.at(pe.dst) == e->dst)
            covered = true;
        if (!covered) return false;
      }
    }
    return true;
  }

  void search(size_t depth) {
    if (depth == concrete.size()) {
      // All placeholders must have been bound through pattern edges.
      for (const auto& pn : rule.source.nodes)
        if (!mapping.count(pn.id)) return;
      if (!interior_use_ok()) return;
      MatchCtx ctx{&g, &mapping};
      if (rule.guard && !rule.guard(ctx)) return;
      Match m;
      m.rule_id = rule.rule_id;
      m.mapping = mapping;
      m.anchor = g.nodes.size() ? mapping.begin()->second : -1;
      for (auto& [p, gid] : mapping) m.anchor = std::min(m.anchor, gid);
      results.push_back(std::move(m));
      return;
    }
    int pid = concrete[depth];
    OpKind want = *pattern_node(pid).kind;
    std::vector<int> ids;
    for (const auto& n : g.nodes)
      if (n.kind == want) ids.push_back(n.id);
    std::sort(ids.begin(), ids.end());
    for (int gid : ids) {
      if (used.count(gid)) continue;
      std::vector<int> bound;
      mapping[pid] = gid;
      used.insert(gid);
      if (edges_consistent(pid, gid, bound)) search(depth + 1);
      for (int b : bound) {
        used.erase(mapping.at(b));
        mapping.erase(b);
      }
      mapping.erase(pid);
      used.erase(gid);
    }
  }
};

}  // namespace

std::vector<Match> match_rule(const CompGraph& g, const RewriteRule& r) {
  Matcher m(g, r);
  m.search(0);
  std::sort(m.results.begin(), m.results.end(), [](const Match& a, const Match& b) {
    if (a.anchor != b.anchor) return a.anchor < b.anchor;
    return std::lexicographical_compare(
        a.mapping.begin(), a.mapping.end(), b.mapping.begin(), b.mapping.end());
  });
  return m.results;
}

CompGraph apply_match(const CompGraph& g, const Match& m) {
  const RewriteRule& rule = rule_by_id(m.rule_id);
  MatchCtx ctx{&g, &m.mapping};

  std::set<int> removed;
  for (const auto& pn : rule.source.nodes)
    if (pn.kind) removed.insert(m.mapping.at(pn.id));

  CompGraph out;
  for (const auto& n : g.nodes)
    if (!removed.count(n.id)) out.nodes.push_back(n);
  for (const auto& e : g.edges)
    if (!removed.count(e.src) && !removed.count(e.dst)) out.edges.push_back(e);

  // Instantiate target nodes with fresh ids.
  int next_id = g.max_node_id() + 1;
  std::map<int, int> fresh;
  for (const auto& t : rule.target_nodes) {
    Attrs attrs = t.make_attrs ? t.make_attrs(ctx) : t.fixed_attrs;
    fresh[t.id] = next_id;
    out.nodes.push_back(Node{next_id, t.kind, std::move(attrs)});
    next_id++;
  }
  auto resolve = [&](int id) -> int {
    auto it = fresh.find(id);
    if (it != fresh.end()) return it->second;
    return m.mapping.at(id);  // placeholder passthrough
  };
  for (const auto& t : rule.target_nodes)
    for (size_t p = 0; p < t.inputs.size(); ++p)
      out.add_edge(resolve(t.inputs[p]), fresh.at(t.id), static_cast<int>(p));

  // Reconnect consumers of the replaced pattern outputs.
  for (size_t i = 0; i < rule.source.outputs.size(); ++i) {
    int old_id = m.mapping.at(rule.source.outputs[i]);
    int new_id = resolve(rule.target_outputs[i]);
    for (const auto& e : g.edges)
      if (e.src == old_id && !removed.count(e.dst))
        out.add_edge(new_id, e.dst, e.port);
  }
  for (int o : g.outputs) {
    int rep = o;
    for (size_t i = 0; i < rule.source.outputs.size(); ++i)
      if (m.mapping.at(rule.source.outputs[i]) == o)
        rep = resolve(rule.target_outputs[i]);
    out.outputs.push_back(rep);
  }

  return relabel_topo(infer_shapes(std::move(out)));
}

std::vector<Candidate> generate_candidates(const CompGraph& g,
                                           const std::vector<RewriteRule>& rules,
                                           int max_candidates) {
  std::vector<Candidate> cands;
  std::set<uint64_t> seen;
  for (const auto& r : rules) {
    for (const auto& m : match_rule(g, r)) {
      if (static_cast<int>(cands.size()) >= max_candidates) return cands;
      Candidate c;
      c.graph = apply_match(g, m);
      c.rule_id = r.rule_id;
      c.anchor = m.anchor;
      c.digest = canonical_hash(c.graph);
      if (seen.insert(c.digest).second) cands.push_back(std::move(c));
    }
  }
  return cands;
}

}  // namespace tg
