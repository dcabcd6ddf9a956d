#include "tg/gnn.hpp"

#include <cmath>

namespace tg {

MetaGraph build_meta_graph(const CompGraph& current,
                           const std::vector<Candidate>& candidates,
                           double edge_norm) {
  MetaGraph meta;
  meta.num_blocks = 1 + static_cast<int>(candidates.size());

  std::vector<GraphFeatures> feats;
  feats.push_back(featurise(current, edge_norm));
  for (const auto& c : candidates) feats.push_back(featurise(c.graph, edge_norm));

  int total_nodes = 0, total_edges = 0;
  for (const auto& f : feats) {
    total_nodes += static_cast<int>(f.node_features.size());
    total_edges += static_cast<int>(f.edge_features.size());
  }
  meta.node_feat = Tensor2D(total_nodes, kNumOpKinds);
  meta.edge_feat = Tensor2D(total_edges, 4);
  int nrow = 0, erow = 0;
  for (int b = 0; b < meta.num_blocks; ++b) {
    const auto& f = feats[b];
    int base = nrow;
    for (const auto& oh : f.node_features) {
      for (int j = 0; j < kNumOpKinds; ++j) meta.node_feat.at(nrow, j) = oh[j];
      meta.node_block.push_back(b);
      nrow++;
    }
    for (size_t e = 0; e < f.edge_features.size(); ++e) {
      for (int j = 0; j < 4; ++j) meta.edge_feat.at(erow, j) = f.edge_features[e][j];
      meta.edge_src.push_back(base + f.edge_src[e]);
      meta.edge_dst.push_back(base + f.edge_dst[e]);
      erow++;
    }
  }
  for (size_t i = 0; i < candidates.size(); ++i) {
    meta.mask[i] = 1;
    meta.candidate_rule_ids.push_back(candidates[i].rule_id);
  }
  meta.mask[kNoOpSlot] = 1;
  return meta;
}

PolicyNet::PolicyNet(uint64_t seed, PolicyConfig cfg)
    : store_(seed), cfg_(cfg) {
  build_params();
}

PolicyNet::PolicyNet(ParamStore store, PolicyConfig cfg)
    : store_(std::move(store)), cfg_(cfg) {
  build_params();
}

void PolicyNet::build_params() {
  int d = cfg_.hidden;
  store_.create("node_update.W", 4 + kNumOpKinds, d);
  store_.create("node_update.b", 1, d);
  for (int i = 0; i < cfg_.gat_layers; ++i) {
    store_.create("gat" + std::to_string(i) + ".W", d, d);
    store_.create("gat" + std::to_string(i) + ".a", 2 * d, 1);
  }
  store_.create("readout.U", 2 * d, d);
  store_.create("readout.b", 1, d);
  const char* heads[2] = {"policy", "value"};
  int in_dim[2] = {2 * d, d};
  for (int h = 0; h < 2; ++h) {
    std::string p = heads[h];
    store_.create(p + ".l1.W", in_dim[h], cfg_.mlp_h1);
    store_.create(p + ".l1.b", 1, cfg_.mlp_h1);
    store_.create(p + ".l2.W", cfg_.mlp_h1, cfg_.mlp_h2);
    store_.create(p + ".l2.b", 1, cfg_.mlp_h2);
    // Zero-initialised output layers: the initial policy is uniform over
    // valid actions and the initial value estimate is 0, which keeps early
    // exploration broad instead of committing to init noise. Loaded
    // checkpoints must keep their trained values.
    bool fresh = !store_.has(p + ".l3.W");
    auto& lw = store_.create(p + ".l3.W", cfg_.mlp_h2, 1);
    if (fresh) std::fill(lw.d.begin(), lw.d.end(), 0.0);
    store_.create(p + ".l3.b", 1, 1);
  }
}

PolicyNet::ForwardRefs PolicyNet::forward(Tape& t, const MetaGraph& meta) {
  int V = meta.node_feat.rows;
  int B = meta.num_blocks;
  int A = B - 1;

  auto X = t.constant(meta.node_feat);
  auto E = t.constant(meta.edge_feat);

  // Edge-aware node update: h_i = relu(W (sum of incoming e_j || x_i) + b).
  // Nodes with no incoming edges get a zero edge-sum.
  auto esum = t.segment_sum(E, meta.edge_dst, V);
  auto h = t.relu(t.add_rowbcast(
      t.matmul(t.concat_cols(esum, X), t.param(store_, "node_update.W")),
      t.param(store_, "node_update.b")));

  // k GAT layers over in-neighbours plus self-loops; message passing never
  // crosses block boundaries (edges are intra-block by construction).
  std::vector<int> srcs = meta.edge_src, dsts = meta.edge_dst;
  for (int i = 0; i < V; ++i) {
    srcs.push_back(i);
    dsts.push_back(i);
  }
  for (int l = 0; l < cfg_.gat_layers; ++l) {
    std::string p = "gat" + std::to_string(l);
    auto Wh = t.matmul(h, t.param(store_, p + ".W"));
    auto hs = t.gather_rows(Wh, srcs);
    auto hd = t.gather_rows(Wh, dsts);
    auto score = t.leaky_relu(
        t.matmul(t.concat_cols(hs, hd), t.param(store_, p + ".a")), 0.2);
    auto alpha = t.softmax_per_segment(score, dsts, V);
    h = t.relu(t.segment_sum(t.mul_colbcast(hs, alpha), dsts, V));
  }

  // Global readout: g_b = relu(U (sum of block nodes || g0) + b), g0 = 0.
  auto hsum = t.segment_sum(h, meta.node_block, B);
  auto gb = t.relu(t.add_rowbcast(
      t.matmul(t.concat_cols(hsum, t.constant(Tensor2D(B, cfg_.hidden))),
               t.param(store_, "readout.U")),
      t.param(store_, "readout.b")));

  // Per-slot policy scoring: candidate rows (g_i || g_0), No-Op (g_0 || g_0).
  std::vector<int> cand_rows, zero_rows;
  for (int i = 1; i <= A; ++i) {
    cand_rows.push_back(i);
    zero_rows.push_back(0);
  }
  cand_rows.push_back(0);
  zero_rows.push_back(0);
  auto z = t.concat_cols(t.gather_rows(gb, cand_rows), t.gather_rows(gb, zero_rows));

  auto mlp = [&](Tape::Ref in, const std::string& p) {
    auto h1 = t.relu(t.add_rowbcast(t.matmul(in, t.param(store_, p + ".l1.W")),
                                    t.param(store_, p + ".l1.b")));
    auto h2 = t.relu(t.add_rowbcast(t.matmul(h1, t.param(store_, p + ".l2.W")),
                                    t.param(store_, p + ".l2.b")));
    return t.add_rowbcast(t.matmul(h2, t.param(store_, p + ".l3.W")),
                          t.param(store_, p + ".l3.b"));
  };

  ForwardRefs out;
  out.logits = mlp(z, "policy");
  out.probs = t.softmax_per_segment(out.logits, std::vector<int>(A + 1, 0), 1);
  out.value = mlp(t.gather_rows(gb, {0}), "value");
  for (int i = 0; i < A; ++i) out.slot_of_row.push_back(i);
  out.slot_of_row.push_back(kNoOpSlot);
  return out;
}

PolicyOutput PolicyNet::policy_value(const MetaGraph& meta) {
  Tape t;
  auto refs = forward(t, meta);
  PolicyOutput out;
  out.logits.fill(-1e9);
  out.probs.fill(0.0);
  for (size_t i = 0; i < refs.slot_of_row.size(); ++i) {
    out.logits[refs.slot_of_row[i]] = t.val(refs.logits).d[i];
    out.probs[refs.slot_of_row[i]] = t.val(refs.probs).d[i];
  }
  out.value = t.scalar(refs.value);
  return out;
}

}  // namespace tg
