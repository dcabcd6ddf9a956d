#pragma once

#include <array>
#include <string>
#include <vector>

#include "tg/features.hpp"
#include "tg/rewrite.hpp"
#include "tg/tape.hpp"

namespace tg {

inline constexpr int kActionSpace = kMaxCandidates + 1;  // 64
inline constexpr int kNoOpSlot = kActionSpace - 1;       // last slot

// Batched featurised encoding of current graph + all candidates. Block 0
// is the current graph; blocks 1..A are candidates (candidate i sits in
// action slot i-1). The No-Op action is always valid.
struct MetaGraph {
  Tensor2D node_feat;                          // V x 17
  Tensor2D edge_feat;                          // E x 4
  std::vector<int> edge_src, edge_dst;         // indices into node rows
  std::vector<int> node_block;                 // segment id per node row
  int num_blocks = 1;
  std::array<char, kActionSpace> mask{};       // true = slot holds a candidate
  std::vector<std::string> candidate_rule_ids; // per candidate block
};

MetaGraph build_meta_graph(const CompGraph& current,
                           const std::vector<Candidate>& candidates,
                           double edge_norm);

struct PolicyOutput {
  std::array<double, kActionSpace> logits;  // masked entries -1e9
  std::array<double, kActionSpace> probs;   // masked entries exactly 0
  double value = 0.0;
};

struct PolicyConfig {
  int hidden = 64;       // encoder width d
  int gat_layers = 5;    // k
  int mlp_h1 = 256;      // MLP hidden neurons
  int mlp_h2 = 64;
};

// Three-stage encoder (edge-aware node update, k GAT layers, global
// readout) feeding per-slot policy scoring and a value head. Policy and
// value share the encoder; one backward updates everything.
class PolicyNet {
 public:
  PolicyNet(uint64_t seed, PolicyConfig cfg = {});
  explicit PolicyNet(ParamStore store, PolicyConfig cfg = {});

  struct ForwardRefs {
    Tape::Ref logits;              // K x 1, valid slots only, No-Op last
    std::vector<int> slot_of_row;  // action slot per logit row
    Tape::Ref probs;               // K x 1 masked softmax
    Tape::Ref value;               // 1 x 1
  };
  // Differentiable forward; caller owns the tape.
  ForwardRefs forward(Tape& tape, const MetaGraph& meta);

  // Convenience scored forward without retained gradients.
  PolicyOutput policy_value(const MetaGraph& meta);

  ParamStore& store() { return store_; }
  const PolicyConfig& config() const { return cfg_; }

 private:
  void build_params();
  ParamStore store_;
  PolicyConfig cfg_;
};

}  // namespace tg
