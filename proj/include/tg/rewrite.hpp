#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tg/graph.hpp"

namespace tg {

// Source-side pattern node. kind == nullopt marks a placeholder input: it
// matches any graph node and survives the substitution.
struct PatternNode {
  int id = -1;
  std::optional<OpKind> kind;
};

struct PatternEdge {
  int src = -1;
  int dst = -1;
  int port = 0;
};

struct Pattern {
  std::vector<PatternNode> nodes;
  std::vector<PatternEdge> edges;
  std::vector<int> outputs;  // pattern node ids whose values leave the match
};

// Shape/attr access for guards and target attribute builders, resolved
// against one concrete match.
struct MatchCtx {
  const CompGraph* g = nullptr;
  const std::map<int, int>* mapping = nullptr;  // pattern id -> graph id

  int graph_id(int pattern_id) const { return mapping->at(pattern_id); }
  const Shape& shape(int pattern_id) const {
    return g->shape_of(mapping->at(pattern_id));
  }
  const Attrs& attrs(int pattern_id) const {
    return g->node(mapping->at(pattern_id)).attrs;
  }
  OpKind kind(int pattern_id) const {
    return g->node(mapping->at(pattern_id)).kind;
  }
};

// One node of the instantiated target pattern. Inputs reference either
// placeholder ids from the source or other target-local ids; order = port.
struct TargetNodeSpec {
  int id = -1;
  OpKind kind = OpKind::Identity;
  std::vector<int> inputs;
  Attrs fixed_attrs;
  std::function<Attrs(const MatchCtx&)> make_attrs;  // overrides fixed_attrs
};

struct RewriteRule {
  std::string rule_id;
  std::string description;
  Pattern source;
  std::vector<TargetNodeSpec> target_nodes;
  // Parallel to source.outputs; entries are target-local ids or placeholder
  // ids (pure passthrough, e.g. eliminations).
  std::vector<int> target_outputs;
  std::function<bool(const MatchCtx&)> guard;  // null = always applicable
};

struct Match {
  std::string rule_id;
  std::map<int, int> mapping;  // pattern node id -> graph node id, injective
  int anchor = -1;             // smallest mapped graph node id
};

struct Candidate {
  CompGraph graph;  // post-substitution, shapes re-inferred, ids relabeled
  std::string rule_id;
  int anchor = -1;
  uint64_t digest = 0;
};

inline constexpr int kMaxCandidates = 63;  // + 1 No-Op = action space 64

// The built-in registry of 12 semantically equivalent rules.
const std::vector<RewriteRule>& rule_registry();
const RewriteRule& rule_by_id(const std::string& rule_id);

// All embeddings of r.source into g satisfying the guard and the
// interior-use restriction, ordered by (anchor, mapping).
std::vector<Match> match_rule(const CompGraph& g, const RewriteRule& r);

// Substitute one match; returns a fresh graph with shapes re-inferred and
// node ids relabeled to topological order. Throws ShapeMismatch if the
// target instantiation is inconsistent (a broken rule).
CompGraph apply_match(const CompGraph& g, const Match& m);

// Union over all rules, de-duplicated by digest, truncated to max_candidates.
// Order: rule registry order, then anchor. Pure and deterministic.
std::vector<Candidate> generate_candidates(
    const CompGraph& g, const std::vector<RewriteRule>& rules,
    int max_candidates = kMaxCandidates);

// True when every transitive ancestor of id is a Weight node (and there is
// at least one); such nodes can be pre-computed before inference.
bool weight_only(const CompGraph& g, int id);

}  // namespace tg
