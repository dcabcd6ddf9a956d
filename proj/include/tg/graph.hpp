#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tg/errors.hpp"

namespace tg {

// Logical tensor extents. Rank 1..4, every extent >= 1.
using Shape = std::vector<int>;

int64_t numel(const Shape& s);
void validate_shape(const Shape& s);
std::string shape_str(const Shape& s);

// Fixed operator registry. Indices are stable and contiguous from 0; the
// one-hot width used by the featuriser equals kNumOpKinds.
enum class OpKind : int {
  Input = 0,
  Weight,
  MatMul,
  Conv2d,
  Relu,
  Add,
  Mul,
  Concat,
  Split,
  Transpose,
  Reshape,
  MaxPool,
  BatchNorm,
  FusedConvRelu,
  FusedMatMulAdd,
  Identity,
  Enlarge,
};

inline constexpr int kNumOpKinds = 17;

const char* op_name(OpKind k);
std::optional<OpKind> op_from_name(const std::string& name);
int op_arity(OpKind k);  // number of required inputs

// Small integer attributes: stride, pad, perm, split offsets, declared
// shapes for Input/Weight, broadcast axis for Add/Mul, etc.
using Attrs = std::map<std::string, std::vector<int>>;

bool has_attr(const Attrs& a, const std::string& key);
int attr_scalar(const Attrs& a, const std::string& key);
int attr_scalar_or(const Attrs& a, const std::string& key, int fallback);
const std::vector<int>& attr_seq(const Attrs& a, const std::string& key);

struct Node {
  int id = -1;
  OpKind kind = OpKind::Input;
  Attrs attrs;
};

struct Edge {
  int src = -1;
  int dst = -1;
  int port = 0;          // input slot on dst
  Shape shape;           // inferred output shape of src
};

// Directed acyclic tensor dataflow graph. Immutable by convention once
// built: transformations construct new graphs.
struct CompGraph {
  std::vector<Node> nodes;
  std::vector<Edge> edges;
  std::vector<int> outputs;
  std::map<int, Shape> shapes;  // node id -> output shape (set by infer_shapes)

  bool has_node(int id) const;
  const Node& node(int id) const;
  Node& node_mut(int id);
  int max_node_id() const;
  // Incoming edges of a node ordered by port.
  std::vector<const Edge*> in_edges(int id) const;
  // Outgoing edges of a node (order: as stored).
  std::vector<const Edge*> out_edges(int id) const;
  // Topological order, ties broken by smallest node id. Throws CycleDetected.
  std::vector<int> topo_order() const;
  const Shape& shape_of(int id) const;

  int add_node(OpKind kind, Attrs attrs = {});
  int add_node_with_id(int id, OpKind kind, Attrs attrs = {});
  void add_edge(int src, int dst, int port);
};

// Fills edge shapes and per-node output shapes from operator semantics.
// Idempotent; throws ShapeMismatch / CycleDetected / InvalidGraph.
CompGraph infer_shapes(CompGraph g);

// Output shape of one operator application; pure.
Shape infer_node_shape(OpKind kind, const Attrs& attrs,
                       const std::vector<Shape>& in);

// Relabel node ids to topological positions 0..n-1. Deterministic; used by
// the rewrite engine after every substitution.
CompGraph relabel_topo(const CompGraph& g);

// Structural digest, invariant under node-id relabeling. Requires shapes
// inferred. The empty graph hashes to kEmptyGraphHash.
inline constexpr uint64_t kEmptyGraphHash = 0x9e3779b97f4a7c15ULL;
uint64_t canonical_hash(const CompGraph& g);

// Line-oriented UTF-8 JSON document; see save_graph for the layout.
std::string save_graph(const CompGraph& g);
CompGraph load_graph(const std::string& text);
void save_graph_file(const CompGraph& g, const std::string& path);
CompGraph load_graph_file(const std::string& path);

}  // namespace tg
