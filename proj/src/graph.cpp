#include "tg/graph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace tg {

int64_t numel(const Shape& s) {
  int64_t n = 1;
  for (int d : s) n *= d;
  return n;
}

void validate_shape(const Shape& s) {
  if (s.empty() || s.size() > 4)
    throw ShapeMismatch("shape rank must be 1..4, got " + shape_str(s));
  for (int d : s)
    if (d < 1) throw ShapeMismatch("shape extent must be >= 1: " + shape_str(s));
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

namespace {
constexpr const char* kOpNames[kNumOpKinds] = {
    "Input",     "Weight",  "MatMul",    "Conv2d",        "Relu",
    "Add",       "Mul",     "Concat",    "Split",         "Transpose",
    "Reshape",   "MaxPool", "BatchNorm", "FusedConvRelu", "FusedMatMulAdd",
    "Identity",  "Enlarge"};
constexpr int kArity[kNumOpKinds] = {0, 0, 2, 2, 1, 2, 2, 2, 1,
                                     1, 1, 1, 3, 2, 3, 1, 1};
}  // namespace

const char* op_name(OpKind k) { return kOpNames[static_cast<int>(k)]; }

std::optional<OpKind> op_from_name(const std::string& name) {
  for (int i = 0; i < kNumOpKinds; ++i)
    if (name == kOpNames[i]) return static_cast<OpKind>(i);
  return std::nullopt;
}

int op_arity(OpKind k) { return kArity[static_cast<int>(k)]; }

bool has_attr(const Attrs& a, const std::string& key) { return a.count(key) > 0; }

int attr_scalar(const Attrs& a, const std::string& key) {
  auto it = a.find(key);
  if (it == a.end() || it->second.empty())
    throw InvalidGraph("missing attribute '" + key + "'");
  return it->second[0];
}

int attr_scalar_or(const Attrs& a, const std::string& key, int fallback) {
  auto it = a.find(key);
  if (it == a.end() || it->second.empty()) return fallback;
  return it->second[0];
}

const std::vector<int>& attr_seq(const Attrs& a, const std::string& key) {
  auto it = a.find(key);
  if (it == a.end()) throw InvalidGraph("missing attribute '" + key + "'");
  return it->second;
}

bool CompGraph::has_node(int id) const {
  for (const auto& n : nodes)
    if (n.id == id) return true;
  return false;
}

const Node& CompGraph::node(int id) const {
  for (const auto& n : nodes)
    if (n.id == id) return n;
  throw InvalidGraph("no node with id " + std::to_string(id));
}

Node& CompGraph::node_mut(int id) {
  for (auto& n : nodes)
    if (n.id == id) return n;
  throw InvalidGraph("no node with id " + std::to_string(id));
}

int CompGraph::max_node_id() const {
  int m = -1;
  for (const auto& n : nodes) m = std::max(m, n.id);
  return m;
}

std::vector<const Edge*> CompGraph::in_edges(int id) const {
  std::vector<const Edge*> r;
  for (const auto& e : edges)
    if (e.dst == id) r.push_back(&e);
  std::sort(r.begin(), r.end(),
            [](const Edge* a, const Edge* b) { return a->port < b->port; });
  return r;
}

std::vector<const Edge*> CompGraph::out_edges(int id) const {
  std::vector<const Edge*> r;
  for (const auto& e : edges)
    if (e.src == id) r.push_back(&e);
  return r;
}

std::vector<int> CompGraph::topo_order() const {
  std::map<int, int> indeg;
  for (const auto& n : nodes) indeg[n.id] = 0;
  for (const auto& e : edges) {
    if (!indeg.count(e.src) || !indeg.count(e.dst))
      throw InvalidGraph("edge references unknown node " +
                         std::to_string(indeg.count(e.src) ? e.dst : e.src));
    indeg[e.dst]++;
  }
  std::set<int> ready;
  for (auto& [id, d] : indeg)
    if (d == 0) ready.insert(id);
  std::vector<int> order;
  order.reserve(nodes.size());
  while (!ready.empty()) {
    int id = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(id);
    for (const auto& e : edges)
      if (e.src == id && --indeg[e.dst] == 0) ready.insert(e.dst);
  }
  if (order.size() != nodes.size()) throw CycleDetected("graph contains a cycle");
  return order;
}

const Shape& CompGraph::shape_of(int id) const {
  auto it = shapes.find(id);
  if (it == shapes.end())
    throw InvalidGraph("shape of node " + std::to_string(id) +
                       " not inferred");
  return it->second;
}

int CompGraph::add_node(OpKind kind, Attrs attrs) {
  int id = max_node_id() + 1;
  nodes.push_back(Node{id, kind, std::move(attrs)});
  return id;
}

int CompGraph::add_node_with_id(int id, OpKind kind, Attrs attrs) {
  if (has_node(id)) throw InvalidGraph("duplicate node id " + std::to_string(id));
  nodes.push_back(Node{id, kind, std::move(attrs)});
  return id;
}

void CompGraph::add_edge(int src, int dst, int port) {
  edges.push_back(Edge{src, dst, port, {}});
}

namespace {

Shape conv_out(const Shape& x, const Shape& w, int stride, int pad,
               const char* what) {
  if (x.size() != 4 || w.size() != 4)
    throw ShapeMismatch(std::string(what) + ": operands must be rank 4, got " +
                        shape_str(x) + " and " + shape_str(w));
  if (x[1] != w[1])
    throw ShapeMismatch(std::string(what) + ": channel mismatch " +
                        shape_str(x) + " vs " + shape_str(w));
  int h = x[2] + 2 * pad - w[2];
  int wd = x[3] + 2 * pad - w[3];
  if (h < 0 || wd < 0 || stride < 1)
    throw ShapeMismatch(std::string(what) + ": kernel larger than padded input");
  return Shape{x[0], w[0], h / stride + 1, wd / stride + 1};
}

}  // namespace

Shape infer_node_shape(OpKind kind, const Attrs& attrs,
                       const std::vector<Shape>& in) {
  switch (kind) {
    case OpKind::Input:
    case OpKind::Weight: {
      Shape s(attr_seq(attrs, "shape").begin(), attr_seq(attrs, "shape").end());
      validate_shape(s);
      return s;
    }
    case OpKind::MatMul: {
      if (in[0].size() != 2 || in[1].size() != 2)
        throw ShapeMismatch("MatMul operands must be rank 2");
      if (in[0][1] != in[1][0])
        throw ShapeMismatch("MatMul inner dims differ: " + shape_str(in[0]) +
                            " vs " + shape_str(in[1]));
      return Shape{in[0][0], in[1][1]};
    }
    case OpKind::Conv2d:
    case OpKind::FusedConvRelu:
      return conv_out(in[0], in[1], attr_scalar_or(attrs, "stride", 1),
                      attr_scalar_or(attrs, "pad", 0), op_name(kind));
    case OpKind::Relu:
    case OpKind::Identity:
      return in[0];
    case OpKind::Add:
    case OpKind::Mul: {
      if (has_attr(attrs, "bcast")) {
        int axis = attr_scalar(attrs, "bcast");
        if (axis < 0 || axis >= static_cast<int>(in[0].size()))
          throw ShapeMismatch("broadcast axis out of range");
        if (in[1].size() != 1 || in[1][0] != in[0][axis])
          throw ShapeMismatch("broadcast operand must be rank 1 of length " +
                              std::to_string(in[0][axis]));
        return in[0];
      }
      if (in[0] != in[1])
        throw ShapeMismatch(std::string(op_name(kind)) + " operands differ: " +
                            shape_str(in[0]) + " vs " + shape_str(in[1]));
      return in[0];
    }
    case OpKind::Concat: {
      int axis = attr_scalar(attrs, "axis");
      if (in[0].size() != in[1].size())
        throw ShapeMismatch("Concat rank mismatch");
      if (axis < 0 || axis >= static_cast<int>(in[0].size()))
        throw ShapeMismatch("Concat axis out of range");
      Shape out = in[0];
      for (size_t i = 0; i < in[0].size(); ++i)
        if (static_cast<int>(i) != axis && in[0][i] != in[1][i])
          throw ShapeMismatch("Concat non-axis extents differ");
      out[axis] += in[1][axis];
      return out;
    }
    case OpKind::Split: {
      int axis = attr_scalar(attrs, "axis");
      int offset = attr_scalar(attrs, "offset");
      int length = attr_scalar(attrs, "length");
      if (axis < 0 || axis >= static_cast<int>(in[0].size()))
        throw ShapeMismatch("Split axis out of range");
      if (offset < 0 || length < 1 || offset + length > in[0][axis])
        throw ShapeMismatch("Split range exceeds extent");
      Shape out = in[0];
      out[axis] = length;
      return out;
    }
    case OpKind::Transpose: {
      const auto& perm = attr_seq(attrs, "perm");
      if (perm.size() != in[0].size())
        throw ShapeMismatch("Transpose perm rank mismatch");
      std::vector<bool> seen(perm.size(), false);
      Shape out(in[0].size());
      for (size_t i = 0; i < perm.size(); ++i) {
        if (perm[i] < 0 || perm[i] >= static_cast<int>(perm.size()) ||
            seen[perm[i]])
          throw ShapeMismatch("Transpose perm is not a permutation");
        seen[perm[i]] = true;
        out[i] = in[0][perm[i]];
      }
      return out;
    }
    case OpKind::Reshape: {
      Shape out(attr_seq(attrs, "shape").begin(), attr_seq(attrs, "shape").end());
      validate_shape(out);
      if (numel(out) != numel(in[0]))
        throw ShapeMismatch("Reshape element count mismatch");
      return out;
    }
    case OpKind::MaxPool: {
      if (in[0].size() != 4) throw ShapeMismatch("MaxPool input must be rank 4");
      int k = attr_scalar(attrs, "kernel");
      int stride = attr_scalar_or(attrs, "stride", k);
      int pad = attr_scalar_or(attrs, "pad", 0);
      int h = in[0][2] + 2 * pad - k;
      int w = in[0][3] + 2 * pad - k;
      if (h < 0 || w < 0 || stride < 1)
        throw ShapeMismatch("MaxPool kernel larger than padded input");
      return Shape{in[0][0], in[0][1], h / stride + 1, w / stride + 1};
    }
    case OpKind::BatchNorm: {
      if (in[0].size() < 2)
        throw ShapeMismatch("BatchNorm input must have a channel dim");
      int c = in[0][1];
      if (in[1].size() != 1 || in[1][0] != c || in[2].size() != 1 ||
          in[2][0] != c)
        throw ShapeMismatch("BatchNorm scale/shift must be rank 1 of length " +
                            std::to_string(c));
      return in[0];
    }
    case OpKind::FusedMatMulAdd: {
      if (in[0].size() != 2 || in[1].size() != 2 || in[2].size() != 2)
        throw ShapeMismatch("FusedMatMulAdd operands must be rank 2");
      if (in[0][1] != in[1][0])
        throw ShapeMismatch("FusedMatMulAdd inner dims differ");
      Shape out{in[0][0], in[1][1]};
      if (in[2] != out)
        throw ShapeMismatch("FusedMatMulAdd bias shape mismatch");
      return out;
    }
    case OpKind::Enlarge: {
      if (in[0].size() != 4) throw ShapeMismatch("Enlarge input must be rank 4");
      int kh = attr_scalar(attrs, "kh");
      int kw = attr_scalar(attrs, "kw");
      if (kh < in[0][2] || kw < in[0][3])
        throw ShapeMismatch("Enlarge target smaller than kernel");
      return Shape{in[0][0], in[0][1], kh, kw};
    }
  }
  throw InvalidGraph("unknown op kind");
}

CompGraph infer_shapes(CompGraph g) {
  auto order = g.topo_order();
  g.shapes.clear();
  for (int id : order) {
    const Node& n = g.node(id);
    auto ins = g.in_edges(id);
    if (static_cast<int>(ins.size()) != op_arity(n.kind))
      throw InvalidGraph(std::string(op_name(n.kind)) + " node " +
                         std::to_string(id) + " has " +
                         std::to_string(ins.size()) + " inputs, expected " +
                         std::to_string(op_arity(n.kind)));
    for (size_t p = 0; p < ins.size(); ++p)
      if (ins[p]->port != static_cast<int>(p))
        throw InvalidGraph("node " + std::to_string(id) +
                           " input ports not contiguous");
    std::vector<Shape> in_shapes;
    for (const Edge* e : ins) in_shapes.push_back(g.shapes.at(e->src));
    Shape out = infer_node_shape(n.kind, n.attrs, in_shapes);
    validate_shape(out);
    g.shapes[id] = out;
  }
  for (auto& e : g.edges) e.shape = g.shapes.at(e.src);
  for (int out : g.outputs)
    if (!g.has_node(out))
      throw InvalidGraph("graph output references unknown node " +
                         std::to_string(out));
  return g;
}

CompGraph relabel_topo(const CompGraph& g) {
  auto order = g.topo_order();
  std::map<int, int> remap;
  for (size_t i = 0; i < order.size(); ++i) remap[order[i]] = static_cast<int>(i);
  CompGraph out;
  for (int id : order) {
    const Node& n = g.node(id);
    out.nodes.push_back(Node{remap[id], n.kind, n.attrs});
  }
  for (const auto& e : g.edges)
    out.edges.push_back(Edge{remap.at(e.src), remap.at(e.dst), e.port, e.shape});
  std::sort(out.edges.begin(), out.edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.dst, a.port, a.src) < std::tie(b.dst, b.port, b.src);
  });
  for (int o : g.outputs) out.outputs.push_back(remap.at(o));
  for (const auto& [id, s] : g.shapes) out.shapes[remap.at(id)] = s;
  return out;
}

namespace {

uint64_t mix(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

uint64_t hash_str(const std::string& s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

uint64_t canonical_hash(const CompGraph& g) {
  if (g.nodes.empty()) return kEmptyGraphHash;
  auto order = g.topo_order();
  // Structural per-node digest: kind, attrs, output shape, per-port input
  // digests. Depends only on structure, never on node ids.
  std::map<int, uint64_t> nh;
  for (int id : order) {
    const Node& n = g.node(id);
    uint64_t h = mix(0x1234567887654321ULL, static_cast<uint64_t>(n.kind));
    for (const auto& [k, vals] : n.attrs) {
      h = mix(h, hash_str(k));
      for (int v : vals) h = mix(h, static_cast<uint64_t>(v) + 0x51ULL);
    }
    auto it = g.shapes.find(id);
    if (it != g.shapes.end())
      for (int d : it->second) h = mix(h, static_cast<uint64_t>(d) + 0xabcULL);
    for (const Edge* e : g.in_edges(id))
      h = mix(mix(h, static_cast<uint64_t>(e->port)), nh.at(e->src));
    nh[id] = h;
  }
  // Multiset of node digests + ordered output digests.
  std::vector<uint64_t> all;
  for (auto& [id, h] : nh) all.push_back(h);
  std::sort(all.begin(), all.end());
  uint64_t h = mix(kEmptyGraphHash, g.nodes.size());
  for (uint64_t v : all) h = mix(h, v);
  h = mix(h, 0xfeedULL);
  for (int o : g.outputs) h = mix(h, nh.at(o));
  return h;
}

std::string save_graph(const CompGraph& g) {
  nlohmann::ordered_json doc;
  doc["nodes"] = nlohmann::ordered_json::array();
  std::vector<Node> nodes = g.nodes;
  std::sort(nodes.begin(), nodes.end(),
            [](const Node& a, const Node& b) { return a.id < b.id; });
  for (const auto& n : nodes) {
    nlohmann::ordered_json jn;
    jn["id"] = n.id;
    jn["kind"] = op_name(n.kind);
    jn["attrs"] = nlohmann::ordered_json::object();
    for (const auto& [k, v] : n.attrs) jn["attrs"][k] = v;
    doc["nodes"].push_back(jn);
  }
  doc["edges"] = nlohmann::ordered_json::array();
  std::vector<Edge> edges = g.edges;
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.dst, a.port, a.src) < std::tie(b.dst, b.port, b.src);
  });
  for (const auto& e : edges) {
    nlohmann::ordered_json je;
    je["src"] = e.src;
    je["dst"] = e.dst;
    je["port"] = e.port;
    je["shape"] = e.shape;
    doc["edges"].push_back(je);
  }
  doc["outputs"] = g.outputs;
  return doc.dump(2) + "\n";
}

CompGraph load_graph(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("graph document: ") + e.what());
  }
  CompGraph g;
  try {
    if (!doc.contains("nodes") || !doc.contains("edges") ||
        !doc.contains("outputs"))
      throw ParseError("graph document missing nodes/edges/outputs");
    for (const auto& jn : doc.at("nodes")) {
      Node n;
      n.id = jn.at("id").get<int>();
      std::string kind = jn.at("kind").get<std::string>();
      auto k = op_from_name(kind);
      if (!k) throw ParseError("unknown OpKind tag '" + kind + "'");
      n.kind = *k;
      if (jn.contains("attrs"))
        for (auto it = jn["attrs"].begin(); it != jn["attrs"].end(); ++it)
          n.attrs[it.key()] = it.value().get<std::vector<int>>();
      if (g.has_node(n.id))
        throw ParseError("duplicate node id " + std::to_string(n.id));
      g.nodes.push_back(std::move(n));
    }
    for (const auto& je : doc.at("edges")) {
      Edge e;
      e.src = je.at("src").get<int>();
      e.dst = je.at("dst").get<int>();
      e.port = je.at("port").get<int>();
      if (je.contains("shape")) e.shape = je.at("shape").get<Shape>();
      if (!g.has_node(e.src))
        throw ParseError("edge src " + std::to_string(e.src) +
                         " is not a node");
      if (!g.has_node(e.dst))
        throw ParseError("edge dst " + std::to_string(e.dst) +
                         " is not a node");
      g.edges.push_back(std::move(e));
    }
    for (const auto& jo : doc.at("outputs")) {
      int id = jo.get<int>();
      if (!g.has_node(id))
        throw ParseError("output " + std::to_string(id) + " is not a node");
      g.outputs.push_back(id);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("graph document field: ") + e.what());
  }
  return infer_shapes(std::move(g));
}

void save_graph_file(const CompGraph& g, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw GraphError("cannot open " + path + " for writing");
  f << save_graph(g);
}

CompGraph load_graph_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load_graph(ss.str());
}

}  // namespace tg
