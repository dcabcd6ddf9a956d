#include "tg/interp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tg {

namespace {

// Row-major strides.
std::vector<int64_t> strides_of(const Shape& s) {
  std::vector<int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i)
    st[i] = st[i + 1] * s[i + 1];
  return st;
}

TensorND eval_matmul(const TensorND& a, const TensorND& b) {
  int m = a.dims[0], k = a.dims[1], n = b.dims[1];
  TensorND out(Shape{m, n});
  for (int i = 0; i < m; ++i)
    for (int p = 0; p < k; ++p) {
      double av = a.data[i * k + p];
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) out.data[i * n + j] += av * b.data[p * n + j];
    }
  return out;
}

TensorND eval_conv(const TensorND& x, const TensorND& w, int stride, int pad) {
  int N = x.dims[0], C = x.dims[1], H = x.dims[2], W = x.dims[3];
  int Co = w.dims[0], KH = w.dims[2], KW = w.dims[3];
  int Ho = (H + 2 * pad - KH) / stride + 1;
  int Wo = (W + 2 * pad - KW) / stride + 1;
  TensorND out(Shape{N, Co, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Co; ++co)
      for (int ho = 0; ho < Ho; ++ho)
        for (int wo = 0; wo < Wo; ++wo) {
          double acc = 0.0;
          for (int c = 0; c < C; ++c)
            for (int kh = 0; kh < KH; ++kh)
              for (int kw = 0; kw < KW; ++kw) {
                int h = ho * stride + kh - pad;
                int wd = wo * stride + kw - pad;
                if (h < 0 || h >= H || wd < 0 || wd >= W) continue;
                acc += x.data[((n * C + c) * H + h) * W + wd] *
                       w.data[((co * C + c) * KH + kh) * KW + kw];
              }
          out.data[((n * Co + co) * Ho + ho) * Wo + wo] = acc;
        }
  return out;
}

TensorND eval_maxpool(const TensorND& x, int k, int stride, int pad) {
  int N = x.dims[0], C = x.dims[1], H = x.dims[2], W = x.dims[3];
  int Ho = (H + 2 * pad - k) / stride + 1;
  int Wo = (W + 2 * pad - k) / stride + 1;
  TensorND out(Shape{N, C, Ho, Wo});
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int ho = 0; ho < Ho; ++ho)
        for (int wo = 0; wo < Wo; ++wo) {
          double best = -std::numeric_limits<double>::infinity();
          for (int kh = 0; kh < k; ++kh)
            for (int kw = 0; kw < k; ++kw) {
              int h = ho * stride + kh - pad;
              int wd = wo * stride + kw - pad;
              if (h < 0 || h >= H || wd < 0 || wd >= W) continue;
              best = std::max(best, x.data[((n * C + c) * H + h) * W + wd]);
            }
          out.data[((n * C + c) * Ho + ho) * Wo + wo] =
              std::isfinite(best) ? best : 0.0;
        }
  return out;
}

TensorND eval_node(const Node& n, const std::vector<const TensorND*>& in,
                   const Shape& out_shape) {
  switch (n.kind) {
    case OpKind::Input:
    case OpKind::Weight:
      throw MissingInput("no value supplied for " + std::string(op_name(n.kind)) +
                         " node " + std::to_string(n.id));
    case OpKind::MatMul:
      return eval_matmul(*in[0], *in[1]);
    case OpKind::Conv2d:
      return eval_conv(*in[0], *in[1], attr_scalar_or(n.attrs, "stride", 1),
                       attr_scalar_or(n.attrs, "pad", 0));
    case OpKind::FusedConvRelu: {
      TensorND r = eval_conv(*in[0], *in[1], attr_scalar_or(n.attrs, "stride", 1),
                             attr_scalar_or(n.attrs, "pad", 0));
      for (double& v : r.data) v = std::max(v, 0.0);
      return r;
    }
    case OpKind::Relu: {
      TensorND r = *in[0];
      for (double& v : r.data) v = std::max(v, 0.0);
      return r;
    }
    case OpKind::Identity:
      return *in[0];
    case OpKind::Add:
    case OpKind::Mul: {
      TensorND r = *in[0];
      bool add = n.kind == OpKind::Add;
      if (has_attr(n.attrs, "bcast")) {
        int axis = attr_scalar(n.attrs, "bcast");
        auto st = strides_of(r.dims);
        for (int64_t i = 0; i < r.size(); ++i) {
          int idx = static_cast<int>((i / st[axis]) % r.dims[axis]);
          double b = in[1]->data[idx];
          r.data[i] = add ? r.data[i] + b : r.data[i] * b;
        }
      } else {
        for (int64_t i = 0; i < r.size(); ++i)
          r.data[i] = add ? r.data[i] + in[1]->data[i]
                          : r.data[i] * in[1]->data[i];
      }
      return r;
    }
    case OpKind::Concat: {
      int axis = attr_scalar(n.attrs, "axis");
      TensorND out(out_shape);
      auto sto = strides_of(out_shape);
      for (int which = 0; which < 2; ++which) {
        const TensorND& t = *in[which];
        auto st = strides_of(t.dims);
        int off = which == 0 ? 0 : in[0]->dims[axis];
        for (int64_t i = 0; i < t.size(); ++i) {
          int64_t rem = i, oi = 0;
          for (size_t d = 0; d < t.dims.size(); ++d) {
            int64_t c = rem / st[d];
            rem %= st[d];
            oi += (c + (static_cast<int>(d) == axis ? off : 0)) * sto[d];
          }
          out.data[oi] = t.data[i];
        }
      }
      return out;
    }
    case OpKind::Split: {
      int axis = attr_scalar(n.attrs, "axis");
      int offset = attr_scalar(n.attrs, "offset");
      TensorND out(out_shape);
      auto sto = strides_of(out_shape);
      auto sti = strides_of(in[0]->dims);
      for (int64_t i = 0; i < out.size(); ++i) {
        int64_t rem = i, ii = 0;
        for (size_t d = 0; d < out_shape.size(); ++d) {
          int64_t c = rem / sto[d];
          rem %= sto[d];
          ii += (c + (static_cast<int>(d) == axis ? offset : 0)) * sti[d];
        }
        out.data[i] = in[0]->data[ii];
      }
      return out;
    }
    case OpKind::Transpose: {
      const auto& perm = attr_seq(n.attrs, "perm");
      TensorND out(out_shape);
      auto sto = strides_of(out_shape);
      auto sti = strides_of(in[0]->dims);
      for (int64_t i = 0; i < out.size(); ++i) {
        int64_t rem = i, ii = 0;
        for (size_t d = 0; d < out_shape.size(); ++d) {
          int64_t c = rem / sto[d];
          rem %= sto[d];
          ii += c * sti[perm[d]];
        }
        out.data[i] = in[0]->data[ii];
      }
      return out;
    }
    case OpKind::Reshape:
      return TensorND(out_shape, in[0]->data);
    case OpKind::MaxPool:
      return eval_maxpool(*in[0], attr_scalar(n.attrs, "kernel"),
                          attr_scalar_or(n.attrs, "stride",
                                         attr_scalar(n.attrs, "kernel")),
                          attr_scalar_or(n.attrs, "pad", 0));
    case OpKind::BatchNorm: {
      // Inference form: y[..,c,..] = scale[c] * x + shift[c], channel dim 1.
      TensorND r = *in[0];
      auto st = strides_of(r.dims);
      for (int64_t i = 0; i < r.size(); ++i) {
        int c = static_cast<int>((i / st[1]) % r.dims[1]);
        r.data[i] = in[1]->data[c] * r.data[i] + in[2]->data[c];
      }
      return r;
    }
    case OpKind::FusedMatMulAdd: {
      TensorND r = eval_matmul(*in[0], *in[1]);
      for (int64_t i = 0; i < r.size(); ++i) r.data[i] += in[2]->data[i];
      return r;
    }
    case OpKind::Enlarge: {
      // Zero-pad kernel spatial dims to (kh, kw), original centered
      // (extra padding goes to the bottom/right).
      int kh = attr_scalar(n.attrs, "kh"), kw = attr_scalar(n.attrs, "kw");
      int Co = in[0]->dims[0], Ci = in[0]->dims[1];
      int h0 = in[0]->dims[2], w0 = in[0]->dims[3];
      int oh = (kh - h0) / 2, ow = (kw - w0) / 2;
      TensorND out(Shape{Co, Ci, kh, kw});
      for (int a = 0; a < Co; ++a)
        for (int b = 0; b < Ci; ++b)
          for (int h = 0; h < h0; ++h)
            for (int w = 0; w < w0; ++w)
              out.data[((a * Ci + b) * kh + h + oh) * kw + w + ow] =
                  in[0]->data[((a * Ci + b) * h0 + h) * w0 + w];
      return out;
    }
  }
  throw InvalidGraph("unknown op kind in evaluate");
}

}  // namespace

TensorMap evaluate(const CompGraph& g, const TensorMap& inputs) {
  TensorMap vals;
  for (int id : g.topo_order()) {
    const Node& n = g.node(id);
    if (n.kind == OpKind::Input || n.kind == OpKind::Weight) {
      auto it = inputs.find(id);
      if (it == inputs.end())
        throw MissingInput("no value for node " + std::to_string(id));
      if (it->second.dims != g.shape_of(id))
        throw ShapeMismatch("value for node " + std::to_string(id) +
                            " has shape " + shape_str(it->second.dims) +
                            ", expected " + shape_str(g.shape_of(id)));
      vals[id] = it->second;
      continue;
    }
    std::vector<const TensorND*> in;
    for (const Edge* e : g.in_edges(id)) in.push_back(&vals.at(e->src));
    vals[id] = eval_node(n, in, g.shape_of(id));
  }
  return vals;
}

std::vector<TensorND> evaluate_outputs(const CompGraph& g, const TensorMap& inputs) {
  TensorMap vals = evaluate(g, inputs);
  std::vector<TensorND> out;
  for (int id : g.outputs) out.push_back(vals.at(id));
  return out;
}

double max_rel_diff(const TensorND& a, const TensorND& b) {
  if (a.dims != b.dims) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    double denom = std::max({std::abs(a.data[i]), std::abs(b.data[i]), 1.0});
    worst = std::max(worst, std::abs(a.data[i] - b.data[i]) / denom);
  }
  return worst;
}

}  // namespace tg
