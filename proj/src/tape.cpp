#include "tg/tape.hpp"

#include <algorithm>
#include <cmath>

namespace tg {

namespace {
void require(bool ok, const char* what) {
  if (!ok) throw ShapeMismatch(what);
}
}  // namespace

Tape::Ref Tape::push(Tensor2D v) {
  slots_.push_back(Slot{std::move(v), Tensor2D(), nullptr, {}});
  return static_cast<Ref>(slots_.size() - 1);
}

Tape::Ref Tape::constant(Tensor2D t) { return push(std::move(t)); }

Tape::Ref Tape::param(ParamStore& store, const std::string& name) {
  Ref r = push(store.entry(name).value);
  slots_[r].store = &store;
  slots_[r].pname = name;
  return r;
}

double Tape::scalar(Ref r) const {
  require(slots_[r].val.rows == 1 && slots_[r].val.cols == 1, "not a scalar");
  return slots_[r].val.d[0];
}

Tape::Ref Tape::matmul(Ref a, Ref b) {
  const Tensor2D &A = val(a), &B = val(b);
  require(A.cols == B.rows, "matmul inner dims");
  Tensor2D out(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i)
    for (int k = 0; k < A.cols; ++k) {
      double av = A.at(i, k);
      if (av == 0.0) continue;
      for (int j = 0; j < B.cols; ++j) out.at(i, j) += av * B.at(k, j);
    }
  Ref o = push(std::move(out));
  records_.push_back([this, a, b, o] {
    const Tensor2D &A = val(a), &B = val(b), &G = g(o);
    for (int i = 0; i < A.rows; ++i)
      for (int j = 0; j < B.cols; ++j) {
        double gv = G.at(i, j);
        if (gv == 0.0) continue;
        for (int k = 0; k < A.cols; ++k) {
          g(a).at(i, k) += gv * B.at(k, j);
          g(b).at(k, j) += gv * A.at(i, k);
        }
      }
  });
  return o;
}

Tape::Ref Tape::add(Ref a, Ref b) {
  const Tensor2D &A = val(a), &B = val(b);
  require(A.same_shape(B), "add shapes");
  Tensor2D out = A;
  for (size_t i = 0; i < out.size(); ++i) out.d[i] += B.d[i];
  Ref o = push(std::move(out));
  records_.push_back([this, a, b, o] {
    for (size_t i = 0; i < g(o).size(); ++i) {
      g(a).d[i] += g(o).d[i];
      g(b).d[i] += g(o).d[i];
    }
  });
  return o;
}

Tape::Ref Tape::sub(Ref a, Ref b) {
  const Tensor2D &A = val(a), &B = val(b);
  require(A.same_shape(B), "sub shapes");
  Tensor2D out = A;
  for (size_t i = 0; i < out.size(); ++i) out.d[i] -= B.d[i];
  Ref o = push(std::move(out));
  records_.push_back([this, a, b, o] {
    for (size_t i = 0; i < g(o).size(); ++i) {
      g(a).d[i] += g(o).d[i];
      g(b).d[i] -= g(o).d[i];
    }
  });
  return o;
}

Tape::Ref Tape::mul(Ref a, Ref b) {
  const Tensor2D &A = val(a), &B = val(b);
  require(A.same_shape(B), "mul shapes");
  Tensor2D out = A;
  for (size_t i = 0; i < out.size(); ++i) out.d[i] *= B.d[i];
  Ref o = push(std::move(out));
  records_.push_back([this, a, b, o] {
    for (size_t i = 0; i < g(o).size(); ++i) {
      g(a).d[i] += g(o).d[i] * val(b).d[i];
      g(b).d[i] += g(o).d[i] * val(a).d[i];
    }
  });
  return o;
}

Tape::Ref Tape::add_rowbcast(Ref a, Ref row) {
  const Tensor2D &A = val(a), &R = val(row);
  require(R.rows == 1 && R.cols == A.cols, "row broadcast shapes");
  Tensor2D out = A;
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) out.at(i, j) += R.at(0, j);
  Ref o = push(std::move(out));
  records_.push_back([this, a, row, o] {
    const Tensor2D& G = g(o);
    for (size_t i = 0; i < G.size(); ++i) g(a).d[i] += G.d[i];
    for (int i = 0; i < G.rows; ++i)
      for (int j = 0; j < G.cols; ++j) g(row).at(0, j) += G.at(i, j);
  });
  return o;
}

Tape::Ref Tape::mul_colbcast(Ref a, Ref col) {
  const Tensor2D &A = val(a), &C = val(col);
  require(C.cols == 1 && C.rows == A.rows, "col broadcast shapes");
  Tensor2D out = A;
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < A.cols; ++j) out.at(i, j) *= C.at(i, 0);
  Ref o = push(std::move(out));
  records_.push_back([this, a, col, o] {
    const Tensor2D &G = g(o), &A = val(a), &C = val(col);
    for (int i = 0; i < G.rows; ++i)
      for (int j = 0; j < G.cols; ++j) {
        g(a).at(i, j) += G.at(i, j) * C.at(i, 0);
        g(col).at(i, 0) += G.at(i, j) * A.at(i, j);
      }
  });
  return o;
}

Tape::Ref Tape::concat_rows(Ref a, Ref b) {
  const Tensor2D &A = val(a), &B = val(b);
  require(A.cols == B.cols, "concat_rows cols");
  Tensor2D out(A.rows + B.rows, A.cols);
  std::copy(A.d.begin(), A.d.end(), out.d.begin());
  std::copy(B.d.begin(), B.d.end(), out.d.begin() + A.d.size());
  Ref o = push(std::move(out));
  records_.push_back([this, a, b, o] {
    const Tensor2D& G = g(o);
    size_t na = g(a).size();
    for (size_t i = 0; i < na; ++i) g(a).d[i] += G.d[i];
    for (size_t i = 0; i < g(b).size(); ++i) g(b).d[i] += G.d[na + i];
  });
  return o;
}

Tape::Ref Tape::concat_cols(Ref a, Ref b) {
  const Tensor2D &A = val(a), &B = val(b);
  require(A.rows == B.rows, "concat_cols rows");
  Tensor2D out(A.rows, A.cols + B.cols);
  for (int i = 0; i < A.rows; ++i) {
    for (int j = 0; j < A.cols; ++j) out.at(i, j) = A.at(i, j);
    for (int j = 0; j < B.cols; ++j) out.at(i, A.cols + j) = B.at(i, j);
  }
  Ref o = push(std::move(out));
  records_.push_back([this, a, b, o] {
    const Tensor2D& G = g(o);
    int ca = val(a).cols;
    for (int i = 0; i < G.rows; ++i) {
      for (int j = 0; j < ca; ++j) g(a).at(i, j) += G.at(i, j);
      for (int j = 0; j < val(b).cols; ++j) g(b).at(i, j) += G.at(i, ca + j);
    }
  });
  return o;
}

Tape::Ref Tape::gather_rows(Ref a, std::vector<int> idx) {
  const Tensor2D& A = val(a);
  Tensor2D out(static_cast<int>(idx.size()), A.cols);
  for (size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < A.rows, "gather_rows index");
    for (int j = 0; j < A.cols; ++j)
      out.at(static_cast<int>(i), j) = A.at(idx[i], j);
  }
  Ref o = push(std::move(out));
  records_.push_back([this, a, o, idx = std::move(idx)] {
    const Tensor2D& G = g(o);
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < G.cols; ++j)
        g(a).at(idx[i], j) += G.at(static_cast<int>(i), j);
  });
  return o;
}

Tape::Ref Tape::segment_sum(Ref a, std::vector<int> seg, int num_segments) {
  const Tensor2D& A = val(a);
  require(static_cast<int>(seg.size()) == A.rows, "segment_sum ids");
  Tensor2D out(num_segments, A.cols);
  for (int i = 0; i < A.rows; ++i) {
    require(seg[i] >= 0 && seg[i] < num_segments, "segment id range");
    for (int j = 0; j < A.cols; ++j) out.at(seg[i], j) += A.at(i, j);
  }
  Ref o = push(std::move(out));
  records_.push_back([this, a, o, seg = std::move(seg)] {
    const Tensor2D& G = g(o);
    for (int i = 0; i < val(a).rows; ++i)
      for (int j = 0; j < G.cols; ++j) g(a).at(i, j) += G.at(seg[i], j);
  });
  return o;
}

Tape::Ref Tape::softmax_per_segment(Ref a, std::vector<int> seg, int num_segments) {
  const Tensor2D& A = val(a);
  require(A.cols == 1, "softmax_per_segment expects a column");
  require(static_cast<int>(seg.size()) == A.rows, "softmax segment ids");
  std::vector<double> mx(num_segments, -1e300), denom(num_segments, 0.0);
  for (int i = 0; i < A.rows; ++i) mx[seg[i]] = std::max(mx[seg[i]], A.d[i]);
  Tensor2D out(A.rows, 1);
  for (int i = 0; i < A.rows; ++i) {
    out.d[i] = std::exp(A.d[i] - mx[seg[i]]);
    denom[seg[i]] += out.d[i];
  }
  for (int i = 0; i < A.rows; ++i) out.d[i] /= denom[seg[i]];
  Ref o = push(std::move(out));
  records_.push_back([this, a, o, seg = std::move(seg), num_segments] {
    // dL/dx_i = p_i * (g_i - sum_j in segment p_j g_j)
    const Tensor2D &P = val(o), &G = g(o);
    std::vector<double> dot(num_segments, 0.0);
    for (int i = 0; i < P.rows; ++i) dot[seg[i]] += P.d[i] * G.d[i];
    for (int i = 0; i < P.rows; ++i)
      g(a).d[i] += P.d[i] * (G.d[i] - dot[seg[i]]);
  });
  return o;
}

Tape::Ref Tape::relu(Ref a) {
  Tensor2D out = val(a);
  for (double& x : out.d) x = std::max(x, 0.0);
  Ref o = push(std::move(out));
  records_.push_back([this, a, o] {
    for (size_t i = 0; i < g(o).size(); ++i)
      if (val(a).d[i] > 0.0) g(a).d[i] += g(o).d[i];
  });
  return o;
}

Tape::Ref Tape::leaky_relu(Ref a, double slope) {
  Tensor2D out = val(a);
  for (double& x : out.d) x = x > 0.0 ? x : slope * x;
  Ref o = push(std::move(out));
  records_.push_back([this, a, o, slope] {
    for (size_t i = 0; i < g(o).size(); ++i)
      g(a).d[i] += g(o).d[i] * (val(a).d[i] > 0.0 ? 1.0 : slope);
  });
  return o;
}

Tape::Ref Tape::sigmoid(Ref a) {
  Tensor2D out = val(a);
  for (double& x : out.d) x = 1.0 / (1.0 + std::exp(-x));
  Ref o = push(std::move(out));
  records_.push_back([this, a, o] {
    for (size_t i = 0; i < g(o).size(); ++i) {
      double y = val(o).d[i];
      g(a).d[i] += g(o).d[i] * y * (1.0 - y);
    }
  });
  return o;
}

Tape::Ref Tape::exp_(Ref a) {
  Tensor2D out = val(a);
  for (double& x : out.d) x = std::exp(x);
  Ref o = push(std::move(out));
  records_.push_back([this, a, o] {
    for (size_t i = 0; i < g(o).size(); ++i)
      g(a).d[i] += g(o).d[i] * val(o).d[i];
  });
  return o;
}

Tape::Ref Tape::log_(Ref a) {
  Tensor2D out = val(a);
  for (double& x : out.d) x = std::log(x);
  Ref o = push(std::move(out));
  records_.push_back([this, a, o] {
    for (size_t i = 0; i < g(o).size(); ++i)
      g(a).d[i] += g(o).d[i] / val(a).d[i];
  });
  return o;
}

Tape::Ref Tape::minimum(Ref a, Ref b) {
  const Tensor2D &A = val(a), &B = val(b);
  require(A.same_shape(B), "minimum shapes");
  Tensor2D out = A;
  for (size_t i = 0; i < out.size(); ++i) out.d[i] = std::min(A.d[i], B.d[i]);
  Ref o = push(std::move(out));
  records_.push_back([this, a, b, o] {
    for (size_t i = 0; i < g(o).size(); ++i) {
      if (val(a).d[i] <= val(b).d[i])
        g(a).d[i] += g(o).d[i];
      else
        g(b).d[i] += g(o).d[i];
    }
  });
  return o;
}

Tape::Ref Tape::clamp(Ref a, double lo, double hi) {
  Tensor2D out = val(a);
  for (double& x : out.d) x = std::clamp(x, lo, hi);
  Ref o = push(std::move(out));
  records_.push_back([this, a, o, lo, hi] {
    for (size_t i = 0; i < g(o).size(); ++i) {
      double x = val(a).d[i];
      if (x > lo && x < hi) g(a).d[i] += g(o).d[i];
    }
  });
  return o;
}

Tape::Ref Tape::scale(Ref a, double s) {
  Tensor2D out = val(a);
  for (double& x : out.d) x *= s;
  Ref o = push(std::move(out));
  records_.push_back([this, a, o, s] {
    for (size_t i = 0; i < g(o).size(); ++i) g(a).d[i] += g(o).d[i] * s;
  });
  return o;
}

Tape::Ref Tape::add_scalar(Ref a, double s) {
  Tensor2D out = val(a);
  for (double& x : out.d) x += s;
  Ref o = push(std::move(out));
  records_.push_back([this, a, o] {
    for (size_t i = 0; i < g(o).size(); ++i) g(a).d[i] += g(o).d[i];
  });
  return o;
}

Tape::Ref Tape::sum_all(Ref a) {
  double s = 0.0;
  for (double x : val(a).d) s += x;
  Ref o = push(Tensor2D(1, 1, {s}));
  records_.push_back([this, a, o] {
    double gv = g(o).d[0];
    for (size_t i = 0; i < g(a).size(); ++i) g(a).d[i] += gv;
  });
  return o;
}

void Tape::backward(Ref loss) {
  if (val(loss).rows != 1 || val(loss).cols != 1)
    throw NotScalarLoss("backward requires a 1x1 loss");
  for (auto& s : slots_)
    s.grad = Tensor2D(s.val.rows, s.val.cols);
  slots_[loss].grad.d[0] = 1.0;
  for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  for (auto& s : slots_)
    if (s.store) {
      auto& pg = s.store->entry(s.pname).grad;
      for (size_t i = 0; i < pg.size(); ++i) pg.d[i] += s.grad.d[i];
    }
}

}  // namespace tg
