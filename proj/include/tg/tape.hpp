#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tg/tensor2d.hpp"

namespace tg {

// Reverse-mode tape over rank-2 tensors. Forward ops record themselves;
// backward visits records in exact reverse order and accumulates into
// slot gradients, flushing parameter gradients into their ParamStore.
// A tape is confined to one thread.
class Tape {
 public:
  using Ref = int;

  Ref constant(Tensor2D t);
  Ref param(ParamStore& store, const std::string& name);

  Ref matmul(Ref a, Ref b);
  Ref add(Ref a, Ref b);
  Ref sub(Ref a, Ref b);
  Ref mul(Ref a, Ref b);                 // elementwise
  Ref add_rowbcast(Ref a, Ref row);      // [r,c] + [1,c]
  Ref mul_colbcast(Ref a, Ref col);      // [r,c] * [r,1]
  Ref concat_rows(Ref a, Ref b);
  Ref concat_cols(Ref a, Ref b);
  Ref gather_rows(Ref a, std::vector<int> idx);
  Ref segment_sum(Ref a, std::vector<int> seg, int num_segments);
  Ref softmax_per_segment(Ref a, std::vector<int> seg, int num_segments);  // [r,1]
  Ref relu(Ref a);
  Ref leaky_relu(Ref a, double slope = 0.2);
  Ref sigmoid(Ref a);
  Ref exp_(Ref a);
  Ref log_(Ref a);
  Ref minimum(Ref a, Ref b);             // gradient follows the winning side
  Ref clamp(Ref a, double lo, double hi);  // zero gradient outside the band
  Ref scale(Ref a, double s);
  Ref add_scalar(Ref a, double s);
  Ref sum_all(Ref a);                    // [1,1]

  const Tensor2D& val(Ref r) const { return slots_[r].val; }
  double scalar(Ref r) const;
  const Tensor2D& grad(Ref r) const { return slots_[r].grad; }
  size_t num_slots() const { return slots_.size(); }

  // loss must be 1x1; throws NotScalarLoss otherwise.
  void backward(Ref loss);

 private:
  struct Slot {
    Tensor2D val;
    Tensor2D grad;
    ParamStore* store = nullptr;
    std::string pname;
  };
  Ref push(Tensor2D v);
  Tensor2D& g(Ref r) { return slots_[r].grad; }

  std::vector<Slot> slots_;
  std::vector<std::function<void()>> records_;
};

}  // namespace tg
