#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tg/errors.hpp"

namespace tg {

// Dense row-major rank-2 tensor; the only tensor type the learning stack
// needs (batched graphs carry segment metadata on the side).
struct Tensor2D {
  int rows = 0;
  int cols = 0;
  std::vector<double> d;

  Tensor2D() = default;
  Tensor2D(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * c, 0.0) {}
  Tensor2D(int r, int c, std::vector<double> v)
      : rows(r), cols(c), d(std::move(v)) {}

  double& at(int r, int c) { return d[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return d[static_cast<size_t>(r) * cols + c]; }
  size_t size() const { return d.size(); }
  bool same_shape(const Tensor2D& o) const {
    return rows == o.rows && cols == o.cols;
  }
};

// Named parameters with matching gradient slots and Adam moment state.
class ParamStore {
 public:
  struct Entry {
    Tensor2D value;
    Tensor2D grad;
    Tensor2D m;
    Tensor2D v;
  };

  explicit ParamStore(uint64_t seed = 0) : seed_(seed), rng_state_(seed) {}

  // Create-or-get; new weight matrices use uniform(-a, a) with
  // a = sqrt(6 / (fan_in + fan_out)), biases (rows == 1) start at zero.
  Tensor2D& create(const std::string& name, int rows, int cols);
  Entry& entry(const std::string& name);
  const Entry& entry(const std::string& name) const;
  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  std::vector<std::string> names() const;

  void zero_grad();
  double grad_norm() const;
  void clip_grad_norm(double max_norm);
  void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);
  int64_t adam_t() const { return adam_t_; }

  std::string save() const;  // versioned JSON checkpoint
  static ParamStore load(const std::string& text);
  void save_file(const std::string& path) const;
  static ParamStore load_file(const std::string& path);

 private:
  double next_uniform();  // in [0, 1)
  std::map<std::string, Entry> entries_;
  int64_t adam_t_ = 0;
  uint64_t seed_ = 0;
  uint64_t rng_state_ = 0;
};

}  // namespace tg
