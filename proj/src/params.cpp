#include "tg/tensor2d.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace tg {

namespace {
constexpr int kCheckpointVersion = 1;

uint64_t splitmix64(uint64_t& s) {
  uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace

double ParamStore::next_uniform() {
  return static_cast<double>(splitmix64(rng_state_) >> 11) * 0x1.0p-53;
}

Tensor2D& ParamStore::create(const std::string& name, int rows, int cols) {
  auto it = entries_.find(name);
  if (it != entries_.end()) {
    if (it->second.value.rows != rows || it->second.value.cols != cols)
      throw GraphError("parameter '" + name + "' re-created with new shape");
    return it->second.value;
  }
  Entry e;
  e.value = Tensor2D(rows, cols);
  e.grad = Tensor2D(rows, cols);
  e.m = Tensor2D(rows, cols);
  e.v = Tensor2D(rows, cols);
  if (rows > 1) {
    double a = std::sqrt(6.0 / (rows + cols));
    for (double& x : e.value.d) x = (2.0 * next_uniform() - 1.0) * a;
  }
  return entries_.emplace(name, std::move(e)).first->second.value;
}

ParamStore::Entry& ParamStore::entry(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw GraphError("unknown parameter '" + name + "'");
  return it->second;
}

const ParamStore::Entry& ParamStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw GraphError("unknown parameter '" + name + "'");
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> r;
  for (const auto& [k, v] : entries_) r.push_back(k);
  return r;
}

void ParamStore::zero_grad() {
  for (auto& [k, e] : entries_) std::fill(e.grad.d.begin(), e.grad.d.end(), 0.0);
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& [k, e] : entries_)
    for (double g : e.grad.d) s += g * g;
  return std::sqrt(s);
}

void ParamStore::clip_grad_norm(double max_norm) {
  double n = grad_norm();
  if (n <= max_norm || n == 0.0) return;
  double scale = max_norm / n;
  for (auto& [k, e] : entries_)
    for (double& g : e.grad.d) g *= scale;
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double eps) {
  adam_t_++;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t_));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t_));
  for (auto& [k, e] : entries_) {
    for (size_t i = 0; i < e.value.size(); ++i) {
      double g = e.grad.d[i];
      e.m.d[i] = beta1 * e.m.d[i] + (1.0 - beta1) * g;
      e.v.d[i] = beta2 * e.v.d[i] + (1.0 - beta2) * g * g;
      double mhat = e.m.d[i] / bc1;
      double vhat = e.v.d[i] / bc2;
      e.value.d[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

std::string ParamStore::save() const {
  nlohmann::ordered_json doc;
  doc["version"] = kCheckpointVersion;
  doc["adam_t"] = adam_t_;
  doc["seed"] = seed_;
  doc["rng_state"] = rng_state_;
  doc["params"] = nlohmann::ordered_json::object();
  for (const auto& [name, e] : entries_) {
    nlohmann::ordered_json jp;
    jp["shape"] = {e.value.rows, e.value.cols};
    jp["data"] = e.value.d;
    jp["m"] = e.m.d;
    jp["v"] = e.v.d;
    doc["params"][name] = std::move(jp);
  }
  return doc.dump();
}

ParamStore ParamStore::load(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what());
  }
  if (!doc.contains("version") || doc["version"].get<int>() != kCheckpointVersion)
    throw CheckpointVersionMismatch("checkpoint version is not " +
                                    std::to_string(kCheckpointVersion));
  ParamStore ps(doc.value("seed", 0ULL));
  ps.rng_state_ = doc.value("rng_state", 0ULL);
  ps.adam_t_ = doc["adam_t"].get<int64_t>();
  for (auto it = doc["params"].begin(); it != doc["params"].end(); ++it) {
    Entry e;
    auto shape = it.value().at("shape").get<std::vector<int>>();
    e.value = Tensor2D(shape[0], shape[1], it.value().at("data").get<std::vector<double>>());
    e.grad = Tensor2D(shape[0], shape[1]);
    e.m = Tensor2D(shape[0], shape[1], it.value().at("m").get<std::vector<double>>());
    e.v = Tensor2D(shape[0], shape[1], it.value().at("v").get<std::vector<double>>());
    ps.entries_.emplace(it.key(), std::move(e));
  }
  return ps;
}

void ParamStore::save_file(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw GraphError("cannot open " + path + " for writing");
  f << save();
}

ParamStore ParamStore::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw MissingCheckpoint("cannot open checkpoint " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return load(ss.str());
}

}  // namespace tg
