#include "tg/config.hpp"

#include <fstream>

#include "json.hpp"

namespace tg {

using nlohmann::json;

namespace {

json to_json(const RunConfig& c) {
  json j;
  j["env"] = {{"horizon", c.env.horizon},
              {"feedback_period", c.env.feedback_period},
              {"max_candidates", c.env.max_candidates},
              {"edge_norm", c.env.edge_norm},
              {"explore_reward", c.env.explore_reward}};
  j["cost"] = {{"launch_overhead", c.env.cost.launch_overhead},
               {"c_mm", c.env.cost.c_mm},
               {"c_conv", c.env.cost.c_conv},
               {"c_elem", c.env.cost.c_elem},
               {"c_pool", c.env.cost.c_pool},
               {"fold_enabled", c.env.cost.fold_enabled},
               {"noise_std", c.env.cost.noise_std},
               {"noise_seed", c.env.cost.noise_seed}};
  j["train"] = {{"lr", c.train.lr},
                {"c1", c.train.c1},
                {"c2", c.train.c2},
                {"clip_eps", c.train.clip_eps},
                {"gamma", c.train.gamma},
                {"lam", c.train.lam},
                {"grad_clip", c.train.grad_clip},
                {"update_every", c.train.update_every},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"episodes", c.train.episodes},
                {"seed", c.train.seed}};
  return j;
}

template <typename T>
void pull(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config parse error in '" + path + "': " + e.what());
  }
  RunConfig c;
  try {
    if (j.contains("env")) {
      const auto& e = j.at("env");
      pull(e, "horizon", c.env.horizon);
      pull(e, "feedback_period", c.env.feedback_period);
      pull(e, "max_candidates", c.env.max_candidates);
      pull(e, "edge_norm", c.env.edge_norm);
      pull(e, "explore_reward", c.env.explore_reward);
    }
    if (j.contains("cost")) {
      const auto& e = j.at("cost");
      pull(e, "launch_overhead", c.env.cost.launch_overhead);
      pull(e, "c_mm", c.env.cost.c_mm);
      pull(e, "c_conv", c.env.cost.c_conv);
      pull(e, "c_elem", c.env.cost.c_elem);
      pull(e, "c_pool", c.env.cost.c_pool);
      pull(e, "fold_enabled", c.env.cost.fold_enabled);
      pull(e, "noise_std", c.env.cost.noise_std);
      pull(e, "noise_seed", c.env.cost.noise_seed);
    }
    if (j.contains("train")) {
      const auto& e = j.at("train");
      pull(e, "lr", c.train.lr);
      pull(e, "c1", c.train.c1);
      pull(e, "c2", c.train.c2);
      pull(e, "clip_eps", c.train.clip_eps);
      pull(e, "gamma", c.train.gamma);
      pull(e, "lam", c.train.lam);
      pull(e, "grad_clip", c.train.grad_clip);
      pull(e, "update_every", c.train.update_every);
      pull(e, "batch_size", c.train.batch_size);
      pull(e, "epochs", c.train.epochs);
      pull(e, "episodes", c.train.episodes);
      pull(e, "seed", c.train.seed);
    }
  } catch (const json::exception& e) {
    throw ConfigError("bad config field in '" + path + "': " + e.what());
  }
  if (c.env.horizon <= 0 || c.env.feedback_period <= 0 ||
      c.env.max_candidates <= 0 || c.env.max_candidates > kMaxCandidates ||
      c.env.edge_norm <= 0.0)
    throw ConfigError("env config out of range in '" + path + "'");
  if (c.train.batch_size <= 0 || c.train.epochs <= 0 ||
      c.train.update_every <= 0 || c.train.episodes < 0 || c.train.lr <= 0.0)
    throw ConfigError("train config out of range in '" + path + "'");
  return c;
}

std::string config_to_json(const RunConfig& cfg) { return to_json(cfg).dump(); }

uint64_t config_hash(const RunConfig& cfg) {
  uint64_t h = 14695981039346656037ull;
  for (char ch : config_to_json(cfg)) {
    h ^= static_cast<unsigned char>(ch);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace tg
