#pragma once

#include <string>

#include "tg/env.hpp"
#include "tg/ppo.hpp"

namespace tg {

// One JSON document for everything tunable; CLI flags override individual
// fields after loading (precedence: flag > config file > default).
struct RunConfig {
  EnvConfig env;
  TrainConfig train;
};

RunConfig default_config();
RunConfig load_config(const std::string& path);  // throws ConfigError
std::string config_to_json(const RunConfig& cfg);

// FNV-1a over the canonical JSON form; stamped into CSV header comments so
// outputs are traceable to their configuration.
uint64_t config_hash(const RunConfig& cfg);

}  // namespace tg
