#pragma once

#include <map>
#include <string>
#include <vector>

#include "tg/cost.hpp"
#include "tg/gnn.hpp"
#include "tg/rewrite.hpp"

namespace tg {

struct EnvConfig {
  int horizon = 100;        // T
  int feedback_period = 5;  // N: steps between end-to-end measurements
  int max_candidates = kMaxCandidates;
  double edge_norm = kEdgeNormDefault;  // M
  double explore_reward = 0.1;          // granted when no measurement happens
  CostParams cost;
};

struct Observation {
  MetaGraph meta;  // carries the mask and candidate rule ids
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  // info
  std::string applied_rule;  // empty for No-Op
  bool measured = false;
  double rt_e2e = 0.0;
  double rt_cost_model = 0.0;
  int folded_count = 0;
};

struct EpisodeSummary {
  double rt0 = 0.0;
  double rt_final = 0.0;
  double speedup = 1.0;  // rt0 / rt_final
  int steps = 0;         // non-No-Op actions taken
  std::map<std::string, int> rule_counts;
};

struct TraceRow {
  int t = 0;
  int action = 0;
  std::string rule_id;  // empty for No-Op
  double reward = 0.0;
  double e2e = 0.0;
  double cost_model = 0.0;
};

// Gym-style episodic wrapper around the transformation process. Reward is
// the normalised latency delta (x100) every feedback_period steps, a small
// exploration constant otherwise; the terminal step always measures so the
// per-episode rewards telescope exactly. One instance per thread.
class Environment {
 public:
  explicit Environment(EnvConfig cfg = {});

  Observation reset(const CompGraph& g0);
  // mask[a] must be true; a masked-out action is a caller bug, not a
  // learning signal, and raises InvalidAction.
  StepResult step(int action);
  EpisodeSummary episode_summary() const;  // throws EpisodeNotDone

  const CompGraph& graph() const { return current_; }
  bool done() const { return done_; }
  int t() const { return t_; }
  const std::vector<TraceRow>& trace() const { return trace_; }
  const EnvConfig& config() const { return cfg_; }

  // Pluggable measurement reward; default is Eq-2 style percentage delta.
  using RewardFn = std::function<double(double rt0, double rt_prev, double rt_now)>;
  void set_reward_fn(RewardFn fn) { reward_fn_ = std::move(fn); }

 private:
  Observation make_observation();
  double measure() const { return simulated_e2e_latency(current_, cfg_.cost); }

  EnvConfig cfg_;
  RewardFn reward_fn_;
  CompGraph current_;
  std::vector<Candidate> candidates_;
  int t_ = 0;
  bool done_ = true;
  double rt0_ = 0.0;
  double rt_prev_ = 0.0;
  double rt_final_ = 0.0;
  std::map<std::string, int> rule_counts_;
  std::vector<TraceRow> trace_;
};

// JSON-lines trace I/O shared by the RL environment and the baselines.
void append_trace_jsonl(const std::string& path, const std::string& benchmark,
                        const std::string& agent, int episode,
                        const std::vector<TraceRow>& rows);
struct TraceFile {
  std::string benchmark;
  std::string agent;
  int episode = 0;
  std::vector<TraceRow> rows;
};
std::vector<TraceFile> load_traces_jsonl(const std::string& path);

}  // namespace tg
