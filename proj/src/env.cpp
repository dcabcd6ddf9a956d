#include "tg/env.hpp"

#include <fstream>

#include "json.hpp"

namespace tg {

Environment::Environment(EnvConfig cfg) : cfg_(std::move(cfg)) {
  reward_fn_ = [](double rt0, double rt_prev, double rt_now) {
    return (rt_prev - rt_now) / rt0 * 100.0;
  };
}

Observation Environment::make_observation() {
  Observation obs;
  obs.meta = build_meta_graph(current_, candidates_, cfg_.edge_norm);
  return obs;
}

Observation Environment::reset(const CompGraph& g0) {
  if (g0.nodes.empty()) throw InvalidGraph("reset on empty graph");
  current_ = infer_shapes(g0);
  candidates_ = generate_candidates(current_, rule_registry(), cfg_.max_candidates);
  t_ = 0;
  done_ = false;
  rt0_ = rt_prev_ = rt_final_ = measure();
  if (rt0_ <= 0.0) throw InvalidGraph("initial latency must be positive");
  rule_counts_.clear();
  trace_.clear();
  return make_observation();
}

StepResult Environment::step(int action) {
  if (done_) throw InvalidAction("step after episode end");
  if (action < 0 || action >= kActionSpace)
    throw InvalidAction("action index out of range");
  bool noop = action == kNoOpSlot;
  if (!noop && (action >= static_cast<int>(candidates_.size())))
    throw InvalidAction("action " + std::to_string(action) + " is masked out");

  StepResult r;
  if (noop) {
    done_ = true;
  } else {
    const Candidate& c = candidates_[action];
    r.applied_rule = c.rule_id;
    rule_counts_[c.rule_id]++;
    current_ = c.graph;
    t_++;
    candidates_ = generate_candidates(current_, rule_registry(), cfg_.max_candidates);
    if (t_ >= cfg_.horizon || candidates_.empty()) done_ = true;
  }

  r.measured = done_ || (t_ % cfg_.feedback_period == 0);
  CostReport rep = cost_report(current_, cfg_.cost);
  r.rt_e2e = rep.e2e_total;
  r.rt_cost_model = rep.cost_model_total;
  r.folded_count = static_cast<int>(rep.folded.size());
  if (r.measured) {
    r.reward = reward_fn_(rt0_, rt_prev_, rep.e2e_total);
    rt_prev_ = rep.e2e_total;
  } else {
    r.reward = cfg_.explore_reward;
  }
  r.done = done_;
  if (done_) rt_final_ = rep.e2e_total;
  trace_.push_back(TraceRow{t_, action, r.applied_rule, r.reward, rep.e2e_total,
                            rep.cost_model_total});
  r.observation = make_observation();
  return r;
}

EpisodeSummary Environment::episode_summary() const {
  if (!done_) throw EpisodeNotDone("episode still running");
  EpisodeSummary s;
  s.rt0 = rt0_;
  s.rt_final = rt_final_;
  s.speedup = rt0_ / rt_final_;
  s.rule_counts = rule_counts_;
  for (const auto& [rid, n] : rule_counts_) s.steps += n;
  return s;
}

void append_trace_jsonl(const std::string& path, const std::string& benchmark,
                        const std::string& agent, int episode,
                        const std::vector<TraceRow>& rows) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw GraphError("cannot open " + path + " for writing");
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["benchmark"] = benchmark;
    j["agent"] = agent;
    j["episode"] = episode;
    j["t"] = r.t;
    j["action"] = r.action;
    j["rule_id"] = r.rule_id;
    j["reward"] = r.reward;
    j["e2e"] = r.e2e;
    j["cost_model"] = r.cost_model;
    f << j.dump() << "\n";
  }
}

std::vector<TraceFile> load_traces_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open trace file " + path);
  std::vector<TraceFile> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(f, line)) {
    lineno++;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    std::string bench = j.value("benchmark", "");
    std::string agent = j.value("agent", "");
    int episode = j.value("episode", 0);
    if (out.empty() || out.back().benchmark != bench ||
        out.back().agent != agent || out.back().episode != episode)
      out.push_back(TraceFile{bench, agent, episode, {}});
    out.back().rows.push_back(TraceRow{j["t"].get<int>(), j["action"].get<int>(),
                                       j.value("rule_id", ""),
                                       j["reward"].get<double>(),
                                       j["e2e"].get<double>(),
                                       j["cost_model"].get<double>()});
  }
  if (out.empty()) throw EmptyTrace("no rows in " + path);
  return out;
}

}  // namespace tg
