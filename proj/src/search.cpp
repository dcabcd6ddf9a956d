#include "tg/search.hpp"

#include <deque>
#include <random>
#include <set>

namespace tg {

double eval_cost(const CompGraph& g, CostFn fn, const CostParams& p) {
  return fn == CostFn::kCostModel ? cost_model_latency(g, p)
                                  : simulated_e2e_latency(g, p);
}

namespace {

void record_step(SearchResult& r, int t, int action, const std::string& rule_id,
                 double rt0, double prev_e2e, const CompGraph& g,
                 const CostParams& params) {
  double e2e = simulated_e2e_latency(g, params);
  double cm = cost_model_latency(g, params);
  r.trace.push_back(TraceRow{t, action, rule_id,
                             (prev_e2e - e2e) / rt0 * 100.0, e2e, cm});
}

void finish(SearchResult& r, const CompGraph& g0, const CostParams& params) {
  r.summary.rt0 = simulated_e2e_latency(g0, params);
  r.summary.rt_final = simulated_e2e_latency(r.graph, params);
  r.summary.speedup = r.summary.rt0 / r.summary.rt_final;
  for (const auto& rid : r.sequence) {
    r.summary.rule_counts[rid]++;
    r.summary.steps++;
  }
}

}  // namespace

SearchResult greedy_optimise(const CompGraph& g0,
                             const std::vector<RewriteRule>& rules, CostFn fn,
                             const CostParams& params) {
  SearchResult r;
  r.graph = infer_shapes(g0);
  double rt0 = simulated_e2e_latency(r.graph, params);
  double cur = eval_cost(r.graph, fn, params);
  double prev_e2e = rt0;
  int t = 0;
  for (;;) {
    auto cands = generate_candidates(r.graph, rules);
    int best = -1;
    double best_cost = cur;
    for (size_t i = 0; i < cands.size(); ++i) {
      double c = eval_cost(cands[i].graph, fn, params);
      if (c < best_cost - 1e-12) {
        best_cost = c;
        best = static_cast<int>(i);
      }
    }
    if (best < 0) break;
    r.graph = cands[best].graph;
    r.sequence.push_back(cands[best].rule_id);
    cur = best_cost;
    t++;
    record_step(r, t, best, cands[best].rule_id, rt0, prev_e2e, r.graph, params);
    prev_e2e = r.trace.back().e2e;
  }
  r.final_cost = cur;
  finish(r, g0, params);
  return r;
}

SearchResult exhaustive_optimise(const CompGraph& g0,
                                 const std::vector<RewriteRule>& rules,
                                 int depth, CostFn fn, const CostParams& params,
                                 int64_t expansion_cap) {
  CompGraph start = infer_shapes(g0);
  struct State {
    CompGraph g;
    int d;
    std::vector<int> idx_seq;  // candidate index taken at each step
  };
  std::deque<State> frontier;
  frontier.push_back({start, 0, {}});
  std::set<uint64_t> visited{canonical_hash(start)};
  double best_cost = eval_cost(start, fn, params);
  std::vector<int> best_seq;
  int64_t expansions = 0;
  while (!frontier.empty()) {
    State s = std::move(frontier.front());
    frontier.pop_front();
    if (s.d >= depth) continue;
    if (++expansions > expansion_cap)
      throw BudgetExceeded("exhaustive search exceeded " +
                           std::to_string(expansion_cap) + " expansions");
    auto cands = generate_candidates(s.g, rules);
    for (size_t i = 0; i < cands.size(); ++i) {
      const auto& c = cands[i];
      if (!visited.insert(c.digest).second) continue;
      double cost = eval_cost(c.graph, fn, params);
      auto seq = s.idx_seq;
      seq.push_back(static_cast<int>(i));
      if (cost < best_cost - 1e-12) {
        best_cost = cost;
        best_seq = seq;
      }
      frontier.push_back({c.graph, s.d + 1, std::move(seq)});
    }
  }
  // Replay the best index sequence for the trace.
  SearchResult r;
  r.graph = start;
  double rt0 = simulated_e2e_latency(start, params);
  double prev = rt0;
  int t = 0;
  for (int idx : best_seq) {
    auto cands = generate_candidates(r.graph, rules);
    const auto& c = cands.at(idx);
    r.graph = c.graph;
    r.sequence.push_back(c.rule_id);
    t++;
    record_step(r, t, idx, c.rule_id, rt0, prev, r.graph, params);
    prev = r.trace.back().e2e;
  }
  r.final_cost = eval_cost(r.graph, fn, params);
  finish(r, g0, params);
  return r;
}

SearchResult random_optimise(const CompGraph& g0,
                             const std::vector<RewriteRule>& rules,
                             uint64_t seed, int episodes, CostFn fn,
                             const CostParams& params, int horizon) {
  std::mt19937_64 rng(seed);
  CompGraph start = infer_shapes(g0);
  double rt0 = simulated_e2e_latency(start, params);
  SearchResult best;
  best.graph = start;
  best.final_cost = eval_cost(start, fn, params);
  bool have_best = false;
  for (int ep = 0; ep < episodes; ++ep) {
    SearchResult r;
    r.graph = start;
    double prev = rt0;
    for (int t = 1; t <= horizon; ++t) {
      auto cands = generate_candidates(r.graph, rules);
      // One extra slot for No-Op.
      std::uniform_int_distribution<size_t> pick(0, cands.size());
      size_t a = pick(rng);
      if (a == cands.size()) break;
      r.graph = cands[a].graph;
      r.sequence.push_back(cands[a].rule_id);
      record_step(r, t, static_cast<int>(a), cands[a].rule_id, rt0, prev,
                  r.graph, params);
      prev = r.trace.back().e2e;
      if (generate_candidates(r.graph, rules).empty()) break;
    }
    r.final_cost = eval_cost(r.graph, fn, params);
    if (!have_best || r.final_cost < best.final_cost) {
      best = std::move(r);
      have_best = true;
    }
  }
  finish(best, g0, params);
  return best;
}

}  // namespace tg
