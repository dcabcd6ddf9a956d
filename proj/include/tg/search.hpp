#pragma once

#include <string>
#include <vector>

#include "tg/cost.hpp"
#include "tg/env.hpp"
#include "tg/rewrite.hpp"

namespace tg {

enum class CostFn { kCostModel, kE2e };

double eval_cost(const CompGraph& g, CostFn fn, const CostParams& p);

struct SearchResult {
  CompGraph graph;
  double final_cost = 0.0;
  EpisodeSummary summary;          // same schema as the environment's
  std::vector<TraceRow> trace;
  std::vector<std::string> sequence;  // applied rule ids in order
};

// Greedy substitution: repeatedly apply the candidate minimising cost_fn,
// stop as soon as no candidate improves. Deterministic tie-break by
// candidate order (rule registry order, then anchor).
SearchResult greedy_optimise(const CompGraph& g0,
                             const std::vector<RewriteRule>& rules, CostFn fn,
                             const CostParams& params);

// Bounded exhaustive search, memoised on canonical_hash; exact within
// depth. Throws BudgetExceeded past expansion_cap states.
SearchResult exhaustive_optimise(const CompGraph& g0,
                                 const std::vector<RewriteRule>& rules,
                                 int depth, CostFn fn, const CostParams& params,
                                 int64_t expansion_cap = 1000000);

// Uniform random valid actions (No-Op included); best episode of N.
SearchResult random_optimise(const CompGraph& g0,
                             const std::vector<RewriteRule>& rules,
                             uint64_t seed, int episodes, CostFn fn,
                             const CostParams& params, int horizon = 100);

}  // namespace tg
