#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <random>

#include "doctest.h"
#include "tg/bench.hpp"
#include "tg/env.hpp"

using namespace tg;

namespace {

CompGraph no_candidate_graph() {
  CompGraph g;
  int x = g.add_node(OpKind::Input, {{"shape", {4, 4}}});
  int r = g.add_node(OpKind::Relu);
  g.add_edge(x, r, 0);
  g.outputs = {r};
  return infer_shapes(std::move(g));
}

int mask_count(const MetaGraph& m) {
  int n = 0;
  for (char c : m.mask) n += c != 0;
  return n;
}

// Random valid rollout; returns the per-step rewards and measured flags.
struct Rollout {
  std::vector<double> rewards;
  std::vector<char> measured;
};

Rollout random_rollout(Environment& env, const CompGraph& g0, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Observation obs = env.reset(g0);
  Rollout out;
  while (!env.done()) {
    std::vector<int> valid;
    for (int a = 0; a < kActionSpace; ++a)
      if (obs.meta.mask[a]) valid.push_back(a);
    int a = valid[std::uniform_int_distribution<size_t>(0, valid.size() - 1)(rng)];
    StepResult r = env.step(a);
    out.rewards.push_back(r.reward);
    out.measured.push_back(r.measured);
    obs = r.observation;
  }
  return out;
}

}  // namespace

TEST_CASE("reset produces a sound observation") {
  Environment env;
  CompGraph g = gen_benchmark("trap");
  Observation obs = env.reset(g);
  auto cands = generate_candidates(g, rule_registry());
  CHECK(mask_count(obs.meta) == static_cast<int>(cands.size()) + 1);
  CHECK(obs.meta.mask[kNoOpSlot]);
  CHECK(obs.meta.candidate_rule_ids.size() == cands.size());
  CHECK_FALSE(env.done());
  CHECK(env.t() == 0);

  // Determinism: reset twice gives identical observations.
  Observation obs2 = env.reset(g);
  CHECK(obs.meta.mask == obs2.meta.mask);
  CHECK(obs.meta.node_feat.d == obs2.meta.node_feat.d);
  CHECK(obs.meta.edge_src == obs2.meta.edge_src);
  CHECK(obs.meta.candidate_rule_ids == obs2.meta.candidate_rule_ids);

  Environment bare;
  Observation o = bare.reset(no_candidate_graph());
  CHECK(mask_count(o.meta) == 1);
  CHECK(o.meta.mask[kNoOpSlot]);
}

TEST_CASE("reward schedule: 0.1 off-measurement, latency delta on measurement") {
  EnvConfig cfg;
  cfg.feedback_period = 5;
  Environment env(cfg);
  Observation obs = env.reset(gen_benchmark("trap"));
  double rt0 = simulated_e2e_latency(env.graph(), cfg.cost);

  // Steps 1..4 apply candidate 0: no measurement, constant reward.
  for (int i = 0; i < 4; ++i) {
    REQUIRE(obs.meta.mask[0]);
    StepResult r = env.step(0);
    CHECK_FALSE(r.measured);
    CHECK(r.reward == 0.1);
    obs = r.observation;
  }
  // Step 5 measures against the episode-start latency.
  REQUIRE(obs.meta.mask[0]);
  StepResult r5 = env.step(0);
  CHECK(r5.measured);
  CHECK(r5.reward ==
        doctest::Approx((rt0 - r5.rt_e2e) / rt0 * 100.0).epsilon(1e-12));
}

TEST_CASE("pluggable reward callback") {
  Environment env;
  env.set_reward_fn([](double, double, double) { return 42.0; });
  env.reset(gen_benchmark("trap"));
  StepResult r = env.step(kNoOpSlot);  // terminal step always measures
  CHECK(r.measured);
  CHECK(r.reward == 42.0);
}

TEST_CASE("No-Op at t=0 terminates with speedup 1") {
  Environment env;
  env.reset(gen_benchmark("trap"));
  StepResult r = env.step(kNoOpSlot);
  CHECK(r.done);
  CHECK(r.measured);
  CHECK(r.reward == 0.0);
  EpisodeSummary s = env.episode_summary();
  CHECK(s.speedup == 1.0);
  CHECK(s.steps == 0);
  CHECK(s.rule_counts.empty());
}

TEST_CASE("invalid actions are hard errors") {
  Environment env;
  Observation obs = env.reset(gen_benchmark("trap"));
  int n_valid = mask_count(obs.meta) - 1;  // exclude No-Op
  CHECK_THROWS_AS(env.step(n_valid), InvalidAction);      // first masked slot
  CHECK_THROWS_AS(env.step(-1), InvalidAction);
  CHECK_THROWS_AS(env.step(kActionSpace), InvalidAction);
  CHECK_THROWS_AS(env.episode_summary(), EpisodeNotDone);
  env.step(kNoOpSlot);
  CHECK_THROWS_AS(env.step(kNoOpSlot), InvalidAction);  // episode over
  CHECK_THROWS_AS(Environment().reset(CompGraph{}), InvalidGraph);
}

TEST_CASE("reward telescoping over random trajectories") {
  EnvConfig cfg;
  cfg.horizon = 20;
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Environment env(cfg);
    Rollout ro = random_rollout(env, gen_benchmark("trap"), seed);
    EpisodeSummary s = env.episode_summary();
    double sum = 0.0;
    for (size_t i = 0; i < ro.rewards.size(); ++i)
      if (ro.measured[i]) sum += ro.rewards[i];
    double expect = (s.rt0 - s.rt_final) / s.rt0 * 100.0;
    CHECK(std::abs(sum - expect) < 1e-9);
    CHECK(static_cast<int>(ro.rewards.size()) <= cfg.horizon + 1);
    int counted = 0;
    for (const auto& [rid, n] : s.rule_counts) counted += n;
    CHECK(counted == s.steps);
  }
}

TEST_CASE("fixed action sequence gives identical trajectories") {
  auto run = [] {
    Environment env;
    env.reset(gen_benchmark("mini_attention"));
    std::vector<double> rs;
    for (int i = 0; i < 6 && !env.done(); ++i) rs.push_back(env.step(0).reward);
    return std::make_pair(rs, env.trace());
  };
  auto [r1, t1] = run();
  auto [r2, t2] = run();
  CHECK(r1 == r2);
  REQUIRE(t1.size() == t2.size());
  for (size_t i = 0; i < t1.size(); ++i) {
    CHECK(t1[i].action == t2[i].action);
    CHECK(t1[i].rule_id == t2[i].rule_id);
    CHECK(t1[i].e2e == t2[i].e2e);
    CHECK(t1[i].reward == t2[i].reward);
  }
}

TEST_CASE("trace JSONL round-trips") {
  Environment env;
  env.reset(gen_benchmark("trap"));
  while (!env.done()) {
    if (env.t() >= 3) {
      env.step(kNoOpSlot);
      break;
    }
    env.step(0);
  }
  std::string path = "env_trace_test.jsonl";
  std::remove(path.c_str());
  append_trace_jsonl(path, "trap", "unit", 7, env.trace());
  auto files = load_traces_jsonl(path);
  REQUIRE(files.size() == 1);
  CHECK(files[0].benchmark == "trap");
  CHECK(files[0].agent == "unit");
  CHECK(files[0].episode == 7);
  REQUIRE(files[0].rows.size() == env.trace().size());
  for (size_t i = 0; i < files[0].rows.size(); ++i) {
    CHECK(files[0].rows[i].t == env.trace()[i].t);
    CHECK(files[0].rows[i].action == env.trace()[i].action);
    CHECK(files[0].rows[i].rule_id == env.trace()[i].rule_id);
    CHECK(files[0].rows[i].reward == env.trace()[i].reward);
    CHECK(files[0].rows[i].e2e == env.trace()[i].e2e);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_traces_jsonl("missing_trace_file.jsonl"), ParseError);

  std::string empty = "env_trace_empty.jsonl";
  { std::fclose(std::fopen(empty.c_str(), "w")); }
  CHECK_THROWS_AS(load_traces_jsonl(empty), EmptyTrace);
  std::remove(empty.c_str());
}
