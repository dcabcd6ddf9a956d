#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "tg/bench.hpp"
#include "tg/ppo.hpp"

using namespace tg;

namespace {

PolicyConfig tiny_cfg() {
  PolicyConfig c;
  c.hidden = 8;
  c.gat_layers = 2;
  c.mlp_h1 = 16;
  c.mlp_h2 = 8;
  return c;
}

}  // namespace

TEST_CASE("GAE closed-form examples") {
  auto [adv, vt] = compute_gae({1.0}, {0.5}, {1}, 0.99, 0.95);
  REQUIRE(adv.size() == 1);
  CHECK(adv[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(vt[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lambda=0 reduces GAE to TD residuals") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> r(8), v(8);
  std::vector<char> d(8, 0);
  d[7] = 1;
  for (int i = 0; i < 8; ++i) {
    r[i] = u(rng);
    v[i] = u(rng);
  }
  auto [adv, vt] = compute_gae(r, v, d, 0.99, 0.0);
  for (int i = 0; i < 8; ++i) {
    double vnext = (i + 1 < 8 && !d[i]) ? v[i + 1] : 0.0;
    double delta = r[i] + 0.99 * vnext - v[i];
    CHECK(adv[i] == doctest::Approx(delta).epsilon(1e-12));
    CHECK(vt[i] == doctest::Approx(delta + v[i]).epsilon(1e-12));
  }
}

TEST_CASE("GAE equals the direct-sum oracle on random episodes") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::uniform_int_distribution<int> len(1, 12);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    int n = len(rng);
    std::vector<double> r(n), v(n);
    std::vector<char> d(n, 0);
    d[n - 1] = 1;
    for (int i = 0; i < n; ++i) {
      r[i] = u(rng);
      v[i] = u(rng);
    }
    double gamma = 0.9 + 0.09 * u(rng) / 2.0, lam = 0.5 + 0.2 * u(rng) / 2.0;
    auto [adv, vt] = compute_gae(r, v, d, gamma, lam);
    // Direct sum: A_t = sum_l (gamma lam)^l delta_{t+l} within the episode.
    for (int t = 0; t < n; ++t) {
      double sum = 0.0, w = 1.0;
      for (int l = t; l < n; ++l) {
        double vnext = (l + 1 < n && !d[l]) ? v[l + 1] : 0.0;
        sum += w * (r[l] + gamma * vnext - v[l]);
        if (d[l]) break;
        w *= gamma * lam;
      }
      worst = std::max(worst, std::abs(adv[t] - sum));
      worst = std::max(worst, std::abs(vt[t] - (sum + v[t])));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("GAE input misalignment throws") {
  CHECK_THROWS_AS(compute_gae({1.0, 2.0}, {0.5}, {0, 1}, 0.99, 0.95),
                  LengthMismatch);
  CHECK_THROWS_AS(compute_gae({1.0}, {0.5}, {0, 1}, 0.99, 0.95), LengthMismatch);
}

TEST_CASE("PPO clip arithmetic") {
  CHECK(clipped_objective(1.5, 1.0, 0.2) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(clipped_objective(0.5, -1.0, 0.2) == doctest::Approx(-0.8).epsilon(1e-12));
  // rho = 1: surrogate equals the advantage itself.
  for (double a : {-2.0, -0.5, 0.0, 0.7, 3.0})
    CHECK(clipped_objective(1.0, a, 0.2) == doctest::Approx(a).epsilon(1e-12));
  // Positive advantage caps the upside; negative advantage caps the ratio
  // from below.
  CHECK(clipped_objective(10.0, 1.0, 0.2) == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(clipped_objective(0.01, 1.0, 0.2) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(clipped_objective(10.0, -1.0, 0.2) == doctest::Approx(-10.0).epsilon(1e-12));
}

TEST_CASE("zero update rounds leave parameters untouched") {
  PolicyNet net(0, tiny_cfg());
  std::string before = net.store().save();
  EnvConfig env_cfg;
  env_cfg.horizon = 8;
  TrainConfig tc;
  tc.episodes = 5;     // fewer than update_every = 10: no update happens
  tc.update_every = 10;
  PpoTrainer trainer(net, env_cfg, tc);
  auto log = trainer.train(gen_benchmark("trap"));
  CHECK(log.size() == 5);
  CHECK(net.store().save() == before);
  for (const auto& row : log) {
    CHECK(row.loss_clip == 0.0);
    CHECK(row.loss_vf == 0.0);
  }
}

TEST_CASE("training log has one row per episode and updates change params") {
  PolicyNet net(1, tiny_cfg());
  std::string before = net.store().save();
  EnvConfig env_cfg;
  env_cfg.horizon = 6;
  TrainConfig tc;
  tc.episodes = 12;
  tc.update_every = 4;
  tc.batch_size = 8;
  tc.epochs = 2;
  PpoTrainer trainer(net, env_cfg, tc);
  int hooks = 0;
  auto log = trainer.train(gen_benchmark("trap"),
                           [&](int, const Environment&, const EpisodeSummary&) {
                             hooks++;
                           });
  CHECK(log.size() == 12);
  CHECK(hooks == 12);
  for (int i = 0; i < 12; ++i) CHECK(log[i].episode == i + 1);
  CHECK(net.store().save() != before);
  CHECK(log.back().loss_vf >= 0.0);
}

TEST_CASE("first minibatch has rho = 1 up to float error") {
  PolicyNet net(2, tiny_cfg());
  EnvConfig env_cfg;
  env_cfg.horizon = 6;
  TrainConfig tc;
  PpoTrainer trainer(net, env_cfg, tc);
  CompGraph g0 = gen_benchmark("trap");
  std::vector<std::vector<Transition>> eps;
  for (int i = 0; i < 4; ++i) {
    Environment env(env_cfg);
    eps.push_back(trainer.rollout(env, g0).first);
  }
  UpdateStats st = trainer.update(std::move(eps));
  CHECK(st.first_epoch_max_ratio_err < 1e-6);
}

TEST_CASE("greedy decode is deterministic") {
  PolicyNet net(3, tiny_cfg());
  CompGraph g0 = gen_benchmark("trap");
  EnvConfig env_cfg;
  Environment e1(env_cfg), e2(env_cfg);
  EpisodeSummary a = evaluate_policy(net, e1, g0);
  EpisodeSummary b = evaluate_policy(net, e2, g0);
  CHECK(a.speedup == b.speedup);
  CHECK(a.steps == b.steps);
  CHECK(a.rule_counts == b.rule_counts);
  CHECK(a.rt_final == b.rt_final);
}

TEST_CASE("rollout log-probs match the sampled distribution") {
  PolicyNet net(4, tiny_cfg());
  EnvConfig env_cfg;
  env_cfg.horizon = 5;
  TrainConfig tc;
  PpoTrainer trainer(net, env_cfg, tc);
  Environment env(env_cfg);
  auto [traj, summary] = trainer.rollout(env, gen_benchmark("trap"));
  REQUIRE(!traj.empty());
  for (const auto& tr : traj) {
    CHECK(tr.meta.mask[tr.action]);
    PolicyOutput po = net.policy_value(tr.meta);
    CHECK(tr.logp == doctest::Approx(std::log(po.probs[tr.action])).epsilon(1e-9));
  }
  CHECK(summary.steps <= env_cfg.horizon);
}
