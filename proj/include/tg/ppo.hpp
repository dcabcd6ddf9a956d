#pragma once

#include <functional>
#include <random>
#include <utility>

#include "tg/env.hpp"
#include "tg/gnn.hpp"

namespace tg {

struct TrainConfig {
  double lr = 5e-4;
  double c1 = 0.5;          // value loss coefficient
  double c2 = 0.01;         // entropy loss coefficient
  double clip_eps = 0.2;
  double gamma = 0.99;
  double lam = 0.95;        // GAE decay
  double grad_clip = 0.5;
  int update_every = 10;    // episodes per update round
  int batch_size = 16;
  int epochs = 4;
  int episodes = 1000;
  uint64_t seed = 0;
};

// delta_t = r_t + gamma V_{t+1} (1-done_t) - V_t
// A_t = delta_t + gamma lam (1-done_t) A_{t+1}; targets are A + V.
std::pair<std::vector<double>, std::vector<double>> compute_gae(
    const std::vector<double>& rewards, const std::vector<double>& values,
    const std::vector<char>& dones, double gamma, double lam);

// min(rho * adv, clip(rho, 1-eps, 1+eps) * adv); one sample's surrogate term.
double clipped_objective(double rho, double adv, double eps);

struct Transition {
  MetaGraph meta;
  int action = 0;     // slot index
  int row = 0;        // row in the forward logits for this slot
  double logp = 0.0;  // under the behaviour policy
  double value = 0.0;
  double reward = 0.0;
  bool done = false;
  double advantage = 0.0;
  double vtarget = 0.0;
};

struct UpdateStats {
  double loss_clip = 0.0;
  double loss_vf = 0.0;
  double entropy = 0.0;
  double first_epoch_max_ratio_err = 0.0;  // max |rho - 1| before any step
};

struct TrainLogRow {
  int episode = 0;
  double episode_return = 0.0;
  double final_speedup = 1.0;
  double loss_clip = 0.0;
  double loss_vf = 0.0;
  double entropy = 0.0;
  double wallclock_s = 0.0;
};

class PpoTrainer {
 public:
  PpoTrainer(PolicyNet& net, EnvConfig env_cfg, TrainConfig cfg);

  using EpisodeHook =
      std::function<void(int episode, const Environment&, const EpisodeSummary&)>;

  std::vector<TrainLogRow> train(const CompGraph& g0, EpisodeHook hook = {});

  // One sampled episode; transitions carry behaviour-policy log-probs.
  std::pair<std::vector<Transition>, EpisodeSummary> rollout(Environment& env,
                                                             const CompGraph& g0);
  // GAE + normalisation + epochs of clipped minibatch updates.
  UpdateStats update(std::vector<std::vector<Transition>> episodes);

 private:
  UpdateStats run_minibatches(std::vector<Transition>& batch);

  PolicyNet& net_;
  EnvConfig env_cfg_;
  TrainConfig cfg_;
  std::mt19937_64 rng_;
};

// Greedy decode (argmax of masked probs); deterministic.
EpisodeSummary evaluate_policy(PolicyNet& net, Environment& env,
                               const CompGraph& g0);

}  // namespace tg
