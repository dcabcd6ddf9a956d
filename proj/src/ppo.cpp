#include "tg/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

namespace tg {

std::pair<std::vector<double>, std::vector<double>> compute_gae(
    const std::vector<double>& rewards, const std::vector<double>& values,
    const std::vector<char>& dones, double gamma, double lam) {
  if (rewards.size() != values.size() || rewards.size() != dones.size())
    throw LengthMismatch("GAE inputs must be aligned");
  size_t n = rewards.size();
  std::vector<double> adv(n, 0.0), vtarget(n, 0.0);
  double a_next = 0.0;
  for (size_t i = n; i-- > 0;) {
    double not_done = dones[i] ? 0.0 : 1.0;
    double v_next = (i + 1 < n) ? values[i + 1] : 0.0;
    double delta = rewards[i] + gamma * v_next * not_done - values[i];
    a_next = delta + gamma * lam * not_done * a_next;
    adv[i] = a_next;
    vtarget[i] = adv[i] + values[i];
  }
  return {adv, vtarget};
}

double clipped_objective(double rho, double adv, double eps) {
  return std::min(rho * adv, std::clamp(rho, 1.0 - eps, 1.0 + eps) * adv);
}

PpoTrainer::PpoTrainer(PolicyNet& net, EnvConfig env_cfg, TrainConfig cfg)
    : net_(net), env_cfg_(std::move(env_cfg)), cfg_(cfg), rng_(cfg.seed) {}

std::pair<std::vector<Transition>, EpisodeSummary> PpoTrainer::rollout(
    Environment& env, const CompGraph& g0) {
  std::vector<Transition> traj;
  Observation obs = env.reset(g0);
  while (!env.done()) {
    PolicyOutput po = net_.policy_value(obs.meta);
    // Valid slots in row order: candidates 0..A-1, then No-Op.
    std::vector<int> slots;
    for (int s = 0; s < kActionSpace - 1; ++s)
      if (obs.meta.mask[s]) slots.push_back(s);
    slots.push_back(kNoOpSlot);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double x = u(rng_), acc = 0.0;
    int action = slots.back();
    for (int s : slots) {
      acc += po.probs[s];
      if (x <= acc) {
        action = s;
        break;
      }
    }
    Transition tr;
    tr.meta = obs.meta;
    tr.action = action;
    tr.row = action == kNoOpSlot ? static_cast<int>(slots.size()) - 1 : action;
    tr.logp = std::log(std::max(po.probs[action], 1e-300));
    tr.value = po.value;
    StepResult sr = env.step(action);
    tr.reward = sr.reward;
    tr.done = sr.done;
    traj.push_back(std::move(tr));
    obs = sr.observation;
  }
  return {std::move(traj), env.episode_summary()};
}

UpdateStats PpoTrainer::run_minibatches(std::vector<Transition>& batch) {
  UpdateStats stats;
  int nstats = 0;
  // theta == theta_k only until the first optimiser step of this update.
  bool pre_first_step = true;
  for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
    std::vector<size_t> idx(batch.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng_);
    for (size_t start = 0; start < idx.size(); start += cfg_.batch_size) {
      size_t end = std::min(idx.size(), start + cfg_.batch_size);
      Tape tape;
      Tape::Ref total = tape.constant(Tensor2D(1, 1));
      double mb_clip = 0.0, mb_vf = 0.0, mb_ent = 0.0;
      for (size_t k = start; k < end; ++k) {
        Transition& tr = batch[idx[k]];
        auto refs = net_.forward(tape, tr.meta);
        auto logp_all = tape.log_(refs.probs);
        auto logp = tape.gather_rows(logp_all, {tr.row});
        auto ratio = tape.exp_(tape.add_scalar(logp, -tr.logp));
        auto surr = tape.minimum(
            tape.scale(ratio, tr.advantage),
            tape.scale(tape.clamp(ratio, 1.0 - cfg_.clip_eps, 1.0 + cfg_.clip_eps),
                       tr.advantage));
        auto vdiff = tape.add_scalar(refs.value, -tr.vtarget);
        auto vf = tape.mul(vdiff, vdiff);
        auto ent = tape.scale(tape.sum_all(tape.mul(refs.probs, logp_all)), -1.0);
        auto sample_loss = tape.add(
            tape.scale(surr, -1.0),
            tape.add(tape.scale(vf, cfg_.c1), tape.scale(ent, -cfg_.c2)));
        total = tape.add(total, sample_loss);
        if (pre_first_step)
          stats.first_epoch_max_ratio_err = std::max(
              stats.first_epoch_max_ratio_err,
              std::abs(tape.val(ratio).d[0] - 1.0));
        mb_clip += -tape.val(surr).d[0];
        mb_vf += tape.val(vf).d[0];
        mb_ent += tape.val(ent).d[0];
      }
      double inv = 1.0 / static_cast<double>(end - start);
      total = tape.scale(total, inv);
      net_.store().zero_grad();
      tape.backward(total);
      net_.store().clip_grad_norm(cfg_.grad_clip);
      net_.store().adam_step(cfg_.lr);
      pre_first_step = false;
      stats.loss_clip += mb_clip * inv;
      stats.loss_vf += mb_vf * inv;
      stats.entropy += mb_ent * inv;
      nstats++;
    }
  }
  if (nstats > 0) {
    stats.loss_clip /= nstats;
    stats.loss_vf /= nstats;
    stats.entropy /= nstats;
  }
  return stats;
}

UpdateStats PpoTrainer::update(std::vector<std::vector<Transition>> episodes) {
  std::vector<Transition> batch;
  for (auto& ep : episodes) {
    std::vector<double> rewards, values;
    std::vector<char> dones;
    for (const auto& tr : ep) {
      rewards.push_back(tr.reward);
      values.push_back(tr.value);
      dones.push_back(tr.done ? 1 : 0);
    }
    auto [adv, vt] = compute_gae(rewards, values, dones, cfg_.gamma, cfg_.lam);
    for (size_t i = 0; i < ep.size(); ++i) {
      ep[i].advantage = adv[i];
      ep[i].vtarget = vt[i];
      batch.push_back(std::move(ep[i]));
    }
  }
  // Normalise advantages per update batch.
  if (batch.size() > 1) {
    double mean = 0.0;
    for (const auto& tr : batch) mean += tr.advantage;
    mean /= batch.size();
    double var = 0.0;
    for (const auto& tr : batch) var += (tr.advantage - mean) * (tr.advantage - mean);
    double sd = std::sqrt(var / batch.size());
    for (auto& tr : batch) tr.advantage = (tr.advantage - mean) / (sd + 1e-8);
  }
  return run_minibatches(batch);
}

std::vector<TrainLogRow> PpoTrainer::train(const CompGraph& g0, EpisodeHook hook) {
  auto start = std::chrono::steady_clock::now();
  std::vector<TrainLogRow> log;
  Environment env(env_cfg_);
  std::vector<std::vector<Transition>> buffer;
  UpdateStats last{};
  for (int ep = 1; ep <= cfg_.episodes; ++ep) {
    auto [traj, summary] = rollout(env, g0);
    if (hook) hook(ep, env, summary);
    double ret = 0.0;
    for (const auto& tr : traj) ret += tr.reward;
    buffer.push_back(std::move(traj));
    if (static_cast<int>(buffer.size()) >= cfg_.update_every) {
      last = update(std::move(buffer));
      buffer.clear();
    }
    TrainLogRow row;
    row.episode = ep;
    row.episode_return = ret;
    row.final_speedup = summary.speedup;
    row.loss_clip = last.loss_clip;
    row.loss_vf = last.loss_vf;
    row.entropy = last.entropy;
    row.wallclock_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    log.push_back(row);
  }
  return log;
}

EpisodeSummary evaluate_policy(PolicyNet& net, Environment& env,
                               const CompGraph& g0) {
  Observation obs = env.reset(g0);
  while (!env.done()) {
    PolicyOutput po = net.policy_value(obs.meta);
    int best = kNoOpSlot;
    double best_p = -1.0;
    for (int s = 0; s < kActionSpace; ++s)
      if (obs.meta.mask[s] && po.probs[s] > best_p) {
        best_p = po.probs[s];
        best = s;
      }
    obs = env.step(best).observation;
  }
  return env.episode_summary();
}

}  // namespace tg
