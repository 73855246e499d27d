#include "slatelab/rl.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "slatelab/eval.hpp"
#include "slatelab/optim.hpp"

namespace slatelab {

const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::reinforce: return "reinforce";
    case Algorithm::ppo: return "ppo";
    case Algorithm::ppo_exploration: return "ppo-exploration";
  }
  throw DomainError("unknown algorithm");
}

Algorithm algorithm_from_name(const std::string& s) {
  if (s == "reinforce") return Algorithm::reinforce;
  if (s == "ppo") return Algorithm::ppo;
  if (s == "ppo-exploration") return Algorithm::ppo_exploration;
  throw DomainError("unknown algorithm: " + s);
}

void TrainConfig::validate() const {
  if (gamma < 0.0 || gamma > 1.0)
    throw DomainError("train config: gamma must be in [0,1]");
  if (bonus_coef < 0.0) throw DomainError("train config: bonus_coef must be >= 0");
  if (clip_eps <= 0.0 || clip_eps >= 1.0)
    throw DomainError("train config: clip_eps must be in (0,1)");
  if (batch_slates < 1) throw DomainError("train config: batch_slates must be >= 1");
  if (epochs_per_batch < 1)
    throw DomainError("train config: epochs_per_batch must be >= 1");
}

void fill_returns(std::vector<double>& returns, std::vector<double>& advs,
                  const std::vector<double>& rewards,
                  const std::vector<double>& d_norms, double gamma, double c) {
  const std::size_t k = rewards.size();
  if (d_norms.size() != k)
    throw DimensionError("fill_returns: reward/bonus length mismatch");
  returns.assign(k, 0.0);
  advs.assign(k, 0.0);
  double running = 0.0;
  for (std::size_t i = k; i > 0; --i) {
    running = rewards[i - 1] + gamma * running;
    returns[i - 1] = running;
    advs[i - 1] = running + c * d_norms[i - 1];
  }
}

std::vector<TrajectoryStep> collect_batch(const PolicyModel& policy,
                                          const CriticModel* critic,
                                          const PolicyDataset& data,
                                          const TrainConfig& cfg, double c,
                                          Rng& rng) {
  if (data.candidates == nullptr || data.candidates->empty())
    throw DataError("collect_batch: no candidate sets");
  if (static_cast<std::size_t>(cfg.batch_slates) > data.candidates->size())
    throw DataError("collect_batch: dataset smaller than batch size");
  if (cfg.reward_mode == RewardMode::oracle &&
      (data.logged == nullptr || data.logged->size() != data.candidates->size()))
    throw DataError("collect_batch: oracle reward mode needs aligned logged slates");
  if (cfg.reward_mode == RewardMode::model && critic == nullptr)
    throw DataError("collect_batch: model reward mode needs a critic");

  const int k = policy.config().slate_size;
  std::vector<TrajectoryStep> buffer;
  buffer.reserve(static_cast<std::size_t>(cfg.batch_slates * k));
  for (int ep = 0; ep < cfg.batch_slates; ++ep) {
    const int ci = static_cast<int>(rng.uniform_int(data.candidates->size()));
    const CandidateSet& cs = (*data.candidates)[static_cast<std::size_t>(ci)];

    std::vector<int> slate;
    std::vector<double> step_probs, d_norms, rewards;
    if (cfg.reward_mode == RewardMode::model) {
      RolloutResult r = policy.rollout(cs, RolloutMode::sample, &rng);
      slate = std::move(r.slate);
      step_probs = std::move(r.step_probs);
      d_norms = std::move(r.d_norms);
      std::vector<ItemFeatures> items;
      items.reserve(slate.size());
      for (int a : slate) items.push_back(cs.items[static_cast<std::size_t>(a)]);
      Tape t;
      CriticOutput out = critic->forward(t, cs.context, items);
      rewards = out.item_probs;
    } else {
      // replay the logged slate with its logged labels
      const SlateSample& logged = (*data.logged)[static_cast<std::size_t>(ci)];
      std::unordered_map<int, int> by_id;
      for (std::size_t j = 0; j < cs.items.size(); ++j)
        by_id.emplace(cs.items[j].item_id, static_cast<int>(j));
      MdpState state = initial_state(cs);
      Tape t;
      PolicyModel::EpisodeCtx ctx = policy.episode_ctx(t, cs);
      const std::vector<int> labels = binary_labels(logged);
      for (std::size_t pos = 0; pos < logged.items.size(); ++pos) {
        auto it = by_id.find(logged.items[pos].item_id);
        if (it == by_id.end())
          throw DataError("collect_batch: logged item missing from candidates");
        const int action = it->second;
        PolicyModel::ForwardVars fv = policy.forward(t, ctx, state);
        step_probs.push_back(t.val(fv.probs).data[static_cast<std::size_t>(action)]);
        d_norms.push_back(policy.d_norm(state, action));
        rewards.push_back(static_cast<double>(labels[pos]));
        slate.push_back(action);
        state = step(state, action);
      }
    }

    std::vector<double> returns, advs;
    fill_returns(returns, advs, rewards, d_norms, cfg.gamma, c);
    for (std::size_t tpos = 0; tpos < slate.size(); ++tpos) {
      TrajectoryStep s;
      s.context_index = ci;
      s.prefix.assign(slate.begin(), slate.begin() + static_cast<long>(tpos));
      s.action = slate[tpos];
      s.reward = rewards[tpos];
      s.d_norm = d_norms[tpos];
      s.ret = returns[tpos];
      s.adv = advs[tpos];
      s.behavior_prob = step_probs[tpos];
      buffer.push_back(std::move(s));
    }
  }
  if (cfg.use_mean_baseline) {
    double mean = 0.0;
    for (const auto& s : buffer) mean += s.adv;
    mean /= static_cast<double>(buffer.size());
    for (auto& s : buffer) s.adv -= mean;
  }
  return buffer;
}

namespace {

/// Recompute pi(a_t|s_t) for each step on one tape; episodes (grouped by
/// context_index + growing prefix) share their episode context.
std::vector<Var> step_probs_on_tape(Tape& t, const PolicyModel& policy,
                                    const PolicyDataset& data,
                                    const std::vector<TrajectoryStep>& buffer) {
  std::vector<Var> probs;
  probs.reserve(buffer.size());
  PolicyModel::EpisodeCtx ctx;
  int ctx_index = -1;
  for (const auto& s : buffer) {
    if (s.context_index != ctx_index || s.prefix.empty()) {
      ctx = policy.episode_ctx(
          t, (*data.candidates)[static_cast<std::size_t>(s.context_index)]);
      ctx_index = s.context_index;
    }
    MdpState state =
        initial_state((*data.candidates)[static_cast<std::size_t>(s.context_index)]);
    state.selected = s.prefix;
    PolicyModel::ForwardVars fv = policy.forward(t, ctx, state);
    probs.push_back(t.pick(fv.probs, static_cast<std::size_t>(s.action)));
  }
  return probs;
}

}  // namespace

void reinforce_update(const std::vector<TrajectoryStep>& buffer,
                      PolicyModel& policy, const PolicyDataset& data,
                      double learning_rate) {
  if (buffer.empty()) throw DataError("reinforce_update: empty buffer");
  Tape t;
  std::vector<Var> probs = step_probs_on_tape(t, policy, data, buffer);
  std::vector<Var> terms;
  terms.reserve(buffer.size());
  for (std::size_t i = 0; i < buffer.size(); ++i)
    terms.push_back(t.scale(t.log_(probs[i]), buffer[i].ret));
  Var surrogate = t.mean(t.stack_rows(std::span<const Var>(terms)));
  Var loss = t.scale(surrogate, -1.0);
  auto grads = t.backward(loss);
  for (const auto& [name, g] : grads)
    if (!g.finite())
      throw NumericError("reinforce_update: non-finite gradient for " + name);
  Sgd sgd(learning_rate);
  sgd.step(policy.params(), grads);
}

void ppo_update(const std::vector<TrajectoryStep>& buffer, PolicyModel& policy,
                const PolicyDataset& data, const TrainConfig& cfg) {
  if (buffer.empty()) throw DataError("ppo_update: empty buffer");
  Sgd sgd(cfg.learning_rate);
  for (int epoch = 0; epoch < cfg.epochs_per_batch; ++epoch) {
    Tape t;
    std::vector<Var> probs = step_probs_on_tape(t, policy, data, buffer);
    std::vector<Var> terms;
    terms.reserve(buffer.size());
    for (std::size_t i = 0; i < buffer.size(); ++i) {
      const TrajectoryStep& s = buffer[i];
      if (s.behavior_prob <= 0.0 || !std::isfinite(s.behavior_prob))
        throw NumericError("ppo_update: invalid behavior probability");
      Var ratio = t.scale(probs[i], 1.0 / s.behavior_prob);
      if (!std::isfinite(t.scalar_val(ratio)))
        throw NumericError("ppo_update: non-finite ratio");
      Var unclipped = t.scale(ratio, s.adv);
      Var clipped = t.scale(t.clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps),
                            s.adv);
      terms.push_back(t.min2(unclipped, clipped));
    }
    Var surrogate = t.mean(t.stack_rows(std::span<const Var>(terms)));
    Var loss = t.scale(surrogate, -1.0);
    auto grads = t.backward(loss);
    for (const auto& [name, g] : grads)
      if (!g.finite())
        throw NumericError("ppo_update: non-finite gradient for " + name);
    sgd.step(policy.params(), grads);
  }
}

double ppo_surrogate_value(const std::vector<TrajectoryStep>& buffer,
                           const PolicyModel& policy, const PolicyDataset& data,
                           double clip_eps) {
  Tape t;
  std::vector<Var> probs = step_probs_on_tape(t, policy, data, buffer);
  KahanSum sum;
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const TrajectoryStep& s = buffer[i];
    const double ratio = t.scalar_val(probs[i]) / s.behavior_prob;
    const double clipped =
        std::min(std::max(ratio, 1.0 - clip_eps), 1.0 + clip_eps);
    sum.add(std::min(ratio * s.adv, clipped * s.adv));
  }
  return sum.value() / static_cast<double>(buffer.size());
}

PolicyTrainResult train_policy(Algorithm algo, PolicyModel& policy,
                               const CriticModel& critic,
                               const PolicyDataset& data,
                               const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  const double c =
      algo == Algorithm::ppo_exploration ? cfg.bonus_coef : 0.0;
  const std::size_t n_eval = std::min<std::size_t>(
      static_cast<std::size_t>(cfg.eval_contexts), data.candidates->size());

  PolicyTrainResult result;
  for (int batch = 0; batch < cfg.num_batches; ++batch) {
    std::vector<TrajectoryStep> buffer =
        collect_batch(policy, &critic, data, cfg, c, rng);
    if (algo == Algorithm::reinforce) {
      reinforce_update(buffer, policy, data, cfg.learning_rate);
    } else {
      ppo_update(buffer, policy, data, cfg);
    }

    CurvePoint pt;
    pt.batch = batch;
    KahanSum score, entropy;
    std::vector<std::vector<ItemFeatures>> greedy_slates;
    for (std::size_t i = 0; i < n_eval; ++i) {
      const CandidateSet& cs = (*data.candidates)[i];
      RolloutResult r = policy.rollout(cs, RolloutMode::greedy, nullptr);
      std::vector<ItemFeatures> items;
      for (int a : r.slate) items.push_back(cs.items[static_cast<std::size_t>(a)]);
      Tape t;
      score.add(critic.forward(t, cs.context, items).slate_prob);
      greedy_slates.push_back(std::move(items));
    }
    pt.mean_slate_score = score.value() / static_cast<double>(n_eval);
    pt.mean_brand_entropy =
        slate_entropy(greedy_slates, EntropyFeature::brand);
    KahanSum bonus;
    for (const auto& s : buffer) bonus.add(c * s.d_norm);
    pt.mean_bonus = bonus.value() / static_cast<double>(buffer.size());
    result.curve.push_back(pt);
  }
  return result;
}

}  // namespace slatelab
