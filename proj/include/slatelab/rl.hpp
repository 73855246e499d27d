#pragma once

#include "slatelab/critic.hpp"
#include "slatelab/policy.hpp"

namespace slatelab {

enum class Algorithm { reinforce, ppo, ppo_exploration };
enum class RewardMode { model, oracle };

const char* algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& s);

struct TrainConfig {
  double gamma = 1.0;          // discount over the k-step episode
  double bonus_coef = 1.0;     // c, weight of the diversity bonus
  double clip_eps = 0.2;       // epsilon of the clipped surrogate
  int batch_slates = 64;       // m
  int epochs_per_batch = 4;
  int num_batches = 150;
  double learning_rate = 0.05;
  RewardMode reward_mode = RewardMode::model;
  bool use_mean_baseline = false;
  int eval_contexts = 64;

  void validate() const;
};

struct TrajectoryStep {
  int context_index = 0;
  std::vector<int> prefix;  // actions taken before this step
  int action = 0;
  double reward = 0.0;         // r_t
  double d_norm = 0.0;         // ||D_it,a_t||_2
  double ret = 0.0;            // R_t
  double adv = 0.0;            // A_t = R_t + c * d_norm
  double behavior_prob = 0.0;  // pi(a_t | s_t) at collection time
};

/// R_t = r_t + gamma * R_{t+1}; A_t = R_t + c * d_norm_t.
void fill_returns(std::vector<double>& returns, std::vector<double>& advs,
                  const std::vector<double>& rewards,
                  const std::vector<double>& d_norms, double gamma, double c);

struct PolicyDataset {
  const std::vector<CandidateSet>* candidates = nullptr;
  /// Logged slates aligned with the candidate sets; required for
  /// RewardMode::oracle (replay of logged interactions).
  const std::vector<SlateSample>* logged = nullptr;
};

/// Collects m episodes. Model reward: sample a rollout and take the critic's
/// per-item conversion probabilities of the generated slate. Oracle reward:
/// replay the logged slate with its logged binary labels (the model-free
/// comparison setting).
std::vector<TrajectoryStep> collect_batch(const PolicyModel& policy,
                                          const CriticModel* critic,
                                          const PolicyDataset& data,
                                          const TrainConfig& cfg, double c,
                                          Rng& rng);

/// One ascent step on mean(R_t * log pi(a_t|s_t)).
void reinforce_update(const std::vector<TrajectoryStep>& buffer,
                      PolicyModel& policy, const PolicyDataset& data,
                      double learning_rate);

/// epochs_per_batch full-batch ascent steps on the clipped surrogate;
/// ratios are recomputed against the stored behavior probabilities.
void ppo_update(const std::vector<TrajectoryStep>& buffer, PolicyModel& policy,
                const PolicyDataset& data, const TrainConfig& cfg);

/// Value of the clipped surrogate at the current parameters (diagnostic).
double ppo_surrogate_value(const std::vector<TrajectoryStep>& buffer,
                           const PolicyModel& policy, const PolicyDataset& data,
                           double clip_eps);

struct CurvePoint {
  int batch = 0;
  double mean_slate_score = 0.0;    // critic score of greedy rollouts
  double mean_brand_entropy = 0.0;  // of the same greedy slates
  double mean_bonus = 0.0;          // c * d_norm averaged over the buffer
};

struct PolicyTrainResult {
  std::vector<CurvePoint> curve;
};

/// Batch loop of the exploration trainer; algorithm selects the update rule
/// and bonus: reinforce (c=0), ppo (c=0), ppo_exploration (c=cfg.bonus_coef).
PolicyTrainResult train_policy(Algorithm algo, PolicyModel& policy,
                               const CriticModel& critic,
                               const PolicyDataset& data,
                               const TrainConfig& cfg, Rng& rng);

}  // namespace slatelab
