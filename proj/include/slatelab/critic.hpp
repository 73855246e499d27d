#pragma once

#include <functional>
#include <span>

#include "slatelab/data.hpp"
#include "slatelab/tape.hpp"

namespace slatelab {

struct CriticComponents {
  bool san = true;
  bool pin = true;
  bool bigru = true;
  bool fcn = true;
};

struct CriticConfig {
  int embed_dim = 8;
  int hidden_dim = 32;
  int gru_dim = 16;
  int pin_dim = 16;
  int fcn_dim = 16;
  int relpos_dim = 8;
  double attention_beta = 1.0;  // beta of the pair-influence softmax
  double loss_weight_pay = 50.0;
  double loss_weight_atc = 4.0;
  double loss_weight_click = 1.0;
  double loss_weight_impression = 0.05;
  int slate_size = 10;  // k
  CriticComponents components;

  void validate() const;
  double label_weight(Label l) const;
};

struct CriticOutput {
  std::vector<double> item_probs;  // k, clamped to (0,1)
  double slate_prob;               // 1 - prod(1 - item_probs)
  Tensor pair_attention;           // k x k, entry (j,a): weight of j on a
  Tensor pair_influence;           // k x pin_dim, row a = aggregated influence
  Var item_probs_var;              // 1 x k, live on the forward tape
  Var slate_prob_var;              // scalar
};

/// The slate evaluation model: four sub-networks over exactly k impressed
/// items feed a per-item conversion head; the slate score composes the
/// per-item probabilities. Disabled components contribute zero blocks of
/// fixed width so head dimensions never change.
class CriticModel {
 public:
  CriticModel(CriticConfig cfg, VocabConfig vocab, std::uint64_t init_seed);

  const CriticConfig& config() const { return cfg_; }
  const VocabConfig& vocab() const { return vocab_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Full forward pass; throws DimensionError unless exactly k items.
  CriticOutput forward(Tape& t, const QueryContext& ctx,
                       std::span<const ItemFeatures> items) const;

  CriticOutput forward(Tape& t, const SlateSample& sample) const {
    return forward(t, sample.context, sample.items);
  }

  /// Weighted cross-entropy of the per-item probabilities against the
  /// binary labels, weights chosen by the raw interaction label.
  Var loss(Tape& t, const CriticOutput& out,
           std::span<const Label> labels) const;

  // Sub-networks, exposed for targeted tests.
  Var embed_items(Tape& t, std::span<const ItemFeatures> items) const;
  Var su_attention_forward(Tape& t, const SessionBehavior& session,
                           Var item_vecs) const;
  Var item_states(Tape& t, Var san_out) const;
  struct PairResult {
    Var influence;  // k x pin_dim
    Tensor attention;  // k x k
  };
  PairResult pair_influence_forward(Tape& t, Var states) const;
  Var bigru_forward(Tape& t, Var states) const;
  Var feature_compare_forward(Tape& t, std::span<const ItemFeatures> items) const;

  /// Raw comparison features (match fractions + z-scores), parameter-free.
  Tensor comparison_features(std::span<const ItemFeatures> items) const;

  std::size_t item_dim() const;  // concatenated embedding + stats width

 private:
  CriticConfig cfg_;
  VocabConfig vocab_;
  ParamStore params_;
};

struct OptimizerConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 64;
  int epochs = 6;
  std::uint64_t seed = 1;
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
};

/// Mini-batch gradient descent over slate samples. Deterministic under the
/// optimizer seed; aborts with NumericError on divergence.
std::vector<EpochLog> train_critic(CriticModel& model,
                                   const std::vector<SlateSample>& dataset,
                                   const OptimizerConfig& opt);

/// n-input GRU baseline: one recurrent pass over all n LTR-ordered
/// candidates, per-item scores trained on the impressed prefix only.
class NCandBaseline {
 public:
  NCandBaseline(int embed_dim, int gru_dim, VocabConfig vocab,
                std::uint64_t init_seed);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Per-candidate probabilities, one per input item (any count).
  Var forward(Tape& t, const CandidateSet& cs) const;
  std::vector<double> scores(const CandidateSet& cs) const;

 private:
  int embed_dim_;
  int gru_dim_;
  VocabConfig vocab_;
  ParamStore params_;
};

/// Point-wise scorer over a single item's features; no slate context.
class PointwiseBaseline {
 public:
  PointwiseBaseline(int embed_dim, int hidden_dim, VocabConfig vocab,
                    std::uint64_t init_seed);

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  Var forward(Tape& t, std::span<const ItemFeatures> items) const;

 private:
  int embed_dim_;
  int hidden_dim_;
  VocabConfig vocab_;
  ParamStore params_;
};

std::vector<EpochLog> train_ncand_baseline(
    NCandBaseline& model, const std::vector<CandidateSet>& candidates,
    const std::vector<SlateSample>& logged, const CriticConfig& loss_cfg,
    const OptimizerConfig& opt);

std::vector<EpochLog> train_pointwise_baseline(
    PointwiseBaseline& model, const std::vector<SlateSample>& dataset,
    const CriticConfig& loss_cfg, const OptimizerConfig& opt);

// Shared embedding-table helpers (one table per categorical field plus raw
// stats), reused by critic, baselines and the policy.
void create_item_tables(ParamStore& ps, const VocabConfig& vocab,
                        int embed_dim, const std::string& prefix, Rng& rng);
Var embed_item_block(Tape& t, const ParamStore& ps, const VocabConfig& vocab,
                     const std::string& prefix,
                     std::span<const ItemFeatures> items);

}  // namespace slatelab
