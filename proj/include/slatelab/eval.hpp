#pragma once

#include <functional>
#include <optional>

#include "slatelab/critic.hpp"
#include "slatelab/oracle.hpp"
#include "slatelab/policy.hpp"

namespace slatelab {

/// Exact rank-based AUC with ties counted 0.5. Throws DomainError when only
/// one class is present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct AucTriple {
  double pv_pay = 0.0;
  double click_pay = 0.0;
  double slate_pay = 0.0;
};

/// Scores come from a per-sample item-probability function (index + sample),
/// so slate-input and n-input models share one evaluation path.
using ItemProbFn =
    std::function<std::vector<double>(std::size_t, const SlateSample&)>;

AucTriple auc_triple(const std::vector<SlateSample>& test, const ItemProbFn& fn,
                     int workers = 1);

AucTriple eval_critic(const CriticModel& model,
                      const std::vector<SlateSample>& test, int workers = 1);

/// Fraction of contexts where the critic scores the greedy re-ranked slate
/// strictly above the first-k LTR slate.
double replacement_ratio(const PolicyModel& policy, const CriticModel& critic,
                         const std::vector<CandidateSet>& contexts,
                         int workers = 1);

struct LoggedEpisode {
  int cs_index = 0;
  std::vector<int> slate;
  double reward = 0.0;  // items purchased in the oracle response
};

/// Sample logged episodes from a behavior policy; rewards are drawn from the
/// oracle response to the sampled slate.
std::vector<LoggedEpisode> log_episodes(const PolicyModel& behavior,
                                        const Oracle& oracle,
                                        const std::vector<CandidateSet>& contexts,
                                        std::size_t count, Rng& rng);

struct IpsResult {
  double ips = 0.0;
  double wips = 0.0;
  double se_ips = 0.0;
  double se_wips = 0.0;
};

/// Importance-weighted estimate of the target policy's reward from logged
/// episodes. Behavior probabilities are recomputed from the behavior model;
/// a zero behavior probability raises DataError naming the samples.
IpsResult ips_estimate(const PolicyModel& behavior, const PolicyModel& target,
                       const std::vector<LoggedEpisode>& logged,
                       const std::vector<CandidateSet>& contexts,
                       int workers = 1);

/// Estimator core over precomputed importance ratios (compensated sums).
IpsResult ips_from_ratios(const std::vector<double>& ratios,
                          const std::vector<double>& rewards);

double ips(const PolicyModel& behavior, const PolicyModel& target,
           const std::vector<LoggedEpisode>& logged,
           const std::vector<CandidateSet>& contexts, bool weighted);

enum class EntropyFeature { brand, price_bucket };

/// Mean within-slate Shannon entropy (natural log) of the feature value
/// distribution.
double slate_entropy(const std::vector<std::vector<ItemFeatures>>& slates,
                     EntropyFeature feature);
double entropy_of_values(const std::vector<int>& values);

/// Attention weights of the pair-influence net for one slate input.
Tensor attention_matrix(const CriticModel& model, const QueryContext& ctx,
                        std::span<const ItemFeatures> items);

void write_attention_csv(const std::string& path, const Tensor& alpha);
Tensor read_attention_csv(const std::string& path);

/// Packaged demo scenario: ten near-identical items whose only difference is
/// the price vector (4,3,5,5,5,5,5,5,4,5).
SlateSample attention_demo_slate(const VocabConfig& vocab);

/// One-sided Wilcoxon signed-rank p-value for median(a - b) > 0, normal
/// approximation with tie correction.
double wilcoxon_signed_rank_p(const std::vector<double>& a,
                              const std::vector<double>& b);

double normal_cdf(double z);

/// Index-ordered parallel map; results identical for any worker count.
void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn);

}  // namespace slatelab
