#pragma once

#include <span>

#include "slatelab/data.hpp"

namespace slatelab {

struct OracleConfig {
  double position_decay = 0.92;       // in (0, 1]
  double similarity_penalty = 0.15;   // >= 0
  double price_outlier_boost = -0.3;  // applied >= 2 buckets above slate median
  double base_purchase_rate = 0.03;   // in (0, 1)
  std::uint64_t seed = 42;

  void validate() const;
};

/// Ground-truth user model over a hash-derived item catalog. Generates
/// candidate sets (query-concentrated, LTR-sorted), samples interaction
/// labels with position decay, similarity saturation, price-outlier and
/// session-preference effects, and exposes its own purchase probabilities
/// in closed form.
class Oracle {
 public:
  Oracle(OracleConfig cfg, VocabConfig vocab);

  const OracleConfig& config() const { return cfg_; }
  const VocabConfig& vocab() const { return vocab_; }

  /// Static catalog attributes of an item id (no position hint).
  ItemFeatures item_features(int item_id) const;

  QueryContext sample_context(Rng& rng) const;
  CandidateSet sample_candidate_set(int n, Rng& rng) const;

  /// Point propensity before any slate-composition effect. The LTR scorer
  /// sees the variant without the real-time session boost.
  double point_propensity(const QueryContext& ctx, const ItemFeatures& item,
                          bool with_session) const;

  /// Per-position purchase probabilities of an ordered slate (closed form).
  std::vector<double> slate_probs(const QueryContext& ctx,
                                  std::span<const ItemFeatures> slate) const;

  std::vector<Label> slate_response(const QueryContext& ctx,
                                    std::span<const ItemFeatures> slate,
                                    Rng& rng) const;

  /// 1 - prod(1 - p_pos) under the oracle's own probabilities.
  double slate_value(const QueryContext& ctx,
                     std::span<const ItemFeatures> slate) const;

 private:
  double session_affinity(const SessionBehavior& s, const ItemFeatures& item) const;
  double query_match(int query_id, const ItemFeatures& item) const;
  double user_match(const QueryContext& ctx, const ItemFeatures& item) const;
  int hot_category(int query_id, int slot) const;
  int hot_brand(int query_id, int slot) const;
  int draw_biased_item(int query_id, Rng& rng) const;

  OracleConfig cfg_;
  VocabConfig vocab_;
  std::vector<std::vector<int>> items_by_category_;
};

double slate_value_from_probs(std::span<const double> probs);

}  // namespace slatelab
