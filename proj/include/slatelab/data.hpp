#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "slatelab/common.hpp"

namespace slatelab {

/// Vocabulary / schema sizes shared by generation and models.
struct VocabConfig {
  int items = 1000;
  int categories = 50;
  int brands = 100;
  int sellers = 200;
  int shops = 200;
  int price_buckets = 10;
  int queries = 100;
  int users = 500;
  int stats_dim = 4;
  int user_pref_dim = 4;
  int max_session_len = 20;
};

struct ItemFeatures {
  int item_id = 0;
  int category_id = 0;
  int brand_id = 0;
  int seller_id = 0;
  int shop_id = 0;
  int price_bucket = 1;               // 1..P
  std::vector<double> stats;          // ctr, cvr, extras
  std::optional<int> position_hint;   // original LTR rank, 1-based
};

struct SessionBehavior {
  std::vector<ItemFeatures> pv_list;
  std::vector<ItemFeatures> click_list;
  std::vector<ItemFeatures> atc_list;
  std::vector<ItemFeatures> pay_list;
};

struct QueryContext {
  int query_id = 0;
  int user_id = 0;
  std::vector<double> user_pref;
  SessionBehavior session;
};

enum class Label : int { impression = 0, click = 1, atc = 2, pay = 3 };

const char* label_name(Label l);
Label label_from_name(const std::string& s);

struct SlateSample {
  QueryContext context;
  std::vector<ItemFeatures> items;  // exactly k
  std::vector<Label> labels;        // exactly k
};

struct CandidateSet {
  QueryContext context;
  std::vector<ItemFeatures> items;   // exactly n, LTR-sorted descending
  std::vector<double> ltr_scores;    // aligned with items
};

/// 1 iff the label is atc or pay.
std::vector<int> binary_labels(const SlateSample& sample);

bool slate_has_positive(const SlateSample& sample);
bool slate_has_pay(const SlateSample& sample);

/// Subsample negative slates (no item labeled 1) so positives/negatives is
/// approximately target_ratio. Positives are never dropped; a corpus already
/// at or above the target is returned unchanged. Deterministic under seed.
std::vector<SlateSample> reweight_negatives(const std::vector<SlateSample>& in,
                                            double target_ratio,
                                            std::uint64_t seed);

// ---- dataset files (line-delimited JSON records, optional .gz) ----

struct DatasetHeader {
  int format_version = 1;
  std::string record_kind;  // "slate" | "candidate_set"
  std::size_t count = 0;
  std::uint64_t seed = 0;
  std::string provenance_json;  // config snapshot, opaque here
};

void write_slates(const std::string& path, const DatasetHeader& header,
                  const std::vector<SlateSample>& slates);
void write_candidates(const std::string& path, const DatasetHeader& header,
                      const std::vector<CandidateSet>& sets);

struct SlateDataset {
  DatasetHeader header;
  std::vector<SlateSample> slates;
};

struct CandidateDataset {
  DatasetHeader header;
  std::vector<CandidateSet> sets;
};

/// Errors name the 1-based line index; reading a file of the wrong record
/// kind raises DataError. ".gz" paths are transparently decompressed.
SlateDataset load_slates(const std::string& path);
CandidateDataset load_candidates(const std::string& path);

}  // namespace slatelab
