#pragma once

#include <optional>

#include "slatelab/config.hpp"
#include "slatelab/eval.hpp"

namespace slatelab {

/// Candidate sets paired with their logged slates (the first k LTR items and
/// the oracle's sampled interactions).
struct GeneratedPairs {
  std::vector<CandidateSet> candidates;
  std::vector<SlateSample> slates;
};

/// Per-sample RNG streams split from the seed, so output is identical for
/// any worker count.
GeneratedPairs generate_pairs(const Oracle& oracle, int count, int n, int k,
                              std::uint64_t seed, int workers = 1);

// ---- pipeline stages (shared by the CLI and the acceptance suite) ----

struct DataPaths {
  std::string candidates_train;
  std::string slates_train;
  std::string candidates_test;
  std::string slates_test;
};

DataPaths data_paths(const RunConfig& cfg);

void run_gen_data(const RunConfig& cfg);

/// model: "fsc" | "gru-ncand" | "pointwise". The checkpoint name defaults to
/// the model (with a component suffix for partial FSC variants).
std::string run_train_critic(const RunConfig& cfg, const std::string& model,
                             const std::string& name = "");

std::string run_train_policy(const RunConfig& cfg, const std::string& algorithm,
                             const std::string& name = "");

std::string evaluate_to_json(const RunConfig& cfg);
std::string run_evaluate(const RunConfig& cfg);  // writes eval_report.json

/// Renders the comparison tables from the eval-report JSON document; every
/// number in the table is formatted from the JSON values.
std::string render_report(const std::string& report_json);
std::string run_report(const RunConfig& cfg);  // writes report.txt

std::string run_visualize_attention(const RunConfig& cfg,
                                    const std::optional<std::string>& input_path);

// checkpoint + sidecar helpers
void write_meta(const std::string& ckpt_path, const RunConfig& cfg,
                const std::string& artifact, const std::string& variant,
                const std::string& extra_json = "{}");

CriticModel load_critic(const std::string& ckpt_path);
PolicyModel load_policy(const std::string& ckpt_path);

std::string format_metric(double v);

}  // namespace slatelab
