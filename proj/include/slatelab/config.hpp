#pragma once

#include <string>

#include "slatelab/critic.hpp"
#include "slatelab/oracle.hpp"
#include "slatelab/policy.hpp"
#include "slatelab/rl.hpp"

namespace slatelab {

struct DataConfig {
  int n_candidates = 50;  // n
  int slate_size = 10;    // k
  int num_train = 12000;  // aligned candidate/slate pairs for training
  int num_test = 20000;   // held-out pairs for evaluation
  double negative_target_ratio = 0.02;  // 1/50
  bool compress = false;  // write .jsonl.gz instead of .jsonl
  VocabConfig vocab;
};

struct EvalConfig {
  int ips_logged_episodes = 20000;
  int entropy_contexts = 500;
  int replacement_contexts = 500;
  int workers = 1;
  std::string behavior_policy = "reinforce-nosg";
};

/// Full experiment configuration; one JSON document with one section per
/// subsystem. The seed is mandatory.
struct RunConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "runs/default";
  OracleConfig oracle;
  DataConfig data;
  CriticConfig critic;
  OptimizerConfig critic_opt;
  PolicyConfig policy;
  TrainConfig trainer;
  EvalConfig eval;

  void validate() const;
};

RunConfig default_config();
RunConfig load_config(const std::string& path);
void save_config(const std::string& path, const RunConfig& cfg);
std::string config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const std::string& text);

}  // namespace slatelab
