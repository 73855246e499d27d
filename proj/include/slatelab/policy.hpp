#pragma once

#include <span>

#include "slatelab/data.hpp"
#include "slatelab/tape.hpp"

namespace slatelab {

struct PolicyConfig {
  int embed_dim = 4;
  int hidden_dim = 32;
  int su_dim = 16;
  int sg_dim = 16;
  double softmax_beta = 1.0;
  bool use_sg_cell = true;
  int slate_size = 10;  // k

  void validate() const;
};

/// One step of the slate re-ranking MDP: the candidate set plus the ordered
/// set of already selected candidate indices. step t is 1-based.
struct MdpState {
  const CandidateSet* candidates = nullptr;
  std::vector<int> selected;  // distinct 0-based candidate indices

  int step() const { return static_cast<int>(selected.size()) + 1; }
  bool is_selected(int idx) const;
};

MdpState initial_state(const CandidateSet& cs);

/// Appends the action and advances the step. Errors on re-selection or
/// out-of-range actions.
MdpState step(const MdpState& state, int action);

bool episode_done(const MdpState& state, int k);

/// Sg cell output: p feature-encoding rows of the selected items zero-padded
/// to width k, plus per-candidate novelty vectors (one entry per feature and
/// one normalized embedding-distance entry, all in [0,1]).
struct SgOutput {
  Tensor encoding;   // p x k
  Tensor diversity;  // n x (p + 1)
};

struct PolicyOutput {
  std::vector<double> weights;       // n
  std::vector<double> probs;         // n; zero exactly on selected indices
  std::vector<std::uint8_t> mask;    // 1 = still selectable
};

enum class RolloutMode { sample, greedy };

struct RolloutResult {
  std::vector<int> slate;          // k distinct candidate indices
  std::vector<double> step_probs;  // softmax prob of the chosen action
  std::vector<double> d_norms;     // ||D_it,a_t||_2 of the chosen action
};

class PolicyModel {
 public:
  PolicyModel(PolicyConfig cfg, VocabConfig vocab, std::uint64_t init_seed);

  const PolicyConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Per-episode tape context (candidate embeddings, query/user row, session
  /// summary, candidate-set summary) shared by all k steps.
  struct EpisodeCtx {
    Var cand_mat;  // n x feature width
    Var ctx_row;   // 1 x (2*embed + pref)
    Var su_row;    // 1 x su_dim
    Var sc_row;    // 1 x feature width
    std::size_t n = 0;
  };

  EpisodeCtx episode_ctx(Tape& t, const CandidateSet& cs) const;

  struct ForwardVars {
    Var weights;  // 1 x n
    Var probs;    // 1 x n (masked softmax)
    std::vector<std::uint8_t> mask;
  };

  /// Scores every unselected candidate and normalizes with a masked softmax
  /// at the configured beta. Errors when every candidate is selected.
  ForwardVars forward(Tape& t, const EpisodeCtx& ctx, const MdpState& state) const;

  PolicyOutput forward_values(const MdpState& state) const;

  SgOutput sg_cell(const MdpState& state) const;

  RolloutResult rollout(const CandidateSet& cs, RolloutMode mode, Rng* rng) const;

  /// Sum of log step probabilities of the given ordered slate.
  double slate_log_prob(const CandidateSet& cs, const std::vector<int>& slate) const;

  /// Parameter-free novelty features of every candidate given the selected
  /// prefix; last column is the normalized distance to the nearest selected
  /// item (1 when nothing is selected yet).
  Tensor diversity_features(const MdpState& state) const;

  double d_norm(const MdpState& state, int action) const;

  static constexpr int kSgFeatures = 6;  // item/category/brand/seller/shop/price

 private:
  Var sg_summary(Tape& t, const MdpState& state) const;

  PolicyConfig cfg_;
  VocabConfig vocab_;
  ParamStore params_;
};

/// Raw numeric item vector used for the novelty distance (stats + scaled
/// price); independent of any trainable parameter.
std::vector<double> item_raw_vector(const ItemFeatures& item, const VocabConfig& vocab);

}  // namespace slatelab
