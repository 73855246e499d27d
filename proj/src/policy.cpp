#include "slatelab/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "slatelab/critic.hpp"

namespace slatelab {

void PolicyConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1 || su_dim < 1 || sg_dim < 1 || slate_size < 1)
    throw DomainError("policy config: dimensions must be >= 1");
  if (softmax_beta <= 0.0)
    throw DomainError("policy config: softmax_beta must be positive");
}

bool MdpState::is_selected(int idx) const {
  return std::find(selected.begin(), selected.end(), idx) != selected.end();
}

MdpState initial_state(const CandidateSet& cs) {
  MdpState s;
  s.candidates = &cs;
  return s;
}

MdpState step(const MdpState& state, int action) {
  if (state.candidates == nullptr) throw StateError("step: no candidate set");
  const int n = static_cast<int>(state.candidates->items.size());
  if (action < 0 || action >= n)
    throw StateError("step: action index " + std::to_string(action) +
                     " out of range [0," + std::to_string(n) + ")");
  if (state.is_selected(action))
    throw StateError("step: item " + std::to_string(action) + " already selected");
  MdpState next = state;
  next.selected.push_back(action);
  return next;
}

bool episode_done(const MdpState& state, int k) {
  return static_cast<int>(state.selected.size()) >= k;
}

std::vector<double> item_raw_vector(const ItemFeatures& item,
                                    const VocabConfig& vocab) {
  std::vector<double> v = item.stats;
  v.push_back(static_cast<double>(item.price_bucket) /
              static_cast<double>(vocab.price_buckets));
  return v;
}

PolicyModel::PolicyModel(PolicyConfig cfg, VocabConfig vocab,
                         std::uint64_t init_seed)
    : cfg_(cfg), vocab_(vocab) {
  cfg_.validate();
  Rng rng(init_seed);
  const std::size_t e = static_cast<std::size_t>(cfg_.embed_dim);
  const std::size_t k = static_cast<std::size_t>(cfg_.slate_size);
  const std::size_t h = static_cast<std::size_t>(cfg_.hidden_dim);
  const std::size_t d_item = 6 * e + static_cast<std::size_t>(vocab_.stats_dim);
  const std::size_t d_cand = d_item + 2;  // + ltr z-score + rank feature

  create_item_tables(params_, vocab_, cfg_.embed_dim, "emb", rng);
  params_.create("ctx.query", xavier_uniform(static_cast<std::size_t>(vocab_.queries), e, rng));
  params_.create("ctx.user", xavier_uniform(static_cast<std::size_t>(vocab_.users), e, rng));
  params_.create("su.w", xavier_uniform(4 * d_item, static_cast<std::size_t>(cfg_.su_dim), rng));
  params_.create("su.b", Tensor::zeros(1, static_cast<std::size_t>(cfg_.su_dim)));

  // scalar encoding tables of the Sg cell, one per feature
  params_.create("sg.enc.item", xavier_uniform(static_cast<std::size_t>(vocab_.items), 1, rng));
  params_.create("sg.enc.category", xavier_uniform(static_cast<std::size_t>(vocab_.categories), 1, rng));
  params_.create("sg.enc.brand", xavier_uniform(static_cast<std::size_t>(vocab_.brands), 1, rng));
  params_.create("sg.enc.seller", xavier_uniform(static_cast<std::size_t>(vocab_.sellers), 1, rng));
  params_.create("sg.enc.shop", xavier_uniform(static_cast<std::size_t>(vocab_.shops), 1, rng));
  params_.create("sg.enc.price", xavier_uniform(static_cast<std::size_t>(vocab_.price_buckets), 1, rng));
  params_.create("sg.w", xavier_uniform(static_cast<std::size_t>(kSgFeatures) * k,
                                        static_cast<std::size_t>(cfg_.sg_dim), rng));
  params_.create("sg.b", Tensor::zeros(1, static_cast<std::size_t>(cfg_.sg_dim)));

  const std::size_t ctx_dim = 2 * e + static_cast<std::size_t>(vocab_.user_pref_dim);
  const std::size_t score_in = ctx_dim + static_cast<std::size_t>(cfg_.su_dim) +
                               d_cand + d_cand +
                               static_cast<std::size_t>(cfg_.sg_dim) +
                               (static_cast<std::size_t>(kSgFeatures) + 1);
  params_.create("score.l1.w", xavier_uniform(score_in, h, rng));
  params_.create("score.l1.b", Tensor::zeros(1, h));
  params_.create("score.l2.w", xavier_uniform(h, 1, rng));
  params_.create("score.l2.b", Tensor::zeros(1, 1));
}

PolicyModel::EpisodeCtx PolicyModel::episode_ctx(Tape& t,
                                                 const CandidateSet& cs) const {
  const std::size_t n = cs.items.size();
  if (n == 0) throw StateError("policy: empty candidate set");
  Var items = embed_item_block(t, params_, vocab_, "emb", cs.items);

  // LTR score z-scored inside the set plus a normalized-rank feature
  Tensor ltr = Tensor::zeros(n, 2);
  double mean = 0.0;
  for (double s : cs.ltr_scores) mean += s;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double s : cs.ltr_scores) var += (s - mean) * (s - mean);
  const double sd = std::max(std::sqrt(var / static_cast<double>(n)), 1e-9);
  for (std::size_t i = 0; i < n; ++i) {
    ltr.at(i, 0) = (cs.ltr_scores[i] - mean) / sd;
    ltr.at(i, 1) = 1.0 - static_cast<double>(i) / static_cast<double>(n);
  }

  EpisodeCtx ctx;
  ctx.n = n;
  ctx.cand_mat = t.concat_cols({items, t.constant(std::move(ltr))});

  Var q = t.gather_rows(t.param(params_, "ctx.query"), {cs.context.query_id});
  Var u = t.gather_rows(t.param(params_, "ctx.user"), {cs.context.user_id});
  Var pref = t.constant_row(cs.context.user_pref);
  ctx.ctx_row = t.concat_cols({q, u, pref});

  const std::size_t d_item = 6 * static_cast<std::size_t>(cfg_.embed_dim) +
                             static_cast<std::size_t>(vocab_.stats_dim);
  std::vector<Var> channel_means;
  const std::vector<ItemFeatures>* channels[4] = {
      &cs.context.session.pv_list, &cs.context.session.click_list,
      &cs.context.session.atc_list, &cs.context.session.pay_list};
  for (const auto* list : channels) {
    if (list->empty()) {
      channel_means.push_back(t.constant(Tensor::zeros(1, d_item)));
    } else {
      channel_means.push_back(
          t.row_mean(embed_item_block(t, params_, vocab_, "emb", *list)));
    }
  }
  Var su_in = t.concat_cols(std::span<const Var>(channel_means));
  ctx.su_row = dense_forward(t, su_in, t.param(params_, "su.w"),
                             t.param(params_, "su.b"), Activation::tanh);
  ctx.sc_row = t.row_mean(ctx.cand_mat);
  return ctx;
}

Tensor PolicyModel::diversity_features(const MdpState& state) const {
  const CandidateSet& cs = *state.candidates;
  const std::size_t n = cs.items.size();
  const std::size_t p = static_cast<std::size_t>(kSgFeatures);
  Tensor d = Tensor::zeros(n, p + 1);
  auto field = [](const ItemFeatures& it, std::size_t f) -> int {
    switch (f) {
      case 0: return it.item_id;
      case 1: return it.category_id;
      case 2: return it.brand_id;
      case 3: return it.seller_id;
      case 4: return it.shop_id;
      default: return it.price_bucket;
    }
  };
  for (std::size_t j = 0; j < n; ++j) {
    const ItemFeatures& cand = cs.items[j];
    for (std::size_t f = 0; f < p; ++f) {
      bool seen = false;
      for (int s : state.selected)
        if (field(cs.items[static_cast<std::size_t>(s)], f) == field(cand, f)) {
          seen = true;
          break;
        }
      d.at(j, f) = seen ? 0.0 : 1.0;
    }
    if (state.selected.empty()) {
      d.at(j, p) = 1.0;
    } else {
      const std::vector<double> raw_j = item_raw_vector(cand, vocab_);
      double best = 1e300;
      for (int s : state.selected) {
        const std::vector<double> raw_s =
            item_raw_vector(cs.items[static_cast<std::size_t>(s)], vocab_);
        double dist2 = 0.0;
        for (std::size_t q = 0; q < raw_j.size(); ++q)
          dist2 += (raw_j[q] - raw_s[q]) * (raw_j[q] - raw_s[q]);
        best = std::min(best, std::sqrt(dist2));
      }
      d.at(j, p) = best / (1.0 + best);
    }
  }
  return d;
}

double PolicyModel::d_norm(const MdpState& state, int action) const {
  Tensor d = diversity_features(state);
  double s = 0.0;
  const std::size_t w = d.cols();
  for (std::size_t c = 0; c < w; ++c)
    s += d.at(static_cast<std::size_t>(action), c) *
         d.at(static_cast<std::size_t>(action), c);
  return std::sqrt(s);
}

SgOutput PolicyModel::sg_cell(const MdpState& state) const {
  if (state.candidates == nullptr) throw StateError("sg_cell: no candidate set");
  const CandidateSet& cs = *state.candidates;
  const std::size_t k = static_cast<std::size_t>(cfg_.slate_size);
  const std::size_t p = static_cast<std::size_t>(kSgFeatures);
  SgOutput out;
  out.encoding = Tensor::zeros(p, k);
  const char* tables[kSgFeatures] = {"sg.enc.item", "sg.enc.category",
                                     "sg.enc.brand", "sg.enc.seller",
                                     "sg.enc.shop", "sg.enc.price"};
  for (std::size_t j = 0; j < state.selected.size() && j < k; ++j) {
    const ItemFeatures& it = cs.items[static_cast<std::size_t>(state.selected[j])];
    const int ids[kSgFeatures] = {it.item_id,   it.category_id, it.brand_id,
                                  it.seller_id, it.shop_id,     it.price_bucket - 1};
    for (std::size_t f = 0; f < p; ++f)
      out.encoding.at(f, j) =
          params_.at(tables[f]).at(static_cast<std::size_t>(ids[f]), 0);
  }
  out.diversity = diversity_features(state);
  return out;
}

Var PolicyModel::sg_summary(Tape& t, const MdpState& state) const {
  const CandidateSet& cs = *state.candidates;
  const std::size_t k = static_cast<std::size_t>(cfg_.slate_size);
  const std::size_t p = static_cast<std::size_t>(kSgFeatures);
  const std::size_t t_sel = state.selected.size();
  Var flat;
  if (t_sel == 0) {
    flat = t.constant(Tensor::zeros(1, p * k));
  } else {
    const char* tables[kSgFeatures] = {"sg.enc.item", "sg.enc.category",
                                       "sg.enc.brand", "sg.enc.seller",
                                       "sg.enc.shop", "sg.enc.price"};
    std::vector<int> ids[kSgFeatures];
    for (int s : state.selected) {
      const ItemFeatures& it = cs.items[static_cast<std::size_t>(s)];
      ids[0].push_back(it.item_id);
      ids[1].push_back(it.category_id);
      ids[2].push_back(it.brand_id);
      ids[3].push_back(it.seller_id);
      ids[4].push_back(it.shop_id);
      ids[5].push_back(it.price_bucket - 1);
    }
    std::vector<Var> rows;
    rows.reserve(p);
    for (std::size_t f = 0; f < p; ++f)
      rows.push_back(t.pad_cols(
          t.flatten_row(t.gather_rows(t.param(params_, tables[f]), ids[f])), k));
    flat = t.concat_cols(std::span<const Var>(rows));
  }
  return dense_forward(t, flat, t.param(params_, "sg.w"),
                       t.param(params_, "sg.b"), Activation::tanh);
}

PolicyModel::ForwardVars PolicyModel::forward(Tape& t, const EpisodeCtx& ctx,
                                              const MdpState& state) const {
  const std::size_t n = ctx.n;
  std::vector<std::uint8_t> mask(n, 1);
  for (int s : state.selected) mask[static_cast<std::size_t>(s)] = 0;
  bool any = false;
  for (std::uint8_t m : mask) any = any || (m != 0);
  if (!any) throw StateError("policy forward: all candidates already selected");

  Var sg_row, div;
  if (cfg_.use_sg_cell) {
    sg_row = sg_summary(t, state);
    div = t.constant(diversity_features(state));
  } else {
    sg_row = t.constant(Tensor::zeros(1, static_cast<std::size_t>(cfg_.sg_dim)));
    div = t.constant(Tensor::zeros(n, static_cast<std::size_t>(kSgFeatures) + 1));
  }

  Var score_in = t.concat_cols({t.tile_rows(ctx.ctx_row, n),
                                t.tile_rows(ctx.su_row, n),
                                t.tile_rows(ctx.sc_row, n), ctx.cand_mat,
                                t.tile_rows(sg_row, n), div});
  Var hidden = dense_forward(t, score_in, t.param(params_, "score.l1.w"),
                             t.param(params_, "score.l1.b"), Activation::relu);
  Var w = t.flatten_row(dense_forward(t, hidden, t.param(params_, "score.l2.w"),
                                      t.param(params_, "score.l2.b"),
                                      Activation::identity));
  ForwardVars out;
  out.weights = w;
  out.probs = t.masked_softmax(w, mask, cfg_.softmax_beta);
  out.mask = std::move(mask);
  return out;
}

PolicyOutput PolicyModel::forward_values(const MdpState& state) const {
  Tape t;
  EpisodeCtx ctx = episode_ctx(t, *state.candidates);
  ForwardVars fv = forward(t, ctx, state);
  PolicyOutput out;
  out.weights = t.val(fv.weights).data;
  out.probs = t.val(fv.probs).data;
  out.mask = fv.mask;
  return out;
}

RolloutResult PolicyModel::rollout(const CandidateSet& cs, RolloutMode mode,
                                   Rng* rng) const {
  const int k = cfg_.slate_size;
  if (static_cast<int>(cs.items.size()) < k)
    throw StateError("rollout: fewer candidates than slate size");
  if (mode == RolloutMode::sample && rng == nullptr)
    throw DomainError("rollout: sample mode needs an rng");
  Tape t;
  EpisodeCtx ctx = episode_ctx(t, cs);
  MdpState state = initial_state(cs);
  RolloutResult r;
  for (int st = 0; st < k; ++st) {
    ForwardVars fv = forward(t, ctx, state);
    const std::vector<double>& probs = t.val(fv.probs).data;
    int action = -1;
    if (mode == RolloutMode::greedy) {
      const std::vector<double>& w = t.val(fv.weights).data;
      double best = -1e300;
      for (std::size_t j = 0; j < w.size(); ++j)
        if (fv.mask[j] && w[j] > best) {
          best = w[j];
          action = static_cast<int>(j);
        }
    } else {
      double u = rng->uniform();
      double acc = 0.0;
      for (std::size_t j = 0; j < probs.size(); ++j) {
        acc += probs[j];
        if (u < acc) {
          action = static_cast<int>(j);
          break;
        }
      }
      if (action < 0) {  // numeric tail: fall back to last unmasked
        for (int j = static_cast<int>(probs.size()) - 1; j >= 0; --j)
          if (fv.mask[static_cast<std::size_t>(j)]) {
            action = j;
            break;
          }
      }
    }
    r.d_norms.push_back(d_norm(state, action));
    r.step_probs.push_back(probs[static_cast<std::size_t>(action)]);
    r.slate.push_back(action);
    state = step(state, action);
  }
  return r;
}

double PolicyModel::slate_log_prob(const CandidateSet& cs,
                                   const std::vector<int>& slate) const {
  std::unordered_set<int> seen;
  for (int a : slate) {
    if (a < 0 || a >= static_cast<int>(cs.items.size()))
      throw StateError("slate_log_prob: index out of range");
    if (!seen.insert(a).second)
      throw StateError("slate_log_prob: infeasible slate (duplicate index)");
  }
  Tape t;
  EpisodeCtx ctx = episode_ctx(t, cs);
  MdpState state = initial_state(cs);
  double lp = 0.0;
  for (int a : slate) {
    ForwardVars fv = forward(t, ctx, state);
    lp += std::log(t.val(fv.probs).data[static_cast<std::size_t>(a)]);
    state = step(state, a);
  }
  return lp;
}

}  // namespace slatelab
