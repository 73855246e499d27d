#include "slatelab/critic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "slatelab/optim.hpp"

namespace slatelab {

namespace {
constexpr double kProbFloor = 1e-6;
constexpr double kProbCeil = 1.0 - 1e-6;
}  // namespace

void CriticConfig::validate() const {
  if (embed_dim < 1 || hidden_dim < 1 || gru_dim < 1 || pin_dim < 1 ||
      fcn_dim < 1 || relpos_dim < 1 || slate_size < 1)
    throw DomainError("critic config: dimensions must be >= 1");
  if (attention_beta <= 0.0)
    throw DomainError("critic config: attention_beta must be positive");
  if (loss_weight_pay < 0.0 || loss_weight_atc < 0.0 ||
      loss_weight_click < 0.0 || loss_weight_impression < 0.0)
    throw DomainError("critic config: loss weights must be >= 0");
}

double CriticConfig::label_weight(Label l) const {
  switch (l) {
    case Label::pay: return loss_weight_pay;
    case Label::atc: return loss_weight_atc;
    case Label::click: return loss_weight_click;
    case Label::impression: return loss_weight_impression;
  }
  throw DomainError("unknown label");
}

void create_item_tables(ParamStore& ps, const VocabConfig& vocab,
                        int embed_dim, const std::string& prefix, Rng& rng) {
  const std::size_t e = static_cast<std::size_t>(embed_dim);
  ps.create(prefix + ".item", xavier_uniform(static_cast<std::size_t>(vocab.items), e, rng));
  ps.create(prefix + ".category", xavier_uniform(static_cast<std::size_t>(vocab.categories), e, rng));
  ps.create(prefix + ".brand", xavier_uniform(static_cast<std::size_t>(vocab.brands), e, rng));
  ps.create(prefix + ".seller", xavier_uniform(static_cast<std::size_t>(vocab.sellers), e, rng));
  ps.create(prefix + ".shop", xavier_uniform(static_cast<std::size_t>(vocab.shops), e, rng));
  ps.create(prefix + ".price", xavier_uniform(static_cast<std::size_t>(vocab.price_buckets), e, rng));
}

Var embed_item_block(Tape& t, const ParamStore& ps, const VocabConfig& vocab,
                     const std::string& prefix,
                     std::span<const ItemFeatures> items) {
  const std::size_t m = items.size();
  std::vector<int> item_ids(m), cat_ids(m), brand_ids(m), seller_ids(m),
      shop_ids(m), price_ids(m);
  Tensor stats = Tensor::zeros(m, static_cast<std::size_t>(vocab.stats_dim));
  for (std::size_t i = 0; i < m; ++i) {
    const ItemFeatures& it = items[i];
    item_ids[i] = it.item_id;
    cat_ids[i] = it.category_id;
    brand_ids[i] = it.brand_id;
    seller_ids[i] = it.seller_id;
    shop_ids[i] = it.shop_id;
    price_ids[i] = it.price_bucket - 1;
    if (static_cast<int>(it.stats.size()) != vocab.stats_dim)
      throw DimensionError("item stats width differs from configured schema");
    for (std::size_t s = 0; s < it.stats.size(); ++s)
      stats.at(i, s) = it.stats[s];
  }
  Var parts[7] = {
      t.gather_rows(t.param(ps, prefix + ".item"), item_ids),
      t.gather_rows(t.param(ps, prefix + ".category"), cat_ids),
      t.gather_rows(t.param(ps, prefix + ".brand"), brand_ids),
      t.gather_rows(t.param(ps, prefix + ".seller"), seller_ids),
      t.gather_rows(t.param(ps, prefix + ".shop"), shop_ids),
      t.gather_rows(t.param(ps, prefix + ".price"), price_ids),
      t.constant(std::move(stats))};
  return t.concat_cols(std::span<const Var>(parts, 7));
}

std::size_t CriticModel::item_dim() const {
  return 6 * static_cast<std::size_t>(cfg_.embed_dim) +
         static_cast<std::size_t>(vocab_.stats_dim);
}

CriticModel::CriticModel(CriticConfig cfg, VocabConfig vocab,
                         std::uint64_t init_seed)
    : cfg_(cfg), vocab_(vocab) {
  cfg_.validate();
  Rng rng(init_seed);
  const std::size_t k = static_cast<std::size_t>(cfg_.slate_size);
  const std::size_t d = item_dim();
  const std::size_t e = static_cast<std::size_t>(cfg_.embed_dim);
  const std::size_t h = static_cast<std::size_t>(cfg_.hidden_dim);
  const std::size_t g = static_cast<std::size_t>(cfg_.gru_dim);
  const std::size_t pd = static_cast<std::size_t>(cfg_.pin_dim);
  const std::size_t rp = static_cast<std::size_t>(cfg_.relpos_dim);
  const std::size_t fd = static_cast<std::size_t>(cfg_.fcn_dim);

  create_item_tables(params_, vocab_, cfg_.embed_dim, "emb", rng);
  for (const char* ch : {"pv", "click", "atc", "pay"}) {
    params_.create(std::string("san.") + ch + ".wq", xavier_uniform(d, e, rng));
    params_.create(std::string("san.") + ch + ".wk", xavier_uniform(d, e, rng));
    params_.create(std::string("san.") + ch + ".wv", xavier_uniform(d, e, rng));
  }
  const std::size_t san_out = d + 4 * e;
  params_.create("state.w", xavier_uniform(san_out, h, rng));
  params_.create("state.b", Tensor::zeros(1, h));
  params_.create("pos.abs", xavier_uniform(k, h, rng));

  params_.create("pin.rel", xavier_uniform(2 * k - 1, rp, rng));
  params_.create("pin.l1.w", xavier_uniform(2 * h + rp, h, rng));
  params_.create("pin.l1.b", Tensor::zeros(1, h));
  params_.create("pin.l2.w", xavier_uniform(h, pd, rng));
  params_.create("pin.l2.b", Tensor::zeros(1, pd));
  params_.create("pin.att.w", xavier_uniform(k, pd, rng));
  params_.create("pin.att.b", Tensor::zeros(k, 1));

  init_gru_params(params_, "gru.fwd", h, g, rng);
  init_gru_params(params_, "gru.bwd", h, g, rng);

  const std::size_t cmp_in = 6 + static_cast<std::size_t>(vocab_.stats_dim) + 1;
  params_.create("fcn.w", xavier_uniform(cmp_in, fd, rng));
  params_.create("fcn.b", Tensor::zeros(1, fd));

  const std::size_t head_in = san_out + pd + 2 * g + fd;
  params_.create("head.l1.w", xavier_uniform(head_in, h, rng));
  params_.create("head.l1.b", Tensor::zeros(1, h));
  params_.create("head.l2.w", xavier_uniform(h, 1, rng));
  params_.create("head.l2.b", Tensor::zeros(1, 1));
}

Var CriticModel::embed_items(Tape& t, std::span<const ItemFeatures> items) const {
  return embed_item_block(t, params_, vocab_, "emb", items);
}

Var CriticModel::su_attention_forward(Tape& t, const SessionBehavior& session,
                                      Var item_vecs) const {
  const std::size_t k = t.val(item_vecs).rows();
  const std::size_t e = static_cast<std::size_t>(cfg_.embed_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(e));
  std::vector<Var> parts;
  parts.push_back(item_vecs);
  const std::pair<const char*, const std::vector<ItemFeatures>*> channels[4] = {
      {"pv", &session.pv_list},
      {"click", &session.click_list},
      {"atc", &session.atc_list},
      {"pay", &session.pay_list}};
  for (const auto& [name, list] : channels) {
    if (list->empty() ||
        static_cast<int>(list->size()) > vocab_.max_session_len) {
      if (static_cast<int>(list->size()) > vocab_.max_session_len)
        throw DimensionError("session channel exceeds max_session_len");
      parts.push_back(t.constant(Tensor::zeros(k, e)));
      continue;
    }
    Var seq = embed_item_block(t, params_, vocab_, "emb", *list);
    Var q = t.matmul(item_vecs, t.param(params_, std::string("san.") + name + ".wq"));
    Var kk = t.matmul(seq, t.param(params_, std::string("san.") + name + ".wk"));
    Var v = t.matmul(seq, t.param(params_, std::string("san.") + name + ".wv"));
    Var scores = t.scale(t.matmul(q, kk, false, true), scale);  // k x L
    Var att = t.softmax_rows(scores, 1.0);
    parts.push_back(t.matmul(att, v));  // k x e
  }
  return t.concat_cols(std::span<const Var>(parts));
}

Var CriticModel::item_states(Tape& t, Var san_out) const {
  Var proj = dense_forward(t, san_out, t.param(params_, "state.w"),
                           t.param(params_, "state.b"), Activation::tanh);
  return t.add(proj, t.param(params_, "pos.abs"));
}

CriticModel::PairResult CriticModel::pair_influence_forward(Tape& t,
                                                            Var states) const {
  const std::size_t k = t.val(states).rows();
  std::vector<int> src(k * k), dst(k * k), rel(k * k);
  for (std::size_t j = 0; j < k; ++j)
    for (std::size_t a = 0; a < k; ++a) {
      const std::size_t p = j * k + a;
      src[p] = static_cast<int>(j);
      dst[p] = static_cast<int>(a);
      rel[p] = static_cast<int>(j) - static_cast<int>(a) +
               static_cast<int>(k) - 1;
    }
  Var pair_in = t.concat_cols({t.gather_rows(states, src),
                               t.gather_rows(states, dst),
                               t.gather_rows(t.param(params_, "pin.rel"), rel)});
  Var hidden = dense_forward(t, pair_in, t.param(params_, "pin.l1.w"),
                             t.param(params_, "pin.l1.b"), Activation::relu);
  Var v_all = dense_forward(t, hidden, t.param(params_, "pin.l2.w"),
                            t.param(params_, "pin.l2.b"), Activation::identity);

  Var att_w = t.param(params_, "pin.att.w");  // k x pin_dim
  Var att_b = t.param(params_, "pin.att.b");  // k x 1
  Tensor alpha = Tensor::zeros(k, k);
  std::vector<Var> influence_rows;
  influence_rows.reserve(k);
  for (std::size_t a = 0; a < k; ++a) {
    std::vector<int> pair_rows(k);
    for (std::size_t j = 0; j < k; ++j)
      pair_rows[j] = static_cast<int>(j * k + a);
    Var v_a = t.gather_rows(v_all, pair_rows);            // k x pin_dim
    Var logits = t.add(t.sum_cols(t.mul(v_a, att_w)), att_b);  // k x 1
    Var att = t.softmax_rows(t.flatten_row(logits), cfg_.attention_beta);
    influence_rows.push_back(t.matmul(att, v_a));         // 1 x pin_dim
    const Tensor& av = t.val(att);
    for (std::size_t j = 0; j < k; ++j) alpha.at(j, a) = av.data[j];
  }
  PairResult r;
  r.influence = t.stack_rows(std::span<const Var>(influence_rows));
  r.attention = std::move(alpha);
  return r;
}

Var CriticModel::bigru_forward(Tape& t, Var states) const {
  const std::size_t k = t.val(states).rows();
  const std::size_t g = static_cast<std::size_t>(cfg_.gru_dim);
  GruParams fwd = gru_params(t, params_, "gru.fwd");
  GruParams bwd = gru_params(t, params_, "gru.bwd");

  // f[a] = forward hidden after consuming item a (1-based); f[0] = 0
  std::vector<Var> f(k + 1), b(k + 2);
  f[0] = t.constant(Tensor::zeros(1, g));
  for (std::size_t a = 1; a <= k; ++a)
    f[a] = gru_cell(t, t.row(states, a - 1), f[a - 1], fwd);
  b[k + 1] = t.constant(Tensor::zeros(1, g));
  for (std::size_t a = k; a >= 1; --a)
    b[a] = gru_cell(t, t.row(states, a - 1), b[a + 1], bwd);

  // position influence of item a: neighbors only, never item a itself
  std::vector<Var> rows;
  rows.reserve(k);
  for (std::size_t a = 1; a <= k; ++a)
    rows.push_back(t.concat_cols({f[a - 1], b[a + 1]}));
  return t.stack_rows(std::span<const Var>(rows));
}

Tensor CriticModel::comparison_features(std::span<const ItemFeatures> items) const {
  const std::size_t k = items.size();
  const std::size_t sd = static_cast<std::size_t>(vocab_.stats_dim);
  const std::size_t width = 6 + sd + 1;
  Tensor out = Tensor::zeros(k, width);
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
  for (std::size_t f = 0; f < 6; ++f) {
    for (std::size_t a = 0; a < k; ++a) {
      int same = 0;
      for (std::size_t j = 0; j < k; ++j)
        if (j != a && field(items[j], f) == field(items[a], f)) ++same;
      out.at(a, f) = k > 1 ? static_cast<double>(same) / static_cast<double>(k - 1) : 0.0;
    }
  }
  auto zscore_col = [&](std::size_t col, auto getter) {
    double mean = 0.0;
    for (std::size_t a = 0; a < k; ++a) mean += getter(items[a]);
    mean /= static_cast<double>(k);
    double var = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      const double d = getter(items[a]) - mean;
      var += d * d;
    }
    const double sd_ = std::max(std::sqrt(var / static_cast<double>(k)), 1e-6);
    for (std::size_t a = 0; a < k; ++a)
      out.at(a, col) = (getter(items[a]) - mean) / sd_;
  };
  for (std::size_t s = 0; s < sd; ++s)
    zscore_col(6 + s, [s](const ItemFeatures& it) { return it.stats[s]; });
  zscore_col(6 + sd, [](const ItemFeatures& it) {
    return static_cast<double>(it.price_bucket);
  });
  return out;
}

Var CriticModel::feature_compare_forward(Tape& t,
                                         std::span<const ItemFeatures> items) const {
  Var cmp = t.constant(comparison_features(items));
  return dense_forward(t, cmp, t.param(params_, "fcn.w"),
                       t.param(params_, "fcn.b"), Activation::relu);
}

CriticOutput CriticModel::forward(Tape& t, const QueryContext& ctx,
                                  std::span<const ItemFeatures> items) const {
  const std::size_t k = static_cast<std::size_t>(cfg_.slate_size);
  if (items.size() != k)
    throw DimensionError("fsc forward: expected exactly " + std::to_string(k) +
                         " impressed items, got " + std::to_string(items.size()));
  const std::size_t e = static_cast<std::size_t>(cfg_.embed_dim);
  const std::size_t g = static_cast<std::size_t>(cfg_.gru_dim);

  Var item_vecs = embed_items(t, items);
  Var san_out;
  if (cfg_.components.san) {
    san_out = su_attention_forward(t, ctx.session, item_vecs);
  } else {
    san_out = t.concat_cols({item_vecs, t.constant(Tensor::zeros(k, 4 * e))});
  }

  Var pin_out;
  Tensor attention = Tensor::zeros(k, k);
  Var gru_out;
  const bool need_states = cfg_.components.pin || cfg_.components.bigru;
  Var states;
  if (need_states) states = item_states(t, san_out);
  if (cfg_.components.pin) {
    PairResult pr = pair_influence_forward(t, states);
    pin_out = pr.influence;
    attention = std::move(pr.attention);
  } else {
    pin_out = t.constant(Tensor::zeros(k, static_cast<std::size_t>(cfg_.pin_dim)));
  }
  if (cfg_.components.bigru) {
    gru_out = bigru_forward(t, states);
  } else {
    gru_out = t.constant(Tensor::zeros(k, 2 * g));
  }
  Var fcn_out;
  if (cfg_.components.fcn) {
    fcn_out = feature_compare_forward(t, items);
  } else {
    fcn_out = t.constant(Tensor::zeros(k, static_cast<std::size_t>(cfg_.fcn_dim)));
  }

  Var head_in = t.concat_cols({san_out, pin_out, gru_out, fcn_out});
  Var hidden = dense_forward(t, head_in, t.param(params_, "head.l1.w"),
                             t.param(params_, "head.l1.b"), Activation::relu);
  Var logits = dense_forward(t, hidden, t.param(params_, "head.l2.w"),
                             t.param(params_, "head.l2.b"), Activation::identity);
  Var probs = t.clamp(t.sigmoid(t.flatten_row(logits)), kProbFloor, kProbCeil);
  Var slate = t.affine(t.prod(t.affine(probs, -1.0, 1.0)), -1.0, 1.0);

  CriticOutput out;
  out.item_probs = t.val(probs).data;
  out.slate_prob = t.scalar_val(slate);
  out.pair_attention = std::move(attention);
  out.pair_influence = cfg_.components.pin ? t.val(pin_out) : Tensor::zeros(k, static_cast<std::size_t>(cfg_.pin_dim));
  out.item_probs_var = probs;
  out.slate_prob_var = slate;
  return out;
}

Var CriticModel::loss(Tape& t, const CriticOutput& out,
                      std::span<const Label> labels) const {
  const std::size_t k = out.item_probs.size();
  if (labels.size() != k)
    throw DimensionError("fsc loss: label count mismatch");
  std::vector<double> w_pos(k), w_neg(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double w = cfg_.label_weight(labels[i]);
    const bool positive = labels[i] == Label::atc || labels[i] == Label::pay;
    w_pos[i] = positive ? w : 0.0;
    w_neg[i] = positive ? 0.0 : w;
  }
  Var log_p = t.log_(out.item_probs_var);
  Var log_1mp = t.log_(t.affine(out.item_probs_var, -1.0, 1.0));
  return t.scale(t.add(t.wsum(log_p, w_pos), t.wsum(log_1mp, w_neg)), -1.0);
}

std::vector<EpochLog> train_critic(CriticModel& model,
                                   const std::vector<SlateSample>& dataset,
                                   const OptimizerConfig& opt) {
  if (dataset.empty()) throw DataError("train_critic: empty dataset");
  Rng rng(opt.seed);
  Sgd sgd(opt.learning_rate, opt.momentum);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochLog> log;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    KahanSum epoch_loss;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      Tape t;
      std::vector<Var> losses;
      losses.reserve(end - start);
      for (std::size_t i = start; i < end; ++i) {
        const SlateSample& s = dataset[order[i]];
        CriticOutput out = model.forward(t, s);
        losses.push_back(model.loss(t, out, s.labels));
      }
      Var batch_loss = t.mean(t.stack_rows(std::span<const Var>(losses)));
      const double lv = t.scalar_val(batch_loss);
      if (!std::isfinite(lv))
        throw NumericError("train_critic: loss diverged (epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batches) + ")");
      auto grads = t.backward(batch_loss);
      sgd.step(model.params(), grads);
      epoch_loss.add(lv);
      ++batches;
    }
    log.push_back({epoch, epoch_loss.value() / static_cast<double>(batches)});
  }
  return log;
}

// ---- n-candidate GRU baseline ----

NCandBaseline::NCandBaseline(int embed_dim, int gru_dim, VocabConfig vocab,
                             std::uint64_t init_seed)
    : embed_dim_(embed_dim), gru_dim_(gru_dim), vocab_(vocab) {
  Rng rng(init_seed);
  create_item_tables(params_, vocab_, embed_dim_, "emb", rng);
  const std::size_t d = 6 * static_cast<std::size_t>(embed_dim_) +
                        static_cast<std::size_t>(vocab_.stats_dim);
  init_gru_params(params_, "gru", d, static_cast<std::size_t>(gru_dim_), rng);
  const std::size_t head_in = d + static_cast<std::size_t>(gru_dim_);
  params_.create("head.l1.w", xavier_uniform(head_in, 16, rng));
  params_.create("head.l1.b", Tensor::zeros(1, 16));
  params_.create("head.l2.w", xavier_uniform(16, 1, rng));
  params_.create("head.l2.b", Tensor::zeros(1, 1));
}

Var NCandBaseline::forward(Tape& t, const CandidateSet& cs) const {
  const std::size_t n = cs.items.size();
  Var vecs = embed_item_block(t, params_, vocab_, "emb", cs.items);
  GruParams gp = gru_params(t, params_, "gru");
  Var h = t.constant(Tensor::zeros(1, static_cast<std::size_t>(gru_dim_)));
  std::vector<Var> rows;
  rows.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    h = gru_cell(t, t.row(vecs, i), h, gp);
    rows.push_back(h);
  }
  Var hidden_seq = t.stack_rows(std::span<const Var>(rows));
  Var head_in = t.concat_cols({vecs, hidden_seq});
  Var hid = dense_forward(t, head_in, t.param(params_, "head.l1.w"),
                          t.param(params_, "head.l1.b"), Activation::relu);
  Var logits = dense_forward(t, hid, t.param(params_, "head.l2.w"),
                             t.param(params_, "head.l2.b"), Activation::identity);
  return t.clamp(t.sigmoid(t.flatten_row(logits)), kProbFloor, kProbCeil);
}

std::vector<double> NCandBaseline::scores(const CandidateSet& cs) const {
  Tape t;
  return t.val(forward(t, cs)).data;
}

// ---- point-wise baseline ----

PointwiseBaseline::PointwiseBaseline(int embed_dim, int hidden_dim,
                                     VocabConfig vocab, std::uint64_t init_seed)
    : embed_dim_(embed_dim), hidden_dim_(hidden_dim), vocab_(vocab) {
  Rng rng(init_seed);
  create_item_tables(params_, vocab_, embed_dim_, "emb", rng);
  const std::size_t d = 6 * static_cast<std::size_t>(embed_dim_) +
                        static_cast<std::size_t>(vocab_.stats_dim);
  params_.create("head.l1.w", xavier_uniform(d, static_cast<std::size_t>(hidden_dim_), rng));
  params_.create("head.l1.b", Tensor::zeros(1, static_cast<std::size_t>(hidden_dim_)));
  params_.create("head.l2.w", xavier_uniform(static_cast<std::size_t>(hidden_dim_), 1, rng));
  params_.create("head.l2.b", Tensor::zeros(1, 1));
}

Var PointwiseBaseline::forward(Tape& t, std::span<const ItemFeatures> items) const {
  Var vecs = embed_item_block(t, params_, vocab_, "emb", items);
  Var hid = dense_forward(t, vecs, t.param(params_, "head.l1.w"),
                          t.param(params_, "head.l1.b"), Activation::relu);
  Var logits = dense_forward(t, hid, t.param(params_, "head.l2.w"),
                             t.param(params_, "head.l2.b"), Activation::identity);
  return t.clamp(t.sigmoid(t.flatten_row(logits)), kProbFloor, kProbCeil);
}

namespace {

Var weighted_bce(Tape& t, Var probs, std::span<const Label> labels,
                 const CriticConfig& cfg) {
  const std::size_t k = labels.size();
  std::vector<double> w_pos(k), w_neg(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double w = cfg.label_weight(labels[i]);
    const bool positive = labels[i] == Label::atc || labels[i] == Label::pay;
    w_pos[i] = positive ? w : 0.0;
    w_neg[i] = positive ? 0.0 : w;
  }
  Var log_p = t.log_(probs);
  Var log_1mp = t.log_(t.affine(probs, -1.0, 1.0));
  return t.scale(t.add(t.wsum(log_p, w_pos), t.wsum(log_1mp, w_neg)), -1.0);
}

template <typename LossFn>
std::vector<EpochLog> run_sgd(std::size_t count, const OptimizerConfig& opt,
                              ParamStore& params, LossFn make_loss) {
  if (count == 0) throw DataError("train: empty dataset");
  Rng rng(opt.seed);
  Sgd sgd(opt.learning_rate, opt.momentum);
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochLog> log;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    rng.shuffle(order);
    KahanSum epoch_loss;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(opt.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(opt.batch_size));
      Tape t;
      std::vector<Var> losses;
      for (std::size_t i = start; i < end; ++i)
        losses.push_back(make_loss(t, order[i]));
      Var batch_loss = t.mean(t.stack_rows(std::span<const Var>(losses)));
      const double lv = t.scalar_val(batch_loss);
      if (!std::isfinite(lv))
        throw NumericError("train: loss diverged at epoch " + std::to_string(epoch));
      sgd.step(params, t.backward(batch_loss));
      epoch_loss.add(lv);
      ++batches;
    }
    log.push_back({epoch, epoch_loss.value() / static_cast<double>(batches)});
  }
  return log;
}

}  // namespace

std::vector<EpochLog> train_ncand_baseline(
    NCandBaseline& model, const std::vector<CandidateSet>& candidates,
    const std::vector<SlateSample>& logged, const CriticConfig& loss_cfg,
    const OptimizerConfig& opt) {
  if (candidates.size() != logged.size())
    throw DataError("train_ncand_baseline: candidates/slates not aligned");
  return run_sgd(candidates.size(), opt, model.params(),
                 [&](Tape& t, std::size_t i) {
                   Var probs = model.forward(t, candidates[i]);
                   const std::size_t k = logged[i].labels.size();
                   // loss restricted to the impressed prefix
                   std::vector<Var> picked;
                   for (std::size_t a = 0; a < k; ++a)
                     picked.push_back(t.pick(probs, a));
                   Var impressed = t.flatten_row(
                       t.stack_rows(std::span<const Var>(picked)));
                   return weighted_bce(t, impressed, logged[i].labels, loss_cfg);
                 });
}

std::vector<EpochLog> train_pointwise_baseline(
    PointwiseBaseline& model, const std::vector<SlateSample>& dataset,
    const CriticConfig& loss_cfg, const OptimizerConfig& opt) {
  return run_sgd(dataset.size(), opt, model.params(),
                 [&](Tape& t, std::size_t i) {
                   Var probs = model.forward(t, dataset[i].items);
                   return weighted_bce(t, probs, dataset[i].labels, loss_cfg);
                 });
}

}  // namespace slatelab
