#include "slatelab/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace slatelab {

namespace {

constexpr double kProbFloor = 1e-6;
constexpr double kProbCeil = 1.0 - 1e-6;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t hash_of(std::uint64_t seed, std::uint64_t tag, std::uint64_t id) {
  return mix(mix(seed, tag), id);
}

double hash01(std::uint64_t seed, std::uint64_t tag, std::uint64_t id) {
  return static_cast<double>(hash_of(seed, tag, id) >> 11) * 0x1.0p-53;
}

double clamp_prob(double p) { return std::min(std::max(p, kProbFloor), kProbCeil); }

}  // namespace

void OracleConfig::validate() const {
  if (position_decay <= 0.0 || position_decay > 1.0)
    throw DomainError("oracle: position_decay must be in (0,1]");
  if (similarity_penalty < 0.0)
    throw DomainError("oracle: similarity_penalty must be >= 0");
  if (base_purchase_rate <= 0.0 || base_purchase_rate >= 1.0)
    throw DomainError("oracle: base_purchase_rate must be in (0,1)");
}

Oracle::Oracle(OracleConfig cfg, VocabConfig vocab)
    : cfg_(cfg), vocab_(vocab) {
  cfg_.validate();
  items_by_category_.resize(static_cast<std::size_t>(vocab_.categories));
  for (int i = 0; i < vocab_.items; ++i) {
    int cat = static_cast<int>(hash_of(cfg_.seed, 1, static_cast<std::uint64_t>(i)) %
                               static_cast<std::uint64_t>(vocab_.categories));
    items_by_category_[static_cast<std::size_t>(cat)].push_back(i);
  }
}

ItemFeatures Oracle::item_features(int item_id) const {
  if (item_id < 0 || item_id >= vocab_.items)
    throw DomainError("oracle: item id out of catalog range");
  const std::uint64_t id = static_cast<std::uint64_t>(item_id);
  ItemFeatures it;
  it.item_id = item_id;
  it.category_id = static_cast<int>(hash_of(cfg_.seed, 1, id) %
                                    static_cast<std::uint64_t>(vocab_.categories));
  // brands cluster inside categories so same-category items often share brand
  const int brands_per_cat = std::max(1, (2 * vocab_.brands) / vocab_.categories);
  const int brand_base = (it.category_id * vocab_.brands) / vocab_.categories;
  it.brand_id = static_cast<int>(
      (static_cast<std::uint64_t>(brand_base) +
       hash_of(cfg_.seed, 2, id) % static_cast<std::uint64_t>(brands_per_cat)) %
      static_cast<std::uint64_t>(vocab_.brands));
  it.seller_id = static_cast<int>(hash_of(cfg_.seed, 3, id) %
                                  static_cast<std::uint64_t>(vocab_.sellers));
  it.shop_id = static_cast<int>(hash_of(cfg_.seed, 4, id) %
                                static_cast<std::uint64_t>(vocab_.shops));
  it.price_bucket = 1 + static_cast<int>(hash_of(cfg_.seed, 5, id) %
                                         static_cast<std::uint64_t>(vocab_.price_buckets));
  const double quality = hash01(cfg_.seed, 6, id);
  it.stats.resize(static_cast<std::size_t>(vocab_.stats_dim), 0.0);
  std::vector<double> base = {
      0.01 + 0.15 * quality + 0.02 * (hash01(cfg_.seed, 7, id) - 0.5),  // ctr
      0.005 + 0.06 * quality + 0.01 * (hash01(cfg_.seed, 8, id) - 0.5), // cvr
      hash01(cfg_.seed, 9, id),                                         // popularity
      0.2 + 0.8 * quality};                                             // rating
  for (std::size_t s = 0; s < it.stats.size(); ++s)
    it.stats[s] = s < base.size() ? base[s] : hash01(cfg_.seed, 20 + s, id);
  return it;
}

int Oracle::hot_category(int query_id, int slot) const {
  return static_cast<int>(hash_of(cfg_.seed, 40 + static_cast<std::uint64_t>(slot),
                                  static_cast<std::uint64_t>(query_id)) %
                          static_cast<std::uint64_t>(vocab_.categories));
}

int Oracle::hot_brand(int query_id, int slot) const {
  const int cat = hot_category(query_id, slot);
  const int brands_per_cat = std::max(1, (2 * vocab_.brands) / vocab_.categories);
  const int brand_base = (cat * vocab_.brands) / vocab_.categories;
  return static_cast<int>(
      (static_cast<std::uint64_t>(brand_base) +
       hash_of(cfg_.seed, 50 + static_cast<std::uint64_t>(slot),
               static_cast<std::uint64_t>(query_id)) %
           static_cast<std::uint64_t>(brands_per_cat)) %
      static_cast<std::uint64_t>(vocab_.brands));
}

double Oracle::query_match(int query_id, const ItemFeatures& item) const {
  for (int slot = 0; slot < 2; ++slot) {
    if (item.category_id == hot_category(query_id, slot)) {
      if (item.brand_id == hot_brand(query_id, slot)) return 1.0;
      return 0.7;
    }
  }
  return 0.2;
}

double Oracle::user_match(const QueryContext& ctx, const ItemFeatures& item) const {
  double dot = 0.0;
  for (std::size_t d = 0; d < ctx.user_pref.size(); ++d) {
    const double dir = 2.0 * hash01(cfg_.seed, 60 + d,
                                    static_cast<std::uint64_t>(item.item_id)) - 1.0;
    dot += ctx.user_pref[d] * dir;
  }
  return 0.5 + 0.5 * std::tanh(dot);
}

double Oracle::session_affinity(const SessionBehavior& s,
                                const ItemFeatures& item) const {
  double best = 0.0;
  auto scan = [&](const std::vector<ItemFeatures>& list, double brand_w,
                  double cat_w) {
    for (const auto& it : list) {
      if (it.brand_id == item.brand_id) best = std::max(best, brand_w);
      else if (it.category_id == item.category_id) best = std::max(best, cat_w);
    }
  };
  scan(s.pay_list, 1.0, 0.6);
  scan(s.atc_list, 1.0, 0.6);
  scan(s.click_list, 0.5, 0.3);
  return best;
}

double Oracle::point_propensity(const QueryContext& ctx,
                                const ItemFeatures& item,
                                bool with_session) const {
  const double quality = 0.2 + 0.8 * ((item.stats.size() > 3)
                                          ? (item.stats[3] - 0.2) / 0.8
                                          : 0.5);
  const double mq = query_match(ctx.query_id, item);
  const double mu = user_match(ctx, item);
  double p = cfg_.base_purchase_rate * (0.06 + 0.24 * quality) *
             (0.2 + 0.8 * mq) * (0.3 + 0.7 * mu);
  if (with_session)
    p *= 1.0 + 0.8 * session_affinity(ctx.session, item);
  return clamp_prob(p);
}

int Oracle::draw_biased_item(int query_id, Rng& rng) const {
  if (rng.uniform() < 0.7) {
    const int slot = static_cast<int>(rng.uniform_int(2));
    const auto& pool = items_by_category_[static_cast<std::size_t>(
        hot_category(query_id, slot))];
    if (!pool.empty())
      return pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
  }
  return static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(vocab_.items)));
}

QueryContext Oracle::sample_context(Rng& rng) const {
  QueryContext ctx;
  ctx.query_id = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(vocab_.queries)));
  ctx.user_id = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(vocab_.users)));
  ctx.user_pref.resize(static_cast<std::size_t>(vocab_.user_pref_dim));
  for (double& x : ctx.user_pref) x = rng.gaussian();

  // funnel-thinned session drawn from the same query concentration
  const std::size_t n_pv = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::uint64_t>(vocab_.max_session_len + 1)));
  for (std::size_t i = 0; i < n_pv; ++i) {
    ItemFeatures it = item_features(draw_biased_item(ctx.query_id, rng));
    ctx.session.pv_list.push_back(it);
    if (rng.bernoulli(0.35)) {
      ctx.session.click_list.push_back(it);
      if (rng.bernoulli(0.35)) {
        ctx.session.atc_list.push_back(it);
        if (rng.bernoulli(0.4)) ctx.session.pay_list.push_back(it);
      }
    }
  }
  return ctx;
}

CandidateSet Oracle::sample_candidate_set(int n, Rng& rng) const {
  if (n <= 0 || n > vocab_.items)
    throw DomainError("oracle: candidate count out of range");
  CandidateSet cs;
  cs.context = sample_context(rng);

  std::unordered_set<int> seen;
  std::vector<int> pool;
  const int attempts = 4 * n;
  for (int a = 0; a < attempts && static_cast<int>(pool.size()) < 3 * n; ++a) {
    int id = draw_biased_item(cs.context.query_id, rng);
    if (seen.insert(id).second) pool.push_back(id);
  }
  // fill with uniform draws if the pool came up short
  while (static_cast<int>(pool.size()) < n) {
    int id = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(vocab_.items)));
    if (seen.insert(id).second) pool.push_back(id);
  }

  std::vector<std::pair<double, int>> scored;
  scored.reserve(pool.size());
  for (int id : pool) {
    ItemFeatures it = item_features(id);
    const double ltr =
        point_propensity(cs.context, it, /*with_session=*/false) +
        0.0035 * rng.gaussian();
    scored.emplace_back(ltr, id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (int r = 0; r < n; ++r) {
    ItemFeatures it = item_features(scored[static_cast<std::size_t>(r)].second);
    it.position_hint = r + 1;
    cs.items.push_back(std::move(it));
    cs.ltr_scores.push_back(scored[static_cast<std::size_t>(r)].first);
  }
  return cs;
}

std::vector<double> Oracle::slate_probs(const QueryContext& ctx,
                                        std::span<const ItemFeatures> slate) const {
  std::unordered_set<int> ids;
  for (const auto& it : slate)
    if (!ids.insert(it.item_id).second)
      throw DomainError("oracle: duplicate items in slate");

  std::vector<int> prices;
  prices.reserve(slate.size());
  for (const auto& it : slate) prices.push_back(it.price_bucket);
  std::vector<int> sorted = prices;
  std::sort(sorted.begin(), sorted.end());
  const int median = sorted.empty() ? 0 : sorted[sorted.size() / 2];

  std::vector<double> probs;
  probs.reserve(slate.size());
  for (std::size_t t = 0; t < slate.size(); ++t) {
    const ItemFeatures& item = slate[t];
    double p = point_propensity(ctx, item, /*with_session=*/true);
    p *= std::pow(cfg_.position_decay, static_cast<double>(t));
    int matches = 0;
    for (std::size_t s = 0; s < t; ++s)
      if (slate[s].brand_id == item.brand_id ||
          slate[s].category_id == item.category_id)
        ++matches;
    p *= std::max(0.05, std::pow(1.0 - cfg_.similarity_penalty, matches));
    if (item.price_bucket >= median + 2)
      p *= std::max(0.05, 1.0 + cfg_.price_outlier_boost);
    probs.push_back(clamp_prob(p));
  }
  return probs;
}

std::vector<Label> Oracle::slate_response(const QueryContext& ctx,
                                          std::span<const ItemFeatures> slate,
                                          Rng& rng) const {
  const std::vector<double> probs = slate_probs(ctx, slate);
  std::vector<Label> labels;
  labels.reserve(slate.size());
  for (std::size_t t = 0; t < slate.size(); ++t) {
    const double p = probs[t];
    if (rng.bernoulli(p)) {
      labels.push_back(Label::pay);
      continue;
    }
    const double sa = session_affinity(ctx.session, slate[t]);
    if (rng.bernoulli(std::min(0.3, 3.0 * p))) {
      labels.push_back(Label::atc);
    } else if (rng.bernoulli(std::min(0.5, 8.0 * p + 0.01 + 0.04 * sa))) {
      labels.push_back(Label::click);
    } else {
      labels.push_back(Label::impression);
    }
  }
  return labels;
}

double Oracle::slate_value(const QueryContext& ctx,
                           std::span<const ItemFeatures> slate) const {
  const std::vector<double> probs = slate_probs(ctx, slate);
  return slate_value_from_probs(probs);
}

double slate_value_from_probs(std::span<const double> probs) {
  double q = 1.0;
  for (double p : probs) q *= 1.0 - p;
  return 1.0 - q;
}

}  // namespace slatelab
