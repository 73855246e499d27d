#include "slatelab/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace slatelab {

void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int nw = std::min<int>(workers, static_cast<int>(count));
  pool.reserve(static_cast<std::size_t>(nw));
  for (int w = 0; w < nw; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw DimensionError("auc: score/label length mismatch");
  std::size_t pos = 0, neg = 0;
  for (int l : labels) (l != 0 ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw DomainError("auc undefined: both classes must be present");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j + 1);  // 1-based
    for (std::size_t t = i; t < j; ++t)
      if (labels[order[t]] != 0) rank_sum_pos += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

AucTriple auc_triple(const std::vector<SlateSample>& test, const ItemProbFn& fn,
                     int workers) {
  std::vector<std::vector<double>> probs(test.size());
  parallel_for(test.size(), workers,
               [&](std::size_t i) { probs[i] = fn(i, test[i]); });

  std::vector<double> pv_scores, click_scores, slate_scores;
  std::vector<int> pv_labels, click_labels, slate_labels;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const SlateSample& s = test[i];
    if (probs[i].size() != s.items.size())
      throw DimensionError("auc_triple: scorer returned wrong item count");
    double q = 1.0;
    for (std::size_t a = 0; a < s.items.size(); ++a) {
      const int paid = s.labels[a] == Label::pay ? 1 : 0;
      pv_scores.push_back(probs[i][a]);
      pv_labels.push_back(paid);
      if (s.labels[a] != Label::impression) {
        click_scores.push_back(probs[i][a]);
        click_labels.push_back(paid);
      }
      q *= 1.0 - probs[i][a];
    }
    slate_scores.push_back(1.0 - q);
    slate_labels.push_back(slate_has_pay(s) ? 1 : 0);
  }
  AucTriple out;
  out.pv_pay = auc(pv_scores, pv_labels);
  out.click_pay = auc(click_scores, click_labels);
  out.slate_pay = auc(slate_scores, slate_labels);
  return out;
}

AucTriple eval_critic(const CriticModel& model,
                      const std::vector<SlateSample>& test, int workers) {
  return auc_triple(
      test,
      [&](std::size_t, const SlateSample& s) {
        Tape t;
        return model.forward(t, s).item_probs;
      },
      workers);
}

double replacement_ratio(const PolicyModel& policy, const CriticModel& critic,
                         const std::vector<CandidateSet>& contexts,
                         int workers) {
  const int k = critic.config().slate_size;
  std::vector<int> better(contexts.size(), 0);
  parallel_for(contexts.size(), workers, [&](std::size_t i) {
    const CandidateSet& cs = contexts[i];
    RolloutResult r = policy.rollout(cs, RolloutMode::greedy, nullptr);
    std::vector<ItemFeatures> generated, original;
    for (int a : r.slate) generated.push_back(cs.items[static_cast<std::size_t>(a)]);
    for (int a = 0; a < k; ++a)
      original.push_back(cs.items[static_cast<std::size_t>(a)]);
    Tape tg, to;
    const double gen_score = critic.forward(tg, cs.context, generated).slate_prob;
    const double orig_score = critic.forward(to, cs.context, original).slate_prob;
    better[i] = gen_score > orig_score ? 1 : 0;
  });
  double sum = 0.0;
  for (int b : better) sum += b;
  return sum / static_cast<double>(contexts.size());
}

std::vector<LoggedEpisode> log_episodes(const PolicyModel& behavior,
                                        const Oracle& oracle,
                                        const std::vector<CandidateSet>& contexts,
                                        std::size_t count, Rng& rng) {
  if (contexts.empty()) throw DataError("log_episodes: no contexts");
  std::vector<LoggedEpisode> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    LoggedEpisode ep;
    ep.cs_index = static_cast<int>(rng.uniform_int(contexts.size()));
    const CandidateSet& cs = contexts[static_cast<std::size_t>(ep.cs_index)];
    RolloutResult r = behavior.rollout(cs, RolloutMode::sample, &rng);
    ep.slate = std::move(r.slate);
    std::vector<ItemFeatures> items;
    for (int a : ep.slate) items.push_back(cs.items[static_cast<std::size_t>(a)]);
    const std::vector<Label> labels = oracle.slate_response(cs.context, items, rng);
    int paid = 0;
    for (Label l : labels)
      if (l == Label::pay) ++paid;
    ep.reward = static_cast<double>(paid);
    out.push_back(std::move(ep));
  }
  return out;
}

IpsResult ips_estimate(const PolicyModel& behavior, const PolicyModel& target,
                       const std::vector<LoggedEpisode>& logged,
                       const std::vector<CandidateSet>& contexts,
                       int workers) {
  if (logged.empty()) throw DataError("ips: no logged episodes");
  std::vector<double> ratios(logged.size());
  std::vector<std::size_t> violations;
  std::mutex viol_mutex;
  parallel_for(logged.size(), workers, [&](std::size_t i) {
    const LoggedEpisode& ep = logged[i];
    const CandidateSet& cs = contexts.at(static_cast<std::size_t>(ep.cs_index));
    const double lb = behavior.slate_log_prob(cs, ep.slate);
    if (!std::isfinite(lb) || std::exp(lb) <= 0.0) {
      std::lock_guard<std::mutex> lock(viol_mutex);
      violations.push_back(i);
      return;
    }
    const double lt = target.slate_log_prob(cs, ep.slate);
    ratios[i] = std::exp(lt - lb);
  });
  if (!violations.empty()) {
    std::sort(violations.begin(), violations.end());
    std::string msg = "ips: behavior policy has zero support on samples:";
    for (std::size_t i = 0; i < violations.size() && i < 10; ++i)
      msg += " " + std::to_string(violations[i]);
    throw DataError(msg);
  }

  std::vector<double> rewards(logged.size());
  for (std::size_t i = 0; i < logged.size(); ++i) rewards[i] = logged[i].reward;
  return ips_from_ratios(ratios, rewards);
}

IpsResult ips_from_ratios(const std::vector<double>& ratios,
                          const std::vector<double>& rewards) {
  if (ratios.size() != rewards.size() || ratios.empty())
    throw DimensionError("ips: ratio/reward length mismatch");
  const double m = static_cast<double>(ratios.size());
  KahanSum sum_wr, sum_w;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    sum_wr.add(ratios[i] * rewards[i]);
    sum_w.add(ratios[i]);
  }
  IpsResult res;
  res.ips = sum_wr.value() / m;
  res.wips = sum_w.value() > 0.0 ? sum_wr.value() / sum_w.value() : 0.0;

  KahanSum var_ips, var_wips;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double x = ratios[i] * rewards[i] - res.ips;
    var_ips.add(x * x);
    const double y = ratios[i] * (rewards[i] - res.wips);
    var_wips.add(y * y);
  }
  res.se_ips = m > 1.0 ? std::sqrt(var_ips.value() / (m - 1.0)) / std::sqrt(m) : 0.0;
  res.se_wips = sum_w.value() > 0.0
                    ? std::sqrt(var_wips.value()) / sum_w.value()
                    : 0.0;
  return res;
}

double ips(const PolicyModel& behavior, const PolicyModel& target,
           const std::vector<LoggedEpisode>& logged,
           const std::vector<CandidateSet>& contexts, bool weighted) {
  IpsResult r = ips_estimate(behavior, target, logged, contexts);
  return weighted ? r.wips : r.ips;
}

double entropy_of_values(const std::vector<int>& values) {
  if (values.empty()) throw DomainError("entropy: empty value list");
  std::map<int, int> counts;
  for (int v : values) counts[v]++;
  const double n = static_cast<double>(values.size());
  double h = 0.0;
  for (const auto& [v, c] : counts) {
    const double q = static_cast<double>(c) / n;
    h -= q * std::log(q);
  }
  return h;
}

double slate_entropy(const std::vector<std::vector<ItemFeatures>>& slates,
                     EntropyFeature feature) {
  if (slates.empty()) throw DomainError("slate_entropy: no slates");
  KahanSum sum;
  for (const auto& slate : slates) {
    std::vector<int> values;
    values.reserve(slate.size());
    for (const auto& it : slate)
      values.push_back(feature == EntropyFeature::brand ? it.brand_id
                                                        : it.price_bucket);
    sum.add(entropy_of_values(values));
  }
  return sum.value() / static_cast<double>(slates.size());
}

Tensor attention_matrix(const CriticModel& model, const QueryContext& ctx,
                        std::span<const ItemFeatures> items) {
  Tape t;
  CriticOutput out = model.forward(t, ctx, items);
  return out.pair_attention;
}

void write_attention_csv(const std::string& path, const Tensor& alpha) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  os.precision(17);
  const std::size_t rows = alpha.rows(), cols = alpha.cols();
  for (std::size_t j = 0; j < rows; ++j) {
    for (std::size_t a = 0; a < cols; ++a) {
      if (a) os << ',';
      os << alpha.at(j, a);
    }
    os << '\n';
  }
  if (!os) throw DataError("write failure on " + path);
}

Tensor read_attention_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path + ": empty attention file");
  Tensor t = Tensor::zeros(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows[0].size())
      throw DataError(path + ": ragged attention file");
    for (std::size_t j = 0; j < rows[i].size(); ++j) t.at(i, j) = rows[i][j];
  }
  return t;
}

SlateSample attention_demo_slate(const VocabConfig& vocab) {
  const int prices[10] = {4, 3, 5, 5, 5, 5, 5, 5, 4, 5};
  SlateSample s;
  s.context.query_id = 0;
  s.context.user_id = 0;
  s.context.user_pref.assign(static_cast<std::size_t>(vocab.user_pref_dim), 0.0);
  for (int i = 0; i < 10; ++i) {
    ItemFeatures it;
    it.item_id = i % vocab.items;
    it.category_id = 7 % vocab.categories;
    it.brand_id = 3 % vocab.brands;
    it.seller_id = 11 % vocab.sellers;
    it.shop_id = 5 % vocab.shops;
    it.price_bucket = std::min(prices[i], vocab.price_buckets);
    it.stats.assign(static_cast<std::size_t>(vocab.stats_dim), 0.1);
    it.position_hint = i + 1;
    s.items.push_back(std::move(it));
    s.labels.push_back(Label::impression);
  }
  return s;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double wilcoxon_signed_rank_p(const std::vector<double>& a,
                              const std::vector<double>& b) {
  if (a.size() != b.size())
    throw DimensionError("wilcoxon: paired samples must have equal length");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  const std::size_t n = diffs.size();
  if (n < 5) return 1.0;  // not enough signal for the normal approximation

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return std::fabs(diffs[x]) < std::fabs(diffs[y]);
  });
  std::vector<double> ranks(n, 0.0);
  double tie_correction = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n &&
           std::fabs(diffs[order[j]]) == std::fabs(diffs[order[i]]))
      ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j + 1);
    const double t = static_cast<double>(j - i);
    if (t > 1.0) tie_correction += t * t * t - t;
    for (std::size_t q = i; q < j; ++q) ranks[order[q]] = avg_rank;
    i = j;
  }
  double w_plus = 0.0;
  for (std::size_t q = 0; q < n; ++q)
    if (diffs[q] > 0.0) w_plus += ranks[q];
  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var =
      nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_correction / 48.0;
  if (var <= 0.0) return 1.0;
  const double z = (w_plus - mean) / std::sqrt(var);
  return 1.0 - normal_cdf(z);
}

}  // namespace slatelab
