// Acceptance suite: one pass/fail line per criterion, heavy artifacts shared
// across criteria and built once per seed.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "slatelab/checkpoint.hpp"
#include "slatelab/pipeline.hpp"
#include "slatelab/rl.hpp"

using namespace slatelab;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

namespace {

// ---- experiment sizes ----
constexpr int kTrainPairs = 10000;
constexpr int kTestPairs = 20000;
constexpr int kCriticEpochs = 5;
constexpr int kPolicyBatches = 80;
constexpr int kReplacementContexts = 500;
constexpr int kEntropyContexts = 500;
constexpr std::size_t kIpsEpisodes = 8000;
const std::uint64_t kSeeds[3] = {11, 23, 37};

int workers() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw >= 4 ? 4 : (hw >= 2 ? 2 : 1);
}

struct Harness {
  int passed = 0;
  int failed = 0;
  void report(const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name;
    if (!detail.empty()) std::cout << " — " << detail;
    std::cout << std::endl;
    (ok ? passed : failed)++;
  }
  template <typename Fn>
  void criterion(const std::string& name, Fn fn) {
    const auto start = Clock::now();
    try {
      std::pair<bool, std::string> r = fn();
      const double dt = std::chrono::duration<double>(Clock::now() - start).count();
      std::ostringstream os;
      os << r.second << " [" << static_cast<int>(dt) << "s]";
      report(name, r.first, os.str());
    } catch (const std::exception& e) {
      report(name, false, std::string("exception: ") + e.what());
    }
  }
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// tiny fixtures for the fast criteria

VocabConfig tiny_vocab() {
  VocabConfig v;
  v.items = 60;
  v.categories = 8;
  v.brands = 12;
  v.sellers = 15;
  v.shops = 15;
  v.price_buckets = 6;
  v.queries = 10;
  v.users = 20;
  v.user_pref_dim = 3;
  v.max_session_len = 6;
  return v;
}

CriticConfig tiny_critic_config(int k) {
  CriticConfig c;
  c.embed_dim = 3;
  c.hidden_dim = 6;
  c.gru_dim = 4;
  c.pin_dim = 4;
  c.fcn_dim = 4;
  c.relpos_dim = 3;
  c.slate_size = k;
  return c;
}

PolicyConfig tiny_policy_config(int k) {
  PolicyConfig p;
  p.embed_dim = 3;
  p.hidden_dim = 6;
  p.su_dim = 4;
  p.sg_dim = 4;
  p.slate_size = k;
  return p;
}

double fd_loss(const std::function<double()>& eval, Tensor& param,
               std::size_t idx, double h) {
  const double saved = param.data[idx];
  param.data[idx] = saved + h;
  const double up = eval();
  param.data[idx] = saved - h;
  const double down = eval();
  param.data[idx] = saved;
  return (up - down) / (2.0 * h);
}

// ---------------------------------------------------------------------------
// per-seed heavy artifacts

struct SeedResults {
  AucTriple fsc, gru, pw;
  // slate-pay auc per ablation variant, cumulative order
  std::map<std::string, double> variant_slate_auc;
  std::map<std::string, double> replacement;
  std::map<std::string, IpsResult> ips;
  std::vector<double> ppox_scores, ppo_scores;          // paired per context
  std::vector<double> ppox_entropies, ppo_entropies;    // paired per context
  double ppox_brand_entropy = 0, ppox_price_entropy = 0;
  double base_brand_entropy = 0, base_price_entropy = 0;
  bool ppox_improved = false;
  double critic_dup_gap = 0, oracle_dup_gap = 0;  // diverse minus duplicated
};

struct StageTimes {
  double c4 = 0, c5 = 0, c6 = 0, c8 = 0;
};

SeedResults run_seed(std::uint64_t seed, StageTimes& times) {
  const int nw = workers();
  RunConfig cfg = default_config();
  cfg.seed = seed;
  cfg.oracle.seed = seed;
  Oracle oracle(cfg.oracle, cfg.data.vocab);
  SeedResults out;

  GeneratedPairs train = generate_pairs(oracle, kTrainPairs, 50, 10, seed, nw);
  GeneratedPairs test =
      generate_pairs(oracle, kTestPairs, 50, 10, seed ^ 0x7e57ULL, nw);

  OptimizerConfig opt = cfg.critic_opt;
  opt.epochs = kCriticEpochs;
  opt.seed = seed;

  // --- criterion 4 models ---
  auto t0 = Clock::now();
  CriticModel fsc(cfg.critic, cfg.data.vocab, seed);
  train_critic(fsc, train.slates, opt);
  out.fsc = eval_critic(fsc, test.slates, nw);

  NCandBaseline gru(cfg.critic.embed_dim, cfg.critic.gru_dim, cfg.data.vocab, seed);
  train_ncand_baseline(gru, train.candidates, train.slates, cfg.critic, opt);
  out.gru = auc_triple(
      test.slates,
      [&](std::size_t i, const SlateSample&) {
        std::vector<double> s = gru.scores(test.candidates[i]);
        return std::vector<double>(s.begin(), s.begin() + 10);
      },
      nw);

  PointwiseBaseline pw(cfg.critic.embed_dim, 16, cfg.data.vocab, seed);
  train_pointwise_baseline(pw, train.slates, cfg.critic, opt);
  out.pw = auc_triple(
      test.slates,
      [&](std::size_t, const SlateSample& s) {
        Tape t;
        return t.val(pw.forward(t, s.items)).data;
      },
      nw);
  times.c4 += std::chrono::duration<double>(Clock::now() - t0).count();
  std::cout << "  seed " << seed << ": fsc slate-pay " << fmt(out.fsc.slate_pay)
            << ", gru50 " << fmt(out.gru.slate_pay) << ", pointwise "
            << fmt(out.pw.slate_pay) << std::endl;

  // --- criterion 5 ablation grid (cumulative components) ---
  auto t1 = Clock::now();
  const std::vector<std::pair<std::string, CriticComponents>> grid = {
      {"dnn", {false, false, false, false}},
      {"dnn+fcn", {false, false, false, true}},
      {"dnn+fcn+pin", {false, true, false, true}},
      {"dnn+fcn+pin+bigru", {false, true, true, true}},
  };
  for (const auto& [name, comps] : grid) {
    CriticConfig vc = cfg.critic;
    vc.components = comps;
    CriticModel variant(vc, cfg.data.vocab, seed);
    train_critic(variant, train.slates, opt);
    out.variant_slate_auc[name] = eval_critic(variant, test.slates, nw).slate_pay;
  }
  out.variant_slate_auc["full"] = out.fsc.slate_pay;
  times.c5 += std::chrono::duration<double>(Clock::now() - t1).count();
  {
    std::ostringstream os;
    os << "  seed " << seed << " ablation:";
    for (const auto& [name, v] : out.variant_slate_auc)
      os << ' ' << name << '=' << fmt(v);
    std::cout << os.str() << std::endl;
  }

  // --- criterion 6 policies ---
  auto t2 = Clock::now();
  PolicyDataset pdata{&train.candidates, &train.slates};
  TrainConfig tc = cfg.trainer;
  tc.num_batches = kPolicyBatches;
  tc.eval_contexts = 32;
  const std::vector<CandidateSet> eval_ctx(
      test.candidates.begin(), test.candidates.begin() + kReplacementContexts);

  std::map<std::string, std::unique_ptr<PolicyModel>> policies;
  auto train_one = [&](const std::string& name, Algorithm algo, bool sg,
                       RewardMode rm) {
    PolicyConfig pc = cfg.policy;
    pc.use_sg_cell = sg;
    auto policy = std::make_unique<PolicyModel>(pc, cfg.data.vocab, seed ^ 0xb0ULL);
    TrainConfig t = tc;
    t.reward_mode = rm;
    Rng rng(seed ^ 0x90110ULL);
    PolicyTrainResult r = train_policy(algo, *policy, fsc, pdata, t, rng);
    if (name == "ppo-exploration")
      out.ppox_improved =
          r.curve.back().mean_slate_score > r.curve.front().mean_slate_score;
    out.replacement[name] = replacement_ratio(*policy, fsc, eval_ctx, nw);
    policies[name] = std::move(policy);
  };
  train_one("reinforce-nosg", Algorithm::reinforce, false, RewardMode::oracle);
  train_one("reinforce", Algorithm::reinforce, true, RewardMode::model);
  train_one("ppo", Algorithm::ppo, true, RewardMode::model);
  train_one("ppo-exploration", Algorithm::ppo_exploration, true, RewardMode::model);

  // paired per-context critic scores and entropies for ppo vs ppo-exploration
  std::vector<std::vector<ItemFeatures>> ppox_slates, base_slates;
  for (int i = 0; i < kEntropyContexts; ++i) {
    const CandidateSet& cs = test.candidates[static_cast<std::size_t>(i)];
    auto greedy_items = [&](const PolicyModel& p) {
      RolloutResult r = p.rollout(cs, RolloutMode::greedy, nullptr);
      std::vector<ItemFeatures> items;
      for (int a : r.slate) items.push_back(cs.items[static_cast<std::size_t>(a)]);
      return items;
    };
    std::vector<ItemFeatures> sx = greedy_items(*policies["ppo-exploration"]);
    std::vector<ItemFeatures> sp = greedy_items(*policies["ppo"]);
    Tape tx, tp;
    out.ppox_scores.push_back(fsc.forward(tx, cs.context, sx).slate_prob);
    out.ppo_scores.push_back(fsc.forward(tp, cs.context, sp).slate_prob);
    std::vector<int> bx, bp;
    for (const auto& it : sx) bx.push_back(it.brand_id);
    for (const auto& it : sp) bp.push_back(it.brand_id);
    out.ppox_entropies.push_back(entropy_of_values(bx));
    out.ppo_entropies.push_back(entropy_of_values(bp));
    ppox_slates.push_back(std::move(sx));
    base_slates.emplace_back(cs.items.begin(), cs.items.begin() + 10);
  }
  out.ppox_brand_entropy = slate_entropy(ppox_slates, EntropyFeature::brand);
  out.ppox_price_entropy = slate_entropy(ppox_slates, EntropyFeature::price_bucket);
  out.base_brand_entropy = slate_entropy(base_slates, EntropyFeature::brand);
  out.base_price_entropy = slate_entropy(base_slates, EntropyFeature::price_bucket);
  times.c6 += std::chrono::duration<double>(Clock::now() - t2).count();
  {
    std::ostringstream os;
    os << "  seed " << seed << " replacement:";
    for (const auto& [name, v] : out.replacement) os << ' ' << name << '=' << fmt(v);
    std::cout << os.str() << std::endl;
  }

  // --- criterion 8: ips of the three table rows under the no-sg behavior ---
  auto t3 = Clock::now();
  {
    Rng rng(seed ^ 0x175ULL);
    auto logged = log_episodes(*policies["reinforce-nosg"], oracle,
                               test.candidates, kIpsEpisodes, rng);
    for (const char* name : {"reinforce", "ppo", "ppo-exploration"})
      out.ips[name] = ips_estimate(*policies["reinforce-nosg"], *policies[name],
                                   logged, test.candidates, nw);
  }
  times.c8 += std::chrono::duration<double>(Clock::now() - t3).count();
  {
    std::ostringstream os;
    os << "  seed " << seed << " ips:";
    for (const auto& [name, v] : out.ips)
      os << ' ' << name << '=' << fmt(v.ips, 5) << '/' << fmt(v.wips, 5);
    std::cout << os.str() << std::endl;
  }

  // --- property probe: duplicate-heavy vs diversified slates on the critic ---
  {
    KahanSum critic_diff, oracle_diff;
    int counted = 0;
    for (std::size_t i = 0; i < 1000 && i < test.candidates.size(); ++i) {
      const CandidateSet& cs = test.candidates[i];
      std::map<int, int> brand_count;
      for (const auto& it : cs.items) brand_count[it.brand_id]++;
      int modal = brand_count.begin()->first, most = 0;
      for (const auto& [b, c] : brand_count)
        if (c > most) {
          most = c;
          modal = b;
        }
      if (most < 10) continue;
      std::vector<ItemFeatures> dup, diverse;
      std::set<int> used_brands;
      for (const auto& it : cs.items)
        if (dup.size() < 10 && it.brand_id == modal) dup.push_back(it);
      for (const auto& it : cs.items)
        if (diverse.size() < 10 && used_brands.insert(it.brand_id).second)
          diverse.push_back(it);
      if (diverse.size() < 10) continue;
      Tape td, tv;
      critic_diff.add(fsc.forward(tv, cs.context, diverse).slate_prob -
                      fsc.forward(td, cs.context, dup).slate_prob);
      oracle_diff.add(oracle.slate_value(cs.context, diverse) -
                      oracle.slate_value(cs.context, dup));
      ++counted;
    }
    if (counted > 0) {
      out.critic_dup_gap = critic_diff.value() / counted;
      out.oracle_dup_gap = oracle_diff.value() / counted;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CLI helpers for criteria 10 and 11

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SLATELAB_CLI_PATH) + " " + args +
                          " > /dev/null 2> /dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::string temp_dir(const std::string& tag) {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() /
                     ("slatelab_acc_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

json small_cli_config(const std::string& out, std::uint64_t seed) {
  json cfg;
  cfg["seed"] = seed;
  cfg["output_dir"] = out;
  cfg["data"] = {{"num_train", 200}, {"num_test", 150},
                 {"vocab", {{"items", 200}, {"queries", 30}, {"users", 60}}}};
  cfg["critic"] = {{"embed_dim", 4}, {"hidden_dim", 8}, {"gru_dim", 4},
                   {"pin_dim", 4},   {"fcn_dim", 4},    {"relpos_dim", 3}};
  cfg["critic_opt"] = {{"epochs", 1}, {"batch_size", 64}};
  cfg["trainer"] = {{"num_batches", 2}, {"eval_contexts", 8}};
  cfg["eval"] = {{"ips_logged_episodes", 100},
                 {"entropy_contexts", 50},
                 {"replacement_contexts", 50}};
  return cfg;
}

}  // namespace

int main() {
  Harness h;
  std::cout << "slatelab acceptance suite (" << workers() << " workers)\n";

  // ------------------------------------------------------------ criterion 1
  h.criterion("criterion 1: gradient integrity (fd, rtol 1e-4)", [&] {
    const int k = 4;
    Oracle oracle(OracleConfig{.seed = 5}, tiny_vocab());
    GeneratedPairs pairs = generate_pairs(oracle, 6, 8, k, 5);
    std::size_t checked = 0, failed = 0;
    std::string worst;

    for (std::uint64_t seed : {1ULL, 2ULL}) {
      CriticModel critic(tiny_critic_config(k), tiny_vocab(), seed);
      const SlateSample& s = pairs.slates[seed % pairs.slates.size()];
      auto eval_critic_loss = [&]() {
        Tape t;
        CriticOutput o = critic.forward(t, s);
        return t.scalar_val(critic.loss(t, o, s.labels));
      };
      std::map<std::string, Tensor> grads;
      {
        Tape t;
        CriticOutput o = critic.forward(t, s);
        grads = t.backward(critic.loss(t, o, s.labels));
      }
      Rng rng(seed * 31 + 7);
      for (auto& [name, g] : grads) {
        for (int c = 0; c < 2; ++c) {
          const std::size_t idx = static_cast<std::size_t>(rng.uniform_int(g.numel()));
          const double fd = fd_loss(eval_critic_loss,
                                    critic.params().lookup(name), idx, 1e-5);
          const double an = g.data[idx];
          ++checked;
          if (std::fabs(an - fd) >
              1e-6 + 1e-4 * std::max(std::fabs(an), std::fabs(fd))) {
            ++failed;
            worst = "critic " + name;
          }
        }
      }

      PolicyModel policy(tiny_policy_config(3), tiny_vocab(), seed);
      const CandidateSet& cs = pairs.candidates[(seed + 1) % pairs.candidates.size()];
      auto eval_policy_loss = [&]() {
        Tape t;
        PolicyModel::EpisodeCtx ctx = policy.episode_ctx(t, cs);
        MdpState s0 = initial_state(cs);
        PolicyModel::ForwardVars f0 = policy.forward(t, ctx, s0);
        MdpState s1 = step(s0, 1);
        PolicyModel::ForwardVars f1 = policy.forward(t, ctx, s1);
        Var loss = t.add(t.scale(t.log_(t.pick(f0.probs, 1)), 0.8),
                         t.scale(t.log_(t.pick(f1.probs, 4)), 1.2));
        return t.scalar_val(loss);
      };
      std::map<std::string, Tensor> pgrads;
      {
        Tape t;
        PolicyModel::EpisodeCtx ctx = policy.episode_ctx(t, cs);
        MdpState s0 = initial_state(cs);
        PolicyModel::ForwardVars f0 = policy.forward(t, ctx, s0);
        MdpState s1 = step(s0, 1);
        PolicyModel::ForwardVars f1 = policy.forward(t, ctx, s1);
        Var loss = t.add(t.scale(t.log_(t.pick(f0.probs, 1)), 0.8),
                         t.scale(t.log_(t.pick(f1.probs, 4)), 1.2));
        pgrads = t.backward(loss);
      }
      for (auto& [name, g] : pgrads) {
        for (int c = 0; c < 2; ++c) {
          const std::size_t idx = static_cast<std::size_t>(rng.uniform_int(g.numel()));
          const double fd = fd_loss(eval_policy_loss,
                                    policy.params().lookup(name), idx, 1e-5);
          const double an = g.data[idx];
          ++checked;
          if (std::fabs(an - fd) >
              1e-6 + 1e-4 * std::max(std::fabs(an), std::fabs(fd))) {
            ++failed;
            worst = "policy " + name;
          }
        }
      }
    }
    const bool ok = failed == 0 && checked >= 100;
    return std::make_pair(ok, std::to_string(checked) + " points, " +
                                  std::to_string(failed) + " failures" +
                                  (worst.empty() ? "" : " (worst " + worst + ")"));
  });

  // ------------------------------------------------------------ criterion 2
  h.criterion("criterion 2: eq. 3 exactness over 10^4 forward passes", [&] {
    const int k = 4;
    Oracle oracle(OracleConfig{.seed = 9}, tiny_vocab());
    GeneratedPairs pairs = generate_pairs(oracle, 50, 8, k, 9);
    double worst = 0.0;
    std::size_t cases = 0;
    Rng rng(2);
    for (int block = 0; block < 100; ++block) {
      CriticModel critic(tiny_critic_config(k), tiny_vocab(), rng.next_u64());
      for (int rep = 0; rep < 100; ++rep) {
        const SlateSample& s =
            pairs.slates[static_cast<std::size_t>(rng.uniform_int(pairs.slates.size()))];
        Tape t;
        CriticOutput out = critic.forward(t, s);
        double q = 1.0;
        for (double p : out.item_probs) q *= 1.0 - p;
        worst = std::max(worst, std::fabs(out.slate_prob - (1.0 - q)));
        ++cases;
      }
    }
    return std::make_pair(worst <= 1e-12 && cases == 10000,
                          "max |slate - (1 - prod)| = " + fmt(worst, 18));
  });

  // ------------------------------------------------------------ criterion 3
  h.criterion("criterion 3: algorithm-1 returns and advantages", [&] {
    std::vector<double> returns, advs;
    fill_returns(returns, advs, {0.1, 0.2}, {1.0, 0.5}, 1.0, 1.0);
    const bool hand = advs[0] == 1.3 && advs[1] == 0.7 &&
                      returns[0] == 0.1 + 0.2 && returns[1] == 0.2;

    Rng rng(12);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
      const std::size_t k = 1 + rng.uniform_int(10);
      std::vector<double> rewards(k), d(k);
      for (double& x : rewards) x = rng.uniform(-1.0, 1.0);
      for (double& x : d) x = rng.uniform(0.0, 2.0);
      const double gamma = rng.uniform(0.0, 1.0);
      const double c = rng.uniform(0.0, 2.0);
      fill_returns(returns, advs, rewards, d, gamma, c);
      for (std::size_t t = 0; t < k; ++t) {
        double acc = 0.0, g = 1.0;
        for (std::size_t u = t; u < k; ++u) {
          acc += g * rewards[u];
          g *= gamma;
        }
        worst = std::max(worst, std::fabs(returns[t] - acc));
        worst = std::max(worst, std::fabs(advs[t] - (returns[t] + c * d[t])));
      }
    }
    return std::make_pair(hand && worst < 1e-12,
                          std::string("hand case ") + (hand ? "exact" : "WRONG") +
                              ", max summation gap " + fmt(worst, 16));
  });

  // ---------------------------------------------------- criteria 4, 5, 6, 8, 9
  StageTimes times;
  std::vector<SeedResults> seeds;
  std::cout << "building per-seed artifacts (3 seeds x critic grid + 4 policies)"
            << std::endl;
  bool seed_build_failed = false;
  std::string seed_error;
  try {
    for (std::uint64_t seed : kSeeds) seeds.push_back(run_seed(seed, times));
  } catch (const std::exception& e) {
    seed_build_failed = true;
    seed_error = e.what();
  }

  auto seed_mean = [&](auto getter) {
    double s = 0.0;
    for (const auto& r : seeds) s += getter(r);
    return s / static_cast<double>(seeds.size());
  };

  h.criterion("criterion 4: impressed-bias direction (fsc > gru50 > pointwise)", [&] {
    if (seed_build_failed) return std::make_pair(false, seed_error);
    const double fsc = seed_mean([](const SeedResults& r) { return r.fsc.slate_pay; });
    const double gru = seed_mean([](const SeedResults& r) { return r.gru.slate_pay; });
    const double pw = seed_mean([](const SeedResults& r) { return r.pw.slate_pay; });
    const bool ok = fsc > gru + 0.01 && gru > pw + 0.01;
    std::ostringstream os;
    os << "slate-pay auc: fsc " << fmt(fsc) << ", gru50 " << fmt(gru)
       << ", pointwise " << fmt(pw) << " (3-seed mean), runtime "
       << static_cast<int>(times.c4) << "s < 900s";
    return std::make_pair(ok && times.c4 < 900.0, os.str());
  });

  h.criterion("criterion 5: ablation grid monotone, full model best", [&] {
    if (seed_build_failed) return std::make_pair(false, seed_error);
    const std::vector<std::string> order = {"dnn", "dnn+fcn", "dnn+fcn+pin",
                                            "dnn+fcn+pin+bigru", "full"};
    std::map<std::string, double> mean;
    for (const auto& name : order)
      mean[name] = seed_mean(
          [&](const SeedResults& r) { return r.variant_slate_auc.at(name); });
    bool monotone = true;
    for (std::size_t i = 1; i < order.size(); ++i)
      if (mean[order[i]] < mean[order[i - 1]] - 0.005) monotone = false;
    bool full_best = true;
    for (const auto& name : order)
      if (mean["full"] < mean[name]) full_best = false;
    std::ostringstream os;
    for (const auto& name : order) os << name << ' ' << fmt(mean[name]) << "  ";
    return std::make_pair(monotone && full_best, os.str());
  });

  h.criterion("criterion 6: replacement ordering with wilcoxon on top pair", [&] {
    if (seed_build_failed) return std::make_pair(false, seed_error);
    const double ppox =
        seed_mean([](const SeedResults& r) { return r.replacement.at("ppo-exploration"); });
    const double ppo =
        seed_mean([](const SeedResults& r) { return r.replacement.at("ppo"); });
    const double rf =
        seed_mean([](const SeedResults& r) { return r.replacement.at("reinforce"); });
    const double rf0 =
        seed_mean([](const SeedResults& r) { return r.replacement.at("reinforce-nosg"); });
    std::vector<double> a, b;
    for (const auto& r : seeds) {
      a.insert(a.end(), r.ppox_scores.begin(), r.ppox_scores.end());
      b.insert(b.end(), r.ppo_scores.begin(), r.ppo_scores.end());
    }
    const double p = wilcoxon_signed_rank_p(a, b);
    const bool ok = ppox > ppo && ppo > rf && rf > rf0 && p < 0.05;
    std::ostringstream os;
    os << "ppo-x " << fmt(ppox) << " > ppo " << fmt(ppo) << " > reinforce "
       << fmt(rf) << " > reinforce-nosg " << fmt(rf0) << ", wilcoxon p "
       << fmt(p, 6) << ", runtime " << static_cast<int>(times.c6) << "s < 1200s";
    return std::make_pair(ok && times.c6 < 1200.0, os.str());
  });

  // ------------------------------------------------------------ criterion 7
  h.criterion("criterion 7: ips/wips on the enumerable mdp", [&] {
    Oracle oracle(OracleConfig{.seed = 3}, tiny_vocab());
    GeneratedPairs pairs = generate_pairs(oracle, 1, 3, 2, 3);
    const CandidateSet& cs = pairs.candidates[0];
    PolicyConfig pc = tiny_policy_config(2);
    PolicyModel behavior(pc, tiny_vocab(), 1);
    for (auto& [name, t] : behavior.params().entries())
      for (double& x : t.data) x = 0.0;
    // peaked target: rank-following scores
    PolicyModel target(pc, tiny_vocab(), 2);
    for (auto& [name, t] : target.params().entries())
      for (double& x : t.data) x = 0.0;
    const std::size_t ctx_dim = 2 * 3 + 3;
    const std::size_t d_cand = 6 * 3 + 4 + 2;
    target.params().lookup("score.l1.w").at(ctx_dim + 4 + d_cand + d_cand - 1, 0) = 5.0;
    target.params().lookup("score.l2.w").at(0, 0) = 3.0;

    double truth = 0.0;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        if (a == b) continue;
        std::vector<ItemFeatures> items = {cs.items[static_cast<std::size_t>(a)],
                                           cs.items[static_cast<std::size_t>(b)]};
        const std::vector<double> probs = oracle.slate_probs(cs.context, items);
        truth += std::exp(target.slate_log_prob(cs, {a, b})) * (probs[0] + probs[1]);
      }

    Rng rng(41);
    auto logged = log_episodes(behavior, oracle, pairs.candidates, 50000, rng);
    IpsResult est = ips_estimate(behavior, target, logged, pairs.candidates, workers());
    const bool within = std::fabs(est.ips - truth) < 3.0 * est.se_ips &&
                        std::fabs(est.wips - truth) <
                            3.0 * std::max(est.se_wips, est.se_ips);

    // identity: theta' = theta recovers the empirical mean reward
    IpsResult self = ips_estimate(behavior, behavior, logged, pairs.candidates, workers());
    KahanSum mean;
    for (const auto& ep : logged) mean.add(ep.reward);
    const double mr = mean.value() / static_cast<double>(logged.size());
    const bool identity =
        std::fabs(self.ips - mr) < 1e-12 && std::fabs(self.wips - mr) < 1e-12;

    std::ostringstream os;
    os << "truth " << fmt(truth, 5) << ", ips " << fmt(est.ips, 5) << " (se "
       << fmt(est.se_ips, 5) << "), wips " << fmt(est.wips, 5)
       << "; identity gap " << fmt(std::fabs(self.ips - mr), 16);
    return std::make_pair(within && identity, os.str());
  });

  // ------------------------------------------------------------ criterion 8
  h.criterion("criterion 8: ips/wips ranking consistent with replacement", [&] {
    if (seed_build_failed) return std::make_pair(false, seed_error);
    const std::vector<std::string> names = {"reinforce", "ppo", "ppo-exploration"};
    auto rank_of = [&](const std::map<std::string, double>& v) {
      std::vector<std::string> order = names;
      std::sort(order.begin(), order.end(), [&](const auto& x, const auto& y) {
        return v.at(x) < v.at(y);
      });
      return order;
    };
    std::map<std::string, double> by_rep, by_ips, by_wips;
    for (const auto& name : names) {
      by_rep[name] =
          seed_mean([&](const SeedResults& r) { return r.replacement.at(name); });
      by_ips[name] =
          seed_mean([&](const SeedResults& r) { return r.ips.at(name).ips; });
      by_wips[name] =
          seed_mean([&](const SeedResults& r) { return r.ips.at(name).wips; });
    }
    const bool ok = rank_of(by_rep) == rank_of(by_ips) &&
                    rank_of(by_rep) == rank_of(by_wips);
    std::ostringstream os;
    os << "3-seed means —";
    for (const auto& name : names)
      os << ' ' << name << ": rep " << fmt(by_rep[name]) << " ips "
         << fmt(by_ips[name], 5) << " wips " << fmt(by_wips[name], 5) << ';';
    return std::make_pair(ok, os.str());
  });

  // ------------------------------------------------------------ criterion 9
  h.criterion("criterion 9: diversity entropy direction over 500 contexts", [&] {
    if (seed_build_failed) return std::make_pair(false, seed_error);
    const double gen_brand =
        seed_mean([](const SeedResults& r) { return r.ppox_brand_entropy; });
    const double base_brand =
        seed_mean([](const SeedResults& r) { return r.base_brand_entropy; });
    const double gen_price =
        seed_mean([](const SeedResults& r) { return r.ppox_price_entropy; });
    const double base_price =
        seed_mean([](const SeedResults& r) { return r.base_price_entropy; });
    const bool ok = gen_brand > base_brand && gen_price >= base_price - 1e-9;
    std::ostringstream os;
    os << "brand: ppo-x " << fmt(gen_brand) << " vs ltr " << fmt(base_brand)
       << "; price: " << fmt(gen_price) << " vs " << fmt(base_price);
    return std::make_pair(ok, os.str());
  });

  // ------------------------------------------------------------ criterion 10
  h.criterion("criterion 10: hyperparameter fidelity in run provenance", [&] {
    const std::string dir = temp_dir("c10");
    const std::string out = dir + "/run";
    json cfg = json::object();
    cfg["seed"] = 42;
    cfg["output_dir"] = out;
    cfg["data"] = {{"num_train", 80}, {"num_test", 40}};
    cfg["critic_opt"] = {{"epochs", 1}, {"batch_size", 64}};
    cfg["trainer"] = {{"num_batches", 1}, {"eval_contexts", 4}};
    const std::string cfg_path = dir + "/cfg.json";
    std::ofstream(cfg_path) << cfg.dump(2);
    if (run_cli("--config " + cfg_path + " gen-data") != 0)
      return std::make_pair(false, std::string("gen-data failed"));
    if (run_cli("--config " + cfg_path + " train-critic") != 0)
      return std::make_pair(false, std::string("train-critic failed"));
    if (run_cli("--config " + cfg_path + " train-policy --algorithm ppo-exploration") != 0)
      return std::make_pair(false, std::string("train-policy failed"));

    SlateDataset ds = load_slates(out + "/data/slates_train.jsonl");
    json prov = json::parse(ds.header.provenance_json);
    json cmeta = json::parse(slurp(out + "/critic_fsc.ckpt.meta.json"));
    json pmeta = json::parse(slurp(out + "/policy_ppo-exploration.ckpt.meta.json"));

    const bool ok =
        prov.at("data").at("n_candidates") == 50 &&
        prov.at("data").at("slate_size") == 10 &&
        prov.at("trainer").at("batch_slates") == 64 &&
        prov.at("trainer").at("bonus_coef") == 1.0 &&
        cmeta.at("config").at("critic").at("loss_weights").at("pay") == 50.0 &&
        cmeta.at("config").at("critic").at("loss_weights").at("atc") == 4.0 &&
        cmeta.at("config").at("critic").at("loss_weights").at("click") == 1.0 &&
        cmeta.at("config").at("critic").at("loss_weights").at("impression") == 0.05 &&
        cmeta.at("config").at("data").at("negative_target_ratio") == 0.02 &&
        pmeta.at("config").at("trainer").at("batch_slates") == 64 &&
        pmeta.at("config").at("trainer").at("bonus_coef") == 1.0;
    return std::make_pair(
        ok, std::string("n=50 k=10 m=64 c=1 weights 50/4/1/0.05 ratio 0.02 — ") +
                (ok ? "all present" : "MISSING VALUES"));
  });

  // ------------------------------------------------------------ criterion 11
  h.criterion("criterion 11: byte-identical artifacts under a fixed seed", [&] {
    const std::string dir = temp_dir("c11");
    const std::string out = dir + "/run";
    json cfg = small_cli_config(out, 7);
    const std::string cfg_path = dir + "/cfg.json";
    std::ofstream(cfg_path) << cfg.dump(2);

    auto full_run = [&]() -> std::map<std::string, std::string> {
      std::filesystem::remove_all(out);
      if (run_cli("--config " + cfg_path + " gen-data") != 0)
        throw DataError("gen-data failed");
      if (run_cli("--config " + cfg_path + " train-critic") != 0)
        throw DataError("train-critic failed");
      if (run_cli("--config " + cfg_path + " train-policy --algorithm ppo-exploration") != 0)
        throw DataError("train-policy failed");
      if (run_cli("--config " + cfg_path + " evaluate") != 0)
        throw DataError("evaluate failed");
      if (run_cli("--config " + cfg_path + " visualize-attention") != 0)
        throw DataError("visualize-attention failed");
      std::map<std::string, std::string> bytes;
      for (const char* f :
           {"data/slates_train.jsonl", "data/candidates_train.jsonl",
            "data/slates_test.jsonl", "data/candidates_test.jsonl",
            "critic_fsc.ckpt", "policy_ppo-exploration.ckpt",
            "curve_ppo-exploration.csv", "eval_report.json", "attention.csv"})
        bytes[f] = slurp(out + "/" + f);
      return bytes;
    };
    auto first = full_run();
    auto second = full_run();
    std::size_t mismatched = 0;
    std::string which;
    for (const auto& [name, content] : first)
      if (second.at(name) != content) {
        ++mismatched;
        which = name;
      }
    return std::make_pair(mismatched == 0,
                          std::to_string(first.size()) + " artifacts compared" +
                              (mismatched ? ", first mismatch: " + which : ""));
  });

  // ------------------------------------------------- extra property probes
  if (!seed_build_failed) {
    {
      const double critic_gap =
          seed_mean([](const SeedResults& r) { return r.critic_dup_gap; });
      const double oracle_gap =
          seed_mean([](const SeedResults& r) { return r.oracle_dup_gap; });
      const bool ok = oracle_gap > 0.0 && critic_gap > 0.0;
      h.report("property: duplicate-heavy slates score lower on the trained critic",
               ok, "critic gap " + fmt(critic_gap, 5) + ", oracle gap " +
                       fmt(oracle_gap, 5));
    }
    {
      std::vector<double> a, b;
      for (const auto& r : seeds) {
        a.insert(a.end(), r.ppox_entropies.begin(), r.ppox_entropies.end());
        b.insert(b.end(), r.ppo_entropies.begin(), r.ppo_entropies.end());
      }
      double mean_a = 0, mean_b = 0;
      for (double x : a) mean_a += x;
      for (double x : b) mean_b += x;
      mean_a /= static_cast<double>(a.size());
      mean_b /= static_cast<double>(b.size());
      const double p = wilcoxon_signed_rank_p(a, b);
      h.report("property: ppo-exploration slates beat ppo on brand entropy",
               mean_a > mean_b && p < 0.05,
               "ppo-x " + fmt(mean_a) + " vs ppo " + fmt(mean_b) + ", p " +
                   fmt(p, 6));
    }
    {
      bool all = true;
      for (const auto& r : seeds) all = all && r.ppox_improved;
      h.report("property: ppo-exploration learning curves improve", all,
               all ? "final > initial on every seed" : "a curve failed to improve");
    }
  }

  std::cout << "\n" << h.passed << " passed, " << h.failed << " failed"
            << std::endl;
  return h.failed == 0 ? 0 : 1;
}
