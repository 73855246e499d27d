#include "slatelab/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "slatelab/checkpoint.hpp"

namespace slatelab {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

GeneratedPairs generate_pairs(const Oracle& oracle, int count, int n, int k,
                              std::uint64_t seed, int workers) {
  GeneratedPairs out;
  out.candidates.resize(static_cast<std::size_t>(count));
  out.slates.resize(static_cast<std::size_t>(count));
  Rng master(seed);
  parallel_for(static_cast<std::size_t>(count), workers, [&](std::size_t i) {
    Rng rng = master.split(i);
    CandidateSet cs = oracle.sample_candidate_set(n, rng);
    SlateSample slate;
    slate.context = cs.context;
    slate.items.assign(cs.items.begin(), cs.items.begin() + k);
    slate.labels = oracle.slate_response(slate.context, slate.items, rng);
    out.candidates[i] = std::move(cs);
    out.slates[i] = std::move(slate);
  });
  return out;
}

DataPaths data_paths(const RunConfig& cfg) {
  const std::string ext = cfg.data.compress ? ".jsonl.gz" : ".jsonl";
  const std::string dir = cfg.output_dir + "/data";
  return {dir + "/candidates_train" + ext, dir + "/slates_train" + ext,
          dir + "/candidates_test" + ext, dir + "/slates_test" + ext};
}

void run_gen_data(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.output_dir + "/data");
  Oracle oracle(cfg.oracle, cfg.data.vocab);
  const DataPaths paths = data_paths(cfg);

  DatasetHeader header;
  header.seed = cfg.seed;
  header.provenance_json = config_to_json(cfg);

  GeneratedPairs train =
      generate_pairs(oracle, cfg.data.num_train, cfg.data.n_candidates,
                     cfg.data.slate_size, cfg.seed, cfg.eval.workers);
  write_candidates(paths.candidates_train, header, train.candidates);
  write_slates(paths.slates_train, header, train.slates);

  GeneratedPairs test =
      generate_pairs(oracle, cfg.data.num_test, cfg.data.n_candidates,
                     cfg.data.slate_size, cfg.seed ^ 0x7e57da7aULL,
                     cfg.eval.workers);
  write_candidates(paths.candidates_test, header, test.candidates);
  write_slates(paths.slates_test, header, test.slates);
}

void write_meta(const std::string& ckpt_path, const RunConfig& cfg,
                const std::string& artifact, const std::string& variant,
                const std::string& extra_json) {
  json j;
  j["artifact"] = artifact;
  j["variant"] = variant;
  j["extra"] = json::parse(extra_json);
  j["config"] = json::parse(config_to_json(cfg));
  std::ofstream os(ckpt_path + ".meta.json", std::ios::trunc);
  if (!os) throw DataError("cannot write " + ckpt_path + ".meta.json");
  os << j.dump(2) << '\n';
}

namespace {

json load_meta(const std::string& ckpt_path) {
  std::ifstream is(ckpt_path + ".meta.json");
  if (!is) throw DataError("missing sidecar " + ckpt_path + ".meta.json");
  json j;
  is >> j;
  return j;
}

RunConfig config_from_meta(const json& meta) {
  return config_from_json(meta.at("config").dump());
}

void replace_params(ParamStore& dst, const ParamStore& src,
                    const std::string& what) {
  if (dst.size() != src.size())
    throw DataError(what + ": checkpoint parameter set mismatch");
  for (const auto& [name, t] : dst.entries()) {
    if (!src.has(name))
      throw DataError(what + ": checkpoint missing parameter " + name);
    if (!src.at(name).same_shape(t))
      throw DataError(what + ": checkpoint shape mismatch for " + name);
  }
  dst = src;
}

constexpr int kPointwiseHidden = 16;

}  // namespace

std::string run_train_critic(const RunConfig& cfg, const std::string& model,
                             const std::string& name) {
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  const DataPaths paths = data_paths(cfg);
  SlateDataset slates = load_slates(paths.slates_train);
  std::vector<SlateSample> train = reweight_negatives(
      slates.slates, cfg.data.negative_target_ratio, cfg.seed ^ 0x5eedULL);

  OptimizerConfig opt = cfg.critic_opt;
  opt.seed = cfg.seed;

  std::string variant = name;
  std::string ckpt;
  json extra;
  extra["model"] = model;
  if (model == "fsc") {
    if (variant.empty()) {
      const CriticComponents& c = cfg.critic.components;
      if (c.san && c.pin && c.bigru && c.fcn) variant = "fsc";
      else {
        variant = "dnn";
        if (c.fcn) variant += "_fcn";
        if (c.pin) variant += "_pin";
        if (c.bigru) variant += "_bigru";
        if (c.san) variant += "_san";
      }
    }
    CriticModel critic(cfg.critic, cfg.data.vocab, cfg.seed);
    auto log = train_critic(critic, train, opt);
    extra["final_loss"] = log.empty() ? 0.0 : log.back().mean_loss;
    ckpt = cfg.output_dir + "/critic_" + variant + ".ckpt";
    save_checkpoint(ckpt, "critic-fsc", critic.params());
  } else if (model == "gru-ncand") {
    if (variant.empty()) variant = "gru_ncand";
    CandidateDataset cands = load_candidates(paths.candidates_train);
    // subsample candidates to the same reweighted slate set
    std::vector<CandidateSet> cand_aligned;
    std::vector<SlateSample> slate_aligned;
    {
      // rebuild the reweighting selection by identity of the slate objects
      std::vector<SlateSample> full = slates.slates;
      std::vector<char> kept(full.size(), 0);
      std::size_t pos = 0, neg = 0;
      for (const auto& s : full) (slate_has_positive(s) ? pos : neg)++;
      if (pos == 0) throw DataError("train critic: no positive slates");
      const double current = static_cast<double>(pos) / static_cast<double>(neg == 0 ? 1 : neg);
      if (neg == 0 || current >= cfg.data.negative_target_ratio) {
        std::fill(kept.begin(), kept.end(), 1);
      } else {
        const double keep = static_cast<double>(pos) /
                            (cfg.data.negative_target_ratio * static_cast<double>(neg));
        Rng rng(cfg.seed ^ 0x5eedULL);
        for (std::size_t i = 0; i < full.size(); ++i) {
          if (slate_has_positive(full[i])) kept[i] = 1;
          else if (rng.uniform() < keep) kept[i] = 1;
        }
      }
      for (std::size_t i = 0; i < full.size(); ++i) {
        if (!kept[i]) continue;
        cand_aligned.push_back(cands.sets[i]);
        slate_aligned.push_back(full[i]);
      }
    }
    NCandBaseline baseline(cfg.critic.embed_dim, cfg.critic.gru_dim,
                           cfg.data.vocab, cfg.seed);
    auto log = train_ncand_baseline(baseline, cand_aligned, slate_aligned,
                                    cfg.critic, opt);
    extra["final_loss"] = log.empty() ? 0.0 : log.back().mean_loss;
    ckpt = cfg.output_dir + "/critic_" + variant + ".ckpt";
    save_checkpoint(ckpt, "critic-gru-ncand", baseline.params());
  } else if (model == "pointwise") {
    if (variant.empty()) variant = "pointwise";
    PointwiseBaseline baseline(cfg.critic.embed_dim, kPointwiseHidden,
                               cfg.data.vocab, cfg.seed);
    auto log = train_pointwise_baseline(baseline, train, cfg.critic, opt);
    extra["final_loss"] = log.empty() ? 0.0 : log.back().mean_loss;
    ckpt = cfg.output_dir + "/critic_" + variant + ".ckpt";
    save_checkpoint(ckpt, "critic-pointwise", baseline.params());
  } else {
    throw DataError("train-critic: unknown model '" + model + "'");
  }
  write_meta(ckpt, cfg, "critic", variant, extra.dump());
  return ckpt;
}

std::string run_train_policy(const RunConfig& cfg, const std::string& algorithm,
                             const std::string& name) {
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  const std::string critic_ckpt = cfg.output_dir + "/critic_fsc.ckpt";
  if (!fs::exists(critic_ckpt))
    throw DataError("train-policy: missing critic checkpoint " + critic_ckpt +
                    " (run train-critic first)");
  CriticModel critic = load_critic(critic_ckpt);

  const DataPaths paths = data_paths(cfg);
  CandidateDataset cands = load_candidates(paths.candidates_train);
  SlateDataset slates = load_slates(paths.slates_train);

  Algorithm algo = algorithm_from_name(algorithm);
  std::string variant = name;
  if (variant.empty()) {
    variant = algorithm;
    if (!cfg.policy.use_sg_cell) variant += "-nosg";
  }

  PolicyModel policy(cfg.policy, cfg.data.vocab, cfg.seed ^ 0xb0ULL);
  PolicyDataset data{&cands.sets, &slates.slates};
  Rng rng(cfg.seed ^ 0x90110ULL);
  PolicyTrainResult result =
      train_policy(algo, policy, critic, data, cfg.trainer, rng);

  const std::string ckpt = cfg.output_dir + "/policy_" + variant + ".ckpt";
  save_checkpoint(ckpt, "policy", policy.params());
  json extra;
  extra["algorithm"] = algorithm;
  extra["use_sg_cell"] = cfg.policy.use_sg_cell;
  extra["reward_mode"] =
      cfg.trainer.reward_mode == RewardMode::model ? "model" : "oracle";
  write_meta(ckpt, cfg, "policy", variant, extra.dump());

  std::ofstream curve(cfg.output_dir + "/curve_" + variant + ".csv",
                      std::ios::trunc);
  curve << "batch,mean_slate_score,mean_brand_entropy,mean_bonus\n";
  curve.precision(17);
  for (const auto& pt : result.curve)
    curve << pt.batch << ',' << pt.mean_slate_score << ','
          << pt.mean_brand_entropy << ',' << pt.mean_bonus << '\n';
  return ckpt;
}

CriticModel load_critic(const std::string& ckpt_path) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  if (ck.kind != "critic-fsc")
    throw DataError(ckpt_path + ": expected a critic-fsc checkpoint, got " + ck.kind);
  json meta = load_meta(ckpt_path);
  RunConfig cfg = config_from_meta(meta);
  CriticModel model(cfg.critic, cfg.data.vocab, 0);
  replace_params(model.params(), ck.params, ckpt_path);
  return model;
}

PolicyModel load_policy(const std::string& ckpt_path) {
  Checkpoint ck = load_checkpoint(ckpt_path);
  if (ck.kind != "policy")
    throw DataError(ckpt_path + ": expected a policy checkpoint, got " + ck.kind);
  json meta = load_meta(ckpt_path);
  RunConfig cfg = config_from_meta(meta);
  PolicyConfig pc = cfg.policy;
  pc.use_sg_cell = meta.at("extra").value("use_sg_cell", pc.use_sg_cell);
  PolicyModel model(pc, cfg.data.vocab, 0);
  replace_params(model.params(), ck.params, ckpt_path);
  return model;
}

std::string format_metric(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

namespace {

struct LoadedCritic {
  std::string variant;
  std::string kind;
  Checkpoint ck;
  RunConfig cfg;
};

std::vector<std::string> sorted_checkpoints(const std::string& dir,
                                            const std::string& prefix) {
  std::vector<std::string> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string fn = e.path().filename().string();
    if (fn.rfind(prefix, 0) == 0 && fn.size() > 5 &&
        fn.compare(fn.size() - 5, 5, ".ckpt") == 0)
      out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string variant_of(const std::string& path, const std::string& prefix) {
  const std::string fn = fs::path(path).filename().string();
  return fn.substr(prefix.size(), fn.size() - prefix.size() - 5);
}

}  // namespace

std::string evaluate_to_json(const RunConfig& cfg) {
  cfg.validate();
  const DataPaths paths = data_paths(cfg);
  SlateDataset test_slates = load_slates(paths.slates_test);
  CandidateDataset test_cands = load_candidates(paths.candidates_test);
  const int workers = cfg.eval.workers;
  const int k = cfg.data.slate_size;

  json report;
  report["seed"] = cfg.seed;
  report["critics"] = json::array();
  report["policies"] = json::array();

  for (const std::string& path :
       sorted_checkpoints(cfg.output_dir, "critic_")) {
    const std::string variant = variant_of(path, "critic_");
    Checkpoint ck = load_checkpoint(path);
    AucTriple aucs;
    if (ck.kind == "critic-fsc") {
      CriticModel model = load_critic(path);
      aucs = eval_critic(model, test_slates.slates, workers);
    } else if (ck.kind == "critic-gru-ncand") {
      json meta = load_meta(path);
      RunConfig mcfg = config_from_meta(meta);
      NCandBaseline model(mcfg.critic.embed_dim, mcfg.critic.gru_dim,
                          mcfg.data.vocab, 0);
      replace_params(model.params(), ck.params, path);
      aucs = auc_triple(
          test_slates.slates,
          [&](std::size_t i, const SlateSample&) {
            std::vector<double> scores = model.scores(test_cands.sets[i]);
            return std::vector<double>(scores.begin(),
                                       scores.begin() + k);
          },
          workers);
    } else if (ck.kind == "critic-pointwise") {
      json meta = load_meta(path);
      RunConfig mcfg = config_from_meta(meta);
      PointwiseBaseline model(mcfg.critic.embed_dim, kPointwiseHidden,
                              mcfg.data.vocab, 0);
      replace_params(model.params(), ck.params, path);
      aucs = auc_triple(
          test_slates.slates,
          [&](std::size_t, const SlateSample& s) {
            Tape t;
            return t.val(model.forward(t, s.items)).data;
          },
          workers);
    } else {
      throw DataError(path + ": unknown critic checkpoint kind " + ck.kind);
    }
    report["critics"].push_back({{"name", variant},
                                 {"pv_pay_auc", aucs.pv_pay},
                                 {"click_pay_auc", aucs.click_pay},
                                 {"slate_pay_auc", aucs.slate_pay}});
  }

  // base (first-k LTR) diversity for comparison
  const std::size_t n_ent = std::min<std::size_t>(
      static_cast<std::size_t>(cfg.eval.entropy_contexts), test_cands.sets.size());
  std::vector<std::vector<ItemFeatures>> base_slates;
  for (std::size_t i = 0; i < n_ent; ++i)
    base_slates.emplace_back(test_cands.sets[i].items.begin(),
                             test_cands.sets[i].items.begin() + k);
  report["base"] = {
      {"brand_entropy", slate_entropy(base_slates, EntropyFeature::brand)},
      {"price_entropy", slate_entropy(base_slates, EntropyFeature::price_bucket)}};

  const std::vector<std::string> policy_ckpts =
      sorted_checkpoints(cfg.output_dir, "policy_");
  report["policy_section_present"] = !policy_ckpts.empty();

  const std::string critic_ckpt = cfg.output_dir + "/critic_fsc.ckpt";
  std::optional<CriticModel> critic;
  if (fs::exists(critic_ckpt)) critic.emplace(load_critic(critic_ckpt));

  const std::string behavior_ckpt =
      cfg.output_dir + "/policy_" + cfg.eval.behavior_policy + ".ckpt";
  std::optional<PolicyModel> behavior;
  std::vector<LoggedEpisode> logged;
  if (!policy_ckpts.empty() && fs::exists(behavior_ckpt)) {
    behavior.emplace(load_policy(behavior_ckpt));
    Oracle oracle(cfg.oracle, cfg.data.vocab);
    Rng rng(cfg.seed ^ 0x175ULL);
    logged = log_episodes(*behavior, oracle, test_cands.sets,
                          static_cast<std::size_t>(cfg.eval.ips_logged_episodes),
                          rng);
  }

  const std::size_t n_rep = std::min<std::size_t>(
      static_cast<std::size_t>(cfg.eval.replacement_contexts),
      test_cands.sets.size());
  const std::vector<CandidateSet> rep_contexts(test_cands.sets.begin(),
                                               test_cands.sets.begin() +
                                                   static_cast<long>(n_rep));

  for (const std::string& path : policy_ckpts) {
    const std::string variant = variant_of(path, "policy_");
    PolicyModel policy = load_policy(path);
    json row;
    row["name"] = variant;
    if (critic) {
      row["replacement_ratio"] =
          replacement_ratio(policy, *critic, rep_contexts, workers);
    } else {
      row["replacement_ratio"] = nullptr;
    }
    std::vector<std::vector<ItemFeatures>> gen_slates;
    for (std::size_t i = 0; i < n_ent; ++i) {
      const CandidateSet& cs = test_cands.sets[i];
      RolloutResult r = policy.rollout(cs, RolloutMode::greedy, nullptr);
      std::vector<ItemFeatures> items;
      for (int a : r.slate) items.push_back(cs.items[static_cast<std::size_t>(a)]);
      gen_slates.push_back(std::move(items));
    }
    row["brand_entropy"] = slate_entropy(gen_slates, EntropyFeature::brand);
    row["price_entropy"] = slate_entropy(gen_slates, EntropyFeature::price_bucket);
    if (behavior) {
      IpsResult r = ips_estimate(*behavior, policy, logged, test_cands.sets, workers);
      row["ips"] = r.ips;
      row["wips"] = r.wips;
    } else {
      row["ips"] = nullptr;
      row["wips"] = nullptr;
    }
    report["policies"].push_back(row);
  }
  return report.dump(2);
}

std::string run_evaluate(const RunConfig& cfg) {
  const std::string doc = evaluate_to_json(cfg);
  fs::create_directories(cfg.output_dir);
  const std::string path = cfg.output_dir + "/eval_report.json";
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path);
  os << doc << '\n';
  return path;
}

std::string render_report(const std::string& report_json) {
  json report = json::parse(report_json);
  std::ostringstream os;
  os << "== critic evaluation (auc) ==\n";
  os << "model";
  for (const char* col : {"pv-pay", "click-pay", "slate-pay"}) os << '\t' << col;
  os << '\n';
  for (const auto& row : report.at("critics")) {
    os << row.at("name").get<std::string>() << '\t'
       << format_metric(row.at("pv_pay_auc").get<double>()) << '\t'
       << format_metric(row.at("click_pay_auc").get<double>()) << '\t'
       << format_metric(row.at("slate_pay_auc").get<double>()) << '\n';
  }
  os << "\n== slate diversity (base = first-k LTR) ==\n";
  os << "base\tbrand=" << format_metric(report.at("base").at("brand_entropy").get<double>())
     << "\tprice=" << format_metric(report.at("base").at("price_entropy").get<double>())
     << '\n';
  os << "\n== policy evaluation ==\n";
  if (!report.at("policy_section_present").get<bool>()) {
    os << "(no policy checkpoints present)\n";
    return os.str();
  }
  os << "policy\treplacement\tips\twips\tbrand-entropy\tprice-entropy\n";
  for (const auto& row : report.at("policies")) {
    auto cell = [&](const char* key) -> std::string {
      if (row.at(key).is_null()) return "n/a";
      return format_metric(row.at(key).get<double>());
    };
    os << row.at("name").get<std::string>() << '\t' << cell("replacement_ratio")
       << '\t' << cell("ips") << '\t' << cell("wips") << '\t'
       << cell("brand_entropy") << '\t' << cell("price_entropy") << '\n';
  }
  return os.str();
}

std::string run_report(const RunConfig& cfg) {
  const std::string json_path = cfg.output_dir + "/eval_report.json";
  std::ifstream is(json_path);
  if (!is)
    throw DataError("report: missing " + json_path + " (run evaluate first)");
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string table = render_report(ss.str());
  const std::string path = cfg.output_dir + "/report.txt";
  std::ofstream os(path, std::ios::trunc);
  os << table;
  return path;
}

std::string run_visualize_attention(const RunConfig& cfg,
                                    const std::optional<std::string>& input_path) {
  const std::string critic_ckpt = cfg.output_dir + "/critic_fsc.ckpt";
  if (!fs::exists(critic_ckpt))
    throw DataError("visualize-attention: missing " + critic_ckpt);
  CriticModel critic = load_critic(critic_ckpt);
  SlateSample input;
  if (input_path) {
    SlateDataset ds = load_slates(*input_path);
    if (ds.slates.empty())
      throw DataError("visualize-attention: input has no slates");
    input = ds.slates.front();
  } else {
    input = attention_demo_slate(cfg.data.vocab);
    // the packaged scenario is 10 items; adapt to the configured slate size
    const std::size_t k = static_cast<std::size_t>(cfg.data.slate_size);
    while (input.items.size() < k) {
      ItemFeatures extra = input.items[input.items.size() % 10];
      extra.item_id = static_cast<int>(input.items.size()) % cfg.data.vocab.items;
      input.items.push_back(extra);
      input.labels.push_back(Label::impression);
    }
    input.items.resize(k);
    input.labels.resize(k);
  }
  Tensor alpha = attention_matrix(critic, input.context, input.items);
  fs::create_directories(cfg.output_dir);
  const std::string path = cfg.output_dir + "/attention.csv";
  write_attention_csv(path, alpha);
  return path;
}

}  // namespace slatelab
