#include "slatelab/config.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>

namespace slatelab {

using json = nlohmann::ordered_json;

namespace {

json oracle_to_json(const OracleConfig& c) {
  return {{"position_decay", c.position_decay},
          {"similarity_penalty", c.similarity_penalty},
          {"price_outlier_boost", c.price_outlier_boost},
          {"base_purchase_rate", c.base_purchase_rate}};
}

void oracle_from_json(const json& j, OracleConfig& c) {
  c.position_decay = j.value("position_decay", c.position_decay);
  c.similarity_penalty = j.value("similarity_penalty", c.similarity_penalty);
  c.price_outlier_boost = j.value("price_outlier_boost", c.price_outlier_boost);
  c.base_purchase_rate = j.value("base_purchase_rate", c.base_purchase_rate);
}

json vocab_to_json(const VocabConfig& v) {
  return {{"items", v.items},
          {"categories", v.categories},
          {"brands", v.brands},
          {"sellers", v.sellers},
          {"shops", v.shops},
          {"price_buckets", v.price_buckets},
          {"queries", v.queries},
          {"users", v.users},
          {"stats_dim", v.stats_dim},
          {"user_pref_dim", v.user_pref_dim},
          {"max_session_len", v.max_session_len}};
}

void vocab_from_json(const json& j, VocabConfig& v) {
  v.items = j.value("items", v.items);
  v.categories = j.value("categories", v.categories);
  v.brands = j.value("brands", v.brands);
  v.sellers = j.value("sellers", v.sellers);
  v.shops = j.value("shops", v.shops);
  v.price_buckets = j.value("price_buckets", v.price_buckets);
  v.queries = j.value("queries", v.queries);
  v.users = j.value("users", v.users);
  v.stats_dim = j.value("stats_dim", v.stats_dim);
  v.user_pref_dim = j.value("user_pref_dim", v.user_pref_dim);
  v.max_session_len = j.value("max_session_len", v.max_session_len);
}

json data_to_json(const DataConfig& d) {
  return {{"n_candidates", d.n_candidates},
          {"slate_size", d.slate_size},
          {"num_train", d.num_train},
          {"num_test", d.num_test},
          {"negative_target_ratio", d.negative_target_ratio},
          {"compress", d.compress},
          {"vocab", vocab_to_json(d.vocab)}};
}

void data_from_json(const json& j, DataConfig& d) {
  d.n_candidates = j.value("n_candidates", d.n_candidates);
  d.slate_size = j.value("slate_size", d.slate_size);
  d.num_train = j.value("num_train", d.num_train);
  d.num_test = j.value("num_test", d.num_test);
  d.negative_target_ratio =
      j.value("negative_target_ratio", d.negative_target_ratio);
  d.compress = j.value("compress", d.compress);
  if (j.contains("vocab")) vocab_from_json(j.at("vocab"), d.vocab);
}

json critic_to_json(const CriticConfig& c) {
  return {{"embed_dim", c.embed_dim},
          {"hidden_dim", c.hidden_dim},
          {"gru_dim", c.gru_dim},
          {"pin_dim", c.pin_dim},
          {"fcn_dim", c.fcn_dim},
          {"relpos_dim", c.relpos_dim},
          {"attention_beta", c.attention_beta},
          {"loss_weights",
           {{"pay", c.loss_weight_pay},
            {"atc", c.loss_weight_atc},
            {"click", c.loss_weight_click},
            {"impression", c.loss_weight_impression}}},
          {"components",
           {{"san", c.components.san},
            {"pin", c.components.pin},
            {"bigru", c.components.bigru},
            {"fcn", c.components.fcn}}}};
}

void critic_from_json(const json& j, CriticConfig& c) {
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.gru_dim = j.value("gru_dim", c.gru_dim);
  c.pin_dim = j.value("pin_dim", c.pin_dim);
  c.fcn_dim = j.value("fcn_dim", c.fcn_dim);
  c.relpos_dim = j.value("relpos_dim", c.relpos_dim);
  c.attention_beta = j.value("attention_beta", c.attention_beta);
  if (j.contains("loss_weights")) {
    const json& w = j.at("loss_weights");
    c.loss_weight_pay = w.value("pay", c.loss_weight_pay);
    c.loss_weight_atc = w.value("atc", c.loss_weight_atc);
    c.loss_weight_click = w.value("click", c.loss_weight_click);
    c.loss_weight_impression = w.value("impression", c.loss_weight_impression);
  }
  if (j.contains("components")) {
    const json& p = j.at("components");
    c.components.san = p.value("san", c.components.san);
    c.components.pin = p.value("pin", c.components.pin);
    c.components.bigru = p.value("bigru", c.components.bigru);
    c.components.fcn = p.value("fcn", c.components.fcn);
  }
}

json opt_to_json(const OptimizerConfig& o) {
  return {{"learning_rate", o.learning_rate},
          {"momentum", o.momentum},
          {"batch_size", o.batch_size},
          {"epochs", o.epochs}};
}

void opt_from_json(const json& j, OptimizerConfig& o) {
  o.learning_rate = j.value("learning_rate", o.learning_rate);
  o.momentum = j.value("momentum", o.momentum);
  o.batch_size = j.value("batch_size", o.batch_size);
  o.epochs = j.value("epochs", o.epochs);
}

json policy_to_json(const PolicyConfig& p) {
  return {{"embed_dim", p.embed_dim},
          {"hidden_dim", p.hidden_dim},
          {"su_dim", p.su_dim},
          {"sg_dim", p.sg_dim},
          {"softmax_beta", p.softmax_beta},
          {"use_sg_cell", p.use_sg_cell}};
}

void policy_from_json(const json& j, PolicyConfig& p) {
  p.embed_dim = j.value("embed_dim", p.embed_dim);
  p.hidden_dim = j.value("hidden_dim", p.hidden_dim);
  p.su_dim = j.value("su_dim", p.su_dim);
  p.sg_dim = j.value("sg_dim", p.sg_dim);
  p.softmax_beta = j.value("softmax_beta", p.softmax_beta);
  p.use_sg_cell = j.value("use_sg_cell", p.use_sg_cell);
}

json trainer_to_json(const TrainConfig& t) {
  return {{"gamma", t.gamma},
          {"bonus_coef", t.bonus_coef},
          {"clip_eps", t.clip_eps},
          {"batch_slates", t.batch_slates},
          {"epochs_per_batch", t.epochs_per_batch},
          {"num_batches", t.num_batches},
          {"learning_rate", t.learning_rate},
          {"reward_mode",
           t.reward_mode == RewardMode::model ? "model" : "oracle"},
          {"use_mean_baseline", t.use_mean_baseline},
          {"eval_contexts", t.eval_contexts}};
}

void trainer_from_json(const json& j, TrainConfig& t) {
  t.gamma = j.value("gamma", t.gamma);
  t.bonus_coef = j.value("bonus_coef", t.bonus_coef);
  t.clip_eps = j.value("clip_eps", t.clip_eps);
  t.batch_slates = j.value("batch_slates", t.batch_slates);
  t.epochs_per_batch = j.value("epochs_per_batch", t.epochs_per_batch);
  t.num_batches = j.value("num_batches", t.num_batches);
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  if (j.contains("reward_mode")) {
    const std::string m = j.at("reward_mode").get<std::string>();
    if (m == "model") t.reward_mode = RewardMode::model;
    else if (m == "oracle") t.reward_mode = RewardMode::oracle;
    else throw DataError("config: unknown reward_mode " + m);
  }
  t.use_mean_baseline = j.value("use_mean_baseline", t.use_mean_baseline);
  t.eval_contexts = j.value("eval_contexts", t.eval_contexts);
}

json eval_to_json(const EvalConfig& e) {
  return {{"ips_logged_episodes", e.ips_logged_episodes},
          {"entropy_contexts", e.entropy_contexts},
          {"replacement_contexts", e.replacement_contexts},
          {"workers", e.workers},
          {"behavior_policy", e.behavior_policy}};
}

void eval_from_json(const json& j, EvalConfig& e) {
  e.ips_logged_episodes = j.value("ips_logged_episodes", e.ips_logged_episodes);
  e.entropy_contexts = j.value("entropy_contexts", e.entropy_contexts);
  e.replacement_contexts =
      j.value("replacement_contexts", e.replacement_contexts);
  e.workers = j.value("workers", e.workers);
  e.behavior_policy = j.value("behavior_policy", e.behavior_policy);
}

}  // namespace

void RunConfig::validate() const {
  oracle.validate();
  critic.validate();
  policy.validate();
  trainer.validate();
  if (data.n_candidates < data.slate_size)
    throw DomainError("config: n_candidates must be >= slate_size");
  if (data.negative_target_ratio <= 0.0 || data.negative_target_ratio > 1.0)
    throw DomainError("config: negative_target_ratio must be in (0,1]");
}

RunConfig default_config() {
  RunConfig cfg;
  cfg.critic.slate_size = cfg.data.slate_size;
  cfg.policy.slate_size = cfg.data.slate_size;
  cfg.oracle.seed = cfg.seed;
  return cfg;
}

std::string config_to_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  j["oracle"] = oracle_to_json(cfg.oracle);
  j["data"] = data_to_json(cfg.data);
  j["critic"] = critic_to_json(cfg.critic);
  j["critic_opt"] = opt_to_json(cfg.critic_opt);
  j["policy"] = policy_to_json(cfg.policy);
  j["trainer"] = trainer_to_json(cfg.trainer);
  j["eval"] = eval_to_json(cfg.eval);
  return j.dump(2);
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw DataError(std::string("config: parse error: ") + e.what());
  }
  RunConfig cfg = default_config();
  if (!j.contains("seed")) throw DataError("config: seed is mandatory");
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.output_dir = j.value("output_dir", cfg.output_dir);
  if (j.contains("oracle")) oracle_from_json(j.at("oracle"), cfg.oracle);
  if (j.contains("data")) data_from_json(j.at("data"), cfg.data);
  if (j.contains("critic")) critic_from_json(j.at("critic"), cfg.critic);
  if (j.contains("critic_opt")) opt_from_json(j.at("critic_opt"), cfg.critic_opt);
  if (j.contains("policy")) policy_from_json(j.at("policy"), cfg.policy);
  if (j.contains("trainer")) trainer_from_json(j.at("trainer"), cfg.trainer);
  if (j.contains("eval")) eval_from_json(j.at("eval"), cfg.eval);
  cfg.critic.slate_size = cfg.data.slate_size;
  cfg.policy.slate_size = cfg.data.slate_size;
  cfg.oracle.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw DataError("config: cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return config_from_json(ss.str());
}

void save_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("config: cannot write " + path);
  os << config_to_json(cfg) << '\n';
}

}  // namespace slatelab
