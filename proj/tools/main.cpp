#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "slatelab/pipeline.hpp"

namespace {

slatelab::RunConfig resolve_config(const std::string& config_path,
                                   std::optional<std::uint64_t> seed,
                                   std::optional<std::string> output_dir,
                                   std::optional<int> workers) {
  slatelab::RunConfig cfg = config_path.empty()
                                ? slatelab::default_config()
                                : slatelab::load_config(config_path);
  if (seed) {
    cfg.seed = *seed;
    cfg.oracle.seed = *seed;
  }
  if (output_dir) cfg.output_dir = *output_dir;
  if (workers) cfg.eval.workers = *workers;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slatelab: a desk-scale laboratory for slate re-ranking"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<int> workers;
  app.add_option("--config", config_path, "path to a JSON run configuration");
  app.add_option("--seed", seed, "override the configured seed");
  app.add_option("--output-dir", output_dir, "override the output directory");
  app.add_option("--workers", workers, "parallel sample workers for data/eval");

  auto* gen = app.add_subcommand("gen-data", "generate synthetic datasets");
  auto* train_critic_cmd =
      app.add_subcommand("train-critic", "train a slate evaluation model");
  std::string critic_model = "fsc";
  std::string critic_name;
  train_critic_cmd->add_option("--model", critic_model,
                               "fsc | gru-ncand | pointwise");
  train_critic_cmd->add_option("--name", critic_name,
                               "checkpoint name override");

  auto* train_policy_cmd =
      app.add_subcommand("train-policy", "train a slate generation policy");
  std::string algorithm = "ppo-exploration";
  std::string policy_name;
  train_policy_cmd
      ->add_option("--algorithm", algorithm,
                   "reinforce | ppo | ppo-exploration")
      ->check(CLI::IsMember({"reinforce", "ppo", "ppo-exploration"}));
  train_policy_cmd->add_option("--name", policy_name, "checkpoint name override");

  auto* evaluate_cmd = app.add_subcommand("evaluate", "compute the eval report");
  auto* report_cmd = app.add_subcommand("report", "render comparison tables");
  auto* viz_cmd = app.add_subcommand("visualize-attention",
                                     "export a pair-influence attention matrix");
  std::string viz_input;
  viz_cmd->add_option("--input", viz_input,
                      "slate dataset file; default: packaged demo slate");
  auto* print_cmd = app.add_subcommand("print-config", "print the configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1
  }

  try {
    slatelab::RunConfig cfg =
        resolve_config(config_path, seed, output_dir, workers);
    if (gen->parsed()) {
      slatelab::run_gen_data(cfg);
      std::cout << "wrote datasets under " << cfg.output_dir << "/data\n";
    } else if (train_critic_cmd->parsed()) {
      const std::string ckpt =
          slatelab::run_train_critic(cfg, critic_model, critic_name);
      std::cout << "wrote " << ckpt << '\n';
    } else if (train_policy_cmd->parsed()) {
      const std::string ckpt =
          slatelab::run_train_policy(cfg, algorithm, policy_name);
      std::cout << "wrote " << ckpt << '\n';
    } else if (evaluate_cmd->parsed()) {
      const std::string path = slatelab::run_evaluate(cfg);
      std::cout << "wrote " << path << '\n';
    } else if (report_cmd->parsed()) {
      const std::string path = slatelab::run_report(cfg);
      std::ifstream is(path);
      std::cout << is.rdbuf();
    } else if (viz_cmd->parsed()) {
      std::optional<std::string> input;
      if (!viz_input.empty()) input = viz_input;
      const std::string path = slatelab::run_visualize_attention(cfg, input);
      std::cout << "wrote " << path << '\n';
    } else if (print_cmd->parsed()) {
      std::cout << slatelab::config_to_json(cfg) << '\n';
    }
  } catch (const slatelab::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const slatelab::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const slatelab::DomainError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const slatelab::DimensionError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
