// sawlab command-line entry point.
#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "sawlab/config.hpp"
#include "sawlab/dataset.hpp"
#include "sawlab/env.hpp"
#include "sawlab/error.hpp"
#include "sawlab/harness.hpp"

namespace {

using namespace sawlab;

RunConfig config_from(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig config = path.empty() ? RunConfig{} : load_config(path);
  apply_overrides(config, overrides);
  apply_environment(config);
  return config;
}

void print_row(const AggregateRow& row) { std::cout << format_report({row}); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sawlab: offline RL with state advantage weighting"};
  app.require_subcommand(1);

  std::string env_name = "pointmass2d";
  std::string kind = "medium";
  std::size_t n = 100000;
  std::uint64_t seed = 0;
  double p_slip = 0.1;
  std::string out;
  auto* gen = app.add_subcommand("gen-data", "Generate an offline dataset");
  gen->add_option("--env", env_name, "pointmass2d | gridmaze");
  gen->add_option("--kind", kind, "random | medium | medium_replay | medium_expert | expert");
  gen->add_option("-n,--n", n, "Number of transitions");
  gen->add_option("--seed", seed, "Dataset seed");
  gen->add_option("--p_slip", p_slip, "GridMaze slip probability");
  gen->add_option("--out", out, "Output file")->required();

  std::string config_path;
  std::vector<std::string> overrides;
  auto* train = app.add_subcommand("train", "Offline training over the configured seeds");
  train->add_option("config", config_path, "Config file (key = value lines)");
  train->allow_extras();

  std::string checkpoint;
  auto* finetune = app.add_subcommand("finetune", "Offline-to-online fine-tuning");
  finetune->add_option("--checkpoint", checkpoint, "Checkpoint path; {seed} is substituted")
      ->required();
  finetune->add_option("config", config_path, "Config file");
  finetune->allow_extras();

  int episodes = 10;
  std::string eval_env;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  eval->add_option("--env", eval_env, "Environment (default: the checkpoint's)");
  eval->add_option("--episodes", episodes, "Evaluation episodes");
  eval->add_option("--seed", seed, "Evaluation seed");

  std::string dir;
  auto* report = app.add_subcommand("report", "Aggregate metrics files into a report");
  report->add_option("dir", dir, "Directory holding seed_<n>/metrics.csv files")->required();

  auto* refs = app.add_subcommand("ref-scores", "Compute reference scores for an environment");
  refs->add_option("--env", env_name, "pointmass2d | gridmaze");
  refs->add_option("--p_slip", p_slip, "GridMaze slip probability");
  refs->add_option("--out", out, "Output JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: usage: " << e.what() << '\n';
    return 2;
  }

  try {
    if (*gen) {
      const auto env = make_env(env_name, p_slip);
      save_dataset(generate_dataset(*env, parse_behavior_kind(kind), n, seed), out);
      std::cout << "wrote " << n << " transitions to " << out << '\n';
    } else if (*train) {
      const auto config = config_from(config_path, train->remaining());
      print_row(run_offline(config));
    } else if (*finetune) {
      auto config = config_from(config_path, finetune->remaining());
      config.checkpoint = checkpoint;
      print_row(run_offline_to_online(config));
    } else if (*eval) {
      RunConfig config;
      auto agent = load_agent(checkpoint, config);
      if (!eval_env.empty()) config.env = eval_env;
      const auto env = make_env(config);
      const auto r = evaluate(*agent, *env, episodes, seed);
      std::printf("return %.6f normalized %.2f\n", r.mean_return, r.normalized_score);
    } else if (*report) {
      std::cout << format_report(write_report(dir));
    } else if (*refs) {
      const auto env = make_env(env_name, p_slip);
      save_reference_scores(std::string(env->spec().name), env->reference_scores(), out);
      std::printf("J_r %.10g J_e %.10g\n", env->reference_scores().random_score,
                  env->reference_scores().expert_score);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
