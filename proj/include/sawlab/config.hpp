#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sawlab/baselines.hpp"
#include "sawlab/saw.hpp"

namespace sawlab {

enum class AgentKind { saw, d3g, bc };

std::string_view to_string(AgentKind kind);
AgentKind parse_agent_kind(std::string_view name);

/// Everything one experiment needs. Files use `key = value` lines with '#'
/// comments; command-line `--key=value` overrides are applied on top.
struct RunConfig {
  std::string run_name;  // empty: derived from agent, env and dataset kind
  std::string env = "pointmass2d";
  double p_slip = 0.1;
  std::string maze_file;  // empty: built-in layout
  std::string dataset_kind = "medium";
  std::string dataset_path;  // empty: generated from (env, kind, dataset_seed)
  std::int64_t dataset_size = 100000;
  std::uint64_t dataset_seed = 0;
  AgentKind agent = AgentKind::saw;
  std::int64_t total_steps = 50000;
  std::int64_t online_steps = 10000;
  std::int64_t eval_every = 1000;
  int eval_episodes = 10;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  int batch_size = 256;
  saw::SawHyper hyper;
  double explore_noise = 0.1;
  std::int64_t log_every = 1;
  std::string output_dir = "runs";
  std::string checkpoint;  // finetune source; "{seed}" is replaced per seed

  std::string resolved_run_name() const;
  void validate() const;
};

/// Applies one `key = value` pair; throws config error on unknown keys.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

RunConfig parse_config_text(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

/// Parses `--key=value` tokens.
void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides);

/// SAWLAB_SEED (comma list) replaces the seed list when set.
void apply_environment(RunConfig& config);

/// Hyperparameters as stored in checkpoint headers.
nlohmann::json hyper_to_json(const RunConfig& config);
void hyper_from_json(RunConfig& config, const nlohmann::json& j);

baselines::D3gHyper d3g_hyper(const RunConfig& config);
baselines::BcHyper bc_hyper(const RunConfig& config);

}  // namespace sawlab
