#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sawlab/agent.hpp"
#include "sawlab/config.hpp"
#include "sawlab/dataset.hpp"
#include "sawlab/env.hpp"

namespace sawlab {

using Policy = std::function<std::vector<double>(std::span<const double>)>;

struct EvalResult {
  double mean_return = 0.0;
  double normalized_score = 0.0;
};

/// Seed of evaluation episode `episode`; disjoint from dataset and training seeds.
std::uint64_t evaluation_seed(std::uint64_t seed, int episode);

EvalResult evaluate(const Policy& policy, const Env& env, int n_episodes, std::uint64_t seed);
EvalResult evaluate(const Agent& agent, const Env& env, int n_episodes, std::uint64_t seed);

std::unique_ptr<Env> make_env(const RunConfig& config);
AgentDims agent_dims(const EnvSpec& spec);
std::unique_ptr<Agent> make_agent(const RunConfig& config, const AgentDims& dims,
                                  std::uint64_t seed);
/// Loads config.dataset_path, or generates (env, kind, dataset_size, dataset_seed).
OfflineDataset obtain_dataset(const RunConfig& config, const Env& env);

/// eta(t) = 1 - t / (2T): the offline share of each fine-tuning batch.
double offline_fraction(std::int64_t t, std::int64_t total);
/// round(eta(t) * batch), half away from zero.
int offline_count(std::int64_t t, std::int64_t total, int batch);

struct MetricsRow {
  std::string run;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  StepStats stats;
  double eval_return = StepStats::kUnset;
  double norm_score = StepStats::kUnset;
};

inline constexpr const char* kMetricsHeader =
    "run,seed,step,loss_v,loss_q,loss_actor,loss_fwd,loss_pred,mean_q,max_q,eval_return,"
    "norm_score";

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const MetricsRow& row);

 private:
  std::ofstream out_;
};

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path);

/// Mean normalized score over the last `last_n` evaluation rows.
double final_score(const std::vector<MetricsRow>& rows, int last_n = 10);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double final_score = 0.0;
  double max_q = -std::numeric_limits<double>::infinity();
};

/// Trains `agent` on `data` for config.total_steps, evaluating on schedule and
/// streaming metrics to `seed_dir/metrics.csv`. Non-finite losses end the seed
/// and mark it failed.
SeedOutcome train_offline(Agent& agent, const RunConfig& config, const Env& env,
                          const OfflineDataset& data, std::uint64_t seed,
                          const std::filesystem::path& seed_dir);

/// Online interaction for config.online_steps with eta-mixed batches.
SeedOutcome finetune_online(Agent& agent, const RunConfig& config, const Env& env,
                            const OfflineDataset& data, std::uint64_t seed,
                            const std::filesystem::path& seed_dir);

struct AggregateRow {
  std::string run;
  std::vector<std::uint64_t> seeds;
  std::vector<double> final_scores;
  std::vector<std::uint64_t> failed_seeds;
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
};

/// Scans `dir` recursively for seed_<n>/metrics.csv files and aggregates per run.
std::vector<AggregateRow> aggregate_metrics(const std::filesystem::path& dir);
std::string format_report(const std::vector<AggregateRow>& rows);
nlohmann::json report_to_json(const std::vector<AggregateRow>& rows);
/// Writes report.txt and report.json into `dir` and returns the rows.
std::vector<AggregateRow> write_report(const std::filesystem::path& dir);

/// Full multi-seed offline experiment; returns the aggregate for this run.
AggregateRow run_offline(const RunConfig& config);
/// Multi-seed fine-tuning from config.checkpoint.
AggregateRow run_offline_to_online(const RunConfig& config);

void save_agent(const Agent& agent, const RunConfig& config, std::uint64_t seed,
                std::uint64_t step, const std::filesystem::path& path);
/// Rebuilds an agent from a checkpoint; `config` receives the stored hyperparameters.
std::unique_ptr<Agent> load_agent(const std::filesystem::path& path, RunConfig& config,
                                  std::uint64_t* seed = nullptr);

}  // namespace sawlab
