#include "sawlab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "sawlab/baselines.hpp"
#include "sawlab/checkpoint.hpp"
#include "sawlab/error.hpp"
#include "sawlab/saw.hpp"

namespace sawlab {

namespace {

using nlohmann::json;

constexpr std::uint64_t kEvalSeedBase = 0x5EED'0000'0000'0000ULL;
constexpr std::uint64_t kSamplerSalt = 0xB47C'4000'0000'0001ULL;
constexpr std::uint64_t kOnlineSalt = 0x0D11'7E00'0000'0002ULL;

std::string format_number(double v) {
  if (std::isnan(v)) return {};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double parse_number(const std::string& s) {
  if (s.empty()) return StepStats::kUnset;
  return std::stod(s);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Batch concat(const Batch& a, const Batch& b) {
  auto h = [](const Matrix& x, const Matrix& y) {
    Matrix out(x.rows(), x.cols() + y.cols());
    out << x, y;
    return out;
  };
  Batch out;
  out.s = h(a.s, b.s);
  out.a = h(a.a, b.a);
  out.s_next = h(a.s_next, b.s_next);
  out.r.resize(a.r.size() + b.r.size());
  out.r << a.r, b.r;
  out.done.resize(a.done.size() + b.done.size());
  out.done << a.done, b.done;
  return out;
}

bool is_training_failure(const Error& e) {
  return e.kind() == ErrorKind::non_finite || e.kind() == ErrorKind::degenerate_critic;
}

void require_finite_stats(const StepStats& s) {
  for (double v : {s.loss_v, s.loss_q, s.loss_actor, s.loss_fwd, s.loss_pred, s.mean_q, s.max_q}) {
    if (std::isinf(v)) throw Error(ErrorKind::non_finite, "training statistic is infinite");
  }
}

void write_summary(const std::filesystem::path& seed_dir, const SeedOutcome& o) {
  json j = {{"seed", o.seed},
            {"status", o.failed ? "failed" : "ok"},
            {"error", o.error},
            {"final_score", o.failed ? json(nullptr) : json(o.final_score)}};
  std::ofstream out(seed_dir / "summary.json", std::ios::trunc);
  out << j.dump(2) << '\n';
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

class EvalSchedule {
 public:
  EvalSchedule(const Agent& agent, const Env& env, const RunConfig& config, std::uint64_t seed)
      : agent_(agent), env_(env), config_(config), seed_(seed) {}

  void fill(MetricsRow& row) {
    const auto r = evaluate(agent_, env_, config_.eval_episodes, seed_);
    row.eval_return = r.mean_return;
    row.norm_score = r.normalized_score;
    scores_.push_back(r.normalized_score);
  }

  double final_score() const {
    const std::size_t n = std::min<std::size_t>(10, scores_.size());
    std::vector<double> tail(scores_.end() - static_cast<std::ptrdiff_t>(n), scores_.end());
    return mean_of(tail);
  }

 private:
  const Agent& agent_;
  const Env& env_;
  const RunConfig& config_;
  std::uint64_t seed_;
  std::vector<double> scores_;
};

}  // namespace

std::uint64_t evaluation_seed(std::uint64_t seed, int episode) {
  return kEvalSeedBase + seed * 1'000'003ULL + static_cast<std::uint64_t>(episode);
}

EvalResult evaluate(const Policy& policy, const Env& env, int n_episodes, std::uint64_t seed) {
  if (n_episodes < 1) throw Error(ErrorKind::invalid_argument, "n_episodes must be >= 1");
  double total = 0.0;
  for (int i = 0; i < n_episodes; ++i) {
    EnvState state = env.reset(evaluation_seed(seed, i));
    while (!state.done) {
      const auto action = policy(state.observation);
      auto result = env.step(state, action);
      total += result.reward;
      state = std::move(result.next);
    }
  }
  EvalResult r;
  r.mean_return = total / n_episodes;
  const auto& ref = env.reference_scores();
  r.normalized_score = normalized_score(r.mean_return, ref.random_score, ref.expert_score);
  return r;
}

EvalResult evaluate(const Agent& agent, const Env& env, int n_episodes, std::uint64_t seed) {
  return evaluate([&agent](std::span<const double> s) { return agent.act(s); }, env, n_episodes,
                  seed);
}

std::unique_ptr<Env> make_env(const RunConfig& config) {
  if (config.env == "gridmaze" && !config.maze_file.empty()) {
    return std::make_unique<GridMaze>(GridMaze::from_file(config.maze_file, config.p_slip));
  }
  return make_env(config.env, config.p_slip);
}

AgentDims agent_dims(const EnvSpec& spec) {
  return {spec.obs_dim, spec.act_dim, spec.action_bound};
}

std::unique_ptr<Agent> make_agent(const RunConfig& config, const AgentDims& dims,
                                  std::uint64_t seed) {
  switch (config.agent) {
    case AgentKind::saw: return std::make_unique<saw::SawAgent>(dims, config.hyper, seed);
    case AgentKind::d3g:
      return std::make_unique<baselines::D3gAgent>(dims, d3g_hyper(config), seed);
    case AgentKind::bc: return std::make_unique<baselines::BcAgent>(dims, bc_hyper(config), seed);
  }
  throw Error(ErrorKind::config, "unknown agent kind");
}

OfflineDataset obtain_dataset(const RunConfig& config, const Env& env) {
  if (!config.dataset_path.empty() && std::filesystem::exists(config.dataset_path)) {
    auto data = load_dataset(config.dataset_path);
    if (data.obs_dim != env.spec().obs_dim || data.act_dim != env.spec().act_dim) {
      throw Error(ErrorKind::dimension_mismatch, "dataset dims do not match environment");
    }
    return data;
  }
  if (!config.dataset_path.empty()) {
    throw Error(ErrorKind::io, "dataset file not found: " + config.dataset_path);
  }
  return generate_dataset(env, parse_behavior_kind(config.dataset_kind),
                          static_cast<std::size_t>(config.dataset_size), config.dataset_seed);
}

double offline_fraction(std::int64_t t, std::int64_t total) {
  if (total <= 0) return 1.0;
  return 1.0 - static_cast<double>(t) / (2.0 * static_cast<double>(total));
}

int offline_count(std::int64_t t, std::int64_t total, int batch) {
  return static_cast<int>(std::lround(offline_fraction(t, total) * batch));
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) : out_(path, std::ios::trunc) {
  if (!out_) throw Error(ErrorKind::io, "cannot write metrics " + path.string());
  out_ << kMetricsHeader << '\n';
}

void MetricsWriter::write(const MetricsRow& row) {
  const auto& s = row.stats;
  out_ << row.run << ',' << row.seed << ',' << row.step << ',' << format_number(s.loss_v) << ','
       << format_number(s.loss_q) << ',' << format_number(s.loss_actor) << ','
       << format_number(s.loss_fwd) << ',' << format_number(s.loss_pred) << ','
       << format_number(s.mean_q) << ',' << format_number(s.max_q) << ','
       << format_number(row.eval_return) << ',' << format_number(row.norm_score) << '\n';
}

std::vector<MetricsRow> read_metrics(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open metrics " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw Error(ErrorKind::malformed_header, "unexpected metrics header in " + path.string());
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 12) throw Error(ErrorKind::malformed_header, "bad metrics row: " + line);
    MetricsRow r;
    try {
      r.run = f[0];
      r.seed = std::stoull(f[1]);
      r.step = std::stoll(f[2]);
      r.stats.loss_v = parse_number(f[3]);
      r.stats.loss_q = parse_number(f[4]);
      r.stats.loss_actor = parse_number(f[5]);
      r.stats.loss_fwd = parse_number(f[6]);
      r.stats.loss_pred = parse_number(f[7]);
      r.stats.mean_q = parse_number(f[8]);
      r.stats.max_q = parse_number(f[9]);
      r.eval_return = parse_number(f[10]);
      r.norm_score = parse_number(f[11]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::malformed_header, "bad metrics row: " + line);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

double final_score(const std::vector<MetricsRow>& rows, int last_n) {
  std::vector<double> scores;
  for (const auto& r : rows) {
    if (!std::isnan(r.norm_score)) scores.push_back(r.norm_score);
  }
  const std::size_t n = std::min(scores.size(), static_cast<std::size_t>(last_n));
  return mean_of({scores.end() - static_cast<std::ptrdiff_t>(n), scores.end()});
}

SeedOutcome train_offline(Agent& agent, const RunConfig& config, const Env& env,
                          const OfflineDataset& data, std::uint64_t seed,
                          const std::filesystem::path& seed_dir) {
  std::filesystem::create_directories(seed_dir);
  MetricsWriter writer(seed_dir / "metrics.csv");
  const std::string run = config.resolved_run_name();
  BatchSampler sampler(seed ^ kSamplerSalt, config.batch_size);
  EvalSchedule evals(agent, env, config, seed);
  SeedOutcome outcome;
  outcome.seed = seed;

  MetricsRow initial{run, seed, 0, {}};
  evals.fill(initial);
  writer.write(initial);

  std::int64_t step = 0;
  try {
    for (step = 1; step <= config.total_steps; ++step) {
      const auto idx = sampler.sample_indices(data.size(), config.batch_size);
      MetricsRow row{run, seed, step, agent.train_step(gather_batch(data, idx))};
      require_finite_stats(row.stats);
      if (!std::isnan(row.stats.max_q)) outcome.max_q = std::max(outcome.max_q, row.stats.max_q);
      const bool eval_now = step % config.eval_every == 0;
      if (eval_now) evals.fill(row);
      if (eval_now || step % config.log_every == 0) writer.write(row);
    }
  } catch (const Error& e) {
    if (!is_training_failure(e)) throw;
    outcome.failed = true;
    outcome.error = "step " + std::to_string(step) + ": " + e.what();
  }
  outcome.final_score = evals.final_score();
  if (!outcome.failed) {
    save_agent(agent, config, seed, static_cast<std::uint64_t>(config.total_steps),
               seed_dir / "checkpoint.bin");
  }
  write_summary(seed_dir, outcome);
  return outcome;
}

SeedOutcome finetune_online(Agent& agent, const RunConfig& config, const Env& env,
                            const OfflineDataset& data, std::uint64_t seed,
                            const std::filesystem::path& seed_dir) {
  std::filesystem::create_directories(seed_dir);
  MetricsWriter writer(seed_dir / "metrics.csv");
  const std::string run = config.resolved_run_name();
  BatchSampler offline_sampler(seed ^ kSamplerSalt, config.batch_size);
  BatchSampler online_sampler(seed ^ kSamplerSalt ^ kOnlineSalt, config.batch_size);
  std::mt19937_64 rng(seed ^ kOnlineSalt);
  std::normal_distribution<double> noise(0.0, 1.0);
  EvalSchedule evals(agent, env, config, seed);
  SeedOutcome outcome;
  outcome.seed = seed;

  OfflineDataset online;
  online.env_name = data.env_name;
  online.obs_dim = data.obs_dim;
  online.act_dim = data.act_dim;

  MetricsRow initial{run, seed, 0, {}};
  evals.fill(initial);
  writer.write(initial);

  const double bound = env.spec().action_bound;
  EnvState state = env.reset(rng());
  std::int64_t t = 0;
  try {
    for (t = 1; t <= config.online_steps; ++t) {
      auto action = agent.act(state.observation);
      for (auto& a : action) {
        a = std::clamp(a + config.explore_noise * noise(rng), -bound, bound);
      }
      auto result = env.step(state, action);
      online.transitions.push_back(
          {state.observation, action, result.reward, result.next.observation, result.done});
      state = result.done ? env.reset(rng()) : std::move(result.next);

      const int m = config.batch_size;
      const int n_online = std::min<int>(m - offline_count(t, config.online_steps, m),
                                         static_cast<int>(online.size()));
      const int n_offline = m - n_online;
      Batch batch;
      if (n_online == 0) {
        batch = gather_batch(data, offline_sampler.sample_indices(data.size(), n_offline));
      } else if (n_offline == 0) {
        batch = gather_batch(online, online_sampler.sample_indices(online.size(), n_online));
      } else {
        batch = concat(gather_batch(data, offline_sampler.sample_indices(data.size(), n_offline)),
                       gather_batch(online, online_sampler.sample_indices(online.size(), n_online)));
      }
      MetricsRow row{run, seed, t, agent.train_step(batch)};
      require_finite_stats(row.stats);
      if (!std::isnan(row.stats.max_q)) outcome.max_q = std::max(outcome.max_q, row.stats.max_q);
      const bool eval_now = t % config.eval_every == 0;
      if (eval_now) evals.fill(row);
      if (eval_now || t % config.log_every == 0) writer.write(row);
    }
  } catch (const Error& e) {
    if (!is_training_failure(e)) throw;
    outcome.failed = true;
    outcome.error = "online step " + std::to_string(t) + ": " + e.what();
  }
  outcome.final_score = evals.final_score();
  if (!outcome.failed) {
    save_agent(agent, config, seed, static_cast<std::uint64_t>(config.online_steps),
               seed_dir / "checkpoint.bin");
  }
  write_summary(seed_dir, outcome);
  return outcome;
}

std::vector<AggregateRow> aggregate_metrics(const std::filesystem::path& dir) {
  std::map<std::string, std::map<std::uint64_t, std::pair<bool, double>>> runs;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "metrics.csv") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const auto rows = read_metrics(file);
    if (rows.empty()) continue;
    bool failed = false;
    const auto summary = file.parent_path() / "summary.json";
    if (std::filesystem::exists(summary)) {
      std::ifstream in(summary);
      failed = json::parse(in).value("status", "ok") == "failed";
    }
    runs[rows.front().run][rows.front().seed] = {failed, final_score(rows)};
  }
  std::vector<AggregateRow> out;
  for (const auto& [run, seeds] : runs) {
    AggregateRow row;
    row.run = run;
    for (const auto& [seed, result] : seeds) {
      if (result.first) {
        row.failed_seeds.push_back(seed);
        continue;
      }
      row.seeds.push_back(seed);
      row.final_scores.push_back(result.second);
    }
    row.mean = mean_of(row.final_scores);
    row.std = population_std(row.final_scores);
    out.push_back(std::move(row));
  }
  return out;
}

std::string format_report(const std::vector<AggregateRow>& rows) {
  std::size_t width = 3;
  for (const auto& r : rows) width = std::max(width, r.run.size());
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s  %5s  %6s  %s\n", static_cast<int>(width), "run", "seeds",
                "failed", "normalized score");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %5zu  %6zu  %.1f ± %.1f\n", static_cast<int>(width),
                  r.run.c_str(), r.seeds.size(), r.failed_seeds.size(), r.mean, r.std);
    out << buf;
  }
  return out.str();
}

json report_to_json(const std::vector<AggregateRow>& rows) {
  json runs = json::array();
  for (const auto& r : rows) {
    runs.push_back({{"run", r.run},
                    {"seeds", r.seeds},
                    {"final_scores", r.final_scores},
                    {"failed_seeds", r.failed_seeds},
                    {"mean", r.mean},
                    {"std", r.std}});
  }
  return {{"runs", runs}};
}

std::vector<AggregateRow> write_report(const std::filesystem::path& dir) {
  auto rows = aggregate_metrics(dir);
  {
    std::ofstream out(dir / "report.txt", std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write report in " + dir.string());
    out << format_report(rows);
  }
  std::ofstream out(dir / "report.json", std::ios::trunc);
  out << report_to_json(rows).dump(2) << '\n';
  return rows;
}

namespace {

AggregateRow aggregate_run(const std::filesystem::path& run_dir, const std::string& run) {
  for (auto& row : write_report(run_dir)) {
    if (row.run == run) return row;
  }
  AggregateRow empty;
  empty.run = run;
  return empty;
}

std::filesystem::path seed_dir(const std::filesystem::path& run_dir, std::uint64_t seed) {
  return run_dir / ("seed_" + std::to_string(seed));
}

}  // namespace

AggregateRow run_offline(const RunConfig& config) {
  config.validate();
  const auto env = make_env(config);
  const auto data = obtain_dataset(config, *env);
  const std::string run = config.resolved_run_name();
  const std::filesystem::path run_dir = std::filesystem::path(config.output_dir) / run;
  std::filesystem::create_directories(run_dir);
  for (auto seed : config.seeds) {
    auto agent = make_agent(config, agent_dims(env->spec()), seed);
    train_offline(*agent, config, *env, data, seed, seed_dir(run_dir, seed));
  }
  return aggregate_run(run_dir, run);
}

AggregateRow run_offline_to_online(const RunConfig& config_in) {
  config_in.validate();
  if (config_in.checkpoint.empty()) {
    throw Error(ErrorKind::config, "finetune needs a checkpoint");
  }
  auto checkpoint_for = [&](std::uint64_t seed) {
    std::string path = config_in.checkpoint;
    if (const auto pos = path.find("{seed}"); pos != std::string::npos) {
      path.replace(pos, 6, std::to_string(seed));
    }
    return path;
  };
  RunConfig config = config_in;
  if (config.run_name.empty()) {
    // Named after the stored agent and env, not the defaults in config_in.
    RunConfig stored = config_in;
    load_agent(checkpoint_for(config.seeds.front()), stored);
    config.run_name = stored.resolved_run_name() + "-online";
  }
  const std::string run = config.resolved_run_name();
  const std::filesystem::path run_dir = std::filesystem::path(config.output_dir) / run;
  std::filesystem::create_directories(run_dir);

  std::unique_ptr<Env> env;
  std::optional<OfflineDataset> data;
  for (auto seed : config.seeds) {
    RunConfig seed_config = config;
    auto agent = load_agent(checkpoint_for(seed), seed_config);
    if (!env) {
      env = make_env(seed_config);
      data = obtain_dataset(seed_config, *env);
    }
    finetune_online(*agent, seed_config, *env, *data, seed, seed_dir(run_dir, seed));
  }
  return aggregate_run(run_dir, run);
}

void save_agent(const Agent& agent, const RunConfig& config, std::uint64_t seed,
                std::uint64_t step, const std::filesystem::path& path) {
  save_checkpoint(agent, seed, step, hyper_to_json(config), path);
}

std::unique_ptr<Agent> load_agent(const std::filesystem::path& path, RunConfig& config,
                                  std::uint64_t* seed) {
  const auto data = read_checkpoint(path);
  config.agent = parse_agent_kind(data.header.agent);
  hyper_from_json(config, data.header.hyper);
  auto agent = make_agent(config, data.header.dims, data.header.seed);
  restore_parameters(*agent, data);
  if (seed) *seed = data.header.seed;
  return agent;
}

}  // namespace sawlab
