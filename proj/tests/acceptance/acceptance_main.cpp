// Acceptance suite. Each criterion prints exactly one PASS/FAIL line; the
// exit status is non-zero when any selected criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "oracle.hpp"
#include "sawlab/error.hpp"
#include "sawlab/harness.hpp"

using namespace sawlab;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::filesystem::path g_workdir;

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::filesystem::path fresh(const std::string& name) {
  const auto dir = g_workdir / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Shared toy-scale training setup: 64-unit networks keep every run within
// minutes on one core.
RunConfig toy_config(const std::string& name, AgentKind agent, const std::string& kind) {
  RunConfig c;
  c.run_name = name;
  c.agent = agent;
  c.env = "pointmass2d";
  c.dataset_kind = kind;
  c.dataset_size = 50000;
  c.total_steps = 10000;
  c.eval_every = 1000;
  c.eval_episodes = 10;
  c.log_every = 1000;
  c.seeds = {0, 1, 2, 3, 4};
  c.hyper.hidden = {64, 64};
  c.hyper.alpha_scale = 0.1;
  c.output_dir = fresh(name).string();
  return c;
}

std::string seed_scores(const AggregateRow& row) {
  std::string s;
  for (double v : row.final_scores) s += fmt("%s%.1f", s.empty() ? "" : " ", v);
  return "[" + s + "]";
}

// --- 1 ---------------------------------------------------------------------

Verdict gradient_correctness() {
  using namespace saw;
  using namespace baselines;
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_name;
  auto record = [&](const std::string& name, const oracle::FdReport& r) {
    const double e = r.checked == 0 ? INFINITY : r.rel_error;
    if (e > worst) {
      worst = e;
      worst_name = name;
    }
  };
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SawHyper h;
    h.hidden = {7, 6};
    SawAgent s({3, 2, 1.0}, h, seed);
    std::mt19937_64 rng(seed + 1000);
    s.target1 = Mlp::initialized(s.target1.dims(), rng);
    s.target2 = Mlp::initialized(s.target2.dims(), rng);
    const auto b = oracle::random_batch(3, 2, 16, seed);

    record("value", oracle::finite_difference(s.value, [&] { return oracle::saw_value_loss(s, b); },
                                              value_loss(s, b).grad));
    for (auto kind : {CriticLoss::mse, CriticLoss::expectile}) {
      s.hyper.critic_loss = kind;
      const auto [c1, c2] = critic_losses(s, b);
      record("critic", oracle::finite_difference(s.critic1, [&] { return oracle::saw_critic_loss(s, s.critic1, b); }, c1.grad));
      record("critic", oracle::finite_difference(s.critic2, [&] { return oracle::saw_critic_loss(s, s.critic2, b); }, c2.grad));
    }
    record("forward", oracle::finite_difference(s.forward_model,
                                                [&] { return oracle::saw_forward_loss(s.forward_model, b); },
                                                forward_loss(s, b).grad));
    record("actor", oracle::finite_difference(s.actor, [&] { return oracle::saw_actor_loss(s, b); },
                                              actor_loss(s, b).grad));
    record("prediction", oracle::finite_difference(s.prediction, [&] { return oracle::saw_prediction_loss(s, b); },
                                                   prediction_loss(s, b).grad));

    D3gHyper dh;
    dh.hidden = {7, 6};
    D3gAgent d({3, 2, 1.0}, dh, seed);
    d.target1 = Mlp::initialized(d.target1.dims(), rng);
    d.target2 = Mlp::initialized(d.target2.dims(), rng);
    d.prediction_target = Mlp::initialized(d.prediction_target.dims(), rng);
    const auto [d1, d2] = d3g_critic_losses(d, b);
    record("d3g critic", oracle::finite_difference(d.critic1, [&] { return oracle::d3g_critic_loss(d, d.critic1, b); }, d1.grad));
    record("d3g critic", oracle::finite_difference(d.critic2, [&] { return oracle::d3g_critic_loss(d, d.critic2, b); }, d2.grad));
    record("d3g actor", oracle::finite_difference(d.inverse, [&] { return oracle::d3g_actor_loss(d, b); },
                                                  d3g_actor_loss(d, b).grad));
    record("d3g forward", oracle::finite_difference(d.forward_model,
                                                    [&] { return oracle::saw_forward_loss(d.forward_model, b); },
                                                    d3g_forward_loss(d, b).grad));
    record("d3g prediction", oracle::finite_difference(d.prediction, [&] { return oracle::d3g_prediction_loss(d, b); },
                                                       d3g_prediction_loss(d, b).grad));
  }
  const double elapsed = seconds_since(start);
  return {worst < 1e-4 && elapsed < 60.0,
          fmt("worst relative error %.2e (%s), %.1f s", worst, worst_name.c_str(), elapsed)};
}

// --- 2 ---------------------------------------------------------------------

Verdict expectile_oracle() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.5, 2.0);
  oracle::Vec samples(40);
  for (auto& x : samples) x = normal(rng);
  double worst = 0.0;
  std::string parts;
  for (double tau : {0.3, 0.5, 0.7, 0.9}) {
    const double fitted = oracle::fit_scalar_expectile(samples, tau);
    const double exact = oracle::expectile_bisection(samples, tau);
    worst = std::max(worst, std::abs(fitted - exact));
    parts += fmt(" tau=%.1f:%.5f/%.5f", tau, fitted, exact);
  }
  double mean = 0.0;
  for (double x : samples) mean += x;
  mean /= static_cast<double>(samples.size());
  const double half = oracle::fit_scalar_expectile(samples, 0.5);
  const double mean_gap = std::abs(half - mean);
  return {worst < 1e-3 && mean_gap < 1e-3,
          fmt("max |fit - bisection| %.2e, |fit(0.5) - mean| %.2e;", worst, mean_gap) + parts};
}

// --- 3 ---------------------------------------------------------------------

Verdict qss_qsa_equivalence() {
  const GridMaze maze(GridMaze::default_layout(), 0.0);
  const auto r = oracle::qss_qsa_value_iteration(maze, 0.99);
  double gap = 0.0;
  for (std::size_t i = 0; i < r.v_qsa.size(); ++i) gap = std::max(gap, std::abs(r.v_qsa[i] - r.v_qss[i]));
  const auto start = maze.start();
  const double v_start = r.v_qsa[static_cast<std::size_t>(maze.cell_index(start[0], start[1]))];
  return {gap <= 1e-10, fmt("max |V_qsa - V_qss| %.3e after %d sweeps, V(start) %.6f", gap, r.sweeps, v_start)};
}

// --- 4 ---------------------------------------------------------------------

Verdict overestimation_contrast() {
  const auto start = std::chrono::steady_clock::now();
  auto d3g = toy_config("c4-d3g", AgentKind::d3g, "medium");
  d3g.total_steps = 50000;
  d3g.seeds = {0};
  d3g.eval_every = 5000;
  d3g.log_every = 1;  // the Q monitor is read from every step
  auto saw = d3g;
  saw.run_name = "c4-saw";
  saw.agent = AgentKind::saw;
  saw.output_dir = fresh("c4-saw").string();

  const auto env = make_env(d3g);
  const auto data = obtain_dataset(d3g, *env);
  double bound = 0.0;
  for (double g : discounted_returns(data, d3g.hyper.gamma)) bound = std::max(bound, std::abs(g));

  auto max_logged_q = [](const RunConfig& c) {
    double m = -INFINITY;
    for (const auto& row : read_metrics(std::filesystem::path(c.output_dir) / c.run_name / "seed_0" / "metrics.csv")) {
      if (!std::isnan(row.stats.max_q)) m = std::max(m, row.stats.max_q);
    }
    return m;
  };
  const auto d3g_row = run_offline(d3g);
  const auto saw_row = run_offline(saw);
  const double q_d3g = max_logged_q(d3g);
  const double q_saw = max_logged_q(saw);
  const double elapsed = seconds_since(start);
  const bool ok = q_d3g > 1e3 * bound && q_saw < 1.5 * bound && saw_row.failed_seeds.empty() &&
                  elapsed < 1800.0;
  return {ok, fmt("B = max|G| = %.3f; D3G max target-Q %.4g (needs > %.4g), SAW max target-Q %.4g "
                  "(needs < %.4g); scores D3G %.1f SAW %.1f; failed seeds D3G %zu SAW %zu; %.0f s",
                  bound, q_d3g, 1e3 * bound, q_saw, 1.5 * bound, d3g_row.mean, saw_row.mean,
                  d3g_row.failed_seeds.size(), saw_row.failed_seeds.size(), elapsed)};
}

// --- 5 ---------------------------------------------------------------------

Verdict policy_ordering() {
  const auto start = std::chrono::steady_clock::now();
  std::string detail;
  double longest_seed = 0.0;
  auto run = [&](const std::string& name, AgentKind agent, const std::string& kind) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto row = run_offline(toy_config(name, agent, kind));
    longest_seed = std::max(longest_seed, seconds_since(t0) / 5.0);
    detail += fmt("%s %.1f%s ", name.c_str(), row.mean, seed_scores(row).c_str());
    return row;
  };
  const auto saw_expert = run("c5-saw-expert", AgentKind::saw, "expert");
  const auto bc_expert = run("c5-bc-expert", AgentKind::bc, "expert");
  const auto saw_mr = run("c5-saw-medium_replay", AgentKind::saw, "medium_replay");
  const auto bc_mr = run("c5-bc-medium_replay", AgentKind::bc, "medium_replay");
  bool ok = saw_expert.mean >= 90.0 && bc_expert.mean >= 90.0 && saw_mr.mean >= bc_mr.mean + 10.0;
  for (const auto* r : {&saw_expert, &bc_expert, &saw_mr, &bc_mr}) ok = ok && r->failed_seeds.empty();
  ok = ok && longest_seed < 900.0;
  return {ok, detail + fmt("; %.0f s total", seconds_since(start))};
}

// --- 6 ---------------------------------------------------------------------

Verdict stochastic_maze() {
  auto c = toy_config("c6-saw-gridmaze", AgentKind::saw, "medium_expert");
  c.env = "gridmaze";
  c.p_slip = 0.1;
  c.dataset_size = 20000;
  const auto row = run_offline(c);
  const auto env = make_env(c);
  double total = 0.0;
  std::string per_seed;
  for (auto seed : c.seeds) {
    RunConfig restored = c;
    const auto agent = load_agent(std::filesystem::path(c.output_dir) / c.run_name /
                                      ("seed_" + std::to_string(seed)) / "checkpoint.bin",
                                  restored);
    const double success = evaluate(*agent, *env, 100, seed).mean_return;
    per_seed += fmt(" %.2f", success);
    total += success;
  }
  const double rate = total / static_cast<double>(c.seeds.size());
  return {rate >= 0.5 && row.failed_seeds.empty(),
          fmt("mean success %.3f over 100 episodes x 5 seeds; per seed", rate) + per_seed};
}

// --- 7 ---------------------------------------------------------------------

Verdict offline_to_online() {
  const std::int64_t T = 10000;
  const bool eta_exact = offline_fraction(0, T) == 1.0 && offline_fraction(T / 2, T) == 0.75 &&
                         offline_fraction(T, T) == 0.5 && offline_count(T / 2, T, 256) == 192;
  auto offline = toy_config("c7-saw-medium_replay", AgentKind::saw, "medium_replay");
  const auto off_row = run_offline(offline);

  RunConfig online = offline;
  online.run_name = "c7-online";
  online.online_steps = T;
  online.checkpoint =
      (std::filesystem::path(offline.output_dir) / offline.run_name / "seed_{seed}" / "checkpoint.bin").string();
  const auto on_row = run_offline_to_online(online);
  const bool ok = eta_exact && off_row.failed_seeds.empty() && on_row.failed_seeds.empty() &&
                  on_row.mean >= off_row.mean - 5.0;
  return {ok, fmt("eta exact: %s; offline %.1f%s, after %lld online steps %.1f%s", eta_exact ? "yes" : "no",
                  off_row.mean, seed_scores(off_row).c_str(), static_cast<long long>(T), on_row.mean,
                  seed_scores(on_row).c_str())};
}

// --- 8 ---------------------------------------------------------------------

Verdict beta_zero_equivalence() {
  int compared = 0, equal = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    saw::SawHyper h;
    h.hidden = {32, 32};
    h.beta = 0.0;
    saw::SawAgent agent({4, 3, 1.0}, h, seed);
    std::mt19937_64 rng(seed + 77);
    agent.target1 = Mlp::initialized(agent.target1.dims(), rng);
    agent.value = Mlp::initialized(agent.value.dims(), rng);
    const auto b = oracle::random_batch(4, 3, 64, seed);
    const auto weighted = saw::actor_loss(agent, b);
    const auto plain = imitation_loss(agent.actor, vstack(b.s, b.s_next), b.a);
    ++compared;
    equal += weighted.loss == plain.loss && weighted.grad.flatten() == plain.grad.flatten();
  }
  return {equal == compared, fmt("%d/%d batches bit-identical", equal, compared)};
}

// --- 9 ---------------------------------------------------------------------

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict infrastructure() {
  const auto dir = fresh("c9");
  PointMass2D env;
  const auto data = generate_dataset(env, BehaviorPolicyKind::medium_replay, 5000, 3);
  save_dataset(data, dir / "data.bin");
  const auto loaded = load_dataset(dir / "data.bin");
  save_dataset(loaded, dir / "again.bin");
  const bool round_trip = loaded == data && read_bytes(dir / "data.bin") == read_bytes(dir / "again.bin");

  auto c = toy_config("c9-run", AgentKind::saw, "medium");
  c.dataset_size = 2000;
  c.total_steps = 200;
  c.eval_every = 50;
  c.log_every = 1;
  c.seeds = {0, 1};
  c.hyper.hidden = {16, 16};
  c.output_dir = (dir / "a").string();
  run_offline(c);
  c.output_dir = (dir / "b").string();
  run_offline(c);
  bool identical = true;
  for (auto seed : c.seeds) {
    const auto rel = std::filesystem::path("c9-run") / ("seed_" + std::to_string(seed)) / "metrics.csv";
    identical = identical && read_bytes(dir / "a" / rel) == read_bytes(dir / "b" / rel) &&
                !read_bytes(dir / "a" / rel).empty();
  }

  Vector q(2);
  q << 1.0, -3.0;
  Vector q2(4);
  q2 << 2.0, 2.0, -2.0, 2.0;
  const bool alpha = saw::alpha_from_q(q) == 0.5 && saw::alpha_from_q(q2) == 0.5;
  return {round_trip && identical && alpha,
          fmt("dataset round trip %s, seeded metrics identical %s, alpha({1,-3}) = %.3f",
              round_trip ? "yes" : "no", identical ? "yes" : "no", saw::alpha_from_q(q))};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::string workdir = SAWLAB_ACCEPTANCE_DIR;
  app.add_option("--only", only, "Criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--workdir", workdir, "Scratch directory for training runs");
  CLI11_PARSE(app, argc, argv);
  g_workdir = workdir;

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"gradient correctness", gradient_correctness},
      {"expectile oracle", expectile_oracle},
      {"QSS/QSA equivalence", qss_qsa_equivalence},
      {"overestimation contrast", overestimation_contrast},
      {"policy quality ordering", policy_ordering},
      {"stochastic sparse maze", stochastic_maze},
      {"offline-to-online", offline_to_online},
      {"beta = 0 equivalence", beta_zero_equivalence},
      {"infrastructure", infrastructure},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %d (%s): %s  %s\n", id, criteria[i].first.c_str(), v.pass ? "PASS" : "FAIL",
                v.detail.c_str());
    std::fflush(stdout);
    failures += !v.pass;
  }
  return failures == 0 ? 0 : 1;
}
