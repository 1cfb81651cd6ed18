#include "sawlab/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "sawlab/env.hpp"
#include "sawlab/error.hpp"

namespace sawlab {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorKind::config,
              "invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

double to_double(std::string_view key, std::string_view value) {
  const std::string s(value);
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) bad_value(key, value);
  return v;
}

template <typename Int>
Int to_int(std::string_view key, std::string_view value) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value);
  return v;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value);
}

template <typename Int>
std::vector<Int> to_int_list(std::string_view key, std::string_view value) {
  std::vector<Int> out;
  std::size_t start = 0;
  while (start <= value.size()) {
    const auto comma = value.find(',', start);
    const auto piece = trim(value.substr(start, comma == std::string_view::npos
                                                    ? std::string_view::npos
                                                    : comma - start));
    if (piece.empty()) bad_value(key, value);
    out.push_back(to_int<Int>(key, piece));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

using Setter = std::function<void(RunConfig&, std::string_view, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"run_name", [](RunConfig& c, auto, auto v) { c.run_name = std::string(v); }},
      {"env", [](RunConfig& c, auto, auto v) { c.env = std::string(v); }},
      {"p_slip", [](RunConfig& c, auto k, auto v) { c.p_slip = to_double(k, v); }},
      {"maze_file", [](RunConfig& c, auto, auto v) { c.maze_file = std::string(v); }},
      {"dataset_kind", [](RunConfig& c, auto, auto v) { c.dataset_kind = std::string(v); }},
      {"dataset_path", [](RunConfig& c, auto, auto v) { c.dataset_path = std::string(v); }},
      {"dataset_size", [](RunConfig& c, auto k, auto v) { c.dataset_size = to_int<std::int64_t>(k, v); }},
      {"dataset_seed", [](RunConfig& c, auto k, auto v) { c.dataset_seed = to_int<std::uint64_t>(k, v); }},
      {"agent", [](RunConfig& c, auto, auto v) { c.agent = parse_agent_kind(v); }},
      {"total_steps", [](RunConfig& c, auto k, auto v) { c.total_steps = to_int<std::int64_t>(k, v); }},
      {"online_steps", [](RunConfig& c, auto k, auto v) { c.online_steps = to_int<std::int64_t>(k, v); }},
      {"eval_every", [](RunConfig& c, auto k, auto v) { c.eval_every = to_int<std::int64_t>(k, v); }},
      {"eval_episodes", [](RunConfig& c, auto k, auto v) { c.eval_episodes = to_int<int>(k, v); }},
      {"seeds", [](RunConfig& c, auto k, auto v) { c.seeds = to_int_list<std::uint64_t>(k, v); }},
      {"batch_size", [](RunConfig& c, auto k, auto v) { c.batch_size = to_int<int>(k, v); }},
      {"hidden", [](RunConfig& c, auto k, auto v) { c.hyper.hidden = to_int_list<int>(k, v); }},
      {"learning_rate", [](RunConfig& c, auto k, auto v) { c.hyper.learning_rate = to_double(k, v); }},
      {"beta", [](RunConfig& c, auto k, auto v) { c.hyper.beta = to_double(k, v); }},
      {"tau_expectile", [](RunConfig& c, auto k, auto v) { c.hyper.tau_expectile = to_double(k, v); }},
      {"gamma", [](RunConfig& c, auto k, auto v) { c.hyper.gamma = to_double(k, v); }},
      {"rho_polyak", [](RunConfig& c, auto k, auto v) { c.hyper.rho_polyak = to_double(k, v); }},
      {"use_alpha_normalization",
       [](RunConfig& c, auto k, auto v) { c.hyper.use_alpha_normalization = to_bool(k, v); }},
      {"alpha_fixed", [](RunConfig& c, auto k, auto v) { c.hyper.alpha_fixed = to_double(k, v); }},
      {"alpha_scale", [](RunConfig& c, auto k, auto v) { c.hyper.alpha_scale = to_double(k, v); }},
      {"weight_clip", [](RunConfig& c, auto k, auto v) { c.hyper.weight_clip = to_double(k, v); }},
      {"critic_loss",
       [](RunConfig& c, auto k, auto v) {
         if (v == "mse") c.hyper.critic_loss = saw::CriticLoss::mse;
         else if (v == "expectile") c.hyper.critic_loss = saw::CriticLoss::expectile;
         else bad_value(k, v);
       }},
      {"explore_noise", [](RunConfig& c, auto k, auto v) { c.explore_noise = to_double(k, v); }},
      {"log_every", [](RunConfig& c, auto k, auto v) { c.log_every = to_int<std::int64_t>(k, v); }},
      {"output_dir", [](RunConfig& c, auto, auto v) { c.output_dir = std::string(v); }},
      {"checkpoint", [](RunConfig& c, auto, auto v) { c.checkpoint = std::string(v); }},
  };
  return table;
}

}  // namespace

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::saw: return "saw";
    case AgentKind::d3g: return "d3g";
    case AgentKind::bc: return "bc";
  }
  return "unknown";
}

AgentKind parse_agent_kind(std::string_view name) {
  if (name == "saw") return AgentKind::saw;
  if (name == "d3g") return AgentKind::d3g;
  if (name == "bc") return AgentKind::bc;
  throw Error(ErrorKind::config, "unknown agent '" + std::string(name) + "'");
}

std::string RunConfig::resolved_run_name() const {
  if (!run_name.empty()) return run_name;
  const std::string data = dataset_path.empty()
                               ? dataset_kind
                               : std::filesystem::path(dataset_path).stem().string();
  return std::string(to_string(agent)) + "-" + env + "-" + data;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::config, msg); };
  if (total_steps < 0 || online_steps < 0) fail("step counts must be non-negative");
  if (eval_every < 1) fail("eval_every must be >= 1");
  if (eval_episodes < 1) fail("eval_episodes must be >= 1");
  if (seeds.empty()) fail("seeds must not be empty");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (dataset_size < 1) fail("dataset_size must be >= 1");
  if (log_every < 1) fail("log_every must be >= 1");
  if (explore_noise < 0.0) fail("explore_noise must be non-negative");
  if (env != "pointmass2d" && env != "gridmaze") fail("unknown env '" + env + "'");
  try {
    parse_behavior_kind(dataset_kind);
    hyper.validate();
  } catch (const Error& e) {
    fail(e.what());
  }
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) {
    throw Error(ErrorKind::config, "unknown config key '" + std::string(key) + "'");
  }
  try {
    it->second(config, key, value);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::config) throw;
    throw Error(ErrorKind::config, e.what());
  }
}

RunConfig parse_config_text(std::string_view text) {
  RunConfig config;
  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::config, "line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_setting(config, trim(std::string_view(body).substr(0, eq)),
                  trim(std::string_view(body).substr(eq + 1)));
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

void apply_overrides(RunConfig& config, const std::vector<std::string>& overrides) {
  for (const auto& raw : overrides) {
    std::string_view token = raw;
    if (token.starts_with("--")) token.remove_prefix(2);
    const auto eq = token.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::config, "override '" + raw + "' is not of the form --key=value");
    }
    apply_setting(config, token.substr(0, eq), token.substr(eq + 1));
  }
}

void apply_environment(RunConfig& config) {
  if (const char* seeds = std::getenv("SAWLAB_SEED"); seeds && *seeds) {
    apply_setting(config, "seeds", seeds);
  }
}

nlohmann::json hyper_to_json(const RunConfig& c) {
  const auto& h = c.hyper;
  return {{"beta", h.beta},
          {"tau_expectile", h.tau_expectile},
          {"gamma", h.gamma},
          {"rho_polyak", h.rho_polyak},
          {"use_alpha_normalization", h.use_alpha_normalization},
          {"alpha_fixed", h.alpha_fixed},
          {"alpha_scale", h.alpha_scale},
          {"weight_clip", h.weight_clip},
          {"learning_rate", h.learning_rate},
          {"critic_loss", h.critic_loss == saw::CriticLoss::mse ? "mse" : "expectile"},
          {"hidden", h.hidden},
          {"env", c.env},
          {"p_slip", c.p_slip}};
}

void hyper_from_json(RunConfig& c, const nlohmann::json& j) {
  for (const auto& [key, value] : j.items()) {
    if (value.is_string()) {
      apply_setting(c, key, value.get<std::string>());
    } else if (value.is_array()) {
      std::string list;
      for (const auto& x : value) list += (list.empty() ? "" : ",") + std::to_string(x.get<int>());
      apply_setting(c, key, list);
    } else if (value.is_boolean()) {
      apply_setting(c, key, value.get<bool>() ? "true" : "false");
    } else {
      std::ostringstream num;
      num.precision(17);
      num << value.get<double>();
      apply_setting(c, key, num.str());
    }
  }
}

baselines::D3gHyper d3g_hyper(const RunConfig& c) {
  return {c.hyper.gamma, c.hyper.rho_polyak, c.hyper.learning_rate, c.hyper.hidden};
}

baselines::BcHyper bc_hyper(const RunConfig& c) {
  return {c.hyper.learning_rate, c.hyper.hidden};
}

}  // namespace sawlab
