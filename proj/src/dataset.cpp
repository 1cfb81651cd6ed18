#include "sawlab/dataset.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sawlab/error.hpp"

namespace sawlab {

namespace {

using nlohmann::json;

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double get_f64(const std::string& in, std::size_t& pos) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += 8;
  return std::bit_cast<double>(bits);
}

std::vector<Transition> collect(const Env& env, std::size_t n, std::mt19937_64& rng,
                                BehaviorPolicyKind policy) {
  std::vector<Transition> out;
  out.reserve(n);
  std::mt19937_64 policy_rng(rng());
  while (out.size() < n) {
    EnvState state = env.reset(rng());
    while (!state.done && out.size() < n) {
      std::vector<double> action;
      switch (policy) {
        case BehaviorPolicyKind::random: action = env.random_action(policy_rng); break;
        case BehaviorPolicyKind::medium: action = env.medium_action(state, policy_rng); break;
        default: action = env.expert_action(state); break;
      }
      auto result = env.step(state, action);
      for (auto& x : action) {
        x = std::clamp(x, -env.spec().action_bound, env.spec().action_bound);
      }
      out.push_back({state.observation, std::move(action), result.reward,
                     result.next.observation, result.done});
      state = std::move(result.next);
    }
  }
  return out;
}

}  // namespace

void OfflineDataset::validate() const {
  if (obs_dim <= 0 || act_dim <= 0) {
    throw Error(ErrorKind::dimension_mismatch, "dataset dims must be positive");
  }
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& t = transitions[i];
    if (static_cast<int>(t.s.size()) != obs_dim || static_cast<int>(t.s_next.size()) != obs_dim ||
        static_cast<int>(t.a.size()) != act_dim) {
      throw Error(ErrorKind::dimension_mismatch,
                  "transition " + std::to_string(i) + " does not match dataset dims");
    }
    if (!std::isfinite(t.r)) {
      throw Error(ErrorKind::non_finite, "transition " + std::to_string(i) + " has non-finite reward");
    }
  }
}

Batch to_batch(std::span<const Transition> transitions) {
  if (transitions.empty()) throw Error(ErrorKind::invalid_argument, "empty batch");
  const auto n = static_cast<Eigen::Index>(transitions.size());
  const auto obs = static_cast<Eigen::Index>(transitions.front().s.size());
  const auto act = static_cast<Eigen::Index>(transitions.front().a.size());
  Batch b{Matrix(obs, n), Matrix(act, n), Vector(n), Matrix(obs, n), Vector(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& t = transitions[j];
    if (static_cast<Eigen::Index>(t.s.size()) != obs ||
        static_cast<Eigen::Index>(t.s_next.size()) != obs ||
        static_cast<Eigen::Index>(t.a.size()) != act) {
      throw Error(ErrorKind::dimension_mismatch, "to_batch: inconsistent transition dims");
    }
    b.s.col(j) = Eigen::Map<const Vector>(t.s.data(), obs);
    b.a.col(j) = Eigen::Map<const Vector>(t.a.data(), act);
    b.s_next.col(j) = Eigen::Map<const Vector>(t.s_next.data(), obs);
    b.r(j) = t.r;
    b.done(j) = t.done ? 1.0 : 0.0;
  }
  return b;
}

Batch gather_batch(const OfflineDataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw Error(ErrorKind::invalid_argument, "empty batch");
  const auto n = static_cast<Eigen::Index>(indices.size());
  const Eigen::Index obs = data.obs_dim;
  const Eigen::Index act = data.act_dim;
  Batch b{Matrix(obs, n), Matrix(act, n), Vector(n), Matrix(obs, n), Vector(n)};
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& t = data.transitions.at(indices[j]);
    b.s.col(j) = Eigen::Map<const Vector>(t.s.data(), obs);
    b.a.col(j) = Eigen::Map<const Vector>(t.a.data(), act);
    b.s_next.col(j) = Eigen::Map<const Vector>(t.s_next.data(), obs);
    b.r(j) = t.r;
    b.done(j) = t.done ? 1.0 : 0.0;
  }
  return b;
}

std::vector<std::size_t> BatchSampler::sample_indices(std::size_t population, int n) {
  if (population == 0) throw Error(ErrorKind::invalid_argument, "sample from empty dataset");
  if (n < 1) throw Error(ErrorKind::invalid_argument, "batch size must be >= 1");
  std::uniform_int_distribution<std::size_t> pick(0, population - 1);
  std::vector<std::size_t> idx(static_cast<std::size_t>(n));
  for (auto& i : idx) i = pick(rng_);
  return idx;
}

std::vector<Transition> BatchSampler::sample(const OfflineDataset& data, int n) {
  std::vector<Transition> out;
  out.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (auto i : sample_indices(data.size(), n)) out.push_back(data.transitions[i]);
  return out;
}

std::string encode_dataset(const OfflineDataset& data) {
  data.validate();
  json header = {{"env_name", data.env_name}, {"obs_dim", data.obs_dim},
                 {"act_dim", data.act_dim},   {"count", data.transitions.size()},
                 {"seed", data.seed},         {"kind", data.kind},
                 {"version", 1}};
  std::string out = header.dump();
  out.push_back('\n');
  const std::size_t record = 8 * (2 * data.obs_dim + data.act_dim + 1) + 1;
  out.reserve(out.size() + record * data.transitions.size());
  for (const auto& t : data.transitions) {
    for (double v : t.s) put_f64(out, v);
    for (double v : t.a) put_f64(out, v);
    put_f64(out, t.r);
    for (double v : t.s_next) put_f64(out, v);
    out.push_back(t.done ? '\x01' : '\x00');
  }
  return out;
}

OfflineDataset decode_dataset(const std::string& bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) {
    throw Error(ErrorKind::malformed_header, "dataset header is not newline-terminated");
  }
  OfflineDataset data;
  std::size_t count = 0;
  try {
    const json header = json::parse(bytes.substr(0, newline));
    if (header.at("version").get<int>() != 1) {
      throw Error(ErrorKind::malformed_header, "unsupported dataset version");
    }
    data.env_name = header.at("env_name").get<std::string>();
    data.obs_dim = header.at("obs_dim").get<int>();
    data.act_dim = header.at("act_dim").get<int>();
    data.seed = header.at("seed").get<std::uint64_t>();
    data.kind = header.at("kind").get<std::string>();
    count = header.at("count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::malformed_header, std::string("dataset header: ") + e.what());
  }
  if (data.obs_dim <= 0 || data.act_dim <= 0) {
    throw Error(ErrorKind::dimension_mismatch, "dataset header declares non-positive dims");
  }

  const std::size_t record = 8 * (2 * static_cast<std::size_t>(data.obs_dim) +
                                  static_cast<std::size_t>(data.act_dim) + 1) + 1;
  const std::size_t payload = bytes.size() - newline - 1;
  if (payload < record * count) {
    throw Error(ErrorKind::truncated_payload,
                "dataset declares " + std::to_string(count) + " records but holds " +
                    std::to_string(payload / record));
  }
  if (payload != record * count) {
    throw Error(ErrorKind::dimension_mismatch,
                "dataset payload size does not match declared dims and count");
  }

  std::size_t pos = newline + 1;
  data.transitions.resize(count);
  for (auto& t : data.transitions) {
    t.s.resize(data.obs_dim);
    t.a.resize(data.act_dim);
    t.s_next.resize(data.obs_dim);
    for (auto& v : t.s) v = get_f64(bytes, pos);
    for (auto& v : t.a) v = get_f64(bytes, pos);
    t.r = get_f64(bytes, pos);
    for (auto& v : t.s_next) v = get_f64(bytes, pos);
    const auto flag = static_cast<unsigned char>(bytes[pos++]);
    if (flag > 1) throw Error(ErrorKind::malformed_header, "done byte must be 0 or 1");
    t.done = flag == 1;
  }
  return data;
}

void save_dataset(const OfflineDataset& data, const std::filesystem::path& path) {
  const std::string bytes = encode_dataset(data);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io, "short write to " + path.string());
}

OfflineDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return decode_dataset(buf.str());
}

double normalized_score(double j_pi, double j_r, double j_e) {
  if (!(j_e > j_r)) {
    throw Error(ErrorKind::invalid_argument, "normalized_score requires J_e > J_r");
  }
  return (j_pi - j_r) / (j_e - j_r) * 100.0;
}

OfflineDataset generate_dataset(const Env& env, BehaviorPolicyKind kind,
                                std::size_t n_transitions, std::uint64_t seed) {
  if (n_transitions < 1) throw Error(ErrorKind::invalid_argument, "n_transitions must be >= 1");
  OfflineDataset data;
  data.env_name = env.spec().name;
  data.obs_dim = env.spec().obs_dim;
  data.act_dim = env.spec().act_dim;
  data.seed = seed;
  data.kind = std::string(to_string(kind));

  std::mt19937_64 rng(seed);
  auto append = [&](BehaviorPolicyKind policy, std::size_t n) {
    if (n == 0) return;
    auto part = collect(env, n, rng, policy);
    data.transitions.insert(data.transitions.end(), std::make_move_iterator(part.begin()),
                            std::make_move_iterator(part.end()));
  };
  const std::size_t first_half = n_transitions / 2;
  switch (kind) {
    case BehaviorPolicyKind::random:
    case BehaviorPolicyKind::medium:
    case BehaviorPolicyKind::expert:
      append(kind, n_transitions);
      break;
    case BehaviorPolicyKind::medium_replay:
      append(BehaviorPolicyKind::random, first_half);
      append(BehaviorPolicyKind::medium, n_transitions - first_half);
      break;
    case BehaviorPolicyKind::medium_expert:
      append(BehaviorPolicyKind::medium, first_half);
      append(BehaviorPolicyKind::expert, n_transitions - first_half);
      break;
  }
  return data;
}

std::vector<double> discounted_returns(const OfflineDataset& data, double gamma) {
  const auto& ts = data.transitions;
  std::vector<double> out(ts.size(), 0.0);
  double running = 0.0;
  for (std::size_t i = ts.size(); i-- > 0;) {
    // An episode also ends where the next record does not continue from s'.
    const bool boundary = ts[i].done || i + 1 == ts.size() || ts[i + 1].s != ts[i].s_next;
    running = ts[i].r + (boundary ? 0.0 : gamma * running);
    out[i] = running;
  }
  return out;
}

void save_reference_scores(const std::string& env_name, const ReferenceScores& scores,
                           const std::filesystem::path& path) {
  json j = {{"env_name", env_name},
            {"J_r", scores.random_score},
            {"J_e", scores.expert_score},
            {"n_episodes", scores.n_episodes},
            {"seed", scores.seed}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

ReferenceScores load_reference_scores(const std::filesystem::path& path, std::string* env_name) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  try {
    const json j = json::parse(in);
    ReferenceScores r;
    r.random_score = j.at("J_r").get<double>();
    r.expert_score = j.at("J_e").get<double>();
    r.n_episodes = j.at("n_episodes").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    if (env_name) *env_name = j.at("env_name").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::malformed_header, std::string("reference scores: ") + e.what());
  }
}

}  // namespace sawlab
