#include "sawlab/env.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <sstream>

#include "sawlab/error.hpp"

namespace sawlab {

namespace {

constexpr std::uint64_t kReferenceSeed = 20221017;
constexpr int kReferenceEpisodes = 1000;

void check_action(const EnvSpec& spec, std::span<const double> action) {
  if (static_cast<int>(action.size()) != spec.act_dim) {
    throw Error(ErrorKind::shape, spec.name + ": action has " +
                                      std::to_string(action.size()) + " components, expected " +
                                      std::to_string(spec.act_dim));
  }
}

void check_not_done(const EnvSpec& spec, const EnvState& state) {
  if (state.done) throw Error(ErrorKind::invalid_state, spec.name + ": step on a done state");
}

double mean_return(const Env& env, bool expert) {
  double total = 0.0;
  for (int i = 0; i < kReferenceEpisodes; ++i) {
    const std::uint64_t seed = kReferenceSeed + static_cast<std::uint64_t>(i);
    std::mt19937_64 policy_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    EnvState state = env.reset(seed);
    while (!state.done) {
      auto action = expert ? env.expert_action(state) : env.random_action(policy_rng);
      auto result = env.step(state, action);
      total += result.reward;
      state = std::move(result.next);
    }
  }
  return total / kReferenceEpisodes;
}

}  // namespace

std::string_view to_string(BehaviorPolicyKind kind) {
  switch (kind) {
    case BehaviorPolicyKind::random: return "random";
    case BehaviorPolicyKind::medium: return "medium";
    case BehaviorPolicyKind::expert: return "expert";
    case BehaviorPolicyKind::medium_replay: return "medium_replay";
    case BehaviorPolicyKind::medium_expert: return "medium_expert";
  }
  return "unknown";
}

BehaviorPolicyKind parse_behavior_kind(std::string_view name) {
  for (auto kind : {BehaviorPolicyKind::random, BehaviorPolicyKind::medium,
                    BehaviorPolicyKind::expert, BehaviorPolicyKind::medium_replay,
                    BehaviorPolicyKind::medium_expert}) {
    if (to_string(kind) == name) return kind;
  }
  throw Error(ErrorKind::invalid_argument, "unknown dataset kind '" + std::string(name) + "'");
}

const ReferenceScores& Env::reference_scores() const {
  if (!reference_) {
    ReferenceScores r;
    r.random_score = mean_return(*this, false);
    r.expert_score = mean_return(*this, true);
    r.n_episodes = kReferenceEpisodes;
    r.seed = kReferenceSeed;
    reference_ = r;
  }
  return *reference_;
}

// --- PointMass2D -----------------------------------------------------------

PointMass2D::PointMass2D() {
  spec_.name = "pointmass2d";
  spec_.obs_dim = 2;
  spec_.act_dim = 2;
  spec_.action_bound = 1.0;
  spec_.horizon = 100;
  spec_.deterministic = true;
}

EnvState PointMass2D::reset(std::uint64_t seed) const {
  EnvState state;
  state.rng.seed(seed);
  std::uniform_real_distribution<double> start(-1.0, 1.0);
  const double x = start(state.rng);
  const double y = start(state.rng);
  state.observation = {x, y};
  return state;
}

StepResult PointMass2D::step(const EnvState& state, std::span<const double> action) const {
  check_action(spec_, action);
  check_not_done(spec_, state);
  StepResult result{state, 0.0, false};
  auto& s = result.next.observation;
  for (int i = 0; i < 2; ++i) {
    const double a = std::clamp(action[i], -spec_.action_bound, spec_.action_bound);
    s[i] = state.observation[i] + kStepScale * a;
  }
  const double distance = std::hypot(s[0] - goal_[0], s[1] - goal_[1]);
  result.reward = -distance;
  result.next.step_index = state.step_index + 1;
  result.done = distance < kGoalRadius || result.next.step_index >= spec_.horizon;
  result.next.done = result.done;
  return result;
}

std::vector<double> PointMass2D::expert_action(const EnvState& state) const {
  std::vector<double> a(2);
  for (int i = 0; i < 2; ++i) {
    a[i] = std::clamp((goal_[i] - state.observation[i]) / kStepScale, -spec_.action_bound,
                      spec_.action_bound);
  }
  return a;
}

std::vector<double> PointMass2D::random_action(std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(-spec_.action_bound, spec_.action_bound);
  const double ax = u(rng);
  const double ay = u(rng);
  return {ax, ay};
}

std::vector<double> PointMass2D::medium_action(const EnvState& state,
                                               std::mt19937_64& rng) const {
  std::normal_distribution<double> noise(0.0, kMediumNoise);
  auto a = expert_action(state);
  for (auto& x : a) {
    x = std::clamp(x + noise(rng), -spec_.action_bound, spec_.action_bound);
  }
  return a;
}

// --- GridMaze --------------------------------------------------------------

std::string_view GridMaze::default_layout() {
  return "S..#....\n"
         ".#.#.##.\n"
         ".#...#..\n"
         ".####.#.\n"
         "......#.\n"
         ".#.####.\n"
         ".#......\n"
         "...#.#.G\n";
}

GridMaze::GridMaze(std::string_view layout, double p_slip, int horizon, GridObservation obs)
    : p_slip_(p_slip), obs_(obs) {
  if (!(p_slip >= 0.0 && p_slip <= 1.0)) {
    throw Error(ErrorKind::invalid_argument, "gridmaze: p_slip must be in [0, 1]");
  }
  if (horizon < 1) throw Error(ErrorKind::invalid_argument, "gridmaze: horizon must be >= 1");

  std::vector<std::string> lines;
  std::istringstream in{std::string(layout)};
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw Error(ErrorKind::invalid_argument, "gridmaze: empty layout");
  rows_ = static_cast<int>(lines.size());
  cols_ = static_cast<int>(lines.front().size());
  bool has_start = false;
  bool has_goal = false;
  for (int r = 0; r < rows_; ++r) {
    if (static_cast<int>(lines[r].size()) != cols_) {
      throw Error(ErrorKind::invalid_argument, "gridmaze: ragged layout");
    }
    for (int c = 0; c < cols_; ++c) {
      const char ch = lines[r][c];
      switch (ch) {
        case 'S': start_ = {r, c}; has_start = true; break;
        case 'G': goal_ = {r, c}; has_goal = true; break;
        case '#': case '.': break;
        default:
          throw Error(ErrorKind::invalid_argument,
                      std::string("gridmaze: unexpected layout character '") + ch + "'");
      }
      cells_.push_back(ch);
    }
  }
  if (!has_start || !has_goal) {
    throw Error(ErrorKind::invalid_argument, "gridmaze: layout needs one 'S' and one 'G'");
  }

  // BFS from the goal; moves are reversible so this gives distance-to-goal.
  distance_.assign(cells_.size(), -1);
  std::deque<std::array<int, 2>> frontier{goal_};
  distance_[cell_index(goal_[0], goal_[1])] = 0;
  while (!frontier.empty()) {
    auto cell = frontier.front();
    frontier.pop_front();
    for (Move m : kAllMoves) {
      auto next = neighbor(cell, m);
      int& d = distance_[cell_index(next[0], next[1])];
      if (d < 0) {
        d = distance_[cell_index(cell[0], cell[1])] + 1;
        frontier.push_back(next);
      }
    }
  }
  if (distance_[cell_index(start_[0], start_[1])] < 0) {
    throw Error(ErrorKind::invalid_argument, "gridmaze: goal unreachable from start");
  }

  spec_.name = "gridmaze";
  spec_.obs_dim = obs == GridObservation::coordinates ? 2 : rows_ * cols_;
  spec_.act_dim = 2;
  spec_.action_bound = 1.0;
  spec_.horizon = horizon;
  spec_.deterministic = p_slip == 0.0;
}

GridMaze GridMaze::from_file(const std::filesystem::path& path, double p_slip, int horizon,
                             GridObservation obs) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open maze file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return GridMaze(text.str(), p_slip, horizon, obs);
}

bool GridMaze::is_wall(int row, int col) const {
  if (row < 0 || row >= rows_ || col < 0 || col >= cols_) return true;
  return cells_[cell_index(row, col)] == '#';
}

std::array<int, 2> GridMaze::neighbor(std::array<int, 2> cell, Move move) const {
  auto [r, c] = cell;
  switch (move) {
    case Move::up: --r; break;
    case Move::down: ++r; break;
    case Move::left: --c; break;
    case Move::right: ++c; break;
  }
  if (is_wall(r, c)) return cell;
  return {r, c};
}

std::vector<double> GridMaze::observe(int row, int col) const {
  if (obs_ == GridObservation::coordinates) {
    return {static_cast<double>(col), static_cast<double>(row)};
  }
  std::vector<double> o(static_cast<std::size_t>(rows_ * cols_), 0.0);
  o[cell_index(row, col)] = 1.0;
  return o;
}

std::array<int, 2> GridMaze::cell_of(const EnvState& state) const {
  const auto& o = state.observation;
  if (obs_ == GridObservation::coordinates) {
    return {static_cast<int>(std::lround(o[1])), static_cast<int>(std::lround(o[0]))};
  }
  const auto it = std::max_element(o.begin(), o.end());
  const int idx = static_cast<int>(it - o.begin());
  return {idx / cols_, idx % cols_};
}

Move GridMaze::snap(std::span<const double> action) {
  const double dx = action[0];
  const double dy = action[1];
  if (std::abs(dx) >= std::abs(dy)) return dx >= 0.0 ? Move::right : Move::left;
  return dy >= 0.0 ? Move::down : Move::up;
}

std::vector<double> GridMaze::encode(Move move) {
  switch (move) {
    case Move::up: return {0.0, -1.0};
    case Move::down: return {0.0, 1.0};
    case Move::left: return {-1.0, 0.0};
    case Move::right: return {1.0, 0.0};
  }
  return {0.0, 0.0};
}

EnvState GridMaze::reset(std::uint64_t seed) const {
  EnvState state;
  state.rng.seed(seed);
  state.observation = observe(start_[0], start_[1]);
  return state;
}

StepResult GridMaze::step(const EnvState& state, std::span<const double> action) const {
  check_action(spec_, action);
  check_not_done(spec_, state);
  StepResult result{state, 0.0, false};
  Move move = snap(action);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (p_slip_ > 0.0 && u(result.next.rng) < p_slip_) {
    std::uniform_int_distribution<int> pick(0, 2);
    const int k = pick(result.next.rng);
    int seen = 0;
    for (Move m : kAllMoves) {
      if (m == move) continue;
      if (seen++ == k) {
        move = m;
        break;
      }
    }
  }
  const auto next = neighbor(cell_of(state), move);
  result.next.observation = observe(next[0], next[1]);
  result.next.step_index = state.step_index + 1;
  const bool at_goal = next == goal_;
  result.reward = at_goal ? 1.0 : 0.0;
  result.done = at_goal || result.next.step_index >= spec_.horizon;
  result.next.done = result.done;
  return result;
}

std::vector<double> GridMaze::expert_action(const EnvState& state) const {
  const auto cell = cell_of(state);
  Move best = Move::right;
  int best_d = -1;
  for (Move m : kAllMoves) {
    const auto next = neighbor(cell, m);
    const int d = distance_[cell_index(next[0], next[1])];
    if (d >= 0 && (best_d < 0 || d < best_d)) {
      best = m;
      best_d = d;
    }
  }
  return encode(best);
}

std::vector<double> GridMaze::random_action(std::mt19937_64& rng) const {
  std::uniform_int_distribution<int> pick(0, 3);
  return encode(kAllMoves[pick(rng)]);
}

std::vector<double> GridMaze::medium_action(const EnvState& state,
                                            std::mt19937_64& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < kMediumRandomMoveProb) return random_action(rng);
  return expert_action(state);
}

std::unique_ptr<Env> make_env(std::string_view name, double p_slip) {
  if (name == "pointmass2d") return std::make_unique<PointMass2D>();
  if (name == "gridmaze") return std::make_unique<GridMaze>(GridMaze::default_layout(), p_slip);
  throw Error(ErrorKind::invalid_argument, "unknown environment '" + std::string(name) + "'");
}

}  // namespace sawlab
