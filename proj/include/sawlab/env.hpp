#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sawlab {

struct ReferenceScores {
  double random_score = 0.0;  // J_r
  double expert_score = 0.0;  // J_e
  int n_episodes = 0;
  std::uint64_t seed = 0;
};

struct EnvSpec {
  std::string name;
  int obs_dim = 0;
  int act_dim = 0;
  double action_bound = 1.0;
  int horizon = 1;
  bool deterministic = true;
};

struct EnvState {
  std::vector<double> observation;
  int step_index = 0;
  bool done = false;
  std::mt19937_64 rng;

  bool operator==(const EnvState&) const = default;
};

struct StepResult {
  EnvState next;
  double reward = 0.0;
  bool done = false;
};

enum class BehaviorPolicyKind { random, medium, expert, medium_replay, medium_expert };

std::string_view to_string(BehaviorPolicyKind kind);
BehaviorPolicyKind parse_behavior_kind(std::string_view name);

/// A small simulated MDP. Implementations are value-like: all episode state
/// lives in EnvState, so one Env may be shared by independent rollouts.
class Env {
 public:
  virtual ~Env() = default;

  virtual const EnvSpec& spec() const noexcept = 0;
  virtual EnvState reset(std::uint64_t seed) const = 0;
  virtual StepResult step(const EnvState& state, std::span<const double> action) const = 0;
  virtual std::vector<double> expert_action(const EnvState& state) const = 0;
  virtual std::vector<double> random_action(std::mt19937_64& rng) const = 0;
  /// The medium behavior policy: a noisy version of the expert.
  virtual std::vector<double> medium_action(const EnvState& state,
                                            std::mt19937_64& rng) const = 0;

  /// J_r and J_e from 1000 fixed-seed episodes, computed once and cached.
  const ReferenceScores& reference_scores() const;

 private:
  mutable std::optional<ReferenceScores> reference_;
};

/// Deterministic 2-d point mass: s' = s + 0.1 a, reward -|s' - goal|.
class PointMass2D final : public Env {
 public:
  static constexpr double kStepScale = 0.1;
  static constexpr double kGoalRadius = 0.05;
  static constexpr double kMediumNoise = 0.5;

  PointMass2D();

  const EnvSpec& spec() const noexcept override { return spec_; }
  EnvState reset(std::uint64_t seed) const override;
  StepResult step(const EnvState& state, std::span<const double> action) const override;
  std::vector<double> expert_action(const EnvState& state) const override;
  std::vector<double> random_action(std::mt19937_64& rng) const override;
  std::vector<double> medium_action(const EnvState& state,
                                    std::mt19937_64& rng) const override;

  std::array<double, 2> goal() const noexcept { return goal_; }

 private:
  EnvSpec spec_;
  std::array<double, 2> goal_{1.0, 1.0};
};

enum class GridObservation { coordinates, one_hot };

enum class Move { up, down, left, right };

/// Slippery 8x8 maze with a sparse goal reward.
///
/// Actions are 2-d vectors (dx, dy) snapped to the dominant axis: |dx| >= |dy|
/// moves horizontally, otherwise vertically; a zero component counts as
/// positive. Coordinates observations are (col, row).
class GridMaze final : public Env {
 public:
  static constexpr double kMediumRandomMoveProb = 0.3;

  /// Parses a layout of '#', '.', 'S' and 'G' rows.
  GridMaze(std::string_view layout, double p_slip = 0.1, int horizon = 50,
           GridObservation obs = GridObservation::coordinates);

  static GridMaze from_file(const std::filesystem::path& path, double p_slip = 0.1,
                            int horizon = 50,
                            GridObservation obs = GridObservation::coordinates);

  /// The layout shipped as data/gridmaze.txt.
  static std::string_view default_layout();

  const EnvSpec& spec() const noexcept override { return spec_; }
  EnvState reset(std::uint64_t seed) const override;
  StepResult step(const EnvState& state, std::span<const double> action) const override;
  std::vector<double> expert_action(const EnvState& state) const override;
  std::vector<double> random_action(std::mt19937_64& rng) const override;
  std::vector<double> medium_action(const EnvState& state,
                                    std::mt19937_64& rng) const override;

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  double p_slip() const noexcept { return p_slip_; }
  bool is_wall(int row, int col) const;
  int cell_index(int row, int col) const noexcept { return row * cols_ + col; }
  std::array<int, 2> start() const noexcept { return start_; }
  std::array<int, 2> goal() const noexcept { return goal_; }
  std::array<int, 2> cell_of(const EnvState& state) const;
  std::vector<double> observe(int row, int col) const;

  /// Cell reached by a move ignoring slip; walls and borders block.
  std::array<int, 2> neighbor(std::array<int, 2> cell, Move move) const;
  /// Shortest-path distance to the goal for every cell (-1 if unreachable).
  const std::vector<int>& goal_distances() const noexcept { return distance_; }

  static Move snap(std::span<const double> action);
  static std::vector<double> encode(Move move);

 private:
  EnvSpec spec_;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<char> cells_;
  std::array<int, 2> start_{};
  std::array<int, 2> goal_{};
  double p_slip_ = 0.1;
  GridObservation obs_ = GridObservation::coordinates;
  std::vector<int> distance_;
};

inline constexpr std::array<Move, 4> kAllMoves{Move::up, Move::down, Move::left,
                                               Move::right};

/// Builds an environment by name ("pointmass2d" or "gridmaze").
std::unique_ptr<Env> make_env(std::string_view name, double p_slip = 0.1);

}  // namespace sawlab
