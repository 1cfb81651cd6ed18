#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sawlab/env.hpp"
#include "sawlab/nn.hpp"

namespace sawlab {

struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  std::vector<double> s_next;
  bool done = false;

  bool operator==(const Transition&) const = default;
};

struct OfflineDataset {
  std::string env_name;
  int obs_dim = 0;
  int act_dim = 0;
  std::vector<Transition> transitions;
  std::uint64_t seed = 0;
  std::string kind;

  std::size_t size() const noexcept { return transitions.size(); }
  bool operator==(const OfflineDataset&) const = default;

  /// Throws dimension_mismatch on an inconsistent transition.
  void validate() const;
};

/// Column-per-sample view of a list of transitions, ready for the networks.
struct Batch {
  Matrix s;
  Matrix a;
  Vector r;
  Matrix s_next;
  Vector done;

  Eigen::Index size() const noexcept { return s.cols(); }
};

Batch to_batch(std::span<const Transition> transitions);
/// Gathers the given rows of a dataset without copying transitions.
Batch gather_batch(const OfflineDataset& data, std::span<const std::size_t> indices);

/// Uniform sampling with replacement.
class BatchSampler {
 public:
  explicit BatchSampler(std::uint64_t seed, int batch_size = 256)
      : rng_(seed), batch_size_(batch_size) {}

  int batch_size() const noexcept { return batch_size_; }
  std::vector<Transition> sample(const OfflineDataset& data, int n);
  std::vector<Transition> sample(const OfflineDataset& data) { return sample(data, batch_size_); }
  /// Indices only; the transition copies are skipped.
  std::vector<std::size_t> sample_indices(std::size_t population, int n);

 private:
  std::mt19937_64 rng_;
  int batch_size_;
};

/// Writes the canonical binary format: a JSON header line followed by
/// little-endian records (s, a, r, s', done-byte).
void save_dataset(const OfflineDataset& data, const std::filesystem::path& path);
OfflineDataset load_dataset(const std::filesystem::path& path);

/// Header bytes and payload as one in-memory buffer (what save_dataset writes).
std::string encode_dataset(const OfflineDataset& data);
OfflineDataset decode_dataset(const std::string& bytes);

/// (J_pi - J_r) / (J_e - J_r) * 100, unclipped.
double normalized_score(double j_pi, double j_r, double j_e);

OfflineDataset generate_dataset(const Env& env, BehaviorPolicyKind kind,
                                std::size_t n_transitions, std::uint64_t seed);

/// Discounted return-to-go of every transition, respecting done flags.
std::vector<double> discounted_returns(const OfflineDataset& data, double gamma);

/// Reference-score file: {env_name, J_r, J_e, n_episodes, seed}.
void save_reference_scores(const std::string& env_name, const ReferenceScores& scores,
                           const std::filesystem::path& path);
ReferenceScores load_reference_scores(const std::filesystem::path& path,
                                      std::string* env_name = nullptr);

}  // namespace sawlab
