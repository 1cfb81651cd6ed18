#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sawlab/agent.hpp"

namespace sawlab {

struct NetworkInfo {
  std::string name;
  std::vector<int> dims;
  OutputActivation output = OutputActivation::identity;
  double output_scale = 1.0;
};

/// One-line JSON header preceding the parameter stream.
struct CheckpointHeader {
  std::string agent;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  AgentDims dims;
  nlohmann::json hyper = nlohmann::json::object();
  std::vector<NetworkInfo> networks;
};

/// Header line, newline, then every parameter of every network (in the
/// agent's checkpoint order) as little-endian f64.
void save_checkpoint(const Agent& agent, std::uint64_t seed, std::uint64_t step,
                     const nlohmann::json& hyper, const std::filesystem::path& path);

struct CheckpointData {
  CheckpointHeader header;
  std::vector<std::vector<double>> parameters;  // one flat block per network
};

CheckpointData read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint parameters into an agent of matching architecture.
void restore_parameters(Agent& agent, const CheckpointData& data);

}  // namespace sawlab
