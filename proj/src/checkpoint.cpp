#include "sawlab/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "sawlab/error.hpp"

namespace sawlab {

namespace {

using nlohmann::json;

std::string_view output_name(OutputActivation a) {
  return a == OutputActivation::tanh_scaled ? "tanh_scaled" : "identity";
}

OutputActivation parse_output(const std::string& name) {
  if (name == "tanh_scaled") return OutputActivation::tanh_scaled;
  if (name == "identity") return OutputActivation::identity;
  throw Error(ErrorKind::malformed_header, "unknown output activation '" + name + "'");
}

}  // namespace

void save_checkpoint(const Agent& agent, std::uint64_t seed, std::uint64_t step,
                     const json& hyper, const std::filesystem::path& path) {
  const auto nets = agent.networks();
  json networks = json::array();
  for (const auto& [name, net] : nets) {
    networks.push_back({{"name", name},
                        {"dims", net->dims()},
                        {"output", output_name(net->output_activation())},
                        {"output_scale", net->output_scale()}});
  }
  const json header = {{"agent", agent.kind()},
                       {"seed", seed},
                       {"step", step},
                       {"obs_dim", agent.dims().obs_dim},
                       {"act_dim", agent.dims().act_dim},
                       {"action_bound", agent.dims().action_bound},
                       {"hyper", hyper},
                       {"networks", networks}};
  std::string bytes = header.dump();
  bytes.push_back('\n');
  for (const auto& [name, net] : nets) {
    for (double v : net->flatten()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) {
    throw Error(ErrorKind::malformed_header, "checkpoint header is not newline-terminated");
  }

  CheckpointData data;
  auto& h = data.header;
  try {
    const json j = json::parse(bytes.substr(0, newline));
    h.agent = j.at("agent").get<std::string>();
    h.seed = j.at("seed").get<std::uint64_t>();
    h.step = j.at("step").get<std::uint64_t>();
    h.dims.obs_dim = j.at("obs_dim").get<int>();
    h.dims.act_dim = j.at("act_dim").get<int>();
    h.dims.action_bound = j.at("action_bound").get<double>();
    h.hyper = j.at("hyper");
    for (const auto& n : j.at("networks")) {
      h.networks.push_back({n.at("name").get<std::string>(), n.at("dims").get<std::vector<int>>(),
                            parse_output(n.at("output").get<std::string>()),
                            n.at("output_scale").get<double>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::malformed_header, std::string("checkpoint header: ") + e.what());
  }

  std::size_t pos = newline + 1;
  for (const auto& info : h.networks) {
    const std::size_t count = Mlp(info.dims).parameter_count();
    if (bytes.size() - pos < 8 * count) {
      throw Error(ErrorKind::truncated_payload, "checkpoint truncated in network " + info.name);
    }
    std::vector<double> params(count);
    for (auto& v : params) {
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
      }
      pos += 8;
      v = std::bit_cast<double>(bits);
    }
    data.parameters.push_back(std::move(params));
  }
  if (pos != bytes.size()) {
    throw Error(ErrorKind::dimension_mismatch, "checkpoint has trailing bytes");
  }
  return data;
}

void restore_parameters(Agent& agent, const CheckpointData& data) {
  auto nets = agent.mutable_networks();
  const auto& infos = data.header.networks;
  if (nets.size() != infos.size()) {
    throw Error(ErrorKind::dimension_mismatch, "checkpoint network count does not match agent");
  }
  for (std::size_t k = 0; k < nets.size(); ++k) {
    auto& [name, net] = nets[k];
    if (name != infos[k].name || net->dims() != infos[k].dims ||
        net->output_activation() != infos[k].output) {
      throw Error(ErrorKind::dimension_mismatch,
                  "checkpoint network '" + infos[k].name + "' does not match agent");
    }
    net->unflatten(data.parameters[k]);
  }
}

}  // namespace sawlab
