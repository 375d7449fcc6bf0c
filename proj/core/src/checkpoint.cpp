#include "pfrlab/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace pfrlab {

namespace {
std::string hex64(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  nlohmann::json j;
  j["format_version"] = ckpt.format_version;
  j["agent_kind"] = ckpt.agent_kind;
  j["observation_schema_hash"] = hex64(ckpt.observation_schema_hash);
  j["architecture"] = ckpt.spec.to_json();
  j["params"] = std::vector<double>(ckpt.params.data(), ckpt.params.data() + ckpt.params.size());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
  nlohmann::json j;
  is >> j;
  Checkpoint ckpt;
  ckpt.format_version = j.at("format_version").get<int>();
  if (ckpt.format_version != 1) {
    throw std::runtime_error("unsupported checkpoint format version");
  }
  ckpt.agent_kind = j.at("agent_kind").get<std::string>();
  ckpt.observation_schema_hash =
      std::stoull(j.at("observation_schema_hash").get<std::string>(), nullptr, 16);
  ckpt.spec = ArchitectureSpec::from_json(j.at("architecture"));
  const auto p = j.at("params").get<std::vector<double>>();
  if (static_cast<long>(p.size()) != ckpt.spec.parameter_count()) {
    throw std::runtime_error("checkpoint parameter count does not match its architecture");
  }
  ckpt.params = Eigen::Map<const Eigen::VectorXd>(p.data(), p.size());
  return ckpt;
}

void require_schema(const Checkpoint& ckpt, std::uint64_t expected_hash) {
  if (ckpt.observation_schema_hash != expected_hash) {
    throw std::runtime_error("observation schema mismatch: checkpoint has " +
                             hex64(ckpt.observation_schema_hash) + ", environment expects " +
                             hex64(expected_hash));
  }
}

}  // namespace pfrlab
