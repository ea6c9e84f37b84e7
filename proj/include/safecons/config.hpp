#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "safecons/adversary.hpp"
#include "safecons/core.hpp"
#include "safecons/llmgate.hpp"
#include "safecons/policy.hpp"
#include "safecons/sim.hpp"
#include "safecons/smoothing.hpp"

namespace safecons {

inline constexpr int kSchemaVersion = 1;

struct TopologySpec {
  std::string kind = "ring";  // ring | complete
  std::size_t n = 10;
  friend bool operator==(const TopologySpec&, const TopologySpec&) = default;
};

struct InitialStateSpec {
  std::string mode = "seeded-uniform";  // seeded-uniform | explicit
  std::vector<StateVec> values;
  friend bool operator==(const InitialStateSpec&, const InitialStateSpec&) = default;
};

struct CertifyInput {
  StateVec own;
  std::vector<StateVec> neighbors;
  friend bool operator==(const CertifyInput&, const CertifyInput&) = default;
};

struct CertifySpec {
  double sigma = 0.05;
  std::size_t samples = 1000;
  double alpha = 0.01;
  std::size_t regions = 10;        // uniform partition when `partition` is empty
  std::vector<double> partition;   // explicit boundaries
  std::vector<CertifyInput> inputs;
  friend bool operator==(const CertifySpec&, const CertifySpec&) = default;
};

struct FormationSpec {
  std::vector<double> airspace{2000.0, 2000.0, 1000.0};
  double slot_radius = 300.0;
  friend bool operator==(const FormationSpec&, const FormationSpec&) = default;
};

/// Everything a run/certify/formation invocation needs. Attack and defense
/// blocks describe the adversarial scenarios; the baseline drops both.
struct ExperimentConfig {
  int schema_version = kSchemaVersion;
  TopologySpec topology;
  std::size_t dimension = 1;
  std::size_t rounds = 50;
  InitialStateSpec initial_states;
  PolicyKind policy;
  HallucinationConfig hallucination;
  AttackConfig attack;
  DefenseConfig defense;  // `enabled` is decided per scenario
  std::vector<std::uint64_t> seeds{0};
  std::size_t final_window = 1;
  bool parallel = false;
  llm::GatewayConfig llm;
  CertifySpec certify;
  FormationSpec formation;

  bool operator==(const ExperimentConfig& other) const;
};

/// Raised for config problems; what() carries "<source>:<line>: <path>: <message>".
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::kInvalidConfig, what) {}
};

/// Strict parse: unknown keys, wrong types and out-of-range values are errors.
ExperimentConfig parse_config(const std::string& text, const std::string& source_name = "<config>");
ExperimentConfig load_config(const std::string& path);

nlohmann::json to_json(const ExperimentConfig& cfg);

Topology make_topology(const TopologySpec& spec);
Domain make_domain(const ExperimentConfig& cfg);

enum class ScenarioKind { kBaseline, kAttackNoDefense, kAttackDefense };
const char* scenario_name(ScenarioKind kind);

ScenarioConfig build_scenario(const ExperimentConfig& cfg, ScenarioKind kind, std::uint64_t seed,
                              const llm::Gateway* gateway = nullptr);

}  // namespace safecons
