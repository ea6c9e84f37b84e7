#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "safecons/certify.hpp"
#include "safecons/config.hpp"
#include "safecons/sim.hpp"

namespace safecons::cli {

enum class DefenseMode { kOn, kOff, kBoth };

DefenseMode parse_defense_mode(std::string_view text);

/// "3,5,8" is a seed list; a bare "20" means seeds 0..19.
std::vector<std::uint64_t> parse_seeds(std::string_view text);

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitOutputExists = 2,
  kExitIncomplete = 3,
};

struct RunOptions {
  std::filesystem::path out_dir;
  bool force = false;
  DefenseMode defense = DefenseMode::kBoth;
  std::optional<std::vector<std::uint64_t>> seeds;  // overrides the config
  bool parallel = false;                            // or'ed with the config flag
};

struct CommandResult {
  int exit_code = kExitOk;
  nlohmann::json summary;
  std::vector<std::filesystem::path> files;
};

/// Triplet (or subset per --defense) of scenarios per seed: trajectory CSVs,
/// SVG plots and summary.json.
CommandResult cmd_run(const ExperimentConfig& cfg, const RunOptions& opts, const llm::Gateway* gateway = nullptr);

/// Certificates for the configured inputs (or each agent's initial input),
/// attenuation table over shortest paths, tolerance index.
CommandResult cmd_certify(const ExperimentConfig& cfg, const RunOptions& opts, const llm::Gateway* gateway = nullptr);

/// 3-D formation triplet with slot errors and top-view SVGs.
CommandResult cmd_formation(const ExperimentConfig& cfg, const RunOptions& opts,
                            const llm::Gateway* gateway = nullptr);

/// Refuses a non-empty directory unless `force`.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

/// Nine significant digits.
std::string format_double(double x);

std::string trajectory_csv(const Trajectory& traj);
std::string trajectory_svg(const Trajectory& traj, const std::vector<AgentId>& malicious, const std::string& title);

// Formation geometry: slots on a regular polygon in the x-y plane around the
// consensus reference point.
std::vector<StateVec> formation_offsets(std::size_t n, double radius);
/// ||e_i - mean_{j normal} e_j|| per agent.
std::vector<double> slot_errors(const std::vector<StateVec>& states, const std::vector<AgentId>& normal_set);
std::string formation_svg(const Trajectory& traj, const std::vector<StateVec>& offsets,
                          const std::vector<AgentId>& malicious, const std::vector<double>& airspace,
                          const std::string& title);

/// Shortest information-flow path (sender -> receiver) from `source` to
/// every agent; empty when unreachable. Path includes both endpoints.
std::vector<std::vector<AgentId>> shortest_paths_from(const Topology& topo, AgentId source);

}  // namespace safecons::cli
