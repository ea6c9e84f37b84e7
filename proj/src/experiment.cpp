#include "safecons/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <numbers>
#include <sstream>

#include "safecons/metrics.hpp"
#include "safecons/rng.hpp"

namespace safecons::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& dir, const fs::path& relative, const std::string& content,
                std::vector<fs::path>& files) {
  const fs::path target = dir / relative;
  fs::create_directories(target.parent_path());
  std::ofstream out(target, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write " + target.string());
  out << content;
  files.push_back(target);
}

json mean_sd(const std::vector<double>& xs) {
  if (xs.empty()) return nullptr;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  const double sd = xs.size() > 1 ? std::sqrt(var / static_cast<double>(xs.size() - 1)) : 0.0;
  return {{"mean", mean}, {"sd", sd}, {"n", xs.size()}};
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json states_json(const std::vector<StateVec>& states) {
  json out = json::array();
  for (const auto& s : states) out.push_back(s.dim() == 1 ? json(s[0]) : json(s.values()));
  return out;
}

std::vector<ScenarioKind> scenario_kinds(const ExperimentConfig& cfg, DefenseMode mode) {
  std::vector<ScenarioKind> kinds{ScenarioKind::kBaseline};
  if (cfg.attack.malicious.empty()) return kinds;
  if (mode != DefenseMode::kOn) kinds.push_back(ScenarioKind::kAttackNoDefense);
  if (mode != DefenseMode::kOff) kinds.push_back(ScenarioKind::kAttackDefense);
  return kinds;
}

std::size_t total(const std::vector<std::vector<std::size_t>>& rows) {
  std::size_t sum = 0;
  for (const auto& r : rows)
    for (auto x : r) sum += x;
  return sum;
}

struct ScenarioOutcome {
  ScenarioKind kind;
  Trajectory traj;
};

// Runs the selected scenarios for one seed; stops at the first incomplete one.
std::vector<ScenarioOutcome> run_seed(const ExperimentConfig& cfg, const std::vector<ScenarioKind>& kinds,
                                      std::uint64_t seed, const llm::Gateway* gateway) {
  std::vector<ScenarioOutcome> out;
  for (auto kind : kinds) {
    out.push_back({kind, run_scenario_partial(build_scenario(cfg, kind, seed, gateway))});
    if (!out.back().traj.complete) break;
  }
  return out;
}

const Trajectory* find_traj(const std::vector<ScenarioOutcome>& outcomes, ScenarioKind kind) {
  for (const auto& o : outcomes)
    if (o.kind == kind && o.traj.complete) return &o.traj;
  return nullptr;
}

json scenario_block(const Trajectory& traj, std::size_t window) {
  json consensus = json::array();
  for (const auto& row : traj.states) consensus.push_back(consensus_error(row));
  std::size_t fired = 0;
  for (const auto& row : traj.attack_fired) fired += static_cast<std::size_t>(std::count(row.begin(), row.end(), true));
  json block = {
      {"complete", traj.complete},
      {"rounds_completed", traj.rounds()},
      {"final_states", states_json(traj.complete ? final_states(traj, window) : traj.states.back())},
      {"consensus_error", consensus},
      {"queries_used", total(traj.queries)},
      {"verification_queries", total(traj.verification_queries)},
      {"attacks_fired", fired},
  };
  if (!traj.complete) block["diagnostic"] = traj.diagnostic;
  return block;
}

// Deviation metrics for one seed; fields present only for the scenarios run.
json deviation_block(const std::vector<ScenarioOutcome>& outcomes, const std::vector<AgentId>& normal,
                     std::size_t window) {
  const Trajectory* base = find_traj(outcomes, ScenarioKind::kBaseline);
  const Trajectory* nodef = find_traj(outcomes, ScenarioKind::kAttackNoDefense);
  const Trajectory* def = find_traj(outcomes, ScenarioKind::kAttackDefense);
  if (base == nullptr || (nodef == nullptr && def == nullptr)) return nullptr;

  const auto base_final = final_states(*base, window);
  json block = {{"normal_agents", normal}};
  std::vector<StateVec> d_nodef, d_def;
  if (nodef) {
    d_nodef = deviation(final_states(*nodef, window), base_final);
    block["delta_no_defense"] = states_json(d_nodef);
    block["avg_no_defense"] = normal_avg_deviation(d_nodef, normal);
  }
  if (def) {
    d_def = deviation(final_states(*def, window), base_final);
    block["delta_defense"] = states_json(d_def);
    block["avg_defense"] = normal_avg_deviation(d_def, normal);
  }
  if (nodef && def) {
    block["improvement_pct"] = optional_number(improvement_pct(block["avg_no_defense"], block["avg_defense"]));
    block["per_agent_improvement_pct"] = optional_number(per_agent_improvement_pct(d_nodef, d_def));
  }
  return block;
}

json aggregate_block(const json& per_seed) {
  std::vector<double> nodef, def, per_agent;
  std::size_t better = 0, compared = 0;
  for (const auto& s : per_seed) {
    const auto& m = s["metrics"];
    if (m.is_null()) continue;
    if (m.contains("avg_no_defense")) nodef.push_back(m["avg_no_defense"]);
    if (m.contains("avg_defense")) def.push_back(m["avg_defense"]);
    if (m.contains("per_agent_improvement_pct") && !m["per_agent_improvement_pct"].is_null())
      per_agent.push_back(m["per_agent_improvement_pct"]);
    if (m.contains("avg_no_defense") && m.contains("avg_defense")) {
      ++compared;
      if (m["avg_defense"].get<double>() < m["avg_no_defense"].get<double>()) ++better;
    }
  }
  if (nodef.empty() && def.empty()) return nullptr;
  json agg = {{"avg_no_defense", mean_sd(nodef)}, {"avg_defense", mean_sd(def)}};
  if (!nodef.empty() && !def.empty()) {
    agg["improvement_pct"] = optional_number(improvement_pct(agg["avg_no_defense"]["mean"], agg["avg_defense"]["mean"]));
    agg["per_agent_improvement_pct"] = mean_sd(per_agent);
    agg["seeds_defense_better"] = better;
    agg["seeds_compared"] = compared;
  }
  return agg;
}

std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

std::string svg_header(int width, int height) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return os.str();
}

std::string svg_escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += ch;
    }
  }
  return out;
}

constexpr const char* kNormalColor = "#1f77b4";
constexpr const char* kMaliciousColor = "#d62728";
constexpr const char* kMeanColor = "#2ca02c";

}  // namespace

DefenseMode parse_defense_mode(std::string_view text) {
  if (text == "on") return DefenseMode::kOn;
  if (text == "off") return DefenseMode::kOff;
  if (text == "both") return DefenseMode::kBoth;
  throw Error(ErrorCode::kInvalidArgument, "--defense must be on, off or both");
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  auto parse_one = [](std::string_view tok) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty())
      throw Error(ErrorCode::kInvalidArgument, "invalid seed '" + std::string(tok) + "'");
    return v;
  };
  std::vector<std::uint64_t> out;
  if (text.find(',') == std::string_view::npos) {
    const auto count = parse_one(text);
    if (count == 0) throw Error(ErrorCode::kInvalidArgument, "--seeds count must be >= 1");
    for (std::uint64_t s = 0; s < count; ++s) out.push_back(s);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto tok = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    out.push_back(parse_one(tok));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (dir.empty()) throw Error(ErrorCode::kInvalidArgument, "an output directory is required");
  if (fs::exists(dir)) {
    if (!fs::is_directory(dir)) throw Error(ErrorCode::kInvalidArgument, dir.string() + " is not a directory");
    if (!fs::is_empty(dir) && !force)
      throw Error(ErrorCode::kInvalidArgument, dir.string() + " is not empty; pass --force to overwrite");
  }
  fs::create_directories(dir);
}

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::string trajectory_csv(const Trajectory& traj) {
  std::ostringstream os;
  const std::size_t dim = traj.states.front().front().dim();
  os << "round,agent";
  for (std::size_t k = 0; k < dim; ++k) os << ",component_" << k;
  os << ",attack_fired,queries_used\n";
  for (std::size_t r = 0; r < traj.states.size(); ++r) {
    for (std::size_t i = 0; i < traj.states[r].size(); ++i) {
      os << r << "," << i;
      for (double x : traj.states[r][i]) os << "," << format_double(x);
      os << "," << (traj.attack_fired[r][i] ? 1 : 0) << "," << traj.queries[r][i] << "\n";
    }
  }
  return os.str();
}

std::string trajectory_svg(const Trajectory& traj, const std::vector<AgentId>& malicious, const std::string& title) {
  constexpr int kW = 800, kH = 420, kLeft = 50, kRight = 20, kTop = 40, kBottom = 40;
  const std::size_t rounds = std::max<std::size_t>(1, traj.rounds());
  const std::size_t n = traj.states.front().size();

  double lo = traj.states.front().front()[0], hi = lo;
  for (const auto& row : traj.states)
    for (const auto& s : row) {
      lo = std::min(lo, s[0]);
      hi = std::max(hi, s[0]);
    }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  auto px = [&](std::size_t r) { return kLeft + (kW - kLeft - kRight) * static_cast<double>(r) / rounds; };
  auto py = [&](double v) { return kTop + (kH - kTop - kBottom) * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream os;
  os << svg_header(kW, kH);
  os << "<text x=\"" << kW / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
     << svg_escape(title) << "</text>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\"" << kH - kBottom
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 8 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
     << "font-size=\"12\">round</text>\n";
  os << "<text x=\"8\" y=\"" << kTop << "\" font-family=\"sans-serif\" font-size=\"11\">" << format_double(hi)
     << "</text>\n<text x=\"8\" y=\"" << kH - kBottom << "\" font-family=\"sans-serif\" font-size=\"11\">"
     << format_double(lo) << "</text>\n";

  std::vector<AgentId> normal = normal_agents(n, malicious);
  for (AgentId i = 0; i < n; ++i) {
    const bool bad = std::find(malicious.begin(), malicious.end(), i) != malicious.end();
    os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << (bad ? kMaliciousColor : kNormalColor)
       << "\" points=\"";
    for (std::size_t r = 0; r < traj.states.size(); ++r)
      os << format_double(px(r)) << "," << format_double(py(traj.states[r][i][0])) << " ";
    os << "\"/>\n";
  }
  if (!normal.empty()) {
    os << "<polyline fill=\"none\" stroke-width=\"2.5\" stroke-dasharray=\"6,3\" stroke=\"" << kMeanColor
       << "\" points=\"";
    for (std::size_t r = 0; r < traj.states.size(); ++r) {
      double mean = 0.0;
      for (AgentId i : normal) mean += traj.states[r][i][0];
      mean /= static_cast<double>(normal.size());
      os << format_double(px(r)) << "," << format_double(py(mean)) << " ";
    }
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<StateVec> formation_offsets(std::size_t n, double radius) {
  std::vector<StateVec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    out.push_back(StateVec{radius * std::cos(angle), radius * std::sin(angle), 0.0});
  }
  return out;
}

std::vector<double> slot_errors(const std::vector<StateVec>& states, const std::vector<AgentId>& normal_set) {
  if (normal_set.empty()) throw Error(ErrorCode::kInvalidArgument, "slot errors need at least one normal agent");
  StateVec reference(states.front().dim());
  for (AgentId i : normal_set) reference += states.at(i);
  reference *= 1.0 / static_cast<double>(normal_set.size());
  std::vector<double> out;
  out.reserve(states.size());
  for (const auto& s : states) out.push_back(distance(s, reference));
  return out;
}

std::string formation_svg(const Trajectory& traj, const std::vector<StateVec>& offsets,
                          const std::vector<AgentId>& malicious, const std::vector<double>& airspace,
                          const std::string& title) {
  constexpr int kSize = 600, kMargin = 40;
  const double scale = (kSize - 2 * kMargin) / std::max(airspace[0], airspace[1]);
  auto px = [&](double x) { return kMargin + x * scale; };
  auto py = [&](double y) { return kSize - kMargin - y * scale; };

  std::ostringstream os;
  os << svg_header(kSize, kSize);
  os << "<text x=\"" << kSize / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"16\">"
     << svg_escape(title) << "</text>\n";
  os << "<rect x=\"" << px(0) << "\" y=\"" << py(airspace[1]) << "\" width=\"" << airspace[0] * scale
     << "\" height=\"" << airspace[1] * scale << "\" fill=\"none\" stroke=\"#888\"/>\n";
  const std::size_t n = traj.states.front().size();
  for (AgentId i = 0; i < n; ++i) {
    const bool bad = std::find(malicious.begin(), malicious.end(), i) != malicious.end();
    const char* color = bad ? kMaliciousColor : kNormalColor;
    os << "<polyline fill=\"none\" stroke-width=\"1\" stroke-opacity=\"0.6\" stroke=\"" << color << "\" points=\"";
    for (const auto& row : traj.states) {
      const StateVec p = row[i] + offsets[i];
      os << format_double(px(p[0])) << "," << format_double(py(p[1])) << " ";
    }
    os << "\"/>\n";
    const StateVec last = traj.states.back()[i] + offsets[i];
    os << "<circle cx=\"" << format_double(px(last[0])) << "\" cy=\"" << format_double(py(last[1]))
       << "\" r=\"4\" fill=\"" << color << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::vector<std::vector<AgentId>> shortest_paths_from(const Topology& topo, AgentId source) {
  const std::size_t n = topo.size();
  std::vector<std::vector<AgentId>> out_edges(n);
  for (const auto& [receiver, sender] : topo.edges()) out_edges[sender].push_back(receiver);
  std::vector<std::ptrdiff_t> parent(n, -1);
  std::vector<bool> seen(n, false);
  std::deque<AgentId> queue{source};
  seen[source] = true;
  while (!queue.empty()) {
    const AgentId u = queue.front();
    queue.pop_front();
    for (AgentId v : out_edges[u]) {  // ascending, so ties resolve deterministically
      if (!seen[v]) {
        seen[v] = true;
        parent[v] = static_cast<std::ptrdiff_t>(u);
        queue.push_back(v);
      }
    }
  }
  std::vector<std::vector<AgentId>> paths(n);
  for (AgentId t = 0; t < n; ++t) {
    if (!seen[t]) continue;
    for (std::ptrdiff_t v = static_cast<std::ptrdiff_t>(t); v != -1; v = parent[static_cast<std::size_t>(v)])
      paths[t].push_back(static_cast<AgentId>(v));
    std::reverse(paths[t].begin(), paths[t].end());
  }
  return paths;
}

CommandResult cmd_run(const ExperimentConfig& base_cfg, const RunOptions& opts, const llm::Gateway* gateway) {
  ExperimentConfig cfg = base_cfg;
  cfg.parallel = cfg.parallel || opts.parallel;
  if (opts.seeds) cfg.seeds = *opts.seeds;
  prepare_output_dir(opts.out_dir, opts.force);

  CommandResult result;
  const auto kinds = scenario_kinds(cfg, opts.defense);
  const auto normal = normal_agents(cfg.topology.n, cfg.attack.malicious);
  json per_seed = json::array();
  bool complete = true;

  for (std::uint64_t seed : cfg.seeds) {
    const auto outcomes = run_seed(cfg, kinds, seed, gateway);
    json seed_block = {{"seed", seed}, {"scenarios", json::object()}};
    for (const auto& o : outcomes) {
      const std::string name = scenario_name(o.kind);
      const fs::path stem = fs::path(seed_dir(seed)) / name;
      write_file(opts.out_dir, stem.string() + ".csv", trajectory_csv(o.traj), result.files);
      const auto& shown = o.kind == ScenarioKind::kBaseline ? std::vector<AgentId>{} : cfg.attack.malicious;
      write_file(opts.out_dir, stem.string() + ".svg",
                 trajectory_svg(o.traj, shown, name + " (seed " + std::to_string(seed) + ")"), result.files);
      seed_block["scenarios"][name] = scenario_block(o.traj, cfg.final_window);
      if (!o.traj.complete) complete = false;
    }
    seed_block["metrics"] = deviation_block(outcomes, normal, cfg.final_window);
    per_seed.push_back(std::move(seed_block));
    if (!complete) break;
  }

  json scenario_names = json::array();
  for (auto k : kinds) scenario_names.push_back(scenario_name(k));
  result.summary = {
      {"schema_version", kSchemaVersion},
      {"command", "run"},
      {"complete", complete},
      {"config", to_json(cfg)},
      {"scenarios", scenario_names},
      {"seeds", per_seed},
      {"aggregate", aggregate_block(per_seed)},
  };
  write_file(opts.out_dir, "summary.json", result.summary.dump(2) + "\n", result.files);
  result.exit_code = complete ? kExitOk : kExitIncomplete;
  return result;
}

CommandResult cmd_certify(const ExperimentConfig& cfg, const RunOptions& opts, const llm::Gateway* gateway) {
  if (cfg.dimension != 1) throw ConfigError("certify: decision-region certification needs dimension 1");
  prepare_output_dir(opts.out_dir, opts.force);
  CommandResult result;

  const std::uint64_t seed = opts.seeds ? opts.seeds->front() : cfg.seeds.front();
  const Domain domain = make_domain(cfg);
  const PolicyFn policy = make_agent_policy(cfg.policy, cfg.hallucination, domain, gateway);
  const RegionPartition partition = cfg.certify.partition.empty()
                                        ? RegionPartition::uniform(cfg.certify.regions, 0.0, 1.0)
                                        : RegionPartition(cfg.certify.partition);
  const auto& cs = cfg.certify;

  auto certificate_json = [&](const PolicyInput& in, const Certificate& c) {
    json neighbors = json::array();
    for (const auto& [id, s] : in.neighbors) neighbors.push_back(s[0]);
    return json{
        {"input", {{"own", in.own[0]}, {"neighbors", neighbors}}},
        {"region", c.region},
        {"runner_up", c.runner_up},
        {"counts", c.counts},
        {"pA_lower", c.pA_lower},
        {"pB_upper", c.pB_upper},
        {"radius", c.radius ? json(*c.radius) : json("ABSTAIN")},
        {"abstain", c.abstain()},
        {"confidence", c.confidence},
        {"n_samples", c.n_samples},
    };
  };

  json inputs = json::array();
  for (std::size_t k = 0; k < cs.inputs.size(); ++k) {
    PolicyInput in;
    in.own = cs.inputs[k].own;
    for (std::size_t j = 0; j < cs.inputs[k].neighbors.size(); ++j) in.neighbors.emplace_back(j, cs.inputs[k].neighbors[j]);
    const auto cert = certify_decision(policy, in, partition, cs.sigma, cs.samples, cs.alpha, domain,
                                       SeedSpec{seed, 0, k, Purpose::kCertify, 0}.stream());
    inputs.push_back(certificate_json(in, cert));
  }

  // Per-agent certificates at the initial configuration drive the network analysis.
  const Topology topo = make_topology(cfg.topology);
  const auto initial = cfg.initial_states.mode == "explicit" ? cfg.initial_states.values
                                                             : seeded_uniform_states(topo.size(), domain, seed);
  std::vector<double> radii(topo.size(), 0.0);
  json agents = json::array();
  for (AgentId i = 0; i < topo.size(); ++i) {
    PolicyInput in;
    in.own = initial[i];
    for (AgentId j : topo.neighbors(i)) in.neighbors.emplace_back(j, initial[j]);
    const auto cert = certify_decision(policy, in, partition, cs.sigma, cs.samples, cs.alpha, domain,
                                       SeedSpec{seed, 0, i, Purpose::kCertify, 1}.stream());
    radii[i] = cert.radius.value_or(0.0);
    json block = certificate_json(in, cert);
    block["agent"] = i;
    agents.push_back(std::move(block));
  }

  const double delta0 = cfg.attack.delta_max;
  std::vector<AgentId> sources = cfg.attack.malicious;
  if (sources.empty()) sources.push_back(0);
  json paths = json::array();
  for (AgentId s : sources) {
    const auto all = shortest_paths_from(topo, s);
    for (AgentId t = 0; t < topo.size(); ++t) {
      if (t == s || all[t].empty()) continue;
      // The source originates the perturbation; every receiver on the path filters it.
      std::vector<double> hop_radii, factors;
      for (std::size_t h = 1; h < all[t].size(); ++h) {
        hop_radii.push_back(radii[all[t][h]]);
        factors.push_back(attenuation_factor(radii[all[t][h]], cs.sigma));
      }
      paths.push_back({{"source", s},
                       {"target", t},
                       {"hops", hop_radii.size()},
                       {"path", all[t]},
                       {"radii", hop_radii},
                       {"factors", factors},
                       {"attenuated", path_attenuation(delta0, hop_radii, cs.sigma)}});
    }
  }

  const auto normal = normal_agents(topo.size(), cfg.attack.malicious);
  double r_min = std::numeric_limits<double>::infinity();
  for (AgentId i : normal) r_min = std::min(r_min, radii[i]);

  result.summary = {
      {"schema_version", kSchemaVersion},
      {"command", "certify"},
      {"complete", true},
      {"seed", seed},
      {"sigma", cs.sigma},
      {"alpha", cs.alpha},
      {"samples", cs.samples},
      {"partition", partition.boundaries()},
      {"certificates", inputs},
      {"agents", agents},
      {"attenuation", {{"delta0", delta0}, {"sources", sources}, {"paths", paths}}},
      {"tolerance",
       {{"r_min", r_min}, {"delta_mal_max", delta0}, {"index", tolerance_index(r_min, delta0)}}},
  };
  write_file(opts.out_dir, "certify.json", result.summary.dump(2) + "\n", result.files);
  return result;
}

CommandResult cmd_formation(const ExperimentConfig& base_cfg, const RunOptions& opts, const llm::Gateway* gateway) {
  if (base_cfg.dimension != 3) throw ConfigError("formation: the airspace scenario needs dimension 3");
  ExperimentConfig cfg = base_cfg;
  cfg.parallel = cfg.parallel || opts.parallel;
  if (opts.seeds) cfg.seeds = *opts.seeds;
  prepare_output_dir(opts.out_dir, opts.force);

  CommandResult result;
  const auto kinds = scenario_kinds(cfg, opts.defense);
  const auto normal = normal_agents(cfg.topology.n, cfg.attack.malicious);
  const auto offsets = formation_offsets(cfg.topology.n, cfg.formation.slot_radius);
  const double diagonal = std::hypot(cfg.formation.airspace[0], cfg.formation.airspace[1], cfg.formation.airspace[2]);
  json per_seed = json::array();
  bool complete = true;
  std::size_t def_better = 0, compared = 0;

  for (std::uint64_t seed : cfg.seeds) {
    const auto outcomes = run_seed(cfg, kinds, seed, gateway);
    json seed_block = {{"seed", seed}, {"scenarios", json::object()}};
    std::optional<double> nodef_mean, def_mean;
    for (const auto& o : outcomes) {
      const std::string name = scenario_name(o.kind);
      const fs::path stem = fs::path(seed_dir(seed)) / name;
      const auto& shown = o.kind == ScenarioKind::kBaseline ? std::vector<AgentId>{} : cfg.attack.malicious;
      write_file(opts.out_dir, stem.string() + ".csv", trajectory_csv(o.traj), result.files);
      write_file(opts.out_dir, stem.string() + "_topview.svg",
                 formation_svg(o.traj, offsets, shown, cfg.formation.airspace,
                               name + " top view (seed " + std::to_string(seed) + ")"),
                 result.files);
      json block = scenario_block(o.traj, cfg.final_window);
      if (o.traj.complete) {
        const auto errors = slot_errors(final_states(o.traj, cfg.final_window), normal);
        double normal_mean = 0.0;
        for (AgentId i : normal) normal_mean += errors[i];
        normal_mean /= static_cast<double>(normal.size());
        block["slot_errors"] = errors;
        block["max_slot_error"] = *std::max_element(errors.begin(), errors.end());
        block["normal_mean_slot_error"] = normal_mean;
        if (o.kind == ScenarioKind::kAttackNoDefense) nodef_mean = normal_mean;
        if (o.kind == ScenarioKind::kAttackDefense) def_mean = normal_mean;
      } else {
        complete = false;
      }
      seed_block["scenarios"][name] = std::move(block);
    }
    if (nodef_mean && def_mean) {
      ++compared;
      if (*def_mean < *nodef_mean) ++def_better;
    }
    seed_block["metrics"] = deviation_block(outcomes, normal, cfg.final_window);
    per_seed.push_back(std::move(seed_block));
    if (!complete) break;
  }

  json scenario_names = json::array();
  for (auto k : kinds) scenario_names.push_back(scenario_name(k));
  json aggregate = aggregate_block(per_seed);
  if (aggregate.is_null()) aggregate = json::object();
  aggregate["seeds_defense_slot_error_better"] = def_better;
  aggregate["seeds_slot_error_compared"] = compared;

  result.summary = {
      {"schema_version", kSchemaVersion},
      {"command", "formation"},
      {"complete", complete},
      {"config", to_json(cfg)},
      {"airspace_diagonal", diagonal},
      {"slot_offsets", states_json(offsets)},
      {"scenarios", scenario_names},
      {"seeds", per_seed},
      {"aggregate", aggregate},
  };
  write_file(opts.out_dir, "summary.json", result.summary.dump(2) + "\n", result.files);
  result.exit_code = complete ? kExitOk : kExitIncomplete;
  return result;
}

}  // namespace safecons::cli
