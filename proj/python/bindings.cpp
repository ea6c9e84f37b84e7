#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "safecons/certify.hpp"
#include "safecons/config.hpp"
#include "safecons/experiment.hpp"
#include "safecons/llmgate.hpp"
#include "safecons/metrics.hpp"
#include "safecons/sim.hpp"
#include "safecons/smoothing.hpp"

namespace py = pybind11;
using namespace safecons;

namespace {

using Rows = std::vector<std::vector<double>>;

std::vector<StateVec> to_states(const Rows& rows) {
  std::vector<StateVec> out;
  for (const auto& r : rows) out.emplace_back(r);
  return out;
}

Rows from_states(const std::vector<StateVec>& states) {
  Rows out;
  for (const auto& s : states) out.push_back(s.values());
  return out;
}

ScenarioKind parse_kind(const std::string& name) {
  for (auto k : {ScenarioKind::kBaseline, ScenarioKind::kAttackNoDefense, ScenarioKind::kAttackDefense})
    if (name == scenario_name(k)) return k;
  throw py::value_error("unknown scenario: " + name);
}

cli::RunOptions options(const std::string& out_dir, bool force, const std::string& defense,
                        std::optional<std::vector<std::uint64_t>> seeds, bool parallel) {
  cli::RunOptions o;
  o.out_dir = out_dir;
  o.force = force;
  o.defense = cli::parse_defense_mode(defense);
  o.seeds = std::move(seeds);
  o.parallel = parallel;
  return o;
}

using Command = cli::CommandResult (*)(const ExperimentConfig&, const cli::RunOptions&, const llm::Gateway*);

py::tuple command(Command fn, const std::string& config_text, const std::string& out_dir, bool force,
                  const std::string& defense, std::optional<std::vector<std::uint64_t>> seeds, bool parallel) {
  const auto cfg = parse_config(config_text);
  const auto r = fn(cfg, options(out_dir, force, defense, std::move(seeds), parallel), nullptr);
  return py::make_tuple(r.exit_code, r.summary.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Consensus simulator with randomized-smoothing defense";

  py::register_exception<Error>(m, "SafeconsError", PyExc_RuntimeError);

  m.def("normal_cdf", &std_normal_cdf, py::arg("x"));
  m.def("normal_quantile", &std_normal_quantile, py::arg("p"));
  m.def(
      "clopper_pearson",
      [](std::size_t successes, std::size_t n, double alpha) {
        const auto b = clopper_pearson_bounds(successes, n, alpha);
        return py::make_tuple(b.lower, b.upper);
      },
      py::arg("successes"), py::arg("n"), py::arg("alpha"));
  m.def("certified_radius", &certified_radius, py::arg("pA_lower"), py::arg("pB_upper"), py::arg("sigma"));
  m.def("attenuation_factor", &attenuation_factor, py::arg("radius"), py::arg("sigma"));
  m.def(
      "path_attenuation",
      [](double delta0, const std::vector<double>& radii, double sigma) { return path_attenuation(delta0, radii, sigma); },
      py::arg("delta0"), py::arg("radii"), py::arg("sigma"));
  m.def("tolerance_index", &tolerance_index, py::arg("r_min"), py::arg("delta_mal_max"));

  m.def(
      "trim_mean", [](const Rows& samples, double trim_frac) { return trim_mean(to_states(samples), trim_frac).values(); },
      py::arg("samples"), py::arg("trim_frac"));
  m.def(
      "estimate_variance", [](const Rows& samples) { return estimate_variance(to_states(samples)); },
      py::arg("samples"));
  m.def(
      "adaptive_sample_count",
      [](double variance, double c, double tau, std::size_t m_max) {
        SmoothingConfig cfg;
        cfg.c = c;
        cfg.tau = tau;
        cfg.m_max = m_max;
        return adaptive_sample_count(variance, cfg);
      },
      py::arg("variance"), py::arg("c"), py::arg("tau"), py::arg("m_max"));

  m.def("improvement_pct", &improvement_pct, py::arg("no_defense_avg"), py::arg("defense_avg"));
  m.def(
      "consensus_error", [](const Rows& states) { return consensus_error(to_states(states)); }, py::arg("states"));

  m.def(
      "parse_config", [](const std::string& text) { return to_json(parse_config(text)).dump(); }, py::arg("text"));
  m.def(
      "load_config", [](const std::string& path) { return to_json(load_config(path)).dump(); }, py::arg("path"));

  m.def(
      "simulate",
      [](const std::string& config_text, const std::string& scenario, std::uint64_t seed, bool parallel,
         bool reverse_order) {
        const auto cfg = parse_config(config_text);
        auto sc = build_scenario(cfg, parse_kind(scenario), seed);
        sc.parallel = parallel;
        sc.reverse_order = reverse_order;
        Trajectory traj;
        {
          py::gil_scoped_release release;
          traj = run_scenario(sc);
        }
        py::list states;
        for (const auto& row : traj.states) states.append(from_states(row));
        py::dict out;
        out["states"] = states;
        out["queries"] = traj.queries;
        out["verification_queries"] = traj.verification_queries;
        out["attack_fired"] = traj.attack_fired;
        out["csv"] = cli::trajectory_csv(traj);
        return out;
      },
      py::arg("config_text"), py::arg("scenario"), py::arg("seed"), py::arg("parallel") = false,
      py::arg("reverse_order") = false);

  const auto cmd_args = std::make_tuple(py::arg("config_text"), py::arg("out_dir"), py::arg("force") = false,
                                        py::arg("defense") = "both", py::arg("seeds") = py::none(),
                                        py::arg("parallel") = false);
  auto bind_command = [&](const char* name, Command fn) {
    std::apply(
        [&](auto... args) {
          m.def(
              name,
              [fn](const std::string& text, const std::string& out, bool force, const std::string& defense,
                   std::optional<std::vector<std::uint64_t>> seeds,
                   bool parallel) { return command(fn, text, out, force, defense, std::move(seeds), parallel); },
              args...);
        },
        cmd_args);
  };
  bind_command("run", &cli::cmd_run);
  bind_command("certify", &cli::cmd_certify);
  bind_command("formation", &cli::cmd_formation);

  m.def("network_call_count", &llm::network_call_count);
}
