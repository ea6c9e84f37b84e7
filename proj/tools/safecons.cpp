// Command-line front end: run, certify, formation, validate-config.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "safecons/config.hpp"
#include "safecons/experiment.hpp"
#include "safecons/llmgate.hpp"

namespace fs = std::filesystem;
using namespace safecons;

namespace {

struct Args {
  std::string config;
  std::string out;
  std::string seeds;
  std::string defense = "both";
  bool force = false;
  bool live_llm = false;
  bool parallel = false;
};

int dispatch(const std::string& command, const ExperimentConfig& cfg, const cli::RunOptions& opts,
             const llm::Gateway* gateway) {
  cli::CommandResult result;
  if (command == "run") {
    result = cli::cmd_run(cfg, opts, gateway);
  } else if (command == "certify") {
    result = cli::cmd_certify(cfg, opts, gateway);
  } else {
    result = cli::cmd_formation(cfg, opts, gateway);
  }
  for (const auto& f : result.files) std::cout << f.string() << "\n";
  if (result.exit_code == cli::kExitIncomplete)
    std::cerr << "error: run incomplete; partial outputs written to " << opts.out_dir.string() << "\n";
  return result.exit_code;
}

int execute(const std::string& command, const Args& args) {
  const ExperimentConfig cfg = load_config(args.config);
  if (command == "validate-config") {
    std::cout << args.config << ": ok\n";
    return cli::kExitOk;
  }

  cli::RunOptions opts;
  opts.out_dir = args.out;
  opts.force = args.force;
  opts.parallel = args.parallel;
  opts.defense = cli::parse_defense_mode(args.defense);
  if (!args.seeds.empty()) opts.seeds = cli::parse_seeds(args.seeds);

  if (fs::exists(opts.out_dir) && fs::is_directory(opts.out_dir) && !fs::is_empty(opts.out_dir) && !opts.force) {
    std::cerr << "error: output directory " << opts.out_dir.string() << " is not empty; pass --force to overwrite\n";
    return cli::kExitOutputExists;
  }

  if (cfg.policy.tag == PolicyTag::kExternalLlm && !args.live_llm) {
    std::cerr << "error: policy external-llm requires --live-llm\n";
    return cli::kExitUsage;
  }
  if (args.live_llm) {
    const auto gateway = llm::Gateway::from_environment(cfg.llm);
    return dispatch(command, cfg, opts, &gateway);
  }
  return dispatch(command, cfg, opts, nullptr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Consensus simulator with randomized-smoothing defense"};
  app.require_subcommand(1);
  Args args;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  };
  auto add_output = [&](CLI::App* sub) {
    sub->add_option("--out", args.out, "Output directory")->required();
    sub->add_option("--seeds", args.seeds, "Seed list '3,5,8' or count '20'");
    sub->add_flag("--force", args.force, "Overwrite files in a non-empty output directory");
    sub->add_option("--defense", args.defense, "Which attack scenarios to run")
        ->check(CLI::IsMember({"on", "off", "both"}));
    sub->add_flag("--live-llm", args.live_llm, "Enable the LLM gateway (key from LLM_API_KEY)");
    sub->add_flag("--parallel", args.parallel, "Evaluate agents on a thread pool");
  };

  auto* run = app.add_subcommand("run", "Run baseline and attack scenarios");
  auto* certify = app.add_subcommand("certify", "Write decision certificates and attenuation table");
  auto* formation = app.add_subcommand("formation", "Run the 3-D formation scenarios");
  auto* validate = app.add_subcommand("validate-config", "Parse and validate a config");
  for (auto* sub : {run, certify, formation}) {
    add_common(sub);
    add_output(sub);
  }
  add_common(validate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitUsage;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    return execute(command, args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cli::kExitUsage;
  }
}
