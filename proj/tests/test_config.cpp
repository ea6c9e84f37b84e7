#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>

#include "safecons/config.hpp"
#include "safecons/experiment.hpp"

using namespace safecons;
namespace fs = std::filesystem;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config(text, "cfg.json");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

const char* kFull = R"({
  "schema_version": 1,
  "topology": {"kind": "ring", "n": 10},
  "dimension": 1,
  "rounds": 50,
  "policy": {"kind": "llm-mimic", "jitter_sd": 0.05, "self_weight": 0.5},
  "hallucination": {"p_h": 0.05, "mode": "uniform-random"},
  "attack": {"malicious": [7, 2], "p_attack": 1.0, "delta_max": 0.3, "strategy": "constant-bias"},
  "defense": {"sigma": 0.05, "m1": 5, "c": 10, "tau": 0.01, "m_max": 20, "trim_frac": 0.1},
  "seeds": [0, 1, 2]
})";

fs::path source_dir() { return fs::path(SAFECONS_SOURCE_DIR); }

}  // namespace

TEST(Config, MinimalUsesDefaults) {
  const auto cfg = parse_config(R"({"schema_version": 1})");
  EXPECT_EQ(cfg, ExperimentConfig{});
}

TEST(Config, ParsesFullDocument) {
  const auto cfg = parse_config(kFull);
  EXPECT_EQ(cfg.topology.n, 10u);
  EXPECT_EQ(cfg.policy.tag, PolicyTag::kLlmMimic);
  EXPECT_EQ(cfg.attack.malicious, (std::vector<AgentId>{2, 7}));
  EXPECT_DOUBLE_EQ(cfg.defense.smoothing.tau, 0.01);
  EXPECT_EQ(cfg.seeds, (std::vector<std::uint64_t>{0, 1, 2}));
}

TEST(Config, RoundTrip) {
  const auto cfg = parse_config(kFull);
  const auto text = to_json(cfg).dump(2);
  const auto again = parse_config(text);
  EXPECT_EQ(again, cfg);
  EXPECT_EQ(to_json(again).dump(2), text);
}

TEST(Config, RoundTripPresets) {
  for (const auto& entry : fs::directory_iterator(source_dir() / "configs")) {
    const auto cfg = load_config(entry.path().string());
    EXPECT_EQ(parse_config(to_json(cfg).dump()), cfg) << entry.path();
  }
}

TEST(Config, UnknownKeyReportsLine) {
  const std::string text = "{\n  \"schema_version\": 1,\n  \"defense\": {\n    \"sigmaa\": 0.1\n  }\n}\n";
  const auto msg = error_of(text);
  EXPECT_NE(msg.find("cfg.json:4:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("sigmaa"), std::string::npos) << msg;
  EXPECT_NE(msg.find("unknown key"), std::string::npos) << msg;
}

TEST(Config, TypeErrorReportsLine) {
  const std::string text = "{\n  \"schema_version\": 1,\n  \"rounds\": \"fifty\"\n}\n";
  const auto msg = error_of(text);
  EXPECT_NE(msg.find("cfg.json:3:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("rounds"), std::string::npos) << msg;
}

TEST(Config, SyntaxErrorReportsLine) {
  const auto msg = error_of("{\n  \"schema_version\": 1,\n  \"rounds\": ,\n}\n");
  EXPECT_NE(msg.find("cfg.json:3:"), std::string::npos) << msg;
}

TEST(Config, RangeErrors) {
  EXPECT_NE(error_of(R"({"schema_version": 2})"), "");
  EXPECT_NE(error_of(R"({})"), "");
  EXPECT_NE(error_of(R"({"schema_version": 1, "dimension": 2})"), "");
  EXPECT_NE(error_of(R"({"schema_version": 1, "topology": {"kind": "star"}})"), "");
  EXPECT_NE(error_of(R"({"schema_version": 1, "attack": {"malicious": [10]}})"), "");
  EXPECT_NE(error_of(R"({"schema_version": 1, "defense": {"trim_frac": 0.5}})"), "");
  EXPECT_NE(error_of(R"({"schema_version": 1, "hallucination": {"p_h": 2}})"), "");
  EXPECT_NE(error_of(R"({"schema_version": 1, "seeds": []})"), "");
  EXPECT_NE(error_of(R"({"schema_version": 1, "certify": {"alpha": 1.0}})"), "");
}

TEST(Config, ApiKeyRejected) {
  const auto msg = error_of(R"({"schema_version": 1, "llm": {"api_key": "sk-123"}})");
  EXPECT_NE(msg.find("LLM_API_KEY"), std::string::npos) << msg;
  EXPECT_EQ(to_json(ExperimentConfig{})["llm"].count("api_key"), 0u);
}

TEST(Config, ExplicitInitialStates) {
  const auto cfg = parse_config(
      R"({"schema_version": 1, "topology": {"n": 3}, "initial_states": {"mode": "explicit", "values": [0.1, 0.5, 0.9]}})");
  const auto sc = build_scenario(cfg, ScenarioKind::kBaseline, 0);
  EXPECT_EQ(sc.initial_states[2], StateVec{0.9});
  EXPECT_NE(error_of(R"({"schema_version": 1, "topology": {"n": 3}, "initial_states": {"mode": "explicit", "values": [0.1]}})"),
            "");
}

TEST(Config, ScenariosShareEverythingButAttackAndDefense) {
  const auto cfg = parse_config(kFull);
  const auto base = build_scenario(cfg, ScenarioKind::kBaseline, 3);
  const auto nodef = build_scenario(cfg, ScenarioKind::kAttackNoDefense, 3);
  const auto def = build_scenario(cfg, ScenarioKind::kAttackDefense, 3);
  EXPECT_TRUE(base.attack.malicious.empty());
  EXPECT_FALSE(base.defense.enabled);
  EXPECT_EQ(nodef.attack.malicious, (std::vector<AgentId>{2, 7}));
  EXPECT_FALSE(nodef.defense.enabled);
  EXPECT_TRUE(def.defense.enabled);
  EXPECT_EQ(base.initial_states, def.initial_states);
  EXPECT_EQ(base.topology, def.topology);
  EXPECT_EQ(base.master_seed, 3u);
}

TEST(Config, FormationDomainKeepsSlotsInside) {
  const auto cfg = load_config((source_dir() / "configs" / "formation.json").string());
  const Domain d = make_domain(cfg);
  EXPECT_EQ(d.dim(), 3u);
  EXPECT_DOUBLE_EQ(d.lower()[0], cfg.formation.slot_radius);
  EXPECT_DOUBLE_EQ(d.upper()[1], cfg.formation.airspace[1] - cfg.formation.slot_radius);
}

TEST(Seeds, Parsing) {
  EXPECT_EQ(cli::parse_seeds("3,5,8"), (std::vector<std::uint64_t>{3, 5, 8}));
  EXPECT_EQ(cli::parse_seeds("3"), (std::vector<std::uint64_t>{0, 1, 2}));
  EXPECT_THROW(cli::parse_seeds("0"), Error);
  EXPECT_THROW(cli::parse_seeds("a,b"), Error);
  EXPECT_THROW(cli::parse_seeds("1,,2"), Error);
}

TEST(DefenseMode, Parsing) {
  EXPECT_EQ(cli::parse_defense_mode("on"), cli::DefenseMode::kOn);
  EXPECT_EQ(cli::parse_defense_mode("both"), cli::DefenseMode::kBoth);
  EXPECT_THROW(cli::parse_defense_mode("maybe"), Error);
}
