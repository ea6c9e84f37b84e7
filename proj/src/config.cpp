#include "safecons/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "safecons/certify.hpp"

namespace safecons {

using nlohmann::json;

namespace {

// Path-qualified validation failure; converted to a line diagnostic at the top.
struct PathError {
  std::vector<std::string> path;
  std::string message;
};

std::string join_path(const std::vector<std::string>& path) {
  std::string out;
  for (const auto& p : path) {
    if (!out.empty() && p.front() != '[') out += ".";
    out += p;
  }
  return out.empty() ? "<root>" : out;
}

std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<long>(offset), '\n'));
}

// Best-effort: find each key of the path in order, return the line of the last.
std::size_t locate(const std::string& text, const std::vector<std::string>& path) {
  std::size_t pos = 0;
  bool found_any = false;
  for (const auto& key : path) {
    if (key.front() == '[') continue;
    const auto hit = text.find("\"" + key + "\"", pos);
    if (hit == std::string::npos) break;
    pos = hit;
    found_any = true;
  }
  return found_any ? line_of_offset(text, pos) : 1;
}

class Reader {
 public:
  Reader(const json& node, std::vector<std::string> path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& message) const { throw PathError{path_, message}; }
  [[noreturn]] void fail_key(const std::string& key, const std::string& message) const {
    auto p = path_;
    p.push_back(key);
    throw PathError{p, message};
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  std::vector<std::string> child_path(const std::string& key) const {
    auto p = path_;
    p.push_back(key);
    return p;
  }

  double number(const std::string& key, double fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number()) fail_key(key, "expected a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) fail_key(key, "must be finite");
    return x;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_unsigned()) fail_key(key, "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail_key(key, "expected an integer");
    return v->get<std::int64_t>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) fail_key(key, "expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_string()) fail_key(key, "expected a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    return numbers_of(*v, child_path(key));
  }

  static std::vector<double> numbers_of(const json& v, const std::vector<std::string>& path) {
    if (!v.is_array()) throw PathError{path, "expected an array of numbers"};
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
        auto p = path;
        p.push_back("[" + std::to_string(i) + "]");
        throw PathError{p, "expected a finite number"};
      }
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) fail_key(key, "unknown key");
    }
  }

 private:
  const json& node_;
  std::vector<std::string> path_;
  std::set<std::string> seen_;
};

template <class Fn>
void with_section(Reader& parent, const std::string& key, Fn&& fn) {
  if (const json* node = parent.find(key)) {
    Reader r(*node, parent.child_path(key));
    fn(r);
    r.finish();
  }
}

template <class Fn>
void checked(Reader& r, const std::string& key, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    r.fail_key(key, e.what());
  }
}

std::vector<StateVec> state_list(const json& v, const std::vector<std::string>& path) {
  if (!v.is_array()) throw PathError{path, "expected an array of states"};
  std::vector<StateVec> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto p = path;
    p.push_back("[" + std::to_string(i) + "]");
    if (v[i].is_number()) {
      out.push_back(StateVec{v[i].get<double>()});
    } else {
      out.emplace_back(Reader::numbers_of(v[i], p));
    }
  }
  return out;
}

json state_json(const StateVec& s) { return json(s.values()); }

json states_json(const std::vector<StateVec>& states) {
  json out = json::array();
  for (const auto& s : states) out.push_back(state_json(s));
  return out;
}

void parse_root(Reader& root, ExperimentConfig& cfg) {
  const auto version = root.integer("schema_version", -1);
  if (version != kSchemaVersion)
    root.fail_key("schema_version", "must be present and equal to " + std::to_string(kSchemaVersion));
  cfg.schema_version = static_cast<int>(version);

  with_section(root, "topology", [&](Reader& r) {
    cfg.topology.kind = r.string("kind", cfg.topology.kind);
    if (cfg.topology.kind != "ring" && cfg.topology.kind != "complete")
      r.fail_key("kind", "must be \"ring\" or \"complete\"");
    cfg.topology.n = r.count("n", cfg.topology.n);
    if (cfg.topology.n < 2) r.fail_key("n", "must be >= 2");
  });

  cfg.dimension = root.count("dimension", cfg.dimension);
  if (cfg.dimension != 1 && cfg.dimension != 3) root.fail_key("dimension", "must be 1 or 3");
  cfg.rounds = root.count("rounds", cfg.rounds);
  if (cfg.rounds < 1) root.fail_key("rounds", "must be >= 1");

  with_section(root, "initial_states", [&](Reader& r) {
    cfg.initial_states.mode = r.string("mode", cfg.initial_states.mode);
    if (cfg.initial_states.mode != "seeded-uniform" && cfg.initial_states.mode != "explicit")
      r.fail_key("mode", "must be \"seeded-uniform\" or \"explicit\"");
    if (const json* v = r.find("values")) cfg.initial_states.values = state_list(*v, r.child_path("values"));
    if (cfg.initial_states.mode == "explicit" && cfg.initial_states.values.size() != cfg.topology.n)
      r.fail_key("values", "explicit mode needs exactly one state per agent");
  });

  with_section(root, "policy", [&](Reader& r) {
    checked(r, "kind", [&] { cfg.policy.tag = parse_policy_tag(r.string("kind", std::string(to_string(cfg.policy.tag)))); });
    cfg.policy.jitter_sd = r.number("jitter_sd", cfg.policy.jitter_sd);
    cfg.policy.self_weight = r.number("self_weight", cfg.policy.self_weight);
    checked(r, "jitter_sd", [&] { cfg.policy.validate(); });
  });

  with_section(root, "hallucination", [&](Reader& r) {
    cfg.hallucination.p_h = r.number("p_h", cfg.hallucination.p_h);
    checked(r, "mode", [&] {
      cfg.hallucination.mode = parse_hallucination_mode(r.string("mode", std::string(to_string(cfg.hallucination.mode))));
    });
    cfg.hallucination.magnitude = r.number("magnitude", cfg.hallucination.magnitude);
    cfg.hallucination.target = StateVec(r.numbers("target", cfg.hallucination.target.values()));
    checked(r, "p_h", [&] { cfg.hallucination.validate(); });
  });

  with_section(root, "attack", [&](Reader& r) {
    if (const json* v = r.find("malicious")) {
      if (!v->is_array()) r.fail_key("malicious", "expected an array of agent ids");
      cfg.attack.malicious.clear();
      for (const auto& id : *v) {
        if (!id.is_number_unsigned()) r.fail_key("malicious", "agent ids must be non-negative integers");
        cfg.attack.malicious.push_back(id.get<std::size_t>());
      }
    }
    cfg.attack.p_attack = r.number("p_attack", cfg.attack.p_attack);
    cfg.attack.delta_max = r.number("delta_max", cfg.attack.delta_max);
    checked(r, "strategy", [&] {
      cfg.attack.strategy = parse_attack_strategy(r.string("strategy", std::string(to_string(cfg.attack.strategy))));
    });
    cfg.attack.bias_sign = static_cast<int>(r.integer("bias_sign", cfg.attack.bias_sign));
    cfg.attack.period = r.count("period", cfg.attack.period);
    cfg.attack.direction = StateVec(r.numbers("direction", cfg.attack.direction.values()));
    checked(r, "malicious", [&] { cfg.attack.validate(cfg.topology.n, cfg.dimension); });
  });

  with_section(root, "defense", [&](Reader& r) {
    cfg.defense.verify_neighbors = r.boolean("verify_neighbors", cfg.defense.verify_neighbors);
    cfg.defense.smooth_self = r.boolean("smooth_self", cfg.defense.smooth_self);
    auto& s = cfg.defense.smoothing;
    s.sigma = r.number("sigma", s.sigma);
    s.m1 = r.count("m1", s.m1);
    s.c = r.number("c", s.c);
    s.tau = r.number("tau", s.tau);
    s.m_max = r.count("m_max", s.m_max);
    s.trim_frac = r.number("trim_frac", s.trim_frac);
    checked(r, "sigma", [&] { s.validate(); });
  });

  if (const json* v = root.find("seeds")) {
    if (!v->is_array() || v->empty()) root.fail_key("seeds", "expected a non-empty array of seeds");
    cfg.seeds.clear();
    for (const auto& s : *v) {
      if (!s.is_number_unsigned()) root.fail_key("seeds", "seeds must be non-negative integers");
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  }

  with_section(root, "metrics", [&](Reader& r) {
    cfg.final_window = r.count("final_window", cfg.final_window);
    if (cfg.final_window < 1) r.fail_key("final_window", "must be >= 1");
  });

  with_section(root, "execution", [&](Reader& r) { cfg.parallel = r.boolean("parallel", cfg.parallel); });

  with_section(root, "llm", [&](Reader& r) {
    if (r.find("api_key")) r.fail_key("api_key", std::string("API keys are read from ") + llm::kApiKeyEnv + " only");
    cfg.llm.base_url = r.string("base_url", cfg.llm.base_url);
    cfg.llm.model = r.string("model", cfg.llm.model);
    cfg.llm.timeout_s = r.number("timeout_s", cfg.llm.timeout_s);
    cfg.llm.max_retries = static_cast<int>(r.integer("max_retries", cfg.llm.max_retries));
    cfg.llm.temperature = r.number("temperature", cfg.llm.temperature);
    cfg.llm.max_concurrency = static_cast<int>(r.integer("max_concurrency", cfg.llm.max_concurrency));
    cfg.llm.strict = r.boolean("strict", cfg.llm.strict);
    checked(r, "base_url", [&] { cfg.llm.validate(); });
  });

  with_section(root, "certify", [&](Reader& r) {
    auto& c = cfg.certify;
    c.sigma = r.number("sigma", c.sigma);
    if (!(c.sigma > 0.0)) r.fail_key("sigma", "must be > 0");
    c.samples = r.count("samples", c.samples);
    if (c.samples < 2) r.fail_key("samples", "must be >= 2");
    c.alpha = r.number("alpha", c.alpha);
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) r.fail_key("alpha", "must lie in (0, 1)");
    c.regions = r.count("regions", c.regions);
    if (c.regions < 2) r.fail_key("regions", "must be >= 2");
    c.partition = r.numbers("partition", c.partition);
    if (!c.partition.empty()) {
      checked(r, "partition", [&] { RegionPartition check(c.partition); });
    }
    if (const json* v = r.find("inputs")) {
      if (!v->is_array()) r.fail_key("inputs", "expected an array of inputs");
      c.inputs.clear();
      for (std::size_t i = 0; i < v->size(); ++i) {
        auto p = r.child_path("inputs");
        p.push_back("[" + std::to_string(i) + "]");
        Reader in((*v)[i], p);
        CertifyInput ci;
        ci.own = StateVec(in.numbers("own", {}));
        if (ci.own.dim() != 1) in.fail_key("own", "certification inputs are one-dimensional");
        if (const json* nb = in.find("neighbors")) ci.neighbors = state_list(*nb, in.child_path("neighbors"));
        for (const auto& s : ci.neighbors)
          if (s.dim() != 1) in.fail_key("neighbors", "certification inputs are one-dimensional");
        in.finish();
        c.inputs.push_back(std::move(ci));
      }
    }
  });

  with_section(root, "formation", [&](Reader& r) {
    cfg.formation.airspace = r.numbers("airspace", cfg.formation.airspace);
    if (cfg.formation.airspace.size() != 3 ||
        std::any_of(cfg.formation.airspace.begin(), cfg.formation.airspace.end(), [](double x) { return !(x > 0.0); }))
      r.fail_key("airspace", "expected three positive extents in meters");
    cfg.formation.slot_radius = r.number("slot_radius", cfg.formation.slot_radius);
    if (!(cfg.formation.slot_radius >= 0.0)) r.fail_key("slot_radius", "must be >= 0");
    if (2.0 * cfg.formation.slot_radius >= std::min(cfg.formation.airspace[0], cfg.formation.airspace[1]))
      r.fail_key("slot_radius", "formation does not fit in the airspace");
  });

  root.finish();

  // Cross-section checks.
  const Domain domain = make_domain(cfg);
  for (std::size_t i = 0; i < cfg.initial_states.values.size(); ++i) {
    if (!domain.contains(cfg.initial_states.values[i]))
      throw PathError{{"initial_states", "values", "[" + std::to_string(i) + "]"}, "state lies outside the domain"};
  }
  if (!cfg.hallucination.target.empty() && cfg.hallucination.target.dim() != cfg.dimension &&
      cfg.hallucination.target.dim() != 1)
    throw PathError{{"hallucination", "target"}, "target dimension must be 1 or match the state dimension"};
  if (!cfg.certify.inputs.empty() && cfg.dimension != 1)
    throw PathError{{"certify", "inputs"}, "certification inputs require dimension 1"};
}

}  // namespace

bool ExperimentConfig::operator==(const ExperimentConfig& o) const {
  auto attack_eq = [](const AttackConfig& a, const AttackConfig& b) {
    return a.malicious == b.malicious && a.p_attack == b.p_attack && a.delta_max == b.delta_max &&
           a.strategy == b.strategy && a.bias_sign == b.bias_sign && a.period == b.period && a.direction == b.direction;
  };
  return schema_version == o.schema_version && topology == o.topology && dimension == o.dimension &&
         rounds == o.rounds && initial_states == o.initial_states && policy == o.policy &&
         hallucination == o.hallucination && attack_eq(attack, o.attack) && defense == o.defense &&
         seeds == o.seeds && final_window == o.final_window && parallel == o.parallel && llm == o.llm &&
         certify == o.certify && formation == o.formation;
}

ExperimentConfig parse_config(const std::string& text, const std::string& source_name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source_name + ":" + std::to_string(line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0)) +
                      ": malformed JSON: " + e.what());
  }
  ExperimentConfig cfg;
  try {
    Reader root(doc, {});
    parse_root(root, cfg);
  } catch (const PathError& e) {
    throw ConfigError(source_name + ":" + std::to_string(locate(text, e.path)) + ": " + join_path(e.path) + ": " +
                      e.message);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path);
}

json to_json(const ExperimentConfig& cfg) {
  json certify_inputs = json::array();
  for (const auto& in : cfg.certify.inputs)
    certify_inputs.push_back({{"own", state_json(in.own)}, {"neighbors", states_json(in.neighbors)}});

  return {
      {"schema_version", cfg.schema_version},
      {"topology", {{"kind", cfg.topology.kind}, {"n", cfg.topology.n}}},
      {"dimension", cfg.dimension},
      {"rounds", cfg.rounds},
      {"initial_states", {{"mode", cfg.initial_states.mode}, {"values", states_json(cfg.initial_states.values)}}},
      {"policy",
       {{"kind", to_string(cfg.policy.tag)}, {"jitter_sd", cfg.policy.jitter_sd}, {"self_weight", cfg.policy.self_weight}}},
      {"hallucination",
       {{"p_h", cfg.hallucination.p_h},
        {"mode", to_string(cfg.hallucination.mode)},
        {"magnitude", cfg.hallucination.magnitude},
        {"target", state_json(cfg.hallucination.target)}}},
      {"attack",
       {{"malicious", cfg.attack.malicious},
        {"p_attack", cfg.attack.p_attack},
        {"delta_max", cfg.attack.delta_max},
        {"strategy", to_string(cfg.attack.strategy)},
        {"bias_sign", cfg.attack.bias_sign},
        {"period", cfg.attack.period},
        {"direction", state_json(cfg.attack.direction)}}},
      {"defense",
       {{"verify_neighbors", cfg.defense.verify_neighbors},
        {"smooth_self", cfg.defense.smooth_self},
        {"sigma", cfg.defense.smoothing.sigma},
        {"m1", cfg.defense.smoothing.m1},
        {"c", cfg.defense.smoothing.c},
        {"tau", cfg.defense.smoothing.tau},
        {"m_max", cfg.defense.smoothing.m_max},
        {"trim_frac", cfg.defense.smoothing.trim_frac}}},
      {"seeds", cfg.seeds},
      {"metrics", {{"final_window", cfg.final_window}}},
      {"execution", {{"parallel", cfg.parallel}}},
      {"llm",
       {{"base_url", cfg.llm.base_url},
        {"model", cfg.llm.model},
        {"timeout_s", cfg.llm.timeout_s},
        {"max_retries", cfg.llm.max_retries},
        {"temperature", cfg.llm.temperature},
        {"max_concurrency", cfg.llm.max_concurrency},
        {"strict", cfg.llm.strict}}},
      {"certify",
       {{"sigma", cfg.certify.sigma},
        {"samples", cfg.certify.samples},
        {"alpha", cfg.certify.alpha},
        {"regions", cfg.certify.regions},
        {"partition", cfg.certify.partition},
        {"inputs", certify_inputs}}},
      {"formation", {{"airspace", cfg.formation.airspace}, {"slot_radius", cfg.formation.slot_radius}}},
  };
}

Topology make_topology(const TopologySpec& spec) {
  if (spec.kind == "ring") return ring_topology(spec.n);
  if (spec.kind == "complete") return complete_topology(spec.n);
  throw Error(ErrorCode::kInvalidConfig, "unknown topology kind '" + spec.kind + "'");
}

Domain make_domain(const ExperimentConfig& cfg) {
  if (cfg.dimension == 1) return Domain::unit_interval();
  // The 3-D consensus variable is the formation reference point; keep every
  // slot inside the airspace horizontally.
  const auto& a = cfg.formation.airspace;
  const double r = cfg.formation.slot_radius;
  return Domain(StateVec{r, r, 0.0}, StateVec{a[0] - r, a[1] - r, a[2]});
}

const char* scenario_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kBaseline: return "baseline";
    case ScenarioKind::kAttackNoDefense: return "attack_no_defense";
    case ScenarioKind::kAttackDefense: return "attack_defense";
  }
  return "?";
}

ScenarioConfig build_scenario(const ExperimentConfig& cfg, ScenarioKind kind, std::uint64_t seed,
                              const llm::Gateway* gateway) {
  ScenarioConfig sc;
  sc.topology = make_topology(cfg.topology);
  sc.domain = make_domain(cfg);
  sc.rounds = cfg.rounds;
  sc.policies = {cfg.policy};
  sc.hallucination = cfg.hallucination;
  sc.attack = cfg.attack;
  if (kind == ScenarioKind::kBaseline) sc.attack.malicious.clear();
  sc.defense = cfg.defense;
  sc.defense.enabled = kind == ScenarioKind::kAttackDefense;
  sc.master_seed = seed;
  sc.initial_states = cfg.initial_states.mode == "explicit" ? cfg.initial_states.values
                                                            : seeded_uniform_states(cfg.topology.n, sc.domain, seed);
  sc.parallel = cfg.parallel;
  sc.gateway = gateway;
  sc.validate();
  return sc;
}

}  // namespace safecons
