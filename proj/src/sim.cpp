#include "safecons/sim.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "safecons/rng.hpp"

namespace safecons {

namespace {

Stream stream_for(const ScenarioConfig& cfg, std::size_t round, AgentId agent, Purpose purpose,
                  std::uint64_t index = 0) {
  return SeedSpec{cfg.master_seed, round, agent, purpose, index}.stream();
}

PolicyInput input_from(const Topology& topo, AgentId i, const StateVec& own, const std::vector<StateVec>& reports) {
  PolicyInput in;
  in.own = own;
  for (AgentId j : topo.neighbors(i)) in.neighbors.emplace_back(j, reports[j]);
  return in;
}

struct AgentUpdate {
  StateVec next;
  std::size_t queries = 0;
  std::size_t verification_queries = 0;
};

class RoundEvaluator {
 public:
  RoundEvaluator(const ScenarioConfig& cfg, const WorldState& world, std::size_t round,
                 const std::vector<StateVec>& reports)
      : cfg_(cfg), world_(world), round_(round), reports_(reports) {
    const std::size_t n = cfg.topology.size();
    policies_.reserve(n);
    for (AgentId i = 0; i < n; ++i)
      policies_.push_back(make_agent_policy(cfg.policy_of(i), cfg.hallucination, cfg.domain, cfg.gateway));
  }

  AgentUpdate evaluate(AgentId i) const {
    AgentUpdate out;
    const auto& snapshot = world_.states;
    const bool defended = cfg_.defense.enabled && !cfg_.attack.is_malicious(i);

    PolicyInput input = input_from(cfg_.topology, i, snapshot[i], reports_);
    if (defended && cfg_.defense.verify_neighbors) {
      for (auto& [j, value] : input.neighbors) {
        // The neighbor's decision is re-derived from the stored snapshot.
        const PolicyInput neighbor_input = input_from(cfg_.topology, j, snapshot[j], snapshot);
        const auto verified = smoothed_decision_traced(policies_[j], neighbor_input, cfg_.defense.smoothing,
                                                       cfg_.domain, stream_for(cfg_, round_, i, Purpose::kVerify, j));
        value = verified.value;
        out.verification_queries += verified.queries();
      }
    }

    if (defended && cfg_.defense.smooth_self) {
      const auto decision = smoothed_decision_traced(policies_[i], input, cfg_.defense.smoothing, cfg_.domain,
                                                     stream_for(cfg_, round_, i, Purpose::kDecision));
      out.next = decision.value;
      out.queries = decision.queries();
    } else {
      Stream rng = stream_for(cfg_, round_, i, Purpose::kPolicy);
      out.next = policies_[i](input, rng);
      out.queries = 1;
    }
    return out;
  }

 private:
  const ScenarioConfig& cfg_;
  const WorldState& world_;
  std::size_t round_;
  const std::vector<StateVec>& reports_;
  std::vector<PolicyFn> policies_;
};

[[noreturn]] void rethrow_with_context(std::exception_ptr ep, std::size_t round, AgentId agent) {
  try {
    std::rethrow_exception(ep);
  } catch (const Error& e) {
    throw Error(e.code(), "round " + std::to_string(round) + ", agent " + std::to_string(agent) + ": " + e.what());
  }
}

}  // namespace

void ScenarioConfig::validate() {
  const std::size_t n = topology.size();
  if (n < 2) throw Error(ErrorCode::kInvalidTopology, "scenario needs at least 2 agents");
  if (rounds < 1) throw Error(ErrorCode::kInvalidArgument, "rounds must be >= 1");
  if (policies.empty() || (policies.size() != 1 && policies.size() != n))
    throw Error(ErrorCode::kInvalidArgument, "policies must hold 1 or n entries");
  for (const auto& p : policies) {
    p.validate();
    if (p.tag == PolicyTag::kExternalLlm && gateway == nullptr)
      throw Error(ErrorCode::kInvalidConfig, "external-llm policy requires a configured LLM gateway");
  }
  hallucination.validate();
  if (!hallucination.target.empty() && hallucination.target.dim() != domain.dim() && hallucination.target.dim() != 1)
    throw Error(ErrorCode::kInvalidArgument, "hallucination target dimension mismatch");
  attack.validate(n, domain.dim());
  if (defense.enabled) defense.smoothing.validate();

  if (initial_states.empty()) initial_states = seeded_uniform_states(n, domain, master_seed);
  if (initial_states.size() != n) throw Error(ErrorCode::kInvalidArgument, "initial_states must hold n states");
  for (AgentId i = 0; i < n; ++i) {
    if (!domain.contains(initial_states[i]))
      throw Error(ErrorCode::kInvalidArgument, "initial state of agent " + std::to_string(i) + " lies outside the domain");
  }
}

const PolicyKind& ScenarioConfig::policy_of(AgentId i) const {
  return policies.size() == 1 ? policies.front() : policies.at(i);
}

std::vector<StateVec> seeded_uniform_states(std::size_t n, const Domain& domain, std::uint64_t master_seed) {
  std::vector<StateVec> out;
  out.reserve(n);
  for (AgentId i = 0; i < n; ++i) {
    Stream rng = SeedSpec{master_seed, 0, i, Purpose::kInitialState, 0}.stream();
    StateVec s(domain.dim());
    for (std::size_t k = 0; k < s.dim(); ++k) s[k] = rng.uniform(domain.lower()[k], domain.upper()[k]);
    out.push_back(std::move(s));
  }
  return out;
}

WorldState step(const ScenarioConfig& cfg, const WorldState& world, std::size_t round, StepRecord* record) {
  if (world.round != round) throw Error(ErrorCode::kInvalidArgument, "world round does not match step round");
  const std::size_t n = cfg.topology.size();
  if (world.states.size() != n) throw Error(ErrorCode::kInvalidArgument, "world size does not match topology");

  std::vector<StateVec> reports(n);
  std::vector<bool> fired(n, false);
  for (AgentId k = 0; k < n; ++k) {
    auto t = transmit_traced(cfg.attack, k, world.states[k], round, cfg.domain,
                             stream_for(cfg, round, k, Purpose::kTransmit));
    reports[k] = std::move(t.value);
    fired[k] = t.fired;
  }

  const RoundEvaluator evaluator(cfg, world, round, reports);
  std::vector<AgentUpdate> updates(n);
  std::vector<std::exception_ptr> errors(n);
  auto run_agent = [&](AgentId i) {
    try {
      updates[i] = evaluator.evaluate(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };

  if (cfg.parallel) {
    const std::size_t workers = std::min<std::size_t>(n, std::max(2u, std::thread::hardware_concurrency()));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (AgentId i = w; i < n; i += workers) run_agent(i);
      });
    }
    for (auto& t : pool) t.join();
  } else if (cfg.reverse_order) {
    for (AgentId i = n; i-- > 0;) run_agent(i);
  } else {
    for (AgentId i = 0; i < n; ++i) run_agent(i);
  }

  // Report the lowest failing agent so the diagnostic does not depend on scheduling.
  for (AgentId i = 0; i < n; ++i)
    if (errors[i]) rethrow_with_context(errors[i], round, i);

  WorldState next;
  next.round = round + 1;
  next.states.reserve(n);
  for (auto& u : updates) next.states.push_back(std::move(u.next));

  if (record != nullptr) {
    record->queries.resize(n);
    record->verification_queries.resize(n);
    for (AgentId i = 0; i < n; ++i) {
      record->queries[i] = updates[i].queries;
      record->verification_queries[i] = updates[i].verification_queries;
    }
    record->attack_fired = std::move(fired);
  }
  return next;
}

Trajectory run_scenario_partial(ScenarioConfig cfg) {
  cfg.validate();
  const std::size_t n = cfg.topology.size();
  Trajectory traj;
  traj.states.reserve(cfg.rounds + 1);
  traj.states.push_back(cfg.initial_states);
  traj.queries.emplace_back(n, 0);
  traj.verification_queries.emplace_back(n, 0);
  traj.attack_fired.emplace_back(n, false);

  WorldState world{0, cfg.initial_states};
  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    StepRecord record;
    try {
      world = step(cfg, world, t, &record);
    } catch (const Error& e) {
      traj.complete = false;
      traj.error = e.code();
      traj.diagnostic = e.what();
      return traj;
    }
    traj.states.push_back(world.states);
    traj.queries.push_back(std::move(record.queries));
    traj.verification_queries.push_back(std::move(record.verification_queries));
    traj.attack_fired.push_back(std::move(record.attack_fired));
  }
  return traj;
}

Trajectory run_scenario(ScenarioConfig cfg) {
  Trajectory traj = run_scenario_partial(std::move(cfg));
  if (!traj.complete) throw Error(*traj.error, traj.diagnostic);
  return traj;
}

}  // namespace safecons
