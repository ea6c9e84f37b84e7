#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace safecons {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidTopology,
  kInvalidAgent,
  kPolicyUnavailable,
  kSamplingFailed,
  kInvalidConfig,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

using AgentId = std::size_t;

/// Agent state: an ordered list of finite reals (d = 1 abstract scenario,
/// d = 3 for the airspace scenario).
class StateVec {
 public:
  StateVec() = default;
  explicit StateVec(std::size_t dim, double fill = 0.0) : c_(dim, fill) {}
  StateVec(std::initializer_list<double> values) : c_(values) {}
  explicit StateVec(std::vector<double> values) : c_(std::move(values)) {}

  std::size_t dim() const noexcept { return c_.size(); }
  bool empty() const noexcept { return c_.empty(); }

  double& operator[](std::size_t i) { return c_[i]; }
  double operator[](std::size_t i) const { return c_[i]; }

  auto begin() noexcept { return c_.begin(); }
  auto end() noexcept { return c_.end(); }
  auto begin() const noexcept { return c_.begin(); }
  auto end() const noexcept { return c_.end(); }

  const std::vector<double>& values() const noexcept { return c_; }

  bool is_finite() const noexcept;

  StateVec& operator+=(const StateVec& rhs);
  StateVec& operator-=(const StateVec& rhs);
  StateVec& operator*=(double k);

  friend bool operator==(const StateVec&, const StateVec&) = default;

 private:
  std::vector<double> c_;
};

StateVec operator+(StateVec lhs, const StateVec& rhs);
StateVec operator-(StateVec lhs, const StateVec& rhs);
StateVec operator*(StateVec lhs, double k);
StateVec operator*(double k, StateVec rhs);

double norm2(const StateVec& v);
double squared_norm(const StateVec& v);
double distance(const StateVec& a, const StateVec& b);

/// Axis-aligned box the states live in. Every policy, attack and smoothing
/// output is clamped into it.
class Domain {
 public:
  Domain(StateVec lower, StateVec upper);

  /// [0,1], the abstract one-dimensional scenario.
  static Domain unit_interval();
  /// [0,x] x [0,y] x [0,z] meters.
  static Domain box(double x, double y, double z);

  std::size_t dim() const noexcept { return lower_.dim(); }
  const StateVec& lower() const noexcept { return lower_; }
  const StateVec& upper() const noexcept { return upper_; }

  StateVec clamp(StateVec v) const;
  bool contains(const StateVec& v) const;
  double diagonal() const;

  friend bool operator==(const Domain&, const Domain&) = default;

 private:
  StateVec lower_;
  StateVec upper_;
};

/// Directed communication graph. An edge (receiver, sender) means the
/// receiver hears from the sender.
class Topology {
 public:
  using Edge = std::pair<AgentId, AgentId>;

  Topology(std::size_t n, std::vector<Edge> edges);

  std::size_t size() const noexcept { return n_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  /// In-neighbors of `i`, ascending.
  std::span<const AgentId> neighbors(AgentId i) const;

  friend bool operator==(const Topology& a, const Topology& b) {
    return a.n_ == b.n_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t n_;
  std::vector<Edge> edges_;
  std::vector<std::vector<AgentId>> in_;
};

Topology ring_topology(std::size_t n);
Topology complete_topology(std::size_t n);

std::vector<AgentId> neighbors(const Topology& t, AgentId i);

/// True iff every agent can reach every other agent along directed edges.
bool strongly_connected(const Topology& t);

struct WorldState {
  std::size_t round = 0;
  std::vector<StateVec> states;
};

}  // namespace safecons
