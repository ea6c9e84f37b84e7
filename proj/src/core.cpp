#include "safecons/core.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace safecons {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidTopology: return "invalid-topology";
    case ErrorCode::kInvalidAgent: return "invalid-agent";
    case ErrorCode::kPolicyUnavailable: return "policy-unavailable";
    case ErrorCode::kSamplingFailed: return "sampling-failed";
    case ErrorCode::kInvalidConfig: return "invalid-config";
  }
  return "unknown";
}

bool StateVec::is_finite() const noexcept {
  return std::all_of(c_.begin(), c_.end(), [](double x) { return std::isfinite(x); });
}

StateVec& StateVec::operator+=(const StateVec& rhs) {
  if (rhs.dim() != dim()) throw Error(ErrorCode::kInvalidArgument, "state dimension mismatch");
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += rhs.c_[i];
  return *this;
}

StateVec& StateVec::operator-=(const StateVec& rhs) {
  if (rhs.dim() != dim()) throw Error(ErrorCode::kInvalidArgument, "state dimension mismatch");
  for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= rhs.c_[i];
  return *this;
}

StateVec& StateVec::operator*=(double k) {
  for (double& x : c_) x *= k;
  return *this;
}

StateVec operator+(StateVec lhs, const StateVec& rhs) { return lhs += rhs; }
StateVec operator-(StateVec lhs, const StateVec& rhs) { return lhs -= rhs; }
StateVec operator*(StateVec lhs, double k) { return lhs *= k; }
StateVec operator*(double k, StateVec rhs) { return rhs *= k; }

double squared_norm(const StateVec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double norm2(const StateVec& v) { return std::sqrt(squared_norm(v)); }

double distance(const StateVec& a, const StateVec& b) { return norm2(a - b); }

Domain::Domain(StateVec lower, StateVec upper) : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.dim() == 0 || lower_.dim() != upper_.dim())
    throw Error(ErrorCode::kInvalidArgument, "domain bounds must share a nonzero dimension");
  for (std::size_t i = 0; i < lower_.dim(); ++i) {
    if (!std::isfinite(lower_[i]) || !std::isfinite(upper_[i]) || !(lower_[i] < upper_[i]))
      throw Error(ErrorCode::kInvalidArgument, "domain bounds must be finite with lower < upper");
  }
}

Domain Domain::unit_interval() { return Domain(StateVec{0.0}, StateVec{1.0}); }

Domain Domain::box(double x, double y, double z) {
  return Domain(StateVec{0.0, 0.0, 0.0}, StateVec{x, y, z});
}

StateVec Domain::clamp(StateVec v) const {
  if (v.dim() != dim()) throw Error(ErrorCode::kInvalidArgument, "state dimension does not match domain");
  for (std::size_t i = 0; i < v.dim(); ++i) v[i] = std::clamp(v[i], lower_[i], upper_[i]);
  return v;
}

bool Domain::contains(const StateVec& v) const {
  if (v.dim() != dim()) return false;
  for (std::size_t i = 0; i < v.dim(); ++i) {
    if (!(v[i] >= lower_[i] && v[i] <= upper_[i])) return false;
  }
  return true;
}

double Domain::diagonal() const { return distance(upper_, lower_); }

Topology::Topology(std::size_t n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)), in_(n) {
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());
  for (const auto& [receiver, sender] : edges_) {
    if (receiver >= n_ || sender >= n_)
      throw Error(ErrorCode::kInvalidTopology, "edge references an agent outside [0, n)");
    if (receiver == sender) throw Error(ErrorCode::kInvalidTopology, "self-edges are not allowed");
    in_[receiver].push_back(sender);
  }
  if (n_ >= 2) {
    for (AgentId i = 0; i < n_; ++i) {
      if (in_[i].empty())
        throw Error(ErrorCode::kInvalidTopology,
                    "agent " + std::to_string(i) + " has no in-neighbor");
    }
  }
}

std::span<const AgentId> Topology::neighbors(AgentId i) const {
  if (i >= n_)
    throw Error(ErrorCode::kInvalidAgent,
                "agent " + std::to_string(i) + " out of range for n=" + std::to_string(n_));
  return in_[i];
}

Topology ring_topology(std::size_t n) {
  if (n < 2) throw Error(ErrorCode::kInvalidTopology, "a ring needs at least 2 agents");
  std::vector<Topology::Edge> edges;
  edges.reserve(2 * n);
  for (AgentId i = 0; i < n; ++i) {
    edges.emplace_back(i, (i + n - 1) % n);
    edges.emplace_back(i, (i + 1) % n);
  }
  return Topology(n, std::move(edges));
}

Topology complete_topology(std::size_t n) {
  if (n < 2) throw Error(ErrorCode::kInvalidTopology, "a complete graph needs at least 2 agents");
  std::vector<Topology::Edge> edges;
  for (AgentId i = 0; i < n; ++i)
    for (AgentId j = 0; j < n; ++j)
      if (i != j) edges.emplace_back(i, j);
  return Topology(n, std::move(edges));
}

std::vector<AgentId> neighbors(const Topology& t, AgentId i) {
  auto span = t.neighbors(i);
  return {span.begin(), span.end()};
}

bool strongly_connected(const Topology& t) {
  const std::size_t n = t.size();
  if (n <= 1) return true;
  // Information flows sender -> receiver; walk both directions from agent 0.
  std::vector<std::vector<AgentId>> out(n);
  for (const auto& [receiver, sender] : t.edges()) out[sender].push_back(receiver);
  auto reaches_all = [n](const std::vector<std::vector<AgentId>>& adj) {
    std::vector<bool> seen(n, false);
    std::deque<AgentId> queue{0};
    seen[0] = true;
    std::size_t count = 1;
    while (!queue.empty()) {
      AgentId u = queue.front();
      queue.pop_front();
      for (AgentId v : adj[u]) {
        if (!seen[v]) {
          seen[v] = true;
          ++count;
          queue.push_back(v);
        }
      }
    }
    return count == n;
  };
  std::vector<std::vector<AgentId>> in(n);
  for (AgentId i = 0; i < n; ++i) {
    auto span = t.neighbors(i);
    in[i].assign(span.begin(), span.end());
  }
  return reaches_all(out) && reaches_all(in);
}

}  // namespace safecons
