#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "safecons/core.hpp"
#include "safecons/policy.hpp"

// Client for OpenAI-compatible chat-completion endpoints. The network sits
// behind `Transport`, so tests inject a mock and never open a socket.
namespace safecons::llm {

inline constexpr const char* kApiKeyEnv = "LLM_API_KEY";

struct GatewayConfig {
  std::string base_url = "https://api.openai.com/v1";
  std::string model = "gpt-3.5-turbo";
  double timeout_s = 30.0;
  int max_retries = 3;
  double temperature = 0.7;
  int max_concurrency = 4;
  bool strict = false;  // require the reply to be exactly the number(s)

  void validate() const;
  friend bool operator==(const GatewayConfig&, const GatewayConfig&) = default;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// Thrown by transports when no HTTP response was obtained.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body, const Headers& headers,
                            double timeout_s) = 0;
};

/// cpp-httplib backed transport. Every call increments network_call_count().
std::shared_ptr<Transport> make_http_transport();

/// Number of real network requests issued by any http transport in this process.
std::uint64_t network_call_count();

std::string describe_reply_format(std::size_t dim);

/// Deterministic prompt naming the agent's value, its neighbors' values and
/// the reply format.
std::string build_prompt(const PolicyInput& input, std::string_view domain_description);

/// Lenient: first decimal token (or first three for d = 3). Strict: the
/// trimmed reply must consist of exactly those tokens.
std::optional<StateVec> parse_reply(std::string_view reply, std::size_t dim, bool strict = false);

std::string chat_request_body(const GatewayConfig& cfg, const std::string& prompt);

/// choices[0].message.content, or nullopt if the body is not that shape.
std::optional<std::string> extract_content(const std::string& response_body);

std::chrono::milliseconds backoff_delay(int retry_index);

using Sleeper = std::function<void(std::chrono::milliseconds)>;

class Gateway {
 public:
  Gateway(GatewayConfig cfg, std::shared_ptr<Transport> transport, std::string api_key,
          Sleeper sleeper = {});

  /// Live gateway: http transport, API key from LLM_API_KEY.
  static Gateway from_environment(GatewayConfig cfg);

  const GatewayConfig& config() const noexcept { return cfg_; }

  /// One chat request (plus retries); parses and clamps the numeric reply.
  /// Throws policy-unavailable once retries are exhausted.
  StateVec query_numeric(const std::string& prompt, const Domain& domain) const;

  StateVec decide(const PolicyInput& input, const Domain& domain) const;

  /// Requests handed to the transport by this gateway (mock or real).
  std::uint64_t requests_sent() const;

 private:
  struct Shared;

  GatewayConfig cfg_;
  std::shared_ptr<Transport> transport_;
  std::string api_key_;
  Sleeper sleeper_;
  std::shared_ptr<Shared> shared_;
};

}  // namespace safecons::llm
