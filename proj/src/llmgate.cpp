#include "safecons/llmgate.hpp"

#include <atomic>
#include <condition_variable>
#include <cstdlib>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <json.hpp>

namespace safecons::llm {

namespace {

std::atomic<std::uint64_t> g_network_calls{0};

std::string format_value(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

std::string format_state(const StateVec& v) {
  std::string out;
  for (std::size_t k = 0; k < v.dim(); ++k) {
    if (k > 0) out += ",";
    out += format_value(v[k]);
  }
  return out;
}

const std::regex& number_regex() {
  static const std::regex re(R"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)");
  return re;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

class HttpTransport final : public Transport {
 public:
  HttpResponse post(const std::string& url, const std::string& body, const Headers& headers,
                    double timeout_s) override {
    // Split "scheme://host[:port]/path" into client base and path.
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw TransportError("malformed url: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(base);
    const auto secs = static_cast<time_t>(timeout_s);
    const auto usecs = static_cast<time_t>((timeout_s - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);

    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);

    ++g_network_calls;
    auto res = client.Post(path, h, body, "application/json");
    if (!res) throw TransportError("transport error: " + httplib::to_string(res.error()));
    return {res->status, res->body};
  }
};

}  // namespace

struct Gateway::Shared {
  std::mutex mu;
  std::condition_variable cv;
  int in_flight = 0;
  std::atomic<std::uint64_t> sent{0};
};

void GatewayConfig::validate() const {
  if (base_url.empty()) throw Error(ErrorCode::kInvalidConfig, "llm.base_url must not be empty");
  if (model.empty()) throw Error(ErrorCode::kInvalidConfig, "llm.model must not be empty");
  if (!(timeout_s > 0.0)) throw Error(ErrorCode::kInvalidConfig, "llm.timeout_s must be > 0");
  if (max_retries < 0) throw Error(ErrorCode::kInvalidConfig, "llm.max_retries must be >= 0");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "llm.temperature must be >= 0");
  if (max_concurrency < 1) throw Error(ErrorCode::kInvalidConfig, "llm.max_concurrency must be >= 1");
}

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttpTransport>(); }

std::uint64_t network_call_count() { return g_network_calls.load(); }

std::string describe_reply_format(std::size_t dim) {
  if (dim == 1) return "a single decimal number between 0 and 1";
  if (dim == 3) return "a coordinate triple formatted as \"x,y,z\" in meters";
  return "a comma-separated list of " + std::to_string(dim) + " decimal numbers";
}

std::string build_prompt(const PolicyInput& input, std::string_view domain_description) {
  std::ostringstream os;
  os << "You are an agent in a cooperative group trying to reach agreement with your neighbors.\n";
  os << "Your current value is " << format_state(input.own) << ".\n";
  os << "Your neighbors report the following values:\n";
  for (const auto& [id, state] : input.neighbors)
    os << "- neighbor " << id << ": " << format_state(state) << "\n";
  os << "Decide your next value so the group converges to a common value.\n";
  os << "Reply with " << domain_description << " and nothing else.";
  if (input.dim() == 3) os << " Use the format x,y,z.";
  return os.str();
}

std::optional<StateVec> parse_reply(std::string_view reply, std::size_t dim, bool strict) {
  const std::string text(strict ? trim(reply) : reply);
  std::vector<double> values;
  std::size_t consumed_end = 0;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), number_regex());
       it != std::sregex_iterator() && values.size() < dim; ++it) {
    if (strict) {
      const auto gap = trim(std::string_view(text).substr(consumed_end, it->position() - consumed_end));
      const bool separator_ok = values.empty() ? gap.empty() : gap == ",";
      if (!separator_ok) return std::nullopt;
    }
    try {
      values.push_back(std::stod(it->str()));
    } catch (const std::exception&) {
      return std::nullopt;
    }
    consumed_end = static_cast<std::size_t>(it->position() + it->length());
  }
  if (values.size() != dim) return std::nullopt;
  if (strict && !trim(std::string_view(text).substr(consumed_end)).empty()) return std::nullopt;
  StateVec out(std::move(values));
  if (!out.is_finite()) return std::nullopt;
  return out;
}

std::string chat_request_body(const GatewayConfig& cfg, const std::string& prompt) {
  nlohmann::json body = {
      {"model", cfg.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", cfg.temperature},
  };
  return body.dump();
}

std::optional<std::string> extract_content(const std::string& response_body) {
  const auto json = nlohmann::json::parse(response_body, nullptr, false);
  if (json.is_discarded()) return std::nullopt;
  try {
    const auto& content = json.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) return std::nullopt;
    return content.get<std::string>();
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

std::chrono::milliseconds backoff_delay(int retry_index) {
  constexpr long kBaseMs = 250;
  constexpr long kCapMs = 8000;
  long delay = kBaseMs;
  for (int k = 0; k < retry_index && delay < kCapMs; ++k) delay *= 2;
  return std::chrono::milliseconds(std::min(delay, kCapMs));
}

Gateway::Gateway(GatewayConfig cfg, std::shared_ptr<Transport> transport, std::string api_key, Sleeper sleeper)
    : cfg_(std::move(cfg)),
      transport_(std::move(transport)),
      api_key_(std::move(api_key)),
      sleeper_(std::move(sleeper)),
      shared_(std::make_shared<Shared>()) {
  cfg_.validate();
  if (!transport_) throw Error(ErrorCode::kInvalidConfig, "gateway requires a transport");
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

Gateway Gateway::from_environment(GatewayConfig cfg) {
  const char* key = std::getenv(kApiKeyEnv);
  if (key == nullptr || *key == '\0')
    throw Error(ErrorCode::kInvalidConfig, std::string("live LLM mode requires ") + kApiKeyEnv);
  return Gateway(std::move(cfg), make_http_transport(), key);
}

std::uint64_t Gateway::requests_sent() const { return shared_->sent.load(); }

StateVec Gateway::query_numeric(const std::string& prompt, const Domain& domain) const {
  const std::string url = cfg_.base_url + "/chat/completions";
  const std::string body = chat_request_body(cfg_, prompt);
  Headers headers = {{"Content-Type", "application/json"}};
  if (!api_key_.empty()) headers.emplace_back("Authorization", "Bearer " + api_key_);

  std::string last_failure;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) sleeper_(backoff_delay(attempt - 1));

    HttpResponse response;
    {
      std::unique_lock lock(shared_->mu);
      shared_->cv.wait(lock, [&] { return shared_->in_flight < cfg_.max_concurrency; });
      ++shared_->in_flight;
    }
    try {
      ++shared_->sent;
      response = transport_->post(url, body, headers, cfg_.timeout_s);
    } catch (const std::exception& e) {
      last_failure = e.what();
      response.status = -1;
    }
    {
      std::lock_guard lock(shared_->mu);
      --shared_->in_flight;
    }
    shared_->cv.notify_one();

    if (response.status == -1) continue;
    if (response.status == 429) {
      last_failure = "rate limited (HTTP 429)";
      continue;
    }
    if (response.status < 200 || response.status >= 300) {
      last_failure = "HTTP " + std::to_string(response.status);
      continue;
    }
    const auto content = extract_content(response.body);
    if (!content) {
      last_failure = "malformed chat-completion response";
      continue;
    }
    auto parsed = parse_reply(*content, domain.dim(), cfg_.strict);
    if (!parsed) {
      last_failure = "unparseable reply: \"" + content->substr(0, 200) + "\"";
      continue;
    }
    return domain.clamp(std::move(*parsed));
  }
  throw Error(ErrorCode::kPolicyUnavailable,
              "LLM query failed after " + std::to_string(cfg_.max_retries + 1) + " attempts; last failure: " +
                  last_failure);
}

StateVec Gateway::decide(const PolicyInput& input, const Domain& domain) const {
  return query_numeric(build_prompt(input, describe_reply_format(domain.dim())), domain);
}

}  // namespace safecons::llm
