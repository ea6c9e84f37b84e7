// Transport double for gateway tests: answers with a fixed reply for the
// first `good` requests, then with an unparseable one.
#pragma once

#include <atomic>
#include <string>

#include <json.hpp>

#include "safecons/llmgate.hpp"

class FailingAfterTransport : public safecons::llm::Transport {
 public:
  FailingAfterTransport(int good, std::string reply) : good_(good), reply_(std::move(reply)) {}

  safecons::llm::HttpResponse post(const std::string&, const std::string&, const safecons::llm::Headers&,
                                   double) override {
    const std::string content = calls_++ < good_ ? reply_ : "no idea";
    const nlohmann::json body = {{"choices", {{{"message", {{"content", content}}}}}}};
    return {200, body.dump()};
  }

  int calls() const { return calls_; }

 private:
  int good_;
  std::string reply_;
  std::atomic<int> calls_{0};
};
