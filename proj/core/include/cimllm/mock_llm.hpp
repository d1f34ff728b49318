#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace cimllm {

/// First matching rule answers; an empty condition always holds.
struct MockRule {
  std::string prompt_contains;
  std::string prompt_lacks;
  std::string content;
};

/// Scripted behaviour of the local chat-completion endpoint.
///   script: HTTP status for the first requests in arrival order (200 = answer normally)
///   rules / default_content: the assistant text for answered requests
///   delay_s: time each answered request is held open
struct MockScenario {
  std::vector<int> script;
  std::vector<MockRule> rules;
  std::string default_content = "**IDH wildtype**\nNo distinguishing features.";
  double delay_s = 0.0;
};

/// Throws Error(ConfigFormat).
MockScenario parse_mock_scenario(std::string_view json);
MockScenario load_mock_scenario(const std::filesystem::path& path);

/// OpenAI-compatible `/v1/chat/completions` served on 127.0.0.1.
class MockLlmServer {
 public:
  /// port 0 picks a free port.
  explicit MockLlmServer(MockScenario scenario, int port = 0);
  ~MockLlmServer();
  MockLlmServer(const MockLlmServer&) = delete;
  MockLlmServer& operator=(const MockLlmServer&) = delete;

  [[nodiscard]] int port() const noexcept;
  /// Base URL to put in InferenceConfig::endpoint_url.
  [[nodiscard]] std::string endpoint() const;

  [[nodiscard]] std::size_t request_count() const;
  /// Distinct client connections seen.
  [[nodiscard]] std::size_t connection_count() const;
  [[nodiscard]] std::size_t max_in_flight() const;
  /// Every prompt received, in arrival order.
  [[nodiscard]] std::vector<std::string> prompts() const;

  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cimllm
