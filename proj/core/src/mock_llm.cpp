#include "cimllm/mock_llm.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cimllm/error.hpp"

namespace cimllm {

using nlohmann::json;

MockScenario parse_mock_scenario(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ConfigFormat, "mock scenario must be a JSON object");
  MockScenario s;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "script") {
        s.script = v.get<std::vector<int>>();
      } else if (k == "default_content") {
        s.default_content = v.get<std::string>();
      } else if (k == "delay_s") {
        s.delay_s = v.get<double>();
      } else if (k == "rules") {
        for (const auto& r : v) {
          MockRule rule;
          for (const auto& [rk, rv] : r.items()) {
            if (rk == "prompt_contains") rule.prompt_contains = rv.get<std::string>();
            else if (rk == "prompt_lacks") rule.prompt_lacks = rv.get<std::string>();
            else if (rk == "content") rule.content = rv.get<std::string>();
            else throw Error(ErrorCode::ConfigFormat, "unknown rule key '" + rk + "'");
          }
          s.rules.push_back(std::move(rule));
        }
      } else {
        throw Error(ErrorCode::ConfigFormat, "unknown scenario key '" + k + "'");
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigFormat, e.what());
  }
  return s;
}

MockScenario load_mock_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_mock_scenario(ss.str());
}

struct MockLlmServer::Impl {
  MockScenario scenario;
  httplib::Server server;
  std::thread thread;
  int port = 0;

  mutable std::mutex mutex;
  std::size_t requests = 0;
  std::set<std::pair<std::string, int>> peers;
  std::vector<std::string> prompts;
  std::atomic<std::size_t> in_flight{0};
  std::atomic<std::size_t> peak{0};

  std::string answer(const std::string& prompt) const {
    for (const auto& r : scenario.rules) {
      if (!r.prompt_contains.empty() && prompt.find(r.prompt_contains) == std::string::npos) continue;
      if (!r.prompt_lacks.empty() && prompt.find(r.prompt_lacks) != std::string::npos) continue;
      return r.content;
    }
    return scenario.default_content;
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    const std::size_t now = ++in_flight;
    for (std::size_t p = peak.load(); now > p && !peak.compare_exchange_weak(p, now);) {
    }
    std::size_t seq = 0;
    std::string prompt;
    json body = json::parse(req.body, nullptr, false);
    if (!body.is_discarded() && body.contains("messages") && body["messages"].is_array()) {
      for (const auto& m : body["messages"]) {
        if (m.contains("content") && m["content"].is_string()) {
          if (!prompt.empty()) prompt += '\n';
          prompt += m["content"].get<std::string>();
        }
      }
    }
    {
      std::lock_guard lock(mutex);
      seq = requests++;
      peers.emplace(req.remote_addr, req.remote_port);
      prompts.push_back(prompt);
    }
    const int status = seq < scenario.script.size() ? scenario.script[seq] : 200;
    if (status != 200) {
      res.status = status;
      res.set_content(json{{"error", {{"message", "scripted failure"}}}}.dump(), "application/json");
      --in_flight;
      return;
    }
    if (scenario.delay_s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(scenario.delay_s));
    const std::string model = body.is_discarded() ? "mock" : body.value("model", "mock");
    json reply = {{"id", "mock-" + std::to_string(seq)},
                  {"object", "chat.completion"},
                  {"model", model},
                  {"choices",
                   {{{"index", 0},
                     {"message", {{"role", "assistant"}, {"content", answer(prompt)}}},
                     {"finish_reason", "stop"}}}}};
    res.set_content(reply.dump(), "application/json");
    --in_flight;
  }
};

MockLlmServer::MockLlmServer(MockScenario scenario, int port) : impl_(std::make_unique<Impl>()) {
  impl_->scenario = std::move(scenario);
  Impl* impl = impl_.get();
  auto handler = [impl](const httplib::Request& req, httplib::Response& res) { impl->handle(req, res); };
  impl->server.Post("/v1/chat/completions", handler);
  impl->server.Post("/chat/completions", handler);
  if (port == 0) {
    impl->port = impl->server.bind_to_any_port("127.0.0.1");
  } else {
    impl->port = impl->server.bind_to_port("127.0.0.1", port) ? port : -1;
  }
  if (impl->port <= 0) throw Error(ErrorCode::Transport, "mock server could not bind");
  impl->thread = std::thread([impl] { impl->server.listen_after_bind(); });
  impl->server.wait_until_ready();
}

MockLlmServer::~MockLlmServer() { stop(); }

int MockLlmServer::port() const noexcept { return impl_->port; }

std::string MockLlmServer::endpoint() const { return "http://127.0.0.1:" + std::to_string(impl_->port) + "/v1"; }

std::size_t MockLlmServer::request_count() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->requests;
}

std::size_t MockLlmServer::connection_count() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->peers.size();
}

std::size_t MockLlmServer::max_in_flight() const { return impl_->peak.load(); }

std::vector<std::string> MockLlmServer::prompts() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->prompts;
}

void MockLlmServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void MockLlmServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace cimllm
