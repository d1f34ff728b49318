#include "cimllm/llm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace cimllm {

using nlohmann::json;

const std::string_view kPromptPreamble =
    "You are an experienced radiologist entasked with discriminating a brain glioma as either 'IDH mutant' or "
    "'IDH wildtype'. You are presented a JSON file encapsulating semantic (visual) attributes and quantitative "
    "metrics about a brain tumor (glioma)\xE2\x80\x94"
    "extracted from 3D multiparametric MRI sequences (FLAIR, T1-contrast enhanced, and T2-weighted) and a "
    "co-registered 3D segmentation map of tumor subregions. Note that we do not have information on the necrosis "
    "component of the tumor. Provide a compact response with compact reasoning. Structure your response as "
    "follows: <**Final IDH type**> \\n <Reasoning>.";

std::string_view to_string(PredictedLabel l) noexcept {
  switch (l) {
    case PredictedLabel::Mutant: return "mutant";
    case PredictedLabel::Wildtype: return "wildtype";
    case PredictedLabel::Unparseable: return "unparseable";
  }
  return "unparseable";
}

std::optional<PredictedLabel> parse_predicted_label(std::string_view s) noexcept {
  for (auto l : {PredictedLabel::Mutant, PredictedLabel::Wildtype, PredictedLabel::Unparseable}) {
    if (s == to_string(l)) return l;
  }
  return std::nullopt;
}

// ---- label parsing ----

namespace {

/// Lower-cases and turns hyphens, underscores, bold/italic markers and unicode
/// dashes into spaces so that one pattern covers every spelling.
std::string normalize(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80) {
      const auto c3 = static_cast<unsigned char>(text[i + 2]);
      if (c3 >= 0x90 && c3 <= 0x95) {
        out += ' ';
        i += 2;
        continue;
      }
    }
    if (c == '-' || c == '_' || c == '*' || c == '\t' || c == '\r') {
      out += ' ';
    } else if (c < 0x80) {
      out += static_cast<char>(std::tolower(c));
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

const std::regex& mutant_pattern() {
  static const std::regex re(R"((^|[^a-z0-9])(mutant|mutated|mutation|idh[12]? *mut)([^a-z]|$))");
  return re;
}

const std::regex& wildtype_pattern() {
  static const std::regex re(R"((^|[^a-z0-9])(wild *type|idh[12]? *wt)([^a-z]|$))");
  return re;
}

std::optional<std::size_t> first_match(const std::string& text, const std::regex& re) {
  std::smatch m;
  if (!std::regex_search(text, m, re)) return std::nullopt;
  return static_cast<std::size_t>(m.position(2));
}

std::optional<LabelParse> scan(const std::string& text) {
  const auto mut = first_match(text, mutant_pattern());
  const auto wt = first_match(text, wildtype_pattern());
  if (!mut && !wt) return std::nullopt;
  LabelParse out;
  out.ambiguous = mut && wt;
  out.label = (mut && (!wt || *mut < *wt)) ? PredictedLabel::Mutant : PredictedLabel::Wildtype;
  return out;
}

}  // namespace

LabelParse parse_label(std::string_view response) {
  const std::string text = normalize(response);
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(start, end - start);
    if (line.find_first_not_of(' ') != std::string::npos) {
      if (auto hit = scan(line)) return *hit;
      break;
    }
    start = end + 1;
  }
  if (auto hit = scan(text)) return *hit;
  return {};
}

// ---- configuration ----

void InferenceConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::ConfigFormat, m); };
  if (endpoint_url.empty()) fail("endpoint_url is empty");
  if (model_name.empty()) fail("model_name is empty");
  if (!(temperature >= 0.0)) fail("temperature must be >= 0");
  if (max_tokens <= 0) fail("max_tokens must be > 0");
  if (parallelism < 1) fail("parallelism must be >= 1");
  if (max_retries < 0) fail("max_retries must be >= 0");
  if (!(request_timeout_s > 0.0)) fail("request_timeout_s must be > 0");
  if (initial_backoff_s < 0.0 || max_backoff_s < 0.0) fail("backoff must be >= 0");
}

InferenceConfig parse_inference_config(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ConfigFormat, "inference config must be a JSON object");
  InferenceConfig c;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "endpoint_url") c.endpoint_url = v.get<std::string>();
      else if (k == "model_name") c.model_name = v.get<std::string>();
      else if (k == "temperature") c.temperature = v.get<double>();
      else if (k == "max_tokens") c.max_tokens = v.get<int>();
      else if (k == "api_key_env") c.api_key_env = v.get<std::string>();
      else if (k == "request_timeout_s") c.request_timeout_s = v.get<double>();
      else if (k == "max_retries") c.max_retries = v.get<int>();
      else if (k == "initial_backoff_s") c.initial_backoff_s = v.get<double>();
      else if (k == "max_backoff_s") c.max_backoff_s = v.get<double>();
      else if (k == "parallelism") c.parallelism = v.get<int>();
      else if (k == "rate_limit_rps") c.rate_limit_rps = v.get<double>();
      else if (k == "split_system_prompt") c.split_system_prompt = v.get<bool>();
      else throw Error(ErrorCode::ConfigFormat, "unknown inference config key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigFormat, e.what());
  }
  c.validate();
  return c;
}

InferenceConfig load_inference_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_inference_config(ss.str());
}

std::string build_prompt(const SubjectFeatureDocument& doc) {
  std::string out(kPromptPreamble);
  out += '\n';
  out += serialize(doc);
  return out;
}

// ---- transport ----

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // base path, no trailing slash
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::ConfigFormat, "endpoint_url lacks a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  Endpoint e;
  e.origin = url.substr(0, slash);
  e.path = slash == std::string::npos ? "" : url.substr(slash);
  while (!e.path.empty() && e.path.back() == '/') e.path.pop_back();
  return e;
}

std::string request_body(const InferenceConfig& c, std::string_view prompt) {
  json messages = json::array();
  const std::string p(prompt);
  if (c.split_system_prompt && p.size() > kPromptPreamble.size() && p.starts_with(kPromptPreamble) &&
      p[kPromptPreamble.size()] == '\n') {
    messages.push_back({{"role", "system"}, {"content", std::string(kPromptPreamble)}});
    messages.push_back({{"role", "user"}, {"content", p.substr(kPromptPreamble.size() + 1)}});
  } else {
    messages.push_back({{"role", "user"}, {"content", p}});
  }
  return json{{"model", c.model_name},
              {"messages", std::move(messages)},
              {"temperature", c.temperature},
              {"max_tokens", c.max_tokens}}
      .dump();
}

}  // namespace

QueryResult try_query(const InferenceConfig& config, std::string_view prompt) {
  QueryResult out;
  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&](QueryResult& r) -> QueryResult {
    r.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::move(r);
  };
  Endpoint ep;
  try {
    ep = split_endpoint(config.endpoint_url);
  } catch (const Error& e) {
    out.error = e;
    return finish(out);
  }
  std::string token;
  if (!config.api_key_env.empty()) {
    const char* v = std::getenv(config.api_key_env.c_str());
    if (!v || !*v) {
      out.error = Error(ErrorCode::AuthFailure, "environment variable " + config.api_key_env + " is not set");
      return finish(out);
    }
    token = v;
  }
  const std::string body = request_body(config, prompt);
  const std::string path = ep.path + "/chat/completions";
  const auto timeout = std::chrono::duration<double>(config.request_timeout_s);

  for (int attempt = 1; attempt <= config.max_retries + 1; ++attempt) {
    out.attempt_count = attempt;
    // A new client per attempt: no connection or session state is ever shared.
    httplib::Client cli(ep.origin);
    cli.set_keep_alive(false);
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    cli.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    if (!token.empty()) cli.set_bearer_token_auth(token);
    auto res = cli.Post(path, body, "application/json");

    std::optional<Error> transient;
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      transient = Error(timed_out ? ErrorCode::Timeout : ErrorCode::Transport, httplib::to_string(err));
    } else if (res->status == 401 || res->status == 403) {
      out.error = Error(ErrorCode::AuthFailure, "HTTP " + std::to_string(res->status));
      return finish(out);
    } else if (res->status == 429) {
      transient = Error(ErrorCode::RateLimited, "HTTP 429");
    } else if (res->status >= 500) {
      transient = Error(ErrorCode::ServerError, "HTTP " + std::to_string(res->status));
    } else if (res->status != 200) {
      out.error = Error(ErrorCode::Transport, "HTTP " + std::to_string(res->status));
      return finish(out);
    } else {
      json j = json::parse(res->body, nullptr, false);
      const json* content = nullptr;
      if (!j.is_discarded() && j.is_object() && j.contains("choices") && j["choices"].is_array() &&
          !j["choices"].empty()) {
        const json& c0 = j["choices"][0];
        if (c0.is_object() && c0.contains("message") && c0["message"].is_object() &&
            c0["message"].contains("content") && c0["message"]["content"].is_string()) {
          content = &c0["message"]["content"];
        }
      }
      if (!content) {
        out.error = Error(ErrorCode::MalformedResponse, "no choices[0].message.content in response");
        return finish(out);
      }
      out.content = content->get<std::string>();
      return finish(out);
    }

    if (attempt == config.max_retries + 1) {
      out.error = std::move(transient);
      return finish(out);
    }
    const double wait = std::min(config.max_backoff_s, config.initial_backoff_s * std::pow(2.0, attempt - 1));
    std::this_thread::sleep_for(std::chrono::duration<double>(wait));
  }
  return finish(out);
}

QueryResult query(const InferenceConfig& config, std::string_view prompt) {
  QueryResult r = try_query(config, prompt);
  if (r.error) throw *r.error;
  return r;
}

// ---- records ----

std::string PredictionRecord::resume_key() const {
  return subject_id + '\x1f' + model_name + '\x1f' + spec_hash + '\x1f' + schema_version;
}

std::string to_json_line(const PredictionRecord& r) {
  json j = {{"subject_id", r.subject_id},
            {"prompt_text", r.prompt_text},
            {"document_json", r.document_json},
            {"raw_response", r.raw_response},
            {"parsed_label", std::string(to_string(r.parsed_label))},
            {"ambiguous", r.ambiguous},
            {"latency_s", r.latency_s},
            {"model_name", r.model_name},
            {"attempt_count", r.attempt_count},
            {"spec_label", r.spec_label},
            {"spec_hash", r.spec_hash},
            {"schema_version", r.schema_version},
            {"error", r.error ? json(*r.error) : json(nullptr)}};
  return j.dump();
}

PredictionRecord parse_record(std::string_view line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::SchemaViolation, "prediction record is not a JSON object");
  PredictionRecord r;
  try {
    r.subject_id = j.at("subject_id").get<std::string>();
    r.prompt_text = j.at("prompt_text").get<std::string>();
    r.document_json = j.at("document_json").get<std::string>();
    r.raw_response = j.at("raw_response").get<std::string>();
    const auto label = parse_predicted_label(j.at("parsed_label").get<std::string>());
    if (!label) throw Error(ErrorCode::SchemaViolation, "unknown parsed_label");
    r.parsed_label = *label;
    r.ambiguous = j.at("ambiguous").get<bool>();
    r.latency_s = j.at("latency_s").get<double>();
    r.model_name = j.at("model_name").get<std::string>();
    r.attempt_count = j.at("attempt_count").get<int>();
    r.spec_label = j.at("spec_label").get<std::string>();
    r.spec_hash = j.at("spec_hash").get<std::string>();
    r.schema_version = j.at("schema_version").get<std::string>();
    if (!j.at("error").is_null()) r.error = j.at("error").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, std::string("prediction record: ") + e.what());
  }
  return r;
}

std::vector<PredictionRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  std::vector<PredictionRecord> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    const bool terminated = end != std::string::npos;
    if (!terminated) end = text.size();
    const std::string_view line(text.data() + start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const Error&) {
      if (!terminated) break;
      throw;
    }
  }
  return out;
}

// ---- dispatch ----

void RateLimiter::acquire() {
  if (rps_ <= 0.0) return;
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    if (next_ < now) next_ = now;
    slot = next_;
    next_ += std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(1.0 / rps_));
  }
  std::this_thread::sleep_until(slot);
}

PredictionJob make_job(const SubjectFeatureDocument& source, const AblationSpec& spec) {
  const SubjectFeatureDocument doc = apply_ablation(source, spec.drop, spec.add_clinical);
  PredictionJob job;
  job.subject_id = doc.subject_id;
  job.document_json = serialize(doc);
  job.prompt = build_prompt(doc);
  job.spec_label = spec.label;
  job.spec_hash = spec.hash();
  return job;
}

std::vector<PredictionRecord> predict_all(const InferenceConfig& config, const std::vector<PredictionJob>& jobs,
                                          RateLimiter& limiter,
                                          const std::function<void(const PredictionRecord&)>& on_record) {
  config.validate();
  std::vector<PredictionRecord> records(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex sink;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const PredictionJob& job = jobs[i];
      limiter.acquire();
      QueryResult q = try_query(config, job.prompt);
      PredictionRecord r;
      r.subject_id = job.subject_id;
      r.prompt_text = job.prompt;
      r.document_json = job.document_json;
      r.raw_response = q.content;
      r.latency_s = q.latency_s;
      r.model_name = config.model_name;
      r.attempt_count = q.attempt_count;
      r.spec_label = job.spec_label;
      r.spec_hash = job.spec_hash;
      if (q.error) {
        r.error = q.error->what();
      } else {
        const LabelParse parsed = parse_label(q.content);
        r.parsed_label = parsed.label;
        r.ambiguous = parsed.ambiguous;
      }
      std::lock_guard lock(sink);
      if (on_record) on_record(r);
      records[i] = std::move(r);
    }
  };
  const auto n = static_cast<std::size_t>(std::max(1, config.parallelism));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < std::min(n, jobs.size()); ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
  return records;
}

}  // namespace cimllm
