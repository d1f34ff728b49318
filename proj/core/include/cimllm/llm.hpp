#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cimllm/error.hpp"
#include "cimllm/schema.hpp"

namespace cimllm {

enum class PredictedLabel { Mutant, Wildtype, Unparseable };
std::string_view to_string(PredictedLabel l) noexcept;
std::optional<PredictedLabel> parse_predicted_label(std::string_view s) noexcept;

struct LabelParse {
  PredictedLabel label = PredictedLabel::Unparseable;
  bool ambiguous = false;  // both classes named where the label was taken from
  friend bool operator==(const LabelParse&, const LabelParse&) = default;
};

/// First non-empty line first, then the earliest class phrase anywhere.
LabelParse parse_label(std::string_view response);

struct InferenceConfig {
  std::string endpoint_url = "https://api.openai.com/v1";
  std::string model_name = "gpt-4o";
  double temperature = 0.0;
  int max_tokens = 1028;
  std::string api_key_env = "OPENAI_API_KEY";  // empty: no Authorization header
  double request_timeout_s = 120.0;
  int max_retries = 3;
  double initial_backoff_s = 1.0;
  double max_backoff_s = 30.0;
  int parallelism = 1;
  double rate_limit_rps = 0.0;  // <= 0: unlimited
  bool split_system_prompt = false;

  /// Throws Error(ConfigFormat).
  void validate() const;
  friend bool operator==(const InferenceConfig&, const InferenceConfig&) = default;
};

InferenceConfig parse_inference_config(std::string_view json);
InferenceConfig load_inference_config(const std::filesystem::path& path);

extern const std::string_view kPromptPreamble;

/// Preamble, newline, serialized document.
std::string build_prompt(const SubjectFeatureDocument& doc);

struct QueryResult {
  std::string content;
  int attempt_count = 0;
  double latency_s = 0.0;
  std::optional<Error> error;  // set when no usable response was obtained
};

/// Never throws for endpoint failures; they are reported in `error`.
QueryResult try_query(const InferenceConfig& config, std::string_view prompt);
/// Throws Error(Timeout|RateLimited|ServerError|AuthFailure|MalformedResponse|Transport).
QueryResult query(const InferenceConfig& config, std::string_view prompt);

struct PredictionRecord {
  std::string subject_id;
  std::string prompt_text;
  std::string document_json;
  std::string raw_response;
  PredictedLabel parsed_label = PredictedLabel::Unparseable;
  bool ambiguous = false;
  double latency_s = 0.0;
  std::string model_name;
  int attempt_count = 0;
  std::string spec_label;
  std::string spec_hash;
  std::string schema_version{kSchemaVersion};
  std::optional<std::string> error;

  /// (subject, model, spec hash, schema version)
  [[nodiscard]] std::string resume_key() const;
  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

std::string to_json_line(const PredictionRecord& r);
/// Throws Error(SchemaViolation).
PredictionRecord parse_record(std::string_view line);
/// A truncated final line (interrupted write) is ignored; any other bad line throws.
std::vector<PredictionRecord> read_records(const std::filesystem::path& path);

/// Evenly spaced admission at `rps` requests per second; unlimited when rps <= 0.
class RateLimiter {
 public:
  explicit RateLimiter(double rps) : rps_(rps) {}
  void acquire();

 private:
  double rps_;
  std::mutex mutex_;
  std::chrono::steady_clock::time_point next_{};
};

struct PredictionJob {
  std::string subject_id;
  std::string document_json;
  std::string prompt;
  std::string spec_label;
  std::string spec_hash;
};

PredictionJob make_job(const SubjectFeatureDocument& source, const AblationSpec& spec);

/// Runs jobs with at most `config.parallelism` requests in flight. Each
/// finished record is passed to `on_record` (serialised by the dispatcher).
/// Returned records are sorted by subject id.
std::vector<PredictionRecord> predict_all(const InferenceConfig& config, const std::vector<PredictionJob>& jobs,
                                          RateLimiter& limiter,
                                          const std::function<void(const PredictionRecord&)>& on_record = {});

}  // namespace cimllm
