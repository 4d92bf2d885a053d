#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace ladder {

/// An OpenAI-compatible chat-completions endpoint (sampler, target model,
/// ladder model, ...).
struct EndpointConfig {
  std::string name;      // tag recorded in outputs; defaults to model_name
  std::string base_url;  // e.g. http://127.0.0.1:8000/v1
  std::string model_name;
  std::optional<std::string> api_key;  // falls back to $LADDER_API_KEY
  int max_in_flight = 4;
  double timeout_seconds = 60.0;
  int retries = 3;
  double temperature = 0.0;
  int max_tokens = 512;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_cap{30000};

  /// Throws InvariantError when a field is out of range.
  void validate() const;
  std::string tag() const { return name.empty() ? model_name : name; }
};

enum class RequestErrorKind {
  Precondition,       // bad input, no request sent
  Transport,          // connection refused, reset, TLS ...
  Timeout,
  HttpStatus,         // non-retryable status
  MalformedResponse,  // body missing the expected fields
  RetriesExhausted,   // transient failures outlasted the retry budget
};

std::string_view to_string(RequestErrorKind kind);

struct RequestError {
  RequestErrorKind kind = RequestErrorKind::Transport;
  int http_status = 0;
  std::string message;

  std::string describe() const;
};

struct GenerationResult {
  std::string id;
  std::optional<std::string> text;
  int attempts = 0;
  double latency_ms = 0.0;
  std::optional<RequestError> error;

  bool ok() const noexcept { return text.has_value(); }
};

/// Anything that turns prompts into completions. Batches must come back
/// positionally aligned with their input.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual GenerationResult generate(std::string_view prompt) = 0;
  virtual std::vector<GenerationResult> generate_batch(std::span<const std::string> prompts) = 0;
  virtual std::string tag() const = 0;
};

struct RetrySettings {
  int retries = 3;
  double timeout_seconds = 60.0;
  std::chrono::milliseconds backoff_base{500};
  std::chrono::milliseconds backoff_cap{30000};
};

/// Delay before retry number `retry` (1-based): exponential from `base`,
/// capped, with jitter drawn from [delay/2, delay].
std::chrono::milliseconds backoff_delay(const RetrySettings& settings, int retry);

struct JsonReply {
  std::optional<nlohmann::json> body;
  int attempts = 0;
  std::optional<RequestError> error;
};

/// POSTs JSON to `{base_url}{path}` with retry on transport errors,
/// timeouts, 408, 429 and 5xx. Not thread-safe; use one per thread.
class JsonPoster {
 public:
  JsonPoster(std::string_view base_url, RetrySettings settings, std::optional<std::string> bearer_token = {});
  ~JsonPoster();
  JsonPoster(JsonPoster&&) noexcept;
  JsonPoster& operator=(JsonPoster&&) noexcept;

  JsonReply post(std::string_view path, const nlohmann::json& body);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Client for `{base_url}/chat/completions`. Shareable across threads.
class ChatClient final : public Generator {
 public:
  explicit ChatClient(EndpointConfig cfg);

  GenerationResult generate(std::string_view prompt) override;

  /// At most `max_in_flight` requests are outstanding at once. Per-item
  /// failures come back as error results; the batch never throws.
  std::vector<GenerationResult> generate_batch(std::span<const std::string> prompts) override;

  std::string tag() const override { return cfg_.tag(); }
  const EndpointConfig& config() const noexcept { return cfg_; }

 private:
  GenerationResult generate_with(JsonPoster& poster, std::string_view prompt) const;
  JsonPoster make_poster() const;

  EndpointConfig cfg_;
  std::optional<std::string> token_;
};

/// Request body for one chat-completions call.
nlohmann::json chat_request_body(const EndpointConfig& cfg, std::string_view prompt);

/// `choices[0].message.content`, or nullopt if the body lacks it.
std::optional<std::string> chat_reply_content(const nlohmann::json& body);

/// Runs `fn(index)` for every index in [0, n) on at most `max_workers`
/// threads. Each worker gets its own state from `make_state`.
template <typename MakeState, typename Fn>
void run_bounded(std::size_t n, int max_workers, MakeState make_state, Fn fn);

}  // namespace ladder

#include "ladder/detail/run_bounded.hpp"
