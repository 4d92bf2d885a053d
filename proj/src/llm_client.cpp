#include "ladder/llm_client.hpp"

#include <httplib.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "ladder/error.hpp"
#include "ladder/jsonl.hpp"
#include "ladder/text.hpp"

namespace ladder {

using nlohmann::json;

namespace {

struct ParsedUrl {
  std::string scheme_host_port;
  std::string path_prefix;
};

ParsedUrl parse_base_url(std::string_view url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) throw InvariantError("base_url needs a scheme: " + std::string(url));
  const auto scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") throw InvariantError("unsupported URL scheme: " + std::string(url));
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string_view::npos) {
    out.scheme_host_port = std::string(url);
  } else {
    out.scheme_host_port = std::string(url.substr(0, path_start));
    out.path_prefix = std::string(url.substr(path_start));
  }
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  if (out.scheme_host_port.size() <= scheme.size() + 3) throw InvariantError("base_url has no host: " + std::string(url));
  return out;
}

bool is_retryable_status(int status) { return status == 408 || status == 429 || status >= 500; }

std::optional<std::string> resolve_token(const std::optional<std::string>& configured) {
  if (configured && !configured->empty()) return configured;
  if (const char* env = std::getenv("LADDER_API_KEY"); env && *env) return std::string(env);
  return std::nullopt;
}

std::string local_request_id() {
  static std::atomic<unsigned long long> counter{0};
  return "local-" + std::to_string(counter++);
}

}  // namespace

void EndpointConfig::validate() const {
  if (base_url.empty()) throw InvariantError("endpoint '" + tag() + "': base_url is required");
  parse_base_url(base_url);
  if (model_name.empty()) throw InvariantError("endpoint '" + tag() + "': model is required");
  if (max_in_flight < 1) throw InvariantError("endpoint '" + tag() + "': max_in_flight must be >= 1");
  if (!(timeout_seconds > 0.0)) throw InvariantError("endpoint '" + tag() + "': timeout must be > 0");
  if (retries < 0) throw InvariantError("endpoint '" + tag() + "': retries must be >= 0");
  if (!(temperature >= 0.0)) throw InvariantError("endpoint '" + tag() + "': temperature must be >= 0");
  if (max_tokens < 1) throw InvariantError("endpoint '" + tag() + "': max_tokens must be >= 1");
  if (backoff_base.count() < 0 || backoff_cap < backoff_base) {
    throw InvariantError("endpoint '" + tag() + "': backoff_cap must be >= backoff_base >= 0");
  }
}

std::string_view to_string(RequestErrorKind kind) {
  switch (kind) {
    case RequestErrorKind::Precondition: return "precondition";
    case RequestErrorKind::Transport: return "transport";
    case RequestErrorKind::Timeout: return "timeout";
    case RequestErrorKind::HttpStatus: return "http_status";
    case RequestErrorKind::MalformedResponse: return "malformed_response";
    case RequestErrorKind::RetriesExhausted: return "retries_exhausted";
  }
  return "unknown";
}

std::string RequestError::describe() const {
  std::string out(to_string(kind));
  if (http_status) out += " (HTTP " + std::to_string(http_status) + ")";
  if (!message.empty()) out += ": " + message;
  return out;
}

std::chrono::milliseconds backoff_delay(const RetrySettings& settings, int retry) {
  const double base = static_cast<double>(settings.backoff_base.count());
  const double cap = static_cast<double>(settings.backoff_cap.count());
  const double full = std::min(cap, base * std::ldexp(1.0, std::max(0, retry - 1)));
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_real_distribution<double> jitter(0.5, 1.0);
  return std::chrono::milliseconds(static_cast<long long>(full * jitter(rng)));
}

struct JsonPoster::Impl {
  ParsedUrl url;
  RetrySettings settings;
  httplib::Client client;
  httplib::Headers headers;

  Impl(ParsedUrl u, RetrySettings s, const std::optional<std::string>& token)
      : url(std::move(u)), settings(s), client(url.scheme_host_port) {
    const auto secs = static_cast<time_t>(settings.timeout_seconds);
    const auto usecs = static_cast<time_t>((settings.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    client.set_keep_alive(true);
    if (token) headers.emplace("Authorization", "Bearer " + *token);
  }
};

JsonPoster::JsonPoster(std::string_view base_url, RetrySettings settings, std::optional<std::string> bearer_token)
    : impl_(std::make_unique<Impl>(parse_base_url(base_url), settings, bearer_token)) {}

JsonPoster::~JsonPoster() = default;
JsonPoster::JsonPoster(JsonPoster&&) noexcept = default;
JsonPoster& JsonPoster::operator=(JsonPoster&&) noexcept = default;

JsonReply JsonPoster::post(std::string_view path, const json& body) {
  JsonReply reply;
  const std::string full_path = impl_->url.path_prefix + std::string(path);
  const std::string payload = dump_compact(body);
  const int max_attempts = impl_->settings.retries + 1;
  RequestError last;

  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempt > 1) std::this_thread::sleep_for(backoff_delay(impl_->settings, attempt - 1));
    reply.attempts = attempt;
    auto res = impl_->client.Post(full_path, impl_->headers, payload, "application/json");
    if (!res) {
      const auto err = res.error();
      const bool timeout = err == httplib::Error::Read || err == httplib::Error::Write ||
                           err == httplib::Error::ConnectionTimeout;
      last = RequestError{timeout ? RequestErrorKind::Timeout : RequestErrorKind::Transport, 0,
                          httplib::to_string(err)};
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      RequestError e{RequestErrorKind::HttpStatus, res->status, res->body.substr(0, 200)};
      if (!is_retryable_status(res->status)) {
        reply.error = std::move(e);
        return reply;
      }
      last = std::move(e);
      continue;
    }
    try {
      reply.body = json::parse(res->body);
    } catch (const json::parse_error& e) {
      reply.error = RequestError{RequestErrorKind::MalformedResponse, res->status,
                                 std::string("response is not JSON: ") + e.what()};
    }
    return reply;
  }

  if (max_attempts == 1) {
    reply.error = std::move(last);
  } else {
    reply.error = RequestError{RequestErrorKind::RetriesExhausted, last.http_status,
                               std::to_string(max_attempts) + " attempts, last: " + last.describe()};
  }
  return reply;
}

json chat_request_body(const EndpointConfig& cfg, std::string_view prompt) {
  return json{
      {"model", cfg.model_name},
      {"messages", json::array({json{{"role", "user"}, {"content", std::string(prompt)}}})},
      {"temperature", cfg.temperature},
      {"max_tokens", cfg.max_tokens},
  };
}

std::optional<std::string> chat_reply_content(const json& body) {
  if (!body.is_object()) return std::nullopt;
  auto choices = body.find("choices");
  if (choices == body.end() || !choices->is_array() || choices->empty()) return std::nullopt;
  const auto& first = (*choices)[0];
  if (!first.is_object()) return std::nullopt;
  auto message = first.find("message");
  if (message == first.end() || !message->is_object()) return std::nullopt;
  auto content = message->find("content");
  if (content == message->end() || !content->is_string()) return std::nullopt;
  return content->get<std::string>();
}

ChatClient::ChatClient(EndpointConfig cfg) : cfg_(std::move(cfg)), token_(resolve_token(cfg_.api_key)) {
  cfg_.validate();
}

JsonPoster ChatClient::make_poster() const {
  return JsonPoster(cfg_.base_url, RetrySettings{cfg_.retries, cfg_.timeout_seconds, cfg_.backoff_base, cfg_.backoff_cap},
                    token_);
}

GenerationResult ChatClient::generate_with(JsonPoster& poster, std::string_view prompt) const {
  GenerationResult result;
  if (text::is_blank(prompt)) {
    result.id = local_request_id();
    result.error = RequestError{RequestErrorKind::Precondition, 0, "empty prompt"};
    return result;
  }
  const auto start = std::chrono::steady_clock::now();
  auto reply = poster.post("/chat/completions", chat_request_body(cfg_, prompt));
  result.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  result.attempts = reply.attempts;
  if (reply.error) {
    result.id = local_request_id();
    result.error = std::move(reply.error);
    return result;
  }
  const auto& body = *reply.body;
  if (body.is_object() && body.contains("id") && body["id"].is_string()) {
    result.id = body["id"].get<std::string>();
  } else {
    result.id = local_request_id();
  }
  if (auto content = chat_reply_content(body)) {
    result.text = std::move(*content);
  } else {
    result.error = RequestError{RequestErrorKind::MalformedResponse, 0, "missing choices[0].message.content"};
  }
  return result;
}

GenerationResult ChatClient::generate(std::string_view prompt) {
  auto poster = make_poster();
  return generate_with(poster, prompt);
}

std::vector<GenerationResult> ChatClient::generate_batch(std::span<const std::string> prompts) {
  std::vector<GenerationResult> results(prompts.size());
  run_bounded(
      prompts.size(), cfg_.max_in_flight, [this] { return make_poster(); },
      [&](JsonPoster& poster, std::size_t i) { results[i] = generate_with(poster, prompts[i]); });
  return results;
}

}  // namespace ladder
