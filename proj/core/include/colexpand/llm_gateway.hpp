#pragma once

// Chat-completion access shared by every pipeline stage.
//
// LlmGateway adds a content-addressed response cache (memory, optionally
// persisted to disk), bounded parallelism and retry with exponential backoff
// on top of a Provider. Providers: HttpChatProvider for a real endpoint,
// MockProvider for scripted offline runs, RecordingProvider to capture a
// script from any other provider.

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "colexpand/errors.hpp"

namespace colexpand {

inline constexpr std::string_view kDefaultModel = "gpt-4o-2024-08-06";

struct CompletionRequest {
  std::string system_text;
  std::string user_text;
  double temperature = 0.0;
  int max_completion_tokens = 6000;
  std::string model_id = std::string(kDefaultModel);

  // Throws ValidationError on negative temperature or non-positive token cap.
  void validate() const;
};

struct CompletionResponse {
  std::string text;
  bool from_cache = false;
  int attempt_count = 1;
};

class LlmError : public Error {
 public:
  using Error::Error;
};

// Worth retrying: timeouts, connection resets, HTTP 429 and 5xx.
class TransientError : public LlmError {
 public:
  using LlmError::LlmError;
};

class AuthenticationError : public LlmError {
 public:
  using LlmError::LlmError;
};

class RetriesExhaustedError : public LlmError {
 public:
  using LlmError::LlmError;
};

class MockMissError : public LlmError {
 public:
  explicit MockMissError(std::string key)
      : LlmError("mock provider has no scripted reply for prompt key " + key), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Trims and collapses every whitespace run to one space.
std::string normalize_prompt(std::string_view text);

// Key used by mock scripts: SHA-256 over the normalized system and user text.
// Model and sampling settings are deliberately not part of it.
std::string prompt_key(const CompletionRequest& request);

// Key used by the response cache: SHA-256 over every request field.
std::string cache_key(const CompletionRequest& request);

class Provider {
 public:
  virtual ~Provider() = default;
  // Returns the completion text or throws an LlmError subtype.
  virtual std::string send(const CompletionRequest& request) = 0;
};

// Replies from a script keyed by prompt_key(), then from an optional
// responder callback. Every request is captured for inspection.
class MockProvider : public Provider {
 public:
  using Responder = std::function<std::optional<std::string>(const CompletionRequest&)>;

  MockProvider() = default;

  // Script file: JSON Lines of {"key": ..., "reply": ...}.
  static std::shared_ptr<MockProvider> from_script(const std::filesystem::path& path);

  void script(std::string key, std::string reply);
  void set_responder(Responder responder);

  std::string send(const CompletionRequest& request) override;

  std::vector<CompletionRequest> captured() const;
  void clear_captured();

 private:
  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> script_;
  Responder responder_;
  std::vector<CompletionRequest> captured_;
};

// Forwards to another provider and remembers every (prompt key, reply) pair,
// so a live or simulated run can be replayed later through MockProvider.
class RecordingProvider : public Provider {
 public:
  explicit RecordingProvider(std::shared_ptr<Provider> inner) : inner_(std::move(inner)) {}

  std::string send(const CompletionRequest& request) override;

  // Writes the recorded pairs sorted by key.
  void write_script(const std::filesystem::path& path) const;
  std::size_t size() const;

 private:
  std::shared_ptr<Provider> inner_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> recorded_;
};

struct HttpProviderOptions {
  // OpenAI-compatible chat completions URL.
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  // Environment variable holding the bearer token.
  std::string api_key_env = "COLEXPAND_API_KEY";
  std::chrono::seconds timeout{120};
};

class HttpChatProvider : public Provider {
 public:
  // Throws AuthenticationError when the credential variable is unset.
  explicit HttpChatProvider(HttpProviderOptions options = {});
  std::string send(const CompletionRequest& request) override;

 private:
  HttpProviderOptions options_;
  std::string api_key_;
};

struct GatewayOptions {
  std::optional<std::filesystem::path> cache_dir;
  int max_retries = 3;  // additional attempts after the first
  std::chrono::milliseconds initial_backoff{500};
  double backoff_factor = 2.0;
  std::size_t max_in_flight = 4;
  // Injected so tests can observe backoff without sleeping.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct GatewayStats {
  std::size_t requests = 0;
  std::size_t cache_hits = 0;
  std::size_t provider_calls = 0;
  std::size_t retries = 0;

  double cache_hit_rate() const {
    return requests ? static_cast<double>(cache_hits) / static_cast<double>(requests) : 0.0;
  }
};

class LlmGateway {
 public:
  explicit LlmGateway(std::shared_ptr<Provider> provider, GatewayOptions options = {});

  // Safe to call concurrently.
  CompletionResponse complete(const CompletionRequest& request);

  GatewayStats stats() const;

 private:
  std::optional<std::string> cache_lookup(const std::string& key);
  void cache_store(const std::string& key, const CompletionRequest& request, const std::string& text);
  std::filesystem::path cache_path(const std::string& key) const;

  std::shared_ptr<Provider> provider_;
  GatewayOptions options_;
  std::counting_semaphore<> slots_;

  mutable std::mutex mu_;
  std::unordered_map<std::string, std::string> memory_;
  GatewayStats stats_;
};

}  // namespace colexpand
