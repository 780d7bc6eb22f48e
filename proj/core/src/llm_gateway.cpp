#include "colexpand/llm_gateway.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include "colexpand/text.hpp"
#include "json.hpp"

namespace colexpand {

using nlohmann::json;

void CompletionRequest::validate() const {
  if (!(temperature >= 0.0)) throw ValidationError("temperature must be >= 0");
  if (max_completion_tokens <= 0) throw ValidationError("max_completion_tokens must be > 0");
}

std::string normalize_prompt(std::string_view text) { return text::collapse_whitespace(text); }

std::string prompt_key(const CompletionRequest& request) {
  return text::sha256_hex(normalize_prompt(request.system_text) + "\x1e" +
                          normalize_prompt(request.user_text));
}

std::string cache_key(const CompletionRequest& request) {
  // Length-prefixed so no two field tuples serialize to the same bytes.
  std::ostringstream os;
  auto field = [&](std::string_view s) { os << s.size() << ':' << s << ';'; };
  field(request.model_id);
  field(request.system_text);
  field(request.user_text);
  char temp[64];
  std::snprintf(temp, sizeof temp, "%.17g", request.temperature);
  field(temp);
  field(std::to_string(request.max_completion_tokens));
  return text::sha256_hex(os.str());
}

// ---------------------------------------------------------------------------
// MockProvider

std::shared_ptr<MockProvider> MockProvider::from_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mock script '" + path.string() + "'");
  auto mock = std::make_shared<MockProvider>();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      auto obj = json::parse(line);
      mock->script(obj.at("key").get<std::string>(), obj.at("reply").get<std::string>());
    } catch (const json::exception& e) {
      throw ParseError(path.string(), line_no, e.what());
    }
  }
  return mock;
}

void MockProvider::script(std::string key, std::string reply) {
  std::lock_guard lock(mu_);
  script_[std::move(key)] = std::move(reply);
}

void MockProvider::set_responder(Responder responder) {
  std::lock_guard lock(mu_);
  responder_ = std::move(responder);
}

std::string MockProvider::send(const CompletionRequest& request) {
  const auto key = prompt_key(request);
  Responder responder;
  {
    std::lock_guard lock(mu_);
    captured_.push_back(request);
    if (auto it = script_.find(key); it != script_.end()) return it->second;
    responder = responder_;
  }
  if (responder) {
    if (auto reply = responder(request)) return *reply;
  }
  throw MockMissError(key);
}

std::vector<CompletionRequest> MockProvider::captured() const {
  std::lock_guard lock(mu_);
  return captured_;
}

void MockProvider::clear_captured() {
  std::lock_guard lock(mu_);
  captured_.clear();
}

// ---------------------------------------------------------------------------
// RecordingProvider

std::string RecordingProvider::send(const CompletionRequest& request) {
  auto reply = inner_->send(request);
  std::lock_guard lock(mu_);
  recorded_[prompt_key(request)] = reply;
  return reply;
}

void RecordingProvider::write_script(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write mock script '" + path.string() + "'");
  std::lock_guard lock(mu_);
  for (const auto& [key, reply] : recorded_) {
    nlohmann::ordered_json obj;
    obj["key"] = key;
    obj["reply"] = reply;
    out << obj.dump() << '\n';
  }
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::size_t RecordingProvider::size() const {
  std::lock_guard lock(mu_);
  return recorded_.size();
}

// ---------------------------------------------------------------------------
// LlmGateway

LlmGateway::LlmGateway(std::shared_ptr<Provider> provider, GatewayOptions options)
    : provider_(std::move(provider)),
      options_(std::move(options)),
      slots_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options_.max_in_flight))) {
  if (!provider_) throw ValidationError("gateway needs a provider");
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  if (options_.cache_dir) std::filesystem::create_directories(*options_.cache_dir);
}

std::filesystem::path LlmGateway::cache_path(const std::string& key) const {
  return *options_.cache_dir / key.substr(0, 2) / (key + ".json");
}

std::optional<std::string> LlmGateway::cache_lookup(const std::string& key) {
  {
    std::lock_guard lock(mu_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  }
  if (!options_.cache_dir) return std::nullopt;
  const auto path = cache_path(key);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  try {
    auto obj = json::parse(in);
    auto text = obj.at("text").get<std::string>();
    std::lock_guard lock(mu_);
    memory_.emplace(key, text);
    return text;
  } catch (const json::exception&) {
    return std::nullopt;  // torn or foreign file; treat as a miss and overwrite
  }
}

void LlmGateway::cache_store(const std::string& key, const CompletionRequest& request,
                             const std::string& text) {
  std::lock_guard lock(mu_);
  memory_[key] = text;
  if (!options_.cache_dir) return;
  const auto path = cache_path(key);
  std::filesystem::create_directories(path.parent_path());
  nlohmann::ordered_json obj;
  obj["model_id"] = request.model_id;
  obj["temperature"] = request.temperature;
  obj["max_completion_tokens"] = request.max_completion_tokens;
  obj["text"] = text;
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write cache entry '" + tmp.string() + "'");
    out << obj.dump() << '\n';
  }
  std::filesystem::rename(tmp, path);
}

CompletionResponse LlmGateway::complete(const CompletionRequest& request) {
  request.validate();
  const auto key = cache_key(request);
  {
    std::lock_guard lock(mu_);
    ++stats_.requests;
  }
  if (auto hit = cache_lookup(key)) {
    std::lock_guard lock(mu_);
    ++stats_.cache_hits;
    return {*hit, true, 1};
  }

  auto backoff = options_.initial_backoff;
  const int attempts = 1 + std::max(0, options_.max_retries);
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    try {
      std::string text;
      {
        slots_.acquire();
        struct Release {
          std::counting_semaphore<>& s;
          ~Release() { s.release(); }
        } release{slots_};
        {
          std::lock_guard lock(mu_);
          ++stats_.provider_calls;
        }
        text = provider_->send(request);
      }
      cache_store(key, request, text);
      return {std::move(text), false, attempt};
    } catch (const TransientError& e) {
      last_error = e.what();
      if (attempt == attempts) break;
      {
        std::lock_guard lock(mu_);
        ++stats_.retries;
      }
      options_.sleep(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<long long>(static_cast<double>(backoff.count()) * options_.backoff_factor));
    }
  }
  throw RetriesExhaustedError("LLM request failed after " + std::to_string(attempts) +
                              " attempts: " + last_error);
}

GatewayStats LlmGateway::stats() const {
  std::lock_guard lock(mu_);
  return stats_;
}

}  // namespace colexpand
