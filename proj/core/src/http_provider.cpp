#include <cstdlib>

#include "colexpand/llm_gateway.hpp"
#include "http_util.hpp"
#include "httplib.h"
#include "json.hpp"

namespace colexpand {

namespace detail {

HttpResult post_json(const std::string& url,
                     const std::vector<std::pair<std::string, std::string>>& headers,
                     const std::string& body, std::chrono::seconds timeout) {
  // split "scheme://host[:port]/path"
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint must be a URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  const std::string origin = url.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);

  auto res = client.Post(path, h, body, "application/json");
  if (!res) throw TransientError("HTTP request to " + origin + " failed: " + httplib::to_string(res.error()));
  return {res->status, res->body};
}

void throw_for_status(const HttpResult& result, const std::string& what) {
  const std::string msg = what + " returned HTTP " + std::to_string(result.status) + ": " +
                          result.body.substr(0, 300);
  if (result.status == 401 || result.status == 403) throw AuthenticationError(msg);
  if (result.status == 408 || result.status == 429 || result.status >= 500) throw TransientError(msg);
  throw LlmError(msg);
}

}  // namespace detail

HttpChatProvider::HttpChatProvider(HttpProviderOptions options) : options_(std::move(options)) {
  const char* key = std::getenv(options_.api_key_env.c_str());
  if (!key || !*key) throw AuthenticationError("environment variable " + options_.api_key_env + " is not set");
  api_key_ = key;
}

std::string HttpChatProvider::send(const CompletionRequest& request) {
  nlohmann::json body = {
      {"model", request.model_id},
      {"temperature", request.temperature},
      {"max_completion_tokens", request.max_completion_tokens},
      {"messages",
       {{{"role", "system"}, {"content", request.system_text}},
        {{"role", "user"}, {"content", request.user_text}}}},
  };
  auto result = detail::post_json(options_.endpoint, {{"Authorization", "Bearer " + api_key_}},
                                  body.dump(), options_.timeout);
  if (result.status < 200 || result.status >= 300) detail::throw_for_status(result, "chat endpoint");
  try {
    auto reply = nlohmann::json::parse(result.body);
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw LlmError(std::string("unexpected chat completion payload: ") + e.what());
  }
}

}  // namespace colexpand
