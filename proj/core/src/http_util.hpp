#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace colexpand::detail {

struct HttpResult {
  int status = 0;
  std::string body;
};

// POSTs a JSON body. Throws TransientError on connection failures.
HttpResult post_json(const std::string& url,
                     const std::vector<std::pair<std::string, std::string>>& headers,
                     const std::string& body, std::chrono::seconds timeout);

// Maps a non-2xx status onto the LLM error hierarchy.
[[noreturn]] void throw_for_status(const HttpResult& result, const std::string& what);

}  // namespace colexpand::detail
