#include <cmath>
#include <cstdlib>
#include <mutex>
#include <unordered_map>

#include "colexpand/evaluator.hpp"
#include "colexpand/llm_gateway.hpp"
#include "colexpand/text.hpp"
#include "http_util.hpp"
#include "json.hpp"

namespace colexpand {

namespace {

void l2_normalize(std::vector<float>& v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return;
  for (float& x : v) x = static_cast<float>(x / norm);
}

}  // namespace

TrigramEmbedder::TrigramEmbedder(std::size_t dim) : dim_(dim) {
  if (dim_ == 0) throw ValidationError("embedding dimension must be > 0");
}

std::vector<float> TrigramEmbedder::embed(const std::string& word) {
  std::vector<float> v(dim_, 0.0f);
  const std::string s = "#" + text::to_lower(word) + "#";
  for (std::size_t n = 2; n <= 3; ++n)
    for (std::size_t i = 0; i + n <= s.size(); ++i)
      v[text::fnv1a64(std::string_view(s).substr(i, n)) % dim_] += 1.0f;
  l2_normalize(v);
  return v;
}

struct RemoteEmbedder::Impl {
  std::string endpoint;
  std::string model;
  std::string api_key;
  std::mutex mu;
  std::unordered_map<std::string, std::vector<float>> memo;
};

RemoteEmbedder::RemoteEmbedder(std::string endpoint, std::string model, std::string api_key_env)
    : impl_(std::make_shared<Impl>()), endpoint_(std::move(endpoint)) {
  impl_->endpoint = endpoint_;
  impl_->model = std::move(model);
  if (const char* key = std::getenv(api_key_env.c_str())) impl_->api_key = key;
}

std::vector<float> RemoteEmbedder::embed(const std::string& word) {
  {
    std::lock_guard lock(impl_->mu);
    if (auto it = impl_->memo.find(word); it != impl_->memo.end()) return it->second;
  }
  nlohmann::json body = {{"model", impl_->model}, {"input", nlohmann::json::array({word})}};
  std::vector<std::pair<std::string, std::string>> headers;
  if (!impl_->api_key.empty()) headers.emplace_back("Authorization", "Bearer " + impl_->api_key);
  auto result = detail::post_json(impl_->endpoint, headers, body.dump(), std::chrono::seconds(60));
  if (result.status < 200 || result.status >= 300) detail::throw_for_status(result, "embedding endpoint");
  std::vector<float> v;
  try {
    v = nlohmann::json::parse(result.body).at("data").at(0).at("embedding").get<std::vector<float>>();
  } catch (const nlohmann::json::exception& e) {
    throw LlmError(std::string("unexpected embedding payload: ") + e.what());
  }
  l2_normalize(v);
  std::lock_guard lock(impl_->mu);
  impl_->memo.emplace(word, v);
  return v;
}

std::unique_ptr<Embedder> make_embedder(const std::string& spec) {
  if (spec.empty() || spec == "offline-trigram") return std::make_unique<TrigramEmbedder>();
  if (text::istarts_with(spec, "remote:")) return std::make_unique<RemoteEmbedder>(spec.substr(7));
  throw ValidationError("unknown embedder '" + spec + "' (expected offline-trigram or remote:<endpoint>)");
}

}  // namespace colexpand
