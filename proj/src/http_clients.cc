#include "corpusforge/http_clients.h"

#include <httplib.h>

#include <cmath>

#include "corpusforge/errors.h"

namespace corpusforge {
namespace {

std::string_view wire_role(Role role) {
  switch (role) {
    case Role::kSystem:
      return "system";
    case Role::kHuman:
      return "user";
    case Role::kAssistant:
      return "assistant";
  }
  return "user";
}

httplib::Client make_client(const Endpoint& endpoint, const HttpOptions& options) {
  httplib::Client client(endpoint.origin);
  client.set_connection_timeout(options.connect_timeout);
  client.set_read_timeout(options.read_timeout);
  client.set_write_timeout(options.read_timeout);
  return client;
}

nlohmann::json checked_json(const httplib::Result& result, const std::string& what) {
  if (!result) {
    throw TransportError(what + ": " + httplib::to_string(result.error()));
  }
  if (result->status < 200 || result->status >= 300) {
    std::string body = result->body.substr(0, 200);
    throw TransportError(what + ": HTTP " + std::to_string(result->status) +
                         (body.empty() ? "" : " " + body));
  }
  auto json = nlohmann::json::parse(result->body, nullptr, false);
  if (json.is_discarded()) throw TransportError(what + ": response is not JSON");
  return json;
}

nlohmann::json post_json(const Endpoint& endpoint, const HttpOptions& options,
                         const std::string& suffix, const nlohmann::json& body,
                         const httplib::Headers& headers = {}) {
  auto client = make_client(endpoint, options);
  const std::string path = endpoint.path(suffix);
  return checked_json(client.Post(path, headers, body.dump(), "application/json"),
                      "POST " + path);
}

template <typename T>
T field(const nlohmann::json& json, const char* key, const std::string& what) {
  try {
    return json.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw TransportError(what + ": missing or mistyped \"" + key + "\"");
  }
}

}  // namespace

Endpoint Endpoint::parse(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw ConfigError("unsupported endpoint scheme: " + url);
  }
  const auto host_begin = scheme_end + 3;
  const auto path_begin = url.find('/', host_begin);
  Endpoint endpoint;
  endpoint.origin = url.substr(0, path_begin);
  if (endpoint.origin.size() == host_begin) throw ConfigError("endpoint URL lacks a host: " + url);
  if (path_begin != std::string::npos) {
    endpoint.base_path = url.substr(path_begin);
    while (!endpoint.base_path.empty() && endpoint.base_path.back() == '/') {
      endpoint.base_path.pop_back();
    }
  }
  return endpoint;
}

HttpChatClient::HttpChatClient(const std::string& url, std::string bearer_token,
                               HttpOptions options)
    : endpoint_(Endpoint::parse(url)), token_(std::move(bearer_token)), options_(options) {}

nlohmann::json HttpChatClient::request_body(const std::vector<ChatTurn>& turns,
                                            const ChatParams& params) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& turn : turns) {
    messages.push_back({{"role", wire_role(turn.role)}, {"content", turn.content}});
  }
  return {{"model", params.model},
          {"messages", std::move(messages)},
          {"temperature", params.temperature},
          {"max_tokens", params.max_tokens}};
}

std::string HttpChatClient::complete(const std::vector<ChatTurn>& turns,
                                     const ChatParams& params) {
  httplib::Headers headers;
  if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
  const auto reply = post_json(endpoint_, options_, "/v1/chat/completions",
                               request_body(turns, params), headers);
  const std::string what = "chat completion";
  std::string content;
  try {
    content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw TransportError(what + ": no choices[0].message.content in response");
  }
  if (content.empty()) throw TransportError(what + ": empty content");
  return content;
}

HttpEmbedderClient::HttpEmbedderClient(const std::string& url, std::size_t expected_dim,
                                       HttpOptions options)
    : endpoint_(Endpoint::parse(url)), expected_dim_(expected_dim), options_(options) {}

std::vector<std::vector<float>> HttpEmbedderClient::embed_batch(
    const std::vector<std::string>& texts) {
  const std::string what = "embed";
  const auto reply = post_json(endpoint_, options_, "/embed", {{"texts", texts}});
  const auto dim = field<std::size_t>(reply, "dim", what);
  if (expected_dim_ != 0 && dim != expected_dim_) {
    throw TransportError(what + ": server dimension " + std::to_string(dim) + ", expected " +
                         std::to_string(expected_dim_));
  }
  auto vectors = field<std::vector<std::vector<float>>>(reply, "vectors", what);
  if (vectors.size() != texts.size()) {
    throw TransportError(what + ": " + std::to_string(vectors.size()) + " vectors for " +
                         std::to_string(texts.size()) + " texts");
  }
  for (const auto& v : vectors) {
    if (v.size() != dim) throw TransportError(what + ": vector length differs from dim");
  }
  return vectors;
}

HttpMlmScorer::HttpMlmScorer(const std::string& url, HttpOptions options)
    : endpoint_(Endpoint::parse(url)), options_(options) {}

ScorerInfo HttpMlmScorer::info() {
  auto client = make_client(endpoint_, options_);
  const std::string path = endpoint_.path("/mlm/info");
  const auto reply = checked_json(client.Get(path), "GET " + path);
  ScorerInfo info;
  info.model = field<std::string>(reply, "model", "mlm info");
  info.max_tokens = field<std::size_t>(reply, "max_tokens", "mlm info");
  return info;
}

std::vector<TokenScore> HttpMlmScorer::score(const std::string& text) {
  const std::string what = "mlm score";
  const auto reply = post_json(endpoint_, options_, "/mlm/score", {{"text", text}});
  const auto tokens = field<std::vector<std::string>>(reply, "tokens", what);
  const auto logprobs = field<std::vector<double>>(reply, "logprobs", what);
  if (tokens.size() != logprobs.size()) {
    throw TransportError(what + ": tokens and logprobs differ in length");
  }
  std::vector<TokenScore> scores;
  scores.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) scores.push_back({i, tokens[i], logprobs[i]});
  return scores;
}

}  // namespace corpusforge
