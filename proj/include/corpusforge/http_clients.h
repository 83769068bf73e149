#pragma once

#include <json.hpp>

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "corpusforge/clients.h"

namespace corpusforge {

// "http://host:port/base" split into the origin httplib connects to and the
// path prefix prepended to every endpoint.
struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string base_path;  // "" or "/prefix" without trailing slash

  // Throws ConfigError for anything but an http or https URL.
  static Endpoint parse(const std::string& url);
  std::string path(const std::string& suffix) const { return base_path + suffix; }
};

struct HttpOptions {
  std::chrono::seconds connect_timeout{10};
  std::chrono::seconds read_timeout{120};
};

// POST {"model", "messages", "temperature", "max_tokens"} to
// /v1/chat/completions and return choices[0].message.content.
class HttpChatClient : public ChatClient {
 public:
  HttpChatClient(const std::string& url, std::string bearer_token, HttpOptions options = {});

  std::string complete(const std::vector<ChatTurn>& turns, const ChatParams& params) override;

  // Request body for the given turns; exposed for tests.
  static nlohmann::json request_body(const std::vector<ChatTurn>& turns, const ChatParams& params);

 private:
  Endpoint endpoint_;
  std::string token_;
  HttpOptions options_;
};

// POST {"texts": [...]} to /embed, expecting {"vectors": [[...]], "dim": D}.
// A non-zero expected_dim is checked against every response.
class HttpEmbedderClient : public EmbedderClient {
 public:
  HttpEmbedderClient(const std::string& url, std::size_t expected_dim = 0,
                     HttpOptions options = {});

  std::vector<std::vector<float>> embed_batch(const std::vector<std::string>& texts) override;

 private:
  Endpoint endpoint_;
  std::size_t expected_dim_;
  HttpOptions options_;
};

// GET /mlm/info and POST /mlm/score {"text"} -> {"tokens", "logprobs"}.
class HttpMlmScorer : public MlmScorerClient {
 public:
  explicit HttpMlmScorer(const std::string& url, HttpOptions options = {});

  ScorerInfo info() override;
  std::vector<TokenScore> score(const std::string& text) override;

 private:
  Endpoint endpoint_;
  HttpOptions options_;
};

}  // namespace corpusforge
