#pragma once

#include <string>
#include <vector>

#include "corpusforge/corpus.h"

namespace corpusforge {

// One turn of a chat-completion request. Roles map to the wire as
// system -> "system", human -> "user", assistant -> "assistant".
struct ChatTurn {
  Role role = Role::kHuman;
  std::string content;
};

struct ChatParams {
  std::string model;
  double temperature = 0.7;
  int max_tokens = 512;
};

// Generator-side chat model. Returns non-empty text or throws
// TransportError; never retries on its own.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(const std::vector<ChatTurn>& turns,
                               const ChatParams& params) = 0;
};

// Sentence embedder. Returns one raw (not necessarily normalized) vector per
// input text, in order. Throws TransportError.
class EmbedderClient {
 public:
  virtual ~EmbedderClient() = default;
  virtual std::vector<std::vector<float>> embed_batch(
      const std::vector<std::string>& texts) = 0;
};

// Per-position masked-LM score: natural-log probability of the true token
// when that position alone is masked.
struct TokenScore {
  std::size_t position = 0;
  std::string token_text;
  double logprob_true_token = 0.0;
};

struct ScorerInfo {
  std::string model;
  std::size_t max_tokens = 512;
};

class MlmScorerClient {
 public:
  virtual ~MlmScorerClient() = default;
  virtual ScorerInfo info() = 0;
  virtual std::vector<TokenScore> score(const std::string& text) = 0;
};

}  // namespace corpusforge
