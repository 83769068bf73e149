#pragma once

#include <json.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/clients.h"
#include "corpusforge/corpus.h"
#include "corpusforge/histogram.h"
#include "corpusforge/refinery.h"
#include "corpusforge/segmenter.h"

namespace corpusforge {

struct SentenceScore {
  std::string sentence;
  std::size_t n_tokens = 0;
  double nll = 0.0;  // nats per token
  // Sum of -logprob over the tokens, kept for exact recombination.
  double total = 0.0;
};

// Mean negative log-probability of each token of `sentence` when that token
// alone is masked. When max_tokens is non-zero and the scorer reports at
// least max_tokens positions, the sentence may have been truncated by the
// model, so it is split at a word boundary and the halves are scored
// separately and recombined by token count.
// Throws EmptyText, ZeroTokens and TransportError (also for malformed scores).
SentenceScore sentence_nll(std::string_view sentence, MlmScorerClient& scorer,
                           std::size_t max_tokens = 0);

enum class Aggregation { kMean, kMax };

std::string_view to_string(Aggregation aggregation);
std::optional<Aggregation> parse_aggregation(std::string_view s);

struct MessageScore {
  double nll = 0.0;
  std::size_t n_tokens = 0;
  std::vector<SentenceScore> sentences;
  std::size_t failed_sentences = 0;
};

// Scores each sentence of `text`. kMean is the token-weighted mean of the
// sentence scores, which equals the mean over all tokens; kMax is the worst
// sentence. Sentences that fail to score are skipped; when none scores,
// ScoringFailed is thrown. EmptyText for blank input.
MessageScore message_quality(std::string_view text, MlmScorerClient& scorer,
                             const SentenceSegmenter& segmenter,
                             Aggregation aggregation = Aggregation::kMean,
                             std::size_t max_tokens = 0);

struct QualityOptions {
  Aggregation aggregation = Aggregation::kMean;
  HistogramSpec histogram{0.0, 10.0, 50};
  std::size_t jobs = 1;
};

struct QualityFailure {
  std::string message_id;
  std::string reason;
  bool transport = false;
};

struct QualityReport {
  std::string model;
  std::size_t max_tokens = 0;
  std::size_t scored = 0;
  std::vector<QualityFailure> failures;
  Histogram histogram;  // over the scored messages; n, mean, stddev inside

  std::size_t transport_failures() const;
  nlohmann::ordered_json to_json() const;
};

struct ScoreResult {
  Corpus corpus;
  QualityReport report;
  StageReport stage;  // "score"; not timestamped
};

// Sets quality_nll on every message that scores. Failed messages keep their
// previous value cleared and are listed in the report. Calls scorer.info()
// once; a transport error there propagates.
ScoreResult score_corpus(Corpus corpus, MlmScorerClient& scorer,
                         const SentenceSegmenter& segmenter, const QualityOptions& options = {});

enum class BrokenConversationPolicy { kDropConversation, kKeepRemainder };

std::string_view to_string(BrokenConversationPolicy policy);
std::optional<BrokenConversationPolicy> parse_broken_conversation_policy(std::string_view s);

struct FilterOptions {
  double threshold = 2.0;
  BrokenConversationPolicy broken = BrokenConversationPolicy::kDropConversation;
  FlowPattern flow;  // re-checked under kKeepRemainder
};

// Keeps messages with quality_nll strictly below the threshold. Unscored
// messages are removed and counted separately ("unscored_messages").
// Conversations left empty are dropped ("emptied_conversations"). Under
// kDropConversation any conversation that lost a message is dropped
// ("broken_conversations"); under kKeepRemainder the survivors are kept and
// conversations whose flow broke are only counted.
StageResult filter_by_quality(Corpus corpus, const FilterOptions& options = {});

}  // namespace corpusforge
