#include "corpusforge/quality.h"

#include <algorithm>
#include <cmath>

#include "corpusforge/errors.h"
#include "corpusforge/parallel.h"
#include "corpusforge/text.h"

namespace corpusforge {
namespace {

// Masked LMs occasionally report log(1) as a tiny positive number.
constexpr double kPositiveLogprobSlack = 1e-6;

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n'; }

// Byte ranges of the whitespace-separated words of `text`.
std::vector<std::pair<std::size_t, std::size_t>> word_ranges(std::string_view text) {
  std::vector<std::pair<std::size_t, std::size_t>> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    if (i == text.size()) break;
    const std::size_t begin = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    words.emplace_back(begin, i);
  }
  return words;
}

SentenceScore score_window(std::string_view text, MlmScorerClient& scorer,
                           std::size_t max_tokens) {
  const auto tokens = scorer.score(std::string(text));
  if (tokens.empty()) throw ZeroTokens();

  if (max_tokens > 0 && tokens.size() >= max_tokens) {
    const auto words = word_ranges(text);
    if (words.size() >= 2) {
      const std::size_t mid = words.size() / 2;
      const SentenceScore left =
          score_window(text.substr(0, words[mid - 1].second), scorer, max_tokens);
      const SentenceScore right =
          score_window(text.substr(words[mid].first), scorer, max_tokens);
      SentenceScore joined;
      joined.sentence = std::string(text);
      joined.n_tokens = left.n_tokens + right.n_tokens;
      joined.total = left.total + right.total;
      joined.nll = joined.total / static_cast<double>(joined.n_tokens);
      return joined;
    }
  }

  SentenceScore score;
  score.sentence = std::string(text);
  score.n_tokens = tokens.size();
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].position != i) {
      throw TransportError("scorer positions are not contiguous at index " + std::to_string(i));
    }
    double logprob = tokens[i].logprob_true_token;
    if (!std::isfinite(logprob)) throw TransportError("scorer returned a non-finite logprob");
    if (logprob > 0.0) {
      if (logprob > kPositiveLogprobSlack) {
        throw TransportError("scorer returned a positive logprob " + format_double(logprob));
      }
      logprob = 0.0;
    }
    score.total -= logprob;
  }
  score.nll = score.total / static_cast<double>(score.n_tokens);
  return score;
}

}  // namespace

SentenceScore sentence_nll(std::string_view sentence, MlmScorerClient& scorer,
                           std::size_t max_tokens) {
  const std::string text = canonicalize_text(sentence);
  if (text.empty()) throw EmptyText();
  return score_window(text, scorer, max_tokens);
}

std::string_view to_string(Aggregation aggregation) {
  return aggregation == Aggregation::kMax ? "max" : "mean";
}

std::optional<Aggregation> parse_aggregation(std::string_view s) {
  if (s == "mean") return Aggregation::kMean;
  if (s == "max") return Aggregation::kMax;
  return std::nullopt;
}

MessageScore message_quality(std::string_view text, MlmScorerClient& scorer,
                             const SentenceSegmenter& segmenter, Aggregation aggregation,
                             std::size_t max_tokens) {
  const std::string canonical = canonicalize_text(text);
  if (canonical.empty()) throw EmptyText();

  std::vector<SentenceSpan> spans = segmenter.segment_spans(canonical);
  if (spans.empty()) spans.push_back({0, canonical.size()});

  MessageScore result;
  std::exception_ptr first_error;
  bool all_transport = true;
  for (const auto& span : spans) {
    const std::string_view sentence =
        std::string_view(canonical).substr(span.begin, span.end - span.begin);
    try {
      result.sentences.push_back(sentence_nll(sentence, scorer, max_tokens));
    } catch (const TransportError&) {
      if (!first_error) first_error = std::current_exception();
      ++result.failed_sentences;
    } catch (const DataError&) {
      if (!first_error) first_error = std::current_exception();
      all_transport = false;
      ++result.failed_sentences;
    }
  }

  if (result.sentences.empty()) {
    // A lone sentence, or a uniformly unreachable scorer, keeps its own error.
    if (spans.size() == 1 || all_transport) std::rethrow_exception(first_error);
    throw ScoringFailed("none of " + std::to_string(spans.size()) + " sentences could be scored");
  }

  double total = 0.0;
  double worst = 0.0;
  for (const auto& sentence : result.sentences) {
    total += sentence.total;
    result.n_tokens += sentence.n_tokens;
    worst = std::max(worst, sentence.nll);
  }
  result.nll = aggregation == Aggregation::kMax
                   ? worst
                   : total / static_cast<double>(result.n_tokens);
  return result;
}

std::size_t QualityReport::transport_failures() const {
  return static_cast<std::size_t>(std::count_if(
      failures.begin(), failures.end(), [](const QualityFailure& f) { return f.transport; }));
}

nlohmann::ordered_json QualityReport::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["max_tokens"] = max_tokens;
  j["scored"] = scored;
  j["failed"] = failures.size();
  j["transport_failures"] = transport_failures();
  j["histogram"] = histogram.summary_json();
  j["failures"] = nlohmann::ordered_json::array();
  for (const auto& failure : failures) {
    j["failures"].push_back({{"message_id", failure.message_id},
                             {"reason", failure.reason},
                             {"transport", failure.transport}});
  }
  return j;
}

ScoreResult score_corpus(Corpus corpus, MlmScorerClient& scorer,
                         const SentenceSegmenter& segmenter, const QualityOptions& options) {
  const ScorerInfo info = scorer.info();

  std::vector<Message*> messages;
  for (auto& conversation : corpus.conversations) {
    for (auto& message : conversation.messages) messages.push_back(&message);
  }

  struct Outcome {
    std::optional<MessageScore> score;
    std::string error;
    bool transport = false;
  };
  std::vector<Outcome> outcomes(messages.size());
  parallel_for(messages.size(), options.jobs, [&](std::size_t i) {
    try {
      outcomes[i].score = message_quality(messages[i]->text, scorer, segmenter,
                                          options.aggregation, info.max_tokens);
    } catch (const TransportError& e) {
      outcomes[i].error = e.what();
      outcomes[i].transport = true;
    } catch (const DataError& e) {
      outcomes[i].error = e.what();
    }
  });

  ScoreResult result;
  QualityReport& report = result.report;
  report.model = info.model;
  report.max_tokens = info.max_tokens;

  StageReport& stage = result.stage;
  stage.stage_name = "score";
  stage.input_conversations = corpus.conversations.size();
  stage.params_digest = hex_digest(nlohmann::ordered_json{
      {"model", info.model},
      {"max_tokens", info.max_tokens},
      {"aggregation", to_string(options.aggregation)}}.dump());

  std::vector<double> values;
  std::size_t partial = 0;
  for (std::size_t i = 0; i < messages.size(); ++i) {
    Message& message = *messages[i];
    if (outcomes[i].score) {
      message.quality_nll = outcomes[i].score->nll;
      values.push_back(outcomes[i].score->nll);
      if (outcomes[i].score->failed_sentences > 0) ++partial;
    } else {
      message.quality_nll.reset();
      report.failures.push_back({message.id, outcomes[i].error, outcomes[i].transport});
      stage.flagged_ids.push_back(message.id);
      stage.errors.push_back(message.id + ": " + outcomes[i].error);
    }
  }
  report.scored = values.size();
  report.histogram = Histogram::build(values, options.histogram);

  stage.flagged_messages = report.failures.size();
  stage.counters["scored"] = static_cast<std::int64_t>(report.scored);
  stage.counters["failed"] = static_cast<std::int64_t>(report.failures.size());
  stage.counters["transport_failures"] = static_cast<std::int64_t>(report.transport_failures());
  stage.counters["partially_scored"] = static_cast<std::int64_t>(partial);

  result.corpus = std::move(corpus);
  return result;
}

std::string_view to_string(BrokenConversationPolicy policy) {
  return policy == BrokenConversationPolicy::kKeepRemainder ? "keep_remainder"
                                                            : "drop_conversation";
}

std::optional<BrokenConversationPolicy> parse_broken_conversation_policy(std::string_view s) {
  if (s == "drop_conversation") return BrokenConversationPolicy::kDropConversation;
  if (s == "keep_remainder") return BrokenConversationPolicy::kKeepRemainder;
  return std::nullopt;
}

StageResult filter_by_quality(Corpus corpus, const FilterOptions& options) {
  StageResult result;
  StageReport& report = result.report;
  report.stage_name = "filter";
  report.input_conversations = corpus.conversations.size();
  report.params_digest = hex_digest(
      nlohmann::ordered_json{{"threshold", options.threshold},
                             {"broken_conversation_policy", to_string(options.broken)},
                             {"first_role",
                              to_string(options.flow.expected_first_role_after_system)},
                             {"strict", options.flow.strict_alternation}}
          .dump());

  std::int64_t unscored = 0;
  std::int64_t above = 0;
  std::int64_t emptied = 0;
  std::int64_t broken = 0;
  for (auto& conversation : corpus.conversations) {
    std::vector<Message> kept;
    for (auto& message : conversation.messages) {
      if (!message.quality_nll) {
        ++unscored;
      } else if (!(*message.quality_nll < options.threshold)) {
        ++above;
      } else {
        kept.push_back(std::move(message));
        continue;
      }
      ++report.removed_messages;
    }
    const bool lost_any = kept.size() != conversation.messages.size();
    conversation.messages = std::move(kept);

    if (conversation.messages.empty()) {
      ++emptied;
      ++report.removed_conversations;
      continue;
    }
    if (lost_any) {
      if (options.broken == BrokenConversationPolicy::kDropConversation) {
        ++broken;
        ++report.removed_conversations;
        report.removed_messages += conversation.messages.size();
        continue;
      }
      if (!follows_flow(conversation, options.flow)) {
        ++broken;
        report.flagged_ids.push_back(conversation.id);
      }
    }
    result.corpus.conversations.push_back(std::move(conversation));
  }
  report.flagged_messages = 0;
  report.counters["unscored_messages"] = unscored;
  report.counters["at_or_above_threshold"] = above;
  report.counters["emptied_conversations"] = emptied;
  report.counters["broken_conversations"] = broken;
  result.corpus.manifest = std::move(corpus.manifest);
  return result;
}

}  // namespace corpusforge
