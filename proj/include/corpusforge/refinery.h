#pragma once

#include <optional>
#include <string>
#include <vector>

#include "corpusforge/clients.h"
#include "corpusforge/corpus.h"
#include "corpusforge/language.h"
#include "corpusforge/segmenter.h"

namespace corpusforge {

// Expected role order of the non-system messages of a conversation.
struct FlowPattern {
  Role expected_first_role_after_system = Role::kHuman;
  // When false, consecutive turns by the same speaker are tolerated and only
  // the opening role is checked.
  bool strict_alternation = true;
};

bool follows_flow(const Conversation& conversation, const FlowPattern& pattern);

enum class EnglishPolicy { kFlagOnly, kDropMessage, kDropConversation };

std::string_view to_string(EnglishPolicy policy);
std::optional<EnglishPolicy> parse_english_policy(std::string_view s);

struct TriageConfig {
  // "{text}" is replaced with the message text.
  std::string prompt_template =
      "Classify the following message. Reply with exactly one word: TEXT if it "
      "is natural-language prose, CODE if it is source code, markup or a "
      "command.\n\nMessage:\n{text}";
  int max_retries = 2;
  ChatParams params{"", 0.0, 8};
  std::size_t max_in_flight = 4;
};

struct RefineConfig {
  FlowPattern flow;
  double dedup_fraction_threshold = 0.5;
  double min_confidence = 0.7;
  EnglishPolicy english_policy = EnglishPolicy::kFlagOnly;
  TriageConfig triage;
  std::size_t jobs = 1;
};

// Removes conversations with no non-system message, or whose non-system
// messages are all empty after canonicalization.
StageResult drop_empty(Corpus corpus);

// Removes conversations whose non-system messages break `pattern`.
StageResult validate_flow(Corpus corpus, const FlowPattern& pattern);

// Sets content_hash on every message from its canonical text.
void assign_content_hashes(Corpus& corpus);

// A non-system message is duplicated when its hash also occurs among the
// non-system messages of another conversation. Conversations whose
// duplicated fraction is strictly above `fraction_threshold` are removed.
// Verdicts are computed once against the input corpus. Throws MissingHash.
StageResult dedup_conversations(Corpus corpus, double fraction_threshold = 0.5);

// Removes every System message; conversations left without messages are
// removed as well (counters: "emptied_conversations").
StageResult strip_system_prompts(Corpus corpus);

// Sets detected_language on every message. flagged_messages counts messages
// detected as "en" with confidence >= min_confidence. When a segmenter is
// given, the "sentences" counter records the total sentence count.
StageResult annotate_language(Corpus corpus, const LanguageDetector& detector,
                              double min_confidence = 0.7,
                              const SentenceSegmenter* segmenter = nullptr,
                              std::size_t jobs = 1);

// Outcome of classifying one message with the zero-shot prompt.
struct TriageAnnotation {
  std::string message_id;
  std::optional<ContentClass> content_class;  // nullopt when unresolved
  int attempts = 0;
  std::optional<std::string> error;  // transport failure, if any
};

std::string render_triage_prompt(const std::string& prompt_template,
                                 const std::string& text);

// Maps a model reply onto TEXT/CODE, ignoring case, surrounding whitespace,
// quotes and trailing punctuation.
std::optional<ContentClass> parse_triage_reply(std::string_view reply);

// Classifies each message independently. Unparseable replies are retried up
// to config.max_retries more times; transport errors stop that message only.
std::vector<TriageAnnotation> triage_text_vs_code(const std::vector<Message>& messages,
                                                  ChatClient& client,
                                                  const TriageConfig& config);

// Triage stage over the corpus: every non-system message flagged as English
// and not yet classified is sent to the classifier. flagged_messages counts
// messages left unresolved. A null client marks them all unresolved.
StageResult triage_stage(Corpus corpus, ChatClient* client, const TriageConfig& config,
                         double min_confidence = 0.7);

// Acts on messages detected as English (confidence >= min_confidence) and
// classified as natural text.
StageResult apply_english_policy(Corpus corpus, EnglishPolicy policy,
                                 double min_confidence = 0.7);

// drop_empty -> validate_flow -> dedup -> language -> strip_system_prompts ->
// triage -> english policy. Each report is timestamped and appended to the
// corpus manifest. Stage errors are rethrown prefixed with the stage name.
Corpus run_refinement(Corpus corpus, const RefineConfig& config,
                      const LanguageDetector& detector,
                      const SentenceSegmenter& segmenter, ChatClient* triage_client);

}  // namespace corpusforge
