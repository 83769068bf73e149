#include "corpusforge/refinery.h"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <unordered_map>
#include <unordered_set>

#include "corpusforge/errors.h"
#include "corpusforge/parallel.h"
#include "corpusforge/text.h"

namespace corpusforge {
namespace {

std::string digest_of(const nlohmann::ordered_json& params) {
  return hex_digest(params.dump());
}

StageReport make_report(std::string name, const Corpus& input) {
  StageReport report;
  report.stage_name = std::move(name);
  report.input_conversations = input.conversations.size();
  return report;
}

bool is_english(const Message& message, double min_confidence) {
  return message.detected_language && message.detected_language->code == "en" &&
         message.detected_language->confidence >= min_confidence;
}

// Keeps conversations for which keep(conversation) holds, updating the
// removal counters of `report`.
template <typename Pred>
void retain_conversations(Corpus& corpus, StageReport& report, Pred keep) {
  std::vector<Conversation> kept;
  kept.reserve(corpus.conversations.size());
  for (auto& conversation : corpus.conversations) {
    if (keep(conversation)) {
      kept.push_back(std::move(conversation));
    } else {
      ++report.removed_conversations;
      report.removed_messages += conversation.messages.size();
    }
  }
  corpus.conversations = std::move(kept);
}

}  // namespace

bool follows_flow(const Conversation& conversation, const FlowPattern& pattern) {
  std::optional<Role> previous;
  for (const auto& message : conversation.messages) {
    if (message.role == Role::kSystem) continue;
    if (!previous) {
      if (message.role != pattern.expected_first_role_after_system) return false;
    } else if (pattern.strict_alternation && message.role == *previous) {
      return false;
    }
    previous = message.role;
  }
  return true;
}

std::string_view to_string(EnglishPolicy policy) {
  switch (policy) {
    case EnglishPolicy::kFlagOnly:
      return "flag_only";
    case EnglishPolicy::kDropMessage:
      return "drop_message";
    case EnglishPolicy::kDropConversation:
      return "drop_conversation";
  }
  return "flag_only";
}

std::optional<EnglishPolicy> parse_english_policy(std::string_view s) {
  if (s == "flag_only") return EnglishPolicy::kFlagOnly;
  if (s == "drop_message") return EnglishPolicy::kDropMessage;
  if (s == "drop_conversation") return EnglishPolicy::kDropConversation;
  return std::nullopt;
}

StageResult drop_empty(Corpus corpus) {
  StageReport report = make_report("drop_empty", corpus);
  report.params_digest = digest_of({{"stage", "drop_empty"}});
  retain_conversations(corpus, report, [](const Conversation& conversation) {
    return std::any_of(conversation.messages.begin(), conversation.messages.end(),
                       [](const Message& m) {
                         return m.role != Role::kSystem && !canonicalize_text(m.text).empty();
                       });
  });
  return {std::move(corpus), std::move(report)};
}

StageResult validate_flow(Corpus corpus, const FlowPattern& pattern) {
  StageReport report = make_report("validate_flow", corpus);
  report.params_digest =
      digest_of({{"first_role", to_string(pattern.expected_first_role_after_system)},
                 {"strict", pattern.strict_alternation}});
  retain_conversations(corpus, report, [&](const Conversation& conversation) {
    return follows_flow(conversation, pattern);
  });
  return {std::move(corpus), std::move(report)};
}

void assign_content_hashes(Corpus& corpus) {
  for (auto& conversation : corpus.conversations) {
    for (auto& message : conversation.messages) {
      message.content_hash = content_hash(message.text);
    }
  }
}

StageResult dedup_conversations(Corpus corpus, double fraction_threshold) {
  StageReport report = make_report("dedup", corpus);
  report.params_digest = digest_of({{"fraction_threshold", fraction_threshold}});

  // hash -> number of distinct conversations holding it
  std::unordered_map<std::uint64_t, std::size_t> holders;
  for (const auto& conversation : corpus.conversations) {
    std::unordered_set<std::uint64_t> seen;
    for (const auto& message : conversation.messages) {
      if (!message.content_hash) throw MissingHash(message.id);
      if (message.role == Role::kSystem) continue;
      if (seen.insert(*message.content_hash).second) ++holders[*message.content_hash];
    }
  }

  std::size_t duplicated_total = 0;
  retain_conversations(corpus, report, [&](const Conversation& conversation) {
    std::size_t total = 0;
    std::size_t duplicated = 0;
    for (const auto& message : conversation.messages) {
      if (message.role == Role::kSystem) continue;
      ++total;
      if (holders[*message.content_hash] >= 2) ++duplicated;
    }
    duplicated_total += duplicated;
    if (total == 0) return true;
    return static_cast<double>(duplicated) / static_cast<double>(total) <=
           fraction_threshold;
  });
  report.counters["duplicated_messages"] = static_cast<std::int64_t>(duplicated_total);
  return {std::move(corpus), std::move(report)};
}

StageResult strip_system_prompts(Corpus corpus) {
  StageReport report = make_report("strip_system_prompts", corpus);
  report.params_digest = digest_of({{"stage", "strip_system_prompts"}});
  std::int64_t emptied = 0;
  std::vector<Conversation> kept;
  for (auto& conversation : corpus.conversations) {
    auto& messages = conversation.messages;
    const auto first_system = std::remove_if(messages.begin(), messages.end(), [](const Message& m) {
      return m.role == Role::kSystem;
    });
    report.removed_messages += static_cast<std::size_t>(messages.end() - first_system);
    messages.erase(first_system, messages.end());
    if (messages.empty()) {
      ++report.removed_conversations;
      ++emptied;
    } else {
      kept.push_back(std::move(conversation));
    }
  }
  corpus.conversations = std::move(kept);
  report.counters["emptied_conversations"] = emptied;
  return {std::move(corpus), std::move(report)};
}

StageResult annotate_language(Corpus corpus, const LanguageDetector& detector,
                              double min_confidence, const SentenceSegmenter* segmenter,
                              std::size_t jobs) {
  StageReport report = make_report("annotate_language", corpus);
  report.params_digest = digest_of({{"min_confidence", min_confidence}});

  std::vector<Message*> messages;
  for (auto& conversation : corpus.conversations) {
    for (auto& message : conversation.messages) messages.push_back(&message);
  }
  std::vector<std::size_t> sentence_counts(messages.size(), 0);
  parallel_for(messages.size(), jobs, [&](std::size_t i) {
    Message& message = *messages[i];
    try {
      message.detected_language = detector.detect(message.text);
    } catch (const std::exception& e) {
      throw DetectorFailure(message.id, e.what());
    }
    if (segmenter) sentence_counts[i] = segmenter->segment_spans(message.text).size();
  });

  std::int64_t english_system = 0;
  for (const Message* message : messages) {
    if (!is_english(*message, min_confidence)) continue;
    ++report.flagged_messages;
    report.flagged_ids.push_back(message->id);
    if (message->role == Role::kSystem) ++english_system;
  }
  report.counters["english_system_prompts"] = english_system;
  if (segmenter) {
    std::int64_t sentences = 0;
    for (auto n : sentence_counts) sentences += static_cast<std::int64_t>(n);
    report.counters["sentences"] = sentences;
  }
  return {std::move(corpus), std::move(report)};
}

std::string render_triage_prompt(const std::string& prompt_template,
                                 const std::string& text) {
  static const std::string kPlaceholder = "{text}";
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto hit = prompt_template.find(kPlaceholder, pos);
    if (hit == std::string::npos) break;
    out.append(prompt_template, pos, hit - pos);
    out.append(text);
    pos = hit + kPlaceholder.size();
  }
  out.append(prompt_template, pos, std::string::npos);
  return out;
}

std::optional<ContentClass> parse_triage_reply(std::string_view reply) {
  // Exactly one ASCII word; any other byte acts as a separator.
  std::string word;
  bool word_done = false;
  for (unsigned char c : reply) {
    if (std::isalnum(c)) {
      if (word_done) return std::nullopt;
      word.push_back(static_cast<char>(std::toupper(c)));
    } else if (!word.empty()) {
      word_done = true;
    }
  }
  if (word == "TEXT") return ContentClass::kNaturalText;
  if (word == "CODE") return ContentClass::kCode;
  return std::nullopt;
}

std::vector<TriageAnnotation> triage_text_vs_code(const std::vector<Message>& messages,
                                                  ChatClient& client,
                                                  const TriageConfig& config) {
  std::vector<TriageAnnotation> annotations(messages.size());
  parallel_for(messages.size(), config.max_in_flight, [&](std::size_t i) {
    const Message& message = messages[i];
    TriageAnnotation& annotation = annotations[i];
    annotation.message_id = message.id;
    const std::vector<ChatTurn> turns = {
        {Role::kHuman, render_triage_prompt(config.prompt_template, message.text)}};
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
      ++annotation.attempts;
      try {
        annotation.content_class = parse_triage_reply(client.complete(turns, config.params));
      } catch (const TransportError& e) {
        annotation.error = e.what();
        return;
      }
      if (annotation.content_class) return;
    }
  });
  return annotations;
}

StageResult triage_stage(Corpus corpus, ChatClient* client, const TriageConfig& config,
                         double min_confidence) {
  StageReport report = make_report("triage", corpus);
  report.params_digest = digest_of({{"prompt_template", config.prompt_template},
                                    {"max_retries", config.max_retries},
                                    {"model", config.params.model},
                                    {"temperature", config.params.temperature},
                                    {"max_tokens", config.params.max_tokens}});

  std::vector<Message*> targets;
  std::vector<Message> requests;
  for (auto& conversation : corpus.conversations) {
    for (auto& message : conversation.messages) {
      if (message.role == Role::kSystem || message.content_class ||
          !is_english(message, min_confidence)) {
        continue;
      }
      targets.push_back(&message);
      requests.push_back(message);
    }
  }
  report.counters["triaged"] = static_cast<std::int64_t>(targets.size());

  std::vector<TriageAnnotation> annotations;
  if (client) {
    annotations = triage_text_vs_code(requests, *client, config);
  } else {
    for (const auto& m : requests) {
      annotations.push_back({m.id, std::nullopt, 0, "no triage endpoint configured"});
    }
  }

  std::int64_t code = 0;
  std::int64_t text = 0;
  std::int64_t transport_errors = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& annotation = annotations[i];
    if (annotation.content_class) {
      targets[i]->content_class = annotation.content_class;
      (*annotation.content_class == ContentClass::kCode ? code : text)++;
      continue;
    }
    ++report.flagged_messages;
    report.flagged_ids.push_back(annotation.message_id);
    if (annotation.error) {
      ++transport_errors;
      report.errors.push_back(annotation.message_id + ": " + *annotation.error);
    }
  }
  report.counters["code"] = code;
  report.counters["natural_text"] = text;
  report.counters["transport_errors"] = transport_errors;
  return {std::move(corpus), std::move(report)};
}

StageResult apply_english_policy(Corpus corpus, EnglishPolicy policy, double min_confidence) {
  StageReport report = make_report("english_policy", corpus);
  report.params_digest =
      digest_of({{"policy", to_string(policy)}, {"min_confidence", min_confidence}});

  auto is_candidate = [&](const Message& m) {
    return is_english(m, min_confidence) && m.content_class == ContentClass::kNaturalText;
  };
  for (const auto& conversation : corpus.conversations) {
    for (const auto& message : conversation.messages) {
      if (is_candidate(message)) {
        ++report.flagged_messages;
        report.flagged_ids.push_back(message.id);
      }
    }
  }

  switch (policy) {
    case EnglishPolicy::kFlagOnly:
      break;
    case EnglishPolicy::kDropConversation:
      retain_conversations(corpus, report, [&](const Conversation& conversation) {
        return std::none_of(conversation.messages.begin(), conversation.messages.end(),
                            is_candidate);
      });
      break;
    case EnglishPolicy::kDropMessage: {
      std::vector<Conversation> kept;
      for (auto& conversation : corpus.conversations) {
        auto& messages = conversation.messages;
        const auto tail = std::remove_if(messages.begin(), messages.end(), is_candidate);
        report.removed_messages += static_cast<std::size_t>(messages.end() - tail);
        messages.erase(tail, messages.end());
        if (messages.empty()) {
          ++report.removed_conversations;
        } else {
          kept.push_back(std::move(conversation));
        }
      }
      corpus.conversations = std::move(kept);
      break;
    }
  }
  return {std::move(corpus), std::move(report)};
}

Corpus run_refinement(Corpus corpus, const RefineConfig& config,
                      const LanguageDetector& detector, const SentenceSegmenter& segmenter,
                      ChatClient* triage_client) {
  auto record = [&](StageResult result) {
    result.report.timestamp = utc_timestamp();
    result.corpus.manifest.push_back(std::move(result.report));
    corpus = std::move(result.corpus);
  };
  auto stage = [&](const char* name, auto&& run) {
    try {
      record(run(std::move(corpus)));
    } catch (const DataError& e) {
      throw DataError(std::string(name) + ": " + e.what());
    }
  };

  stage("drop_empty", [](Corpus c) { return drop_empty(std::move(c)); });
  stage("validate_flow", [&](Corpus c) { return validate_flow(std::move(c), config.flow); });
  stage("dedup", [&](Corpus c) {
    assign_content_hashes(c);
    return dedup_conversations(std::move(c), config.dedup_fraction_threshold);
  });
  stage("annotate_language", [&](Corpus c) {
    return annotate_language(std::move(c), detector, config.min_confidence, &segmenter,
                             config.jobs);
  });
  stage("strip_system_prompts", [](Corpus c) { return strip_system_prompts(std::move(c)); });
  stage("triage", [&](Corpus c) {
    return triage_stage(std::move(c), triage_client, config.triage, config.min_confidence);
  });
  stage("english_policy", [&](Corpus c) {
    return apply_english_policy(std::move(c), config.english_policy, config.min_confidence);
  });
  return corpus;
}

}  // namespace corpusforge
