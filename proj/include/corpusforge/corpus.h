#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace corpusforge {

enum class Role { kSystem, kHuman, kAssistant };

enum class Origin { kFauno, kOasst, kGenerated };

enum class ContentClass { kNaturalText, kCode };

std::string_view to_string(Role role);
std::string_view to_string(Origin origin);
std::string_view to_string(ContentClass content_class);

std::optional<Role> parse_role(std::string_view s);
std::optional<Origin> parse_origin(std::string_view s);
std::optional<ContentClass> parse_content_class(std::string_view s);

// ISO 639-1 code plus detector confidence in [0, 1].
struct LanguageTag {
  std::string code;
  double confidence = 0.0;

  bool operator==(const LanguageTag&) const = default;
};

struct Message {
  std::string id;
  Role role = Role::kHuman;
  std::string text;
  std::optional<std::uint64_t> content_hash;
  std::optional<LanguageTag> detected_language;
  std::optional<ContentClass> content_class;
  std::optional<double> quality_nll;  // nats per token
  std::optional<std::string> embedding_ref;

  bool operator==(const Message&) const = default;
};

struct Conversation {
  std::string id;
  Origin origin = Origin::kFauno;
  std::vector<Message> messages;
  std::map<std::string, std::string> provenance;

  std::size_t non_system_count() const;

  bool operator==(const Conversation&) const = default;
};

// One entry of a corpus manifest. Each pipeline stage emits exactly one.
struct StageReport {
  std::string stage_name;
  std::size_t input_conversations = 0;
  std::size_t removed_conversations = 0;
  std::size_t removed_messages = 0;
  std::size_t flagged_messages = 0;
  std::string params_digest;
  std::string timestamp;  // ISO-8601 UTC; empty until stamped by the caller
  std::map<std::string, std::int64_t> counters;
  std::vector<std::string> flagged_ids;
  std::vector<std::string> errors;

  std::size_t surviving_conversations() const {
    return input_conversations - removed_conversations;
  }

  bool operator==(const StageReport&) const = default;
};

struct Corpus {
  std::vector<Conversation> conversations;
  std::vector<StageReport> manifest;

  std::size_t message_count() const;

  bool operator==(const Corpus&) const = default;
};

// Output of one corpus-transforming stage.
struct StageResult {
  Corpus corpus;
  StageReport report;
};

// Throws DuplicateConversationId on the first repeated conversation id, or
// DataError when a conversation repeats a message id.
void check_unique_ids(const Corpus& corpus);

// True when every stage's input count equals the previous stage's surviving
// count and no stage removes more than it received.
bool manifest_consistent(const std::vector<StageReport>& manifest);

// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

}  // namespace corpusforge
