#include "corpusforge/corpus.h"

#include <chrono>
#include <ctime>
#include <set>

#include "corpusforge/errors.h"

namespace corpusforge {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kSystem:
      return "system";
    case Role::kHuman:
      return "human";
    case Role::kAssistant:
      return "assistant";
  }
  return "human";
}

std::string_view to_string(Origin origin) {
  switch (origin) {
    case Origin::kFauno:
      return "fauno";
    case Origin::kOasst:
      return "oasst";
    case Origin::kGenerated:
      return "generated";
  }
  return "fauno";
}

std::string_view to_string(ContentClass content_class) {
  return content_class == ContentClass::kCode ? "code" : "natural_text";
}

std::optional<Role> parse_role(std::string_view s) {
  if (s == "system") return Role::kSystem;
  if (s == "human") return Role::kHuman;
  if (s == "assistant") return Role::kAssistant;
  return std::nullopt;
}

std::optional<Origin> parse_origin(std::string_view s) {
  if (s == "fauno") return Origin::kFauno;
  if (s == "oasst") return Origin::kOasst;
  if (s == "generated") return Origin::kGenerated;
  return std::nullopt;
}

std::optional<ContentClass> parse_content_class(std::string_view s) {
  if (s == "natural_text") return ContentClass::kNaturalText;
  if (s == "code") return ContentClass::kCode;
  return std::nullopt;
}

std::size_t Conversation::non_system_count() const {
  std::size_t n = 0;
  for (const auto& m : messages) {
    if (m.role != Role::kSystem) ++n;
  }
  return n;
}

std::size_t Corpus::message_count() const {
  std::size_t n = 0;
  for (const auto& c : conversations) n += c.messages.size();
  return n;
}

void check_unique_ids(const Corpus& corpus) {
  std::set<std::string_view> conversation_ids;
  for (const auto& conversation : corpus.conversations) {
    if (!conversation_ids.insert(conversation.id).second) {
      throw DuplicateConversationId(conversation.id);
    }
    std::set<std::string_view> message_ids;
    for (const auto& message : conversation.messages) {
      if (!message_ids.insert(message.id).second) {
        throw DataError("conversation " + conversation.id +
                        " repeats message id " + message.id);
      }
    }
  }
}

bool manifest_consistent(const std::vector<StageReport>& manifest) {
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const auto& stage = manifest[i];
    if (stage.removed_conversations > stage.input_conversations) return false;
    if (i > 0 &&
        stage.input_conversations != manifest[i - 1].surviving_conversations()) {
      return false;
    }
  }
  return true;
}

std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace corpusforge
