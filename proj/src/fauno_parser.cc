#include "corpusforge/fauno_parser.h"

#include <json.hpp>

#include <regex>

#include "corpusforge/errors.h"
#include "corpusforge/text.h"

namespace corpusforge {
namespace {

// Brackets and pipes are each optional in the pattern; find_speaker_tags()
// rejects matches that lack a pipe or a bracket so plain words never match.
const std::regex& tag_pattern() {
  static const std::regex pattern(
      R"((?:\[\s*){0,2}\|?\s*\b(umano|human|ai)\b\s*\|?(?:\s*\]){0,2})",
      std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
  return pattern;
}

Role role_for_word(std::string word) {
  for (auto& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return word == "ai" ? Role::kAssistant : Role::kHuman;
}

bool has_tag_punctuation(std::string_view match) {
  const bool pipe = match.find('|') != std::string_view::npos;
  const bool bracket = match.find('[') != std::string_view::npos ||
                       match.find(']') != std::string_view::npos;
  return pipe && bracket;
}

bool is_blank(std::string_view s) {
  for (unsigned char c : s) {
    if (!std::isspace(c)) return false;
  }
  return true;
}

std::string_view strip_cr(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace

std::vector<SpeakerTag> find_speaker_tags(std::string_view transcript) {
  std::vector<SpeakerTag> tags;
  const std::string text(transcript);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), tag_pattern());
       it != std::sregex_iterator(); ++it) {
    const auto& match = *it;
    if (!has_tag_punctuation(
            std::string_view(text).substr(match.position(), match.length()))) {
      continue;
    }
    SpeakerTag tag;
    tag.begin = static_cast<std::size_t>(match.position());
    tag.end = tag.begin + static_cast<std::size_t>(match.length());
    tag.role = role_for_word(match[1].str());
    tags.push_back(tag);
  }
  return tags;
}

Conversation parse_raw_fauno(std::string_view transcript,
                             std::string_view conversation_id) {
  const auto tags = find_speaker_tags(transcript);
  if (tags.empty()) {
    const auto newline = transcript.find('\n');
    const std::size_t offset =
        newline == std::string_view::npos ? transcript.size() : newline + 1;
    throw UnparseableTranscript(offset, "no speaker tag after leading block");
  }

  Conversation conversation;
  conversation.id = std::string(conversation_id);
  conversation.origin = Origin::kFauno;

  auto push = [&](Role role, std::string_view raw) {
    Message message;
    message.id = conversation.id + "/" + std::to_string(conversation.messages.size());
    message.role = role;
    message.text = canonicalize_text(raw);
    conversation.messages.push_back(std::move(message));
  };

  const std::string_view leading = transcript.substr(0, tags.front().begin);
  if (!is_blank(leading)) push(Role::kSystem, leading);

  for (std::size_t i = 0; i < tags.size(); ++i) {
    const std::size_t end =
        i + 1 < tags.size() ? tags[i + 1].begin : transcript.size();
    push(tags[i].role, transcript.substr(tags[i].end, end - tags[i].end));
  }
  return conversation;
}

std::vector<RawRecord> split_records(std::string_view content,
                                     const RecordReaderOptions& options) {
  std::vector<RawRecord> records;
  if (options.layout == RecordLayout::kWholeFile) {
    records.push_back({std::string(content), 1});
    return records;
  }

  std::size_t line_no = 0;
  std::size_t pos = 0;
  RawRecord current;
  bool open = false;
  while (pos < content.size()) {
    const auto newline = content.find('\n', pos);
    const std::size_t end = newline == std::string_view::npos ? content.size() : newline;
    const std::string_view line = strip_cr(content.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;

    if (options.layout == RecordLayout::kJsonl) {
      if (is_blank(line)) continue;
      const auto record = nlohmann::json::parse(line, nullptr, false);
      if (record.is_discarded() || !record.is_object()) {
        throw MalformedRecord(line_no, "not a JSON object");
      }
      const auto field = record.find(options.jsonl_field);
      if (field == record.end() || !field->is_string()) {
        throw MalformedRecord(line_no, "missing string field \"" +
                                           options.jsonl_field + "\"");
      }
      records.push_back({field->get<std::string>(), line_no});
      continue;
    }

    if (line == options.delimiter) {
      if (!open) current.line = line_no;
      records.push_back(std::move(current));
      current = RawRecord{};
      open = false;
      continue;
    }
    if (!open) {
      current.line = line_no;
      open = true;
    }
    current.text.append(line);
    current.text.push_back('\n');
  }
  if (options.layout == RecordLayout::kDelimited && open && !is_blank(current.text)) {
    records.push_back(std::move(current));
  }
  return records;
}

}  // namespace corpusforge
