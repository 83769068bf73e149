#include "corpusforge/corpus_io.h"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "corpusforge/errors.h"
#include "corpusforge/text.h"

namespace corpusforge {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const std::set<std::string> kConversationKeys = {"id", "origin", "provenance",
                                                 "messages"};
const std::set<std::string> kMessageKeys = {
    "id",          "role",          "text",        "content_hash",
    "detected_language", "content_class", "quality_nll", "embedding_ref"};

void reject_unknown_keys(const json& object, const std::set<std::string>& known,
                         std::size_t line, std::string_view where) {
  for (const auto& [key, value] : object.items()) {
    if (!known.count(key)) {
      throw MalformedRecord(line, "unknown key \"" + key + "\" in " + std::string(where));
    }
  }
}

const json& require(const json& object, const char* key, std::size_t line) {
  const auto it = object.find(key);
  if (it == object.end()) {
    throw MalformedRecord(line, std::string("missing \"") + key + "\"");
  }
  return *it;
}

std::string require_string(const json& object, const char* key, std::size_t line) {
  const json& value = require(object, key, line);
  if (!value.is_string()) {
    throw MalformedRecord(line, std::string("\"") + key + "\" must be a string");
  }
  return value.get<std::string>();
}

// Absent and null are equivalent for optional fields.
const json* optional_field(const json& object, const char* key) {
  const auto it = object.find(key);
  if (it == object.end() || it->is_null()) return nullptr;
  return &*it;
}

std::uint64_t parse_hash(const json& value, std::size_t line) {
  if (!value.is_string()) {
    throw MalformedRecord(line, "content_hash must be a decimal string");
  }
  const auto& s = value.get_ref<const std::string&>();
  std::uint64_t hash = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), hash);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw MalformedRecord(line, "content_hash is not a uint64 decimal: " + s);
  }
  return hash;
}

Message message_from_json(const json& record, std::size_t line) {
  if (!record.is_object()) throw MalformedRecord(line, "message is not an object");
  reject_unknown_keys(record, kMessageKeys, line, "message");

  Message message;
  message.id = require_string(record, "id", line);
  const auto role = parse_role(require_string(record, "role", line));
  if (!role) throw MalformedRecord(line, "invalid role in message " + message.id);
  message.role = *role;
  message.text = require_string(record, "text", line);

  if (const json* hash = optional_field(record, "content_hash")) {
    message.content_hash = parse_hash(*hash, line);
    if (*message.content_hash != content_hash(message.text)) {
      throw MalformedRecord(line, "content_hash does not match text of message " +
                                      message.id);
    }
  }
  if (const json* lang = optional_field(record, "detected_language")) {
    if (!lang->is_object() || !lang->contains("code") ||
        !(*lang)["code"].is_string() || !lang->contains("confidence") ||
        !(*lang)["confidence"].is_number()) {
      throw MalformedRecord(line, "detected_language must be {code, confidence}");
    }
    LanguageTag tag{(*lang)["code"].get<std::string>(),
                    (*lang)["confidence"].get<double>()};
    if (tag.confidence < 0.0 || tag.confidence > 1.0) {
      throw MalformedRecord(line, "language confidence outside [0, 1]");
    }
    message.detected_language = std::move(tag);
  }
  if (const json* cls = optional_field(record, "content_class")) {
    const auto parsed = cls->is_string() ? parse_content_class(cls->get<std::string>())
                                         : std::nullopt;
    if (!parsed) throw MalformedRecord(line, "invalid content_class");
    message.content_class = parsed;
  }
  if (const json* nll = optional_field(record, "quality_nll")) {
    if (!nll->is_number() || nll->get<double>() < 0.0) {
      throw MalformedRecord(line, "quality_nll must be a non-negative number");
    }
    message.quality_nll = nll->get<double>();
  }
  if (const json* ref = optional_field(record, "embedding_ref")) {
    if (!ref->is_string()) throw MalformedRecord(line, "embedding_ref must be a string");
    message.embedding_ref = ref->get<std::string>();
  }
  return message;
}

}  // namespace

ordered_json to_json(const Message& message) {
  ordered_json j;
  j["id"] = message.id;
  j["role"] = to_string(message.role);
  j["text"] = message.text;
  j["content_hash"] = message.content_hash
                          ? ordered_json(std::to_string(*message.content_hash))
                          : ordered_json(nullptr);
  if (message.detected_language) {
    ordered_json lang;
    lang["code"] = message.detected_language->code;
    lang["confidence"] = message.detected_language->confidence;
    j["detected_language"] = std::move(lang);
  } else {
    j["detected_language"] = nullptr;
  }
  j["content_class"] = message.content_class
                           ? ordered_json(to_string(*message.content_class))
                           : ordered_json(nullptr);
  j["quality_nll"] = message.quality_nll ? ordered_json(*message.quality_nll)
                                         : ordered_json(nullptr);
  if (message.embedding_ref) j["embedding_ref"] = *message.embedding_ref;
  return j;
}

ordered_json to_json(const Conversation& conversation) {
  ordered_json j;
  j["id"] = conversation.id;
  j["origin"] = to_string(conversation.origin);
  j["provenance"] = ordered_json::object();
  for (const auto& [key, value] : conversation.provenance) j["provenance"][key] = value;
  j["messages"] = ordered_json::array();
  for (const auto& message : conversation.messages) {
    j["messages"].push_back(to_json(message));
  }
  return j;
}

ordered_json to_json(const StageReport& report) {
  ordered_json j;
  j["stage_name"] = report.stage_name;
  j["input_conversations"] = report.input_conversations;
  j["removed_conversations"] = report.removed_conversations;
  j["removed_messages"] = report.removed_messages;
  j["flagged_messages"] = report.flagged_messages;
  j["params_digest"] = report.params_digest;
  j["timestamp"] = report.timestamp;
  j["counters"] = ordered_json::object();
  for (const auto& [key, value] : report.counters) j["counters"][key] = value;
  j["flagged_ids"] = report.flagged_ids;
  j["errors"] = report.errors;
  return j;
}

ordered_json manifest_to_json(const std::vector<StageReport>& manifest) {
  ordered_json stages = ordered_json::array();
  for (const auto& report : manifest) stages.push_back(to_json(report));
  ordered_json j;
  j["stages"] = std::move(stages);
  return j;
}

Conversation conversation_from_json(const json& record, std::size_t line) {
  if (!record.is_object()) throw MalformedRecord(line, "record is not a JSON object");
  reject_unknown_keys(record, kConversationKeys, line, "conversation");

  Conversation conversation;
  conversation.id = require_string(record, "id", line);
  const auto origin = parse_origin(require_string(record, "origin", line));
  if (!origin) throw MalformedRecord(line, "invalid origin");
  conversation.origin = *origin;

  if (const json* provenance = optional_field(record, "provenance")) {
    if (!provenance->is_object()) throw MalformedRecord(line, "provenance must be an object");
    for (const auto& [key, value] : provenance->items()) {
      if (!value.is_string()) {
        throw MalformedRecord(line, "provenance value for \"" + key + "\" must be a string");
      }
      conversation.provenance[key] = value.get<std::string>();
    }
  }

  const json& messages = require(record, "messages", line);
  if (!messages.is_array()) throw MalformedRecord(line, "messages must be an array");
  if (messages.empty()) throw MalformedRecord(line, "conversation has no messages");
  std::set<std::string> ids;
  for (const auto& m : messages) {
    Message message = message_from_json(m, line);
    if (!ids.insert(message.id).second) {
      throw MalformedRecord(line, "duplicate message id " + message.id);
    }
    conversation.messages.push_back(std::move(message));
  }
  return conversation;
}

StageReport stage_report_from_json(const json& record) {
  StageReport report;
  try {
    report.stage_name = record.at("stage_name").get<std::string>();
    report.input_conversations = record.at("input_conversations").get<std::size_t>();
    report.removed_conversations = record.at("removed_conversations").get<std::size_t>();
    report.removed_messages = record.at("removed_messages").get<std::size_t>();
    report.flagged_messages = record.at("flagged_messages").get<std::size_t>();
    report.params_digest = record.value("params_digest", std::string());
    report.timestamp = record.value("timestamp", std::string());
    if (record.contains("counters")) {
      report.counters = record["counters"].get<std::map<std::string, std::int64_t>>();
    }
    if (record.contains("flagged_ids")) {
      report.flagged_ids = record["flagged_ids"].get<std::vector<std::string>>();
    }
    if (record.contains("errors")) {
      report.errors = record["errors"].get<std::vector<std::string>>();
    }
  } catch (const json::exception& e) {
    throw MalformedRecord(0, std::string("stage report: ") + e.what());
  }
  return report;
}

std::vector<StageReport> manifest_from_json(const json& document) {
  if (!document.is_object() || !document.contains("stages") ||
      !document["stages"].is_array()) {
    throw MalformedRecord(0, "manifest must be {\"stages\": [...]}");
  }
  std::vector<StageReport> manifest;
  for (const auto& stage : document["stages"]) {
    manifest.push_back(stage_report_from_json(stage));
  }
  return manifest;
}

void write_conversations(std::ostream& out, const Corpus& corpus) {
  for (const auto& conversation : corpus.conversations) {
    out << to_json(conversation).dump(-1, ' ', false, json::error_handler_t::replace)
        << '\n';
  }
}

std::string to_jsonl(const Corpus& corpus) {
  std::ostringstream out;
  write_conversations(out, corpus);
  return out.str();
}

Corpus read_conversations(std::istream& in) {
  Corpus corpus;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json record = json::parse(line, nullptr, false);
    if (record.is_discarded()) throw MalformedRecord(line_no, "invalid JSON");
    Conversation conversation = conversation_from_json(record, line_no);
    if (!ids.insert(conversation.id).second) {
      throw DuplicateConversationId(conversation.id);
    }
    corpus.conversations.push_back(std::move(conversation));
  }
  return corpus;
}

std::filesystem::path manifest_path(const std::filesystem::path& corpus_path) {
  return std::filesystem::path(corpus_path.string() + ".manifest.json");
}

void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, to_jsonl(corpus));
  write_file(manifest_path(path), manifest_to_json(corpus.manifest).dump(2) + "\n");
}

Corpus read_corpus_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path.string(), "cannot open corpus file");
  Corpus corpus = read_conversations(in);

  const auto sidecar = manifest_path(path);
  if (std::filesystem::exists(sidecar)) {
    const json document = json::parse(read_file(sidecar), nullptr, false);
    if (document.is_discarded()) throw FileError(sidecar.string(), "invalid manifest JSON");
    corpus.manifest = manifest_from_json(document);
  }
  return corpus;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError(path.string(), "cannot open file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError(path.string(), "cannot open for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw FileError(path.string(), "write failed");
}

}  // namespace corpusforge
