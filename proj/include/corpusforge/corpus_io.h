#pragma once

#include <json.hpp>

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "corpusforge/corpus.h"

namespace corpusforge {

nlohmann::ordered_json to_json(const Message& message);
nlohmann::ordered_json to_json(const Conversation& conversation);
nlohmann::ordered_json to_json(const StageReport& report);
nlohmann::ordered_json manifest_to_json(const std::vector<StageReport>& manifest);

// Schema-checked decoding. `line` is reported in MalformedRecord.
Conversation conversation_from_json(const nlohmann::json& record, std::size_t line);
StageReport stage_report_from_json(const nlohmann::json& record);
std::vector<StageReport> manifest_from_json(const nlohmann::json& document);

// One conversation per line, keys in schema order, trailing newline.
void write_conversations(std::ostream& out, const Corpus& corpus);
std::string to_jsonl(const Corpus& corpus);

// Reads conversations only; blank lines are skipped.
Corpus read_conversations(std::istream& in);

// `<path>.manifest.json`
std::filesystem::path manifest_path(const std::filesystem::path& corpus_path);

// Writes the corpus to `path` and its manifest to manifest_path(path).
void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);

// Reads the corpus and, when present, its sibling manifest.
Corpus read_corpus_jsonl(const std::filesystem::path& path);

// Whole-file helpers that raise FileError naming the path.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace corpusforge
