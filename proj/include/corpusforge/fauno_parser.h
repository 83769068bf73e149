#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "corpusforge/corpus.h"

namespace corpusforge {

// A speaker tag located in a raw transcript: bytes [begin, end) of the input.
struct SpeakerTag {
  std::size_t begin = 0;
  std::size_t end = 0;
  Role role = Role::kHuman;
};

// Finds every speaker tag in `transcript`, in order. The grammar tolerates
// whitespace inside the tag, any letter case, one or two brackets on either
// side and a missing pipe or bracket, as long as the tag keeps at least one
// pipe and one bracket. Role words: Umano/Human -> Human, AI -> Assistant.
std::vector<SpeakerTag> find_speaker_tags(std::string_view transcript);

// Parses one raw tagged transcript. Text before the first tag becomes the
// System message (omitted when blank); each tag opens a Human or Assistant
// message running to the next tag. Message ids are "<conversation_id>/<n>".
// Throws UnparseableTranscript when no tag follows the leading block.
Conversation parse_raw_fauno(std::string_view transcript,
                             std::string_view conversation_id);

enum class RecordLayout {
  kWholeFile,  // the input holds exactly one transcript
  kDelimited,  // transcripts separated by lines equal to a delimiter
  kJsonl,      // one JSON object per line, transcript under a named field
};

struct RecordReaderOptions {
  RecordLayout layout = RecordLayout::kDelimited;
  std::string delimiter = "<|endofconversation|>";
  std::string jsonl_field = "input";
};

struct RawRecord {
  std::string text;
  std::size_t line = 1;  // 1-based line where the record starts
};

// Splits a raw Fauno dump into per-conversation transcripts. Blank records are
// kept so callers can count them; a malformed JSONL line throws
// MalformedRecord.
std::vector<RawRecord> split_records(std::string_view content,
                                     const RecordReaderOptions& options);

}  // namespace corpusforge
