#include "corpusforge/segmenter.h"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>

namespace corpusforge {
namespace {

struct CodePoint {
  std::size_t offset;
  UChar32 value;
};

std::vector<CodePoint> decode(std::string_view text) {
  std::vector<CodePoint> out;
  out.reserve(text.size());
  const auto* p = reinterpret_cast<const uint8_t*>(text.data());
  const int32_t length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    const int32_t start = i;
    UChar32 c;
    U8_NEXT(p, i, length, c);
    out.push_back({static_cast<std::size_t>(start), c < 0 ? 0xFFFD : c});
  }
  return out;
}

bool is_terminator(UChar32 c) {
  return c == '.' || c == '!' || c == '?' || c == 0x2026;
}

bool is_closer(UChar32 c) {
  return c == '"' || c == '\'' || c == ')' || c == ']' || c == 0x00BB ||
         c == 0x201D || c == 0x2019;
}

bool is_opener(UChar32 c) {
  return c == '"' || c == '\'' || c == '(' || c == '[' || c == 0x00AB ||
         c == 0x201C || c == 0x2018 || c == 0x00BF || c == 0x00A1;
}

bool is_space(UChar32 c) { return u_isUWhiteSpace(c); }

bool starts_sentence(UChar32 c) {
  return u_isupper(c) || u_istitle(c) || u_isdigit(c) || is_opener(c);
}

std::string lower_utf8(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (const auto& cp : decode(s)) {
    const UChar32 lowered = u_tolower(cp.value);
    char buf[4];
    int32_t n = 0;
    U8_APPEND_UNSAFE(buf, n, lowered);
    out.append(buf, static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace

std::vector<std::string> SentenceSegmenter::segment(std::string_view text) const {
  std::vector<std::string> sentences;
  for (const auto& span : segment_spans(text)) {
    sentences.emplace_back(text.substr(span.begin, span.end - span.begin));
  }
  return sentences;
}

RuleSegmenter::RuleSegmenter() : RuleSegmenter(default_italian_abbreviations()) {}

RuleSegmenter::RuleSegmenter(std::vector<std::string> abbreviations)
    : abbreviations_(std::move(abbreviations)) {
  for (auto& a : abbreviations_) a = lower_utf8(a);
}

std::vector<std::string> RuleSegmenter::default_italian_abbreviations() {
  return {"sig.", "dott.", "ecc.", "es.", "pag."};
}

bool RuleSegmenter::is_abbreviation(std::string_view word) const {
  const std::string lowered = lower_utf8(word);
  return std::find(abbreviations_.begin(), abbreviations_.end(), lowered) !=
         abbreviations_.end();
}

std::vector<SentenceSpan> RuleSegmenter::segment_spans(std::string_view text) const {
  const auto cps = decode(text);
  const std::size_t n = cps.size();
  auto byte_at = [&](std::size_t i) { return i < n ? cps[i].offset : text.size(); };

  std::vector<SentenceSpan> spans;
  std::size_t i = 0;
  while (i < n && is_space(cps[i].value)) ++i;
  std::size_t sentence_start = i;

  while (i < n) {
    if (!is_terminator(cps[i].value)) {
      ++i;
      continue;
    }
    std::size_t run_end = i;
    while (run_end < n && is_terminator(cps[run_end].value)) ++run_end;
    const bool single_period = run_end - i == 1 && cps[i].value == '.';
    std::size_t after = run_end;
    while (after < n && is_closer(cps[after].value)) ++after;

    std::size_t next = after;
    while (next < n && is_space(cps[next].value)) ++next;
    const bool boundary = next > after && next < n && starts_sentence(cps[next].value);

    if (boundary && single_period && after == run_end) {
      std::size_t word_start = i;
      while (word_start > sentence_start && !is_space(cps[word_start - 1].value)) {
        --word_start;
      }
      while (word_start < i && is_opener(cps[word_start].value)) ++word_start;
      const std::string_view word =
          text.substr(byte_at(word_start), byte_at(i + 1) - byte_at(word_start));
      if (is_abbreviation(word)) {
        i = run_end;
        continue;
      }
    }

    if (boundary) {
      spans.push_back({byte_at(sentence_start), byte_at(after)});
      sentence_start = next;
      i = next;
    } else {
      i = after;
    }
  }

  if (sentence_start < n) {
    std::size_t last = n;
    while (last > sentence_start && is_space(cps[last - 1].value)) --last;
    spans.push_back({byte_at(sentence_start), byte_at(last)});
  }
  return spans;
}

std::vector<std::string> segment_sentences(std::string_view text) {
  static const RuleSegmenter segmenter;
  return segmenter.segment(text);
}

}  // namespace corpusforge
