#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace corpusforge {

// Byte range [begin, end) of one sentence inside the segmented text.
struct SentenceSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  bool operator==(const SentenceSpan&) const = default;
};

// Pluggable sentence segmentation. Spans are ordered, non-overlapping, carry
// no leading or trailing whitespace, and the gaps between them hold only
// whitespace, so the input is reconstructible from spans plus gaps.
class SentenceSegmenter {
 public:
  virtual ~SentenceSegmenter() = default;
  virtual std::vector<SentenceSpan> segment_spans(std::string_view text) const = 0;

  std::vector<std::string> segment(std::string_view text) const;
};

// Splits after a run of sentence-final punctuation (. ! ? and the ellipsis
// character, plus trailing closing quotes or brackets) when whitespace and
// then an uppercase letter, digit or opening quote follow. A single period
// closing a stop-listed abbreviation never ends a sentence.
class RuleSegmenter : public SentenceSegmenter {
 public:
  RuleSegmenter();
  explicit RuleSegmenter(std::vector<std::string> abbreviations);

  std::vector<SentenceSpan> segment_spans(std::string_view text) const override;

  const std::vector<std::string>& abbreviations() const { return abbreviations_; }

  static std::vector<std::string> default_italian_abbreviations();

 private:
  bool is_abbreviation(std::string_view word) const;

  std::vector<std::string> abbreviations_;  // lowercase, with trailing '.'
};

// RuleSegmenter with the default Italian stop-list.
std::vector<std::string> segment_sentences(std::string_view text);

}  // namespace corpusforge
