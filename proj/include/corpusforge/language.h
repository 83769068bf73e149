#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>

#include "corpusforge/corpus.h"

namespace corpusforge {

// Pluggable language identification. Implementations must be deterministic
// for a fixed input and configuration; they may throw on failure.
class LanguageDetector {
 public:
  virtual ~LanguageDetector() = default;
  virtual LanguageTag detect(std::string_view text) const = 0;
};

// Function-word voting detector for it/en/de/fr/es/pt. Each lowercase word
// token that belongs to a language's function-word list is a vote. The
// winner's confidence is its vote share damped by min(1, votes / 3), so a
// single stray English word in Italian text stays below the usual flagging
// threshold. Text without votes yields {"und", 0}.
class StopwordLanguageDetector : public LanguageDetector {
 public:
  StopwordLanguageDetector();

  LanguageTag detect(std::string_view text) const override;

 private:
  std::unordered_map<std::string, std::unordered_set<std::string>> lexicon_;
};

}  // namespace corpusforge
