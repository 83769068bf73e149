#include "corpusforge/language.h"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <map>
#include <vector>

namespace corpusforge {
namespace {

std::vector<std::string> lowercase_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  const auto* p = reinterpret_cast<const uint8_t*>(text.data());
  const int32_t length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(p, i, length, c);
    if (c >= 0 && (u_isalpha(c) || c == '\'')) {
      if (c == '\'') {
        // Elision splits "l'acqua" into "l'" + "acqua".
        if (!current.empty()) {
          current.push_back('\'');
          words.push_back(std::move(current));
          current.clear();
        }
        continue;
      }
      char buf[4];
      int32_t n = 0;
      U8_APPEND_UNSAFE(buf, n, u_tolower(c));
      current.append(buf, static_cast<std::size_t>(n));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

}  // namespace

StopwordLanguageDetector::StopwordLanguageDetector() {
  lexicon_["it"] = {"il",    "lo",    "la",     "i",     "gli",   "le",    "un",
                    "uno",   "una",   "di",    "del",   "della", "dei",   "delle",
                    "da",    "dal",   "in",    "nel",   "nella", "con",   "su",
                    "sul",   "per",   "tra",   "fra",   "e",     "ed",    "che",
                    "non",   "è",     "sono",  "sei",   "siamo", "ho",    "hai",
                    "ha",    "abbiamo", "come", "cosa", "perché", "ma",   "anche",
                    "questo", "questa", "quello", "quella", "mi",  "ti",    "ci",
                    "si",    "vi",    "posso", "puoi",  "può",   "grazie", "ciao",
                    "oggi",  "sempre", "molto", "più",  "se",    "o",     "l'",
                    "un'",   "dell'", "all'", "nell'", "sull'", "c'",   "aiutarti",
                    "buongiorno", "essere", "fare", "alla", "allo", "alle", "ai",
                    "degli", "negli", "sulla", "qui", "dove", "quando", "io",
                    "tu",    "lui",   "lei",   "noi",   "voi",   "loro",  "mio",
                    "tuo",   "suo",   "nostro", "ecco", "sì",    "certo"};
  lexicon_["en"] = {"the",  "a",     "an",    "of",    "to",    "in",   "and",
                    "or",   "is",    "are",   "was",   "were",  "be",   "been",
                    "it",   "this",  "that",  "these", "those", "for",  "with",
                    "on",   "at",    "by",    "from",  "as",    "not",  "but",
                    "if",   "then",  "else",  "how",   "what",  "which", "who",
                    "you",  "your",  "i",     "we",    "they",  "he",   "she",
                    "my",   "our",   "their", "can",   "could", "will", "would",
                    "should", "do",  "does",  "did",   "have",  "has",  "had",
                    "there", "here", "over",  "about", "into",  "out",  "up",
                    "hello", "thanks", "please", "yes", "no",   "return", "true",
                    "false", "null", "def",   "self",  "print", "import", "while",
                    "int",  "void",  "new",   "function", "var", "let",  "const"};
  lexicon_["de"] = {"der", "die",   "das",  "und",  "ist",   "nicht", "ein",  "eine",
                    "zu",  "den",   "von",  "mit",  "sich",  "des",   "auf",  "für",
                    "im",  "dem",   "auch", "es",   "an",    "werden", "aus", "er",
                    "sie", "wir",   "ich",  "du",   "ihr",   "sind",  "hat",  "wie",
                    "was", "bitte", "danke", "hallo", "nach", "bei",   "noch", "oder"};
  lexicon_["fr"] = {"le",   "la",   "les",  "un",   "une",   "des",  "de",   "du",
                    "et",   "est",  "sont", "pas",  "ne",    "que",  "qui",  "dans",
                    "pour", "avec", "sur",  "au",   "aux",   "ce",   "cette", "il",
                    "elle", "nous", "vous", "ils",  "je",    "tu",   "mais", "ou",
                    "bonjour", "merci", "comment", "j'", "d'", "qu'", "n'",   "très"};
  lexicon_["es"] = {"el",   "la",   "los",  "las",  "un",    "una",  "de",   "del",
                    "y",    "es",   "son",  "no",   "que",   "en",   "con",  "por",
                    "para", "como", "pero", "su",   "al",    "lo",   "se",   "yo",
                    "tú",   "él",   "ella", "nosotros", "hola", "gracias", "muy", "está",
                    "qué",  "cómo", "puedo", "hoy", "también", "más",  "porque", "este"};
  lexicon_["pt"] = {"o",    "a",    "os",   "as",   "um",    "uma",  "de",   "do",
                    "da",   "dos",  "das",  "e",    "é",     "são",  "não",  "que",
                    "em",   "no",   "na",   "com",  "por",   "para", "como", "mas",
                    "seu",  "sua",  "eu",   "você", "ele",   "ela",  "nós",  "olá",
                    "obrigado", "muito", "hoje", "também", "mais", "porque", "este", "isso"};
}

LanguageTag StopwordLanguageDetector::detect(std::string_view text) const {
  std::map<std::string, std::size_t> votes;  // ordered for deterministic ties
  std::size_t total = 0;
  for (const auto& word : lowercase_words(text)) {
    for (const auto& [code, words] : lexicon_) {
      if (words.count(word)) {
        ++votes[code];
        ++total;
      }
    }
  }
  if (total == 0) return {"und", 0.0};

  const auto best = std::max_element(
      votes.begin(), votes.end(),
      [](const auto& a, const auto& b) { return a.second < b.second; });
  const double share = static_cast<double>(best->second) / static_cast<double>(total);
  const double support = std::min(1.0, static_cast<double>(best->second) / 3.0);
  return {best->first, share * support};
}

}  // namespace corpusforge
