#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace corpusforge {

// NFC-normalizes `raw`, rewrites CRLF and lone CR to LF, and trims Unicode
// whitespace from both ends. Internal whitespace and case are preserved.
// Invalid UTF-8 sequences are replaced by U+FFFD.
std::string canonicalize_text(std::string_view raw);

// XXH64 of the raw bytes.
std::uint64_t xxhash64(std::string_view bytes, std::uint64_t seed = 0);

// xxhash64(canonicalize_text(text)), the per-message fingerprint used by
// deduplication.
std::uint64_t content_hash(std::string_view text);

// Sixteen lowercase hex digits of xxhash64(bytes). Used for config and
// parameter digests.
std::string hex_digest(std::string_view bytes);

}  // namespace corpusforge
