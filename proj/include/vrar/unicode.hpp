#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers shared by the reward, DSL and curation code. Normalization
// and case folding are delegated to ICU.
namespace vrar::unicode {

/// Inclusive codepoint interval.
struct CodepointRange {
  char32_t first = 0;
  char32_t last = 0;

  bool contains(char32_t cp) const noexcept { return cp >= first && cp <= last; }
  friend bool operator==(const CodepointRange&, const CodepointRange&) = default;
};

/// Decodes UTF-8; ill-formed sequences decode to U+FFFD.
std::vector<char32_t> decode(std::string_view text);

std::string encode(char32_t cp);
std::string encode(const std::vector<char32_t>& cps);

bool is_valid_utf8(std::string_view text) noexcept;

/// Unicode White_Space property.
bool is_whitespace(char32_t cp) noexcept;

/// NFC normalization. Ill-formed input is first repaired with U+FFFD.
std::string nfc(std::string_view text);

/// NFC followed by full case folding and a second NFC pass. Folding leaves
/// CJK ideographs untouched, so this only affects cased scripts.
std::string match_key(std::string_view text);

/// Strips leading and trailing Unicode whitespace.
std::string trim(std::string_view text);

/// Non-overlapping occurrences of needle in haystack, scanning left to right.
/// Stops counting once limit is reached. An empty needle counts as zero.
std::size_t count_occurrences(std::string_view haystack, std::string_view needle,
                              std::size_t limit = static_cast<std::size_t>(-1));

/// Replaces every occurrence of needle with nothing.
std::string erase_all(std::string_view text, std::string_view needle);

}  // namespace vrar::unicode
