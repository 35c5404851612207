#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace infoneed {

/// Ordered lowercase terms. Never contains empty strings.
using TokenStream = std::vector<std::string>;

/// Lowercases and splits on every non-alphanumeric code point. Digits are
/// kept. ASCII and Latin-1 letters are case-folded; other letters pass
/// through unchanged. Invalid UTF-8 bytes act as separators.
TokenStream tokenize(std::string_view text);

/// Interrogative words: what when where who whom whose why which how.
bool is_wh_word(std::string_view lowercase_token) noexcept;

std::string trim(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Cuts at the first UTF-8 boundary at or before `max_bytes`.
std::string truncate_utf8(std::string_view s, std::size_t max_bytes);

}  // namespace infoneed
