#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace ladder::text {

/// Decodes UTF-8 into code points. Invalid bytes decode as U+FFFD so that
/// scoring never throws on dirty model output.
std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
void append_utf8(std::string& out, char32_t cp);

/// Python's str.isspace() set, which the community MT scorers split on.
bool is_unicode_space(char32_t cp) noexcept;

/// Splits on runs of Unicode whitespace, dropping empty fields.
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::u32string> split_whitespace(std::u32string_view s);

std::string_view trim(std::string_view s) noexcept;
std::string trim_unicode(std::string_view s);
std::string rtrim_unicode(std::string_view s);

bool is_blank(std::string_view s);

/// Replaces every occurrence of `from` in `s`.
std::string replace_all(std::string s, std::string_view from, std::string_view to);

}  // namespace ladder::text
