#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace tlcorpus::utf8 {

/// Decodes the scalar at `pos` and advances past it. Returns -1 (and still
/// advances by at least one byte) on an ill-formed sequence.
char32_t next(std::string_view s, std::size_t& pos);

/// Byte offset of the first ill-formed sequence, if any.
std::optional<std::size_t> find_invalid(std::string_view s);

std::size_t count_scalars(std::string_view s);

void append(std::string& out, char32_t cp);

bool is_white_space(char32_t cp);
bool is_punctuation(char32_t cp);
bool is_alphabetic(char32_t cp);
bool is_alnum(char32_t cp);

/// Alphabetic scalar whose script is neither Latin nor Common/Inherited.
bool is_non_latin_letter(char32_t cp);

/// First / last scalar of `s`, or U+FFFF if empty.
char32_t first_scalar(std::string_view s);
char32_t last_scalar(std::string_view s);

}  // namespace tlcorpus::utf8
