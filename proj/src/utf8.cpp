#include "tlcorpus/utf8.hpp"

#include <unicode/uchar.h>
#include <unicode/uscript.h>
#include <unicode/utf8.h>

#include <cstdint>

namespace tlcorpus::utf8 {

char32_t next(std::string_view s, std::size_t& pos) {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
  const auto length = static_cast<std::int32_t>(s.size());
  auto i = static_cast<std::int32_t>(pos);
  UChar32 c = 0;
  U8_NEXT(bytes, i, length, c);
  pos = static_cast<std::size_t>(i);
  return c < 0 ? static_cast<char32_t>(-1) : static_cast<char32_t>(c);
}

std::optional<std::size_t> find_invalid(std::string_view s) {
  std::size_t pos = 0;
  while (pos < s.size()) {
    const std::size_t start = pos;
    // ASCII fast path.
    if (static_cast<unsigned char>(s[pos]) < 0x80) {
      ++pos;
      continue;
    }
    if (next(s, pos) == static_cast<char32_t>(-1)) return start;
  }
  return std::nullopt;
}

std::size_t count_scalars(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t pos = 0; pos < s.size();) {
    next(s, pos);
    ++n;
  }
  return n;
}

void append(std::string& out, char32_t cp) {
  char buf[U8_MAX_LENGTH];
  std::int32_t len = 0;
  UBool error = false;
  U8_APPEND(reinterpret_cast<std::uint8_t*>(buf), len, U8_MAX_LENGTH, static_cast<UChar32>(cp), error);
  if (!error) out.append(buf, static_cast<std::size_t>(len));
}

bool is_white_space(char32_t cp) {
  if (cp < 0x80) return cp == ' ' || (cp >= '\t' && cp <= '\r');
  return u_isUWhiteSpace(static_cast<UChar32>(cp));
}

bool is_punctuation(char32_t cp) {
  return U_GET_GC_MASK(static_cast<UChar32>(cp)) & U_GC_P_MASK;
}

bool is_alphabetic(char32_t cp) {
  return u_hasBinaryProperty(static_cast<UChar32>(cp), UCHAR_ALPHABETIC);
}

bool is_alnum(char32_t cp) {
  return is_alphabetic(cp) || (U_GET_GC_MASK(static_cast<UChar32>(cp)) & U_GC_N_MASK);
}

bool is_non_latin_letter(char32_t cp) {
  if (cp < 0x80) return false;
  if (!is_alphabetic(cp)) return false;
  UErrorCode status = U_ZERO_ERROR;
  const UScriptCode script = uscript_getScript(static_cast<UChar32>(cp), &status);
  if (U_FAILURE(status)) return false;
  return script != USCRIPT_LATIN && script != USCRIPT_COMMON && script != USCRIPT_INHERITED;
}

char32_t first_scalar(std::string_view s) {
  if (s.empty()) return 0xFFFF;
  std::size_t pos = 0;
  return next(s, pos);
}

char32_t last_scalar(std::string_view s) {
  if (s.empty()) return 0xFFFF;
  auto i = static_cast<std::int32_t>(s.size());
  UChar32 c = 0;
  U8_PREV(reinterpret_cast<const std::uint8_t*>(s.data()), 0, i, c);
  return c < 0 ? static_cast<char32_t>(-1) : static_cast<char32_t>(c);
}

}  // namespace tlcorpus::utf8
