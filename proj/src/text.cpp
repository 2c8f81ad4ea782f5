#include "tlcorpus/text.hpp"

#include "tlcorpus/utf8.hpp"

#include <array>
#include <sstream>

namespace tlcorpus {

namespace {

constexpr std::array<std::pair<RejectReason, std::string_view>, 6> kReasonNames{{
    {RejectReason::None, "None"},
    {RejectReason::NonLatin, "NonLatin"},
    {RejectReason::Length, "Length"},
    {RejectReason::PunctRun, "PunctRun"},
    {RejectReason::AvgWordLen, "AvgWordLen"},
    {RejectReason::Html, "Html"},
}};

std::string encoding_message(const std::string& source_id, std::uint64_t line_no, std::size_t offset) {
  std::ostringstream os;
  os << "invalid UTF-8";
  if (!source_id.empty()) os << " in " << source_id;
  if (line_no != 0) os << " at line " << line_no;
  os << " (byte " << offset << ")";
  return os.str();
}

}  // namespace

std::string_view to_string(RejectReason reason) {
  for (const auto& [r, name] : kReasonNames) {
    if (r == reason) return name;
  }
  return "Unknown";
}

RejectReason reject_reason_from_string(std::string_view name) {
  for (const auto& [r, n] : kReasonNames) {
    if (n == name) return r;
  }
  throw std::invalid_argument("unknown reject reason: " + std::string(name));
}

EncodingError::EncodingError(std::string source_id, std::uint64_t line_no, std::size_t byte_offset)
    : std::runtime_error(encoding_message(source_id, line_no, byte_offset)),
      source_id_(std::move(source_id)),
      line_no_(line_no),
      byte_offset_(byte_offset) {}

std::vector<std::string_view> tokenize_ws(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t pos = 0;
  std::size_t start = std::string_view::npos;
  while (pos < text.size()) {
    const std::size_t here = pos;
    const char32_t cp = utf8::next(text, pos);
    if (utf8::is_white_space(cp)) {
      if (start != std::string_view::npos) {
        tokens.push_back(text.substr(start, here - start));
        start = std::string_view::npos;
      }
    } else if (start == std::string_view::npos) {
      start = here;
    }
  }
  if (start != std::string_view::npos) tokens.push_back(text.substr(start));
  return tokens;
}

std::string normalize_line(std::string_view raw, const LineContext& ctx) {
  if (auto bad = utf8::find_invalid(raw)) {
    throw EncodingError(std::string(ctx.source_id), ctx.line_no, *bad);
  }
  while (!raw.empty() && (raw.back() == '\n' || raw.back() == '\r')) raw.remove_suffix(1);

  // Trim leading whitespace.
  std::size_t begin = 0;
  while (begin < raw.size()) {
    std::size_t next = begin;
    if (!utf8::is_white_space(utf8::next(raw, next))) break;
    begin = next;
  }
  // Trim trailing whitespace: remember the end of the last non-space scalar.
  std::size_t end = begin;
  for (std::size_t pos = begin; pos < raw.size();) {
    const char32_t cp = utf8::next(raw, pos);
    if (!utf8::is_white_space(cp)) end = pos;
  }

  std::string out(raw.substr(begin, end - begin));
  for (char& c : out) {
    if (c == '\r' || c == '\n') c = ' ';
  }
  return out;
}

}  // namespace tlcorpus
