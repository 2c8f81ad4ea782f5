#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tlcorpus {

/// One line of corpus text with its provenance.
///
/// `doc_no` groups lines into documents: readers bump it at every run of
/// blank lines, so a file without blank lines is a single document 0.
struct SentenceRecord {
  std::string text;
  std::string source_id;
  std::uint64_t line_no = 1;
  std::uint64_t doc_no = 0;

  bool operator==(const SentenceRecord&) const = default;
};

enum class RejectReason { None, NonLatin, Length, PunctRun, AvgWordLen, Html };

std::string_view to_string(RejectReason reason);
RejectReason reject_reason_from_string(std::string_view name);

/// Outcome of a quality filter. Passing is exactly `reason == None`.
class FilterVerdict {
 public:
  static constexpr FilterVerdict pass() { return FilterVerdict(RejectReason::None); }
  static constexpr FilterVerdict reject(RejectReason reason) { return FilterVerdict(reason); }

  constexpr bool passed() const { return reason_ == RejectReason::None; }
  constexpr RejectReason reason() const { return reason_; }

  constexpr bool operator==(const FilterVerdict&) const = default;

 private:
  constexpr explicit FilterVerdict(RejectReason reason) : reason_(reason) {}
  RejectReason reason_;
};

/// Where a line came from, for diagnostics.
struct LineContext {
  std::string_view source_id;
  std::uint64_t line_no = 0;
};

class EncodingError : public std::runtime_error {
 public:
  EncodingError(std::string source_id, std::uint64_t line_no, std::size_t byte_offset);

  const std::string& source_id() const { return source_id_; }
  std::uint64_t line_no() const { return line_no_; }
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::string source_id_;
  std::uint64_t line_no_;
  std::size_t byte_offset_;
};

/// Splits on maximal runs of Unicode White_Space. Views point into `text`.
std::vector<std::string_view> tokenize_ws(std::string_view text);

/// Strips the line terminator and surrounding Unicode whitespace. Interior
/// CR characters become spaces so a record never spans physical lines.
/// No Unicode normalization is applied. Throws EncodingError on invalid UTF-8.
std::string normalize_line(std::string_view raw, const LineContext& ctx = {});

}  // namespace tlcorpus
