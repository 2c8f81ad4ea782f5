#pragma once

#include "tlcorpus/text.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace tlcorpus {

/// Thresholds for the five quality filters.
struct FilterConfig {
  double nonlatin_max_ratio = 0.15;
  std::size_t min_tokens = 4;
  std::size_t max_tokens = 150;
  std::size_t punct_run_max = 2;  // runs of 3 or more reject
  double awl_min = 3.0;
  double awl_max = 18.0;
  std::vector<std::string> html_patterns = default_html_patterns();

  static std::vector<std::string> default_html_patterns();

  /// Empty when valid.
  std::vector<std::string> violations() const;
  void validate() const;
};

// Individual filters. Each looks only at the text and the config.
FilterVerdict filter_non_latin(std::string_view text, const FilterConfig& cfg);
FilterVerdict filter_length(std::string_view text, const FilterConfig& cfg);
FilterVerdict filter_punct_run(std::string_view text, const FilterConfig& cfg);
FilterVerdict filter_avg_word_len(std::string_view text, const FilterConfig& cfg);
FilterVerdict filter_html(std::string_view text, const FilterConfig& cfg);

/// First rejecting filter in the order NonLatin, Length, PunctRun,
/// AvgWordLen, Html, or pass.
FilterVerdict apply_filters(std::string_view text, const FilterConfig& cfg);

inline FilterVerdict apply_filters(const SentenceRecord& s, const FilterConfig& cfg) {
  return apply_filters(s.text, cfg);
}

/// Per-reason rejection counts. Merging is plain addition.
struct FilterCounts {
  std::uint64_t passed = 0;
  std::array<std::uint64_t, 6> rejected{};  // indexed by RejectReason

  void add(FilterVerdict v);
  FilterCounts& operator+=(const FilterCounts& other);
  std::uint64_t total_rejected() const;
  std::uint64_t total() const { return passed + total_rejected(); }
  std::uint64_t operator[](RejectReason r) const { return rejected[static_cast<std::size_t>(r)]; }
};

}  // namespace tlcorpus
