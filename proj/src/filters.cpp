#include "tlcorpus/filters.hpp"

#include "tlcorpus/utf8.hpp"

#include <algorithm>
#include <stdexcept>

namespace tlcorpus {

namespace {

char ascii_lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

bool icontains(std::string_view haystack, std::string_view needle) {
  if (needle.empty()) return true;
  if (needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(), needle.end(), [](char a, char b) {
           return ascii_lower(a) == ascii_lower(b);
         }) != haystack.end();
}

// Token-level checks shared by the standalone filters and apply_filters, so
// the latter tokenizes once.

FilterVerdict check_non_latin(std::string_view text, const FilterConfig& cfg) {
  std::size_t non_space = 0;
  std::size_t non_latin = 0;
  for (std::size_t pos = 0; pos < text.size();) {
    const char32_t cp = utf8::next(text, pos);
    if (utf8::is_white_space(cp)) continue;
    ++non_space;
    if (utf8::is_non_latin_letter(cp)) ++non_latin;
  }
  if (non_space == 0) return FilterVerdict::pass();
  const double ratio = static_cast<double>(non_latin) / static_cast<double>(non_space);
  return ratio > cfg.nonlatin_max_ratio ? FilterVerdict::reject(RejectReason::NonLatin) : FilterVerdict::pass();
}

FilterVerdict check_length(std::size_t n, const FilterConfig& cfg) {
  return (n >= cfg.min_tokens && n <= cfg.max_tokens) ? FilterVerdict::pass()
                                                     : FilterVerdict::reject(RejectReason::Length);
}

FilterVerdict check_punct_run(const std::vector<std::string_view>& tokens, const FilterConfig& cfg) {
  for (std::string_view tok : tokens) {
    std::size_t run = 0;
    for (std::size_t pos = 0; pos < tok.size();) {
      if (utf8::is_punctuation(utf8::next(tok, pos))) {
        if (++run > cfg.punct_run_max) return FilterVerdict::reject(RejectReason::PunctRun);
      } else {
        run = 0;
      }
    }
  }
  return FilterVerdict::pass();
}

FilterVerdict check_avg_word_len(const std::vector<std::string_view>& tokens, const FilterConfig& cfg) {
  if (tokens.empty()) return FilterVerdict::pass();
  std::size_t chars = 0;
  for (std::string_view tok : tokens) chars += utf8::count_scalars(tok);
  const double r = static_cast<double>(chars) / static_cast<double>(tokens.size());
  return (r >= cfg.awl_min && r <= cfg.awl_max) ? FilterVerdict::pass()
                                               : FilterVerdict::reject(RejectReason::AvgWordLen);
}

FilterVerdict check_html(const std::vector<std::string_view>& tokens, const FilterConfig& cfg) {
  for (std::string_view tok : tokens) {
    for (const auto& pattern : cfg.html_patterns) {
      if (icontains(tok, pattern)) return FilterVerdict::reject(RejectReason::Html);
    }
  }
  return FilterVerdict::pass();
}

}  // namespace

std::vector<std::string> FilterConfig::default_html_patterns() {
  return {"http://", "https://", "www.", ".com", ".html", ".php", "href=", "</", "/>"};
}

std::vector<std::string> FilterConfig::violations() const {
  std::vector<std::string> out;
  if (!(nonlatin_max_ratio >= 0.0 && nonlatin_max_ratio <= 1.0)) {
    out.push_back("filter.nonlatin_max_ratio must lie in [0, 1]");
  }
  if (min_tokens < 1) out.push_back("filter.min_tokens must be >= 1");
  if (min_tokens > max_tokens) out.push_back("filter.min_tokens must not exceed filter.max_tokens");
  if (!(awl_min > 0.0)) out.push_back("filter.awl_min must be > 0");
  if (!(awl_min <= awl_max)) out.push_back("filter.awl_min must not exceed filter.awl_max");
  if (punct_run_max < 1) out.push_back("filter.punct_run_max must be >= 1");
  if (html_patterns.empty()) out.push_back("filter.html_patterns must not be empty");
  for (const auto& p : html_patterns) {
    if (p.empty()) out.push_back("filter.html_patterns must not contain empty patterns");
  }
  return out;
}

void FilterConfig::validate() const {
  if (auto v = violations(); !v.empty()) throw std::invalid_argument(v.front());
}

FilterVerdict filter_non_latin(std::string_view text, const FilterConfig& cfg) { return check_non_latin(text, cfg); }

FilterVerdict filter_length(std::string_view text, const FilterConfig& cfg) {
  return check_length(tokenize_ws(text).size(), cfg);
}

FilterVerdict filter_punct_run(std::string_view text, const FilterConfig& cfg) {
  return check_punct_run(tokenize_ws(text), cfg);
}

FilterVerdict filter_avg_word_len(std::string_view text, const FilterConfig& cfg) {
  return check_avg_word_len(tokenize_ws(text), cfg);
}

FilterVerdict filter_html(std::string_view text, const FilterConfig& cfg) { return check_html(tokenize_ws(text), cfg); }

FilterVerdict apply_filters(std::string_view text, const FilterConfig& cfg) {
  if (auto v = check_non_latin(text, cfg); !v.passed()) return v;
  const auto tokens = tokenize_ws(text);
  if (auto v = check_length(tokens.size(), cfg); !v.passed()) return v;
  if (auto v = check_punct_run(tokens, cfg); !v.passed()) return v;
  if (auto v = check_avg_word_len(tokens, cfg); !v.passed()) return v;
  return check_html(tokens, cfg);
}

void FilterCounts::add(FilterVerdict v) {
  if (v.passed()) {
    ++passed;
  } else {
    ++rejected[static_cast<std::size_t>(v.reason())];
  }
}

FilterCounts& FilterCounts::operator+=(const FilterCounts& other) {
  passed += other.passed;
  for (std::size_t i = 0; i < rejected.size(); ++i) rejected[i] += other.rejected[i];
  return *this;
}

std::uint64_t FilterCounts::total_rejected() const {
  std::uint64_t n = 0;
  for (auto c : rejected) n += c;
  return n;
}

}  // namespace tlcorpus
