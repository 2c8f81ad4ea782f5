#include "tlcorpus/ingest.hpp"

#include "tlcorpus/digest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>
#include <unordered_map>

namespace tlcorpus {

// ---------------------------------------------------------------------------
// Plain corpora

PlainCorpusReader::PlainCorpusReader(std::istream& in, std::string source_id)
    : in_(in), source_id_(std::move(source_id)) {}

std::optional<SentenceRecord> PlainCorpusReader::next() {
  while (std::getline(in_, line_)) {
    ++counts_.lines;
    counts_.bytes += line_.size() + 1;
    std::string text = normalize_line(line_, {source_id_, counts_.lines});
    if (text.empty()) {
      ++counts_.empty;
      pending_break_ = seen_record_;
      continue;
    }
    if (pending_break_) {
      ++doc_no_;
      pending_break_ = false;
    }
    seen_record_ = true;
    return SentenceRecord{std::move(text), source_id_, counts_.lines, doc_no_};
  }
  return std::nullopt;
}

std::vector<SentenceRecord> read_plain_corpus(std::istream& in, const std::string& source_id,
                                              ReadCounts* counts) {
  PlainCorpusReader reader(in, source_id);
  std::vector<SentenceRecord> out;
  while (auto rec = reader.next()) out.push_back(std::move(*rec));
  if (counts) *counts = reader.counts();
  return out;
}

// ---------------------------------------------------------------------------
// Bitext

BitextSide bitext_side_from_string(std::string_view name) {
  if (name == "source") return BitextSide::Source;
  if (name == "target") return BitextSide::Target;
  throw std::invalid_argument("unknown bitext side '" + std::string(name) + "' (expected source|target)");
}

TsvBitextReader::TsvBitextReader(std::istream& in, std::string source_id)
    : in_(in), source_id_(std::move(source_id)) {}

std::optional<BitextRecord> TsvBitextReader::next() {
  while (std::getline(in_, line_)) {
    ++counts_.lines;
    counts_.bytes += line_.size() + 1;
    const auto tab = line_.find('\t');
    if (tab == std::string::npos) {
      // A fully blank line is "empty", anything else without a tab is malformed.
      if (normalize_line(line_, {source_id_, counts_.lines}).empty()) {
        ++counts_.empty;
      } else {
        ++counts_.malformed;
      }
      continue;
    }
    const std::string_view rest = std::string_view(line_).substr(tab + 1);
    const std::string_view target = rest.substr(0, rest.find('\t'));
    const LineContext ctx{source_id_, counts_.lines};
    return BitextRecord{normalize_line(std::string_view(line_).substr(0, tab), ctx), normalize_line(target, ctx),
                        counts_.lines};
  }
  return std::nullopt;
}

PairedBitextReader::PairedBitextReader(std::istream& source, std::istream& target, std::string source_id)
    : source_(source), target_(target), source_id_(std::move(source_id)) {}

std::optional<BitextRecord> PairedBitextReader::next() {
  const bool has_source = static_cast<bool>(std::getline(source_, source_line_));
  const bool has_target = static_cast<bool>(std::getline(target_, target_line_));
  if (!has_source && !has_target) return std::nullopt;
  ++counts_.lines;
  if (has_source != has_target) {
    throw std::runtime_error(source_id_ + ": paired files have different line counts (diverge at line " +
                             std::to_string(counts_.lines) + ")");
  }
  counts_.bytes += source_line_.size() + target_line_.size() + 2;
  const LineContext ctx{source_id_, counts_.lines};
  return BitextRecord{normalize_line(source_line_, ctx), normalize_line(target_line_, ctx), counts_.lines};
}

ExtractResult extract_bitext_side(std::span<const BitextRecord> records, BitextSide side,
                                  const std::string& source_id) {
  ExtractResult result;
  result.records.reserve(records.size());
  for (const auto& rec : records) {
    const std::string& text = side == BitextSide::Target ? rec.target_text : rec.source_text;
    if (text.empty()) {
      ++result.skipped_empty;
      continue;
    }
    result.records.push_back(SentenceRecord{text, source_id, rec.line_no, 0});
  }
  return result;
}

// ---------------------------------------------------------------------------
// Splitting

SplitUnit split_unit_from_string(std::string_view name) {
  if (name == "line") return SplitUnit::Line;
  if (name == "document") return SplitUnit::Document;
  throw std::invalid_argument("unknown split unit '" + std::string(name) + "' (expected line|document)");
}

std::string_view to_string(SplitUnit unit) { return unit == SplitUnit::Line ? "line" : "document"; }

std::vector<std::string> SplitConfig::violations() const {
  std::vector<std::string> out;
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    out.push_back("split.ratio must lie in [0, 1], got " + std::to_string(ratio));
  }
  return out;
}

std::string split_unit_key(const SentenceRecord& record, SplitUnit unit) {
  std::string key = record.source_id;
  key.push_back('\x1f');
  key += std::to_string(unit == SplitUnit::Line ? record.line_no : record.doc_no);
  return key;
}

std::uint64_t split_unit_hash(std::uint64_t seed, std::string_view unit_key) {
  return seeded_digest128(seed, unit_key).hi;
}

std::size_t split_quota(double ratio, std::size_t n) {
  // The epsilon absorbs representation error such as 0.6 * 10 = 6.000000000000001.
  const double raw = std::ceil(ratio * static_cast<double>(n) - 1e-9);
  if (raw <= 0.0) return 0;
  return std::min(n, static_cast<std::size_t>(raw));
}

std::vector<bool> assign_split_units(std::span<const std::string> unit_keys, const SplitConfig& cfg,
                                     unsigned workers) {
  if (auto v = cfg.violations(); !v.empty()) throw std::invalid_argument(v.front());
  const std::size_t n = unit_keys.size();
  std::vector<std::uint64_t> hashes(n);

  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n / 1024, 1))));
  auto hash_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) hashes[i] = split_unit_hash(cfg.seed, unit_keys[i]);
  };
  if (workers == 1) {
    hash_range(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(n, w * chunk);
      const std::size_t end = std::min(n, begin + chunk);
      pool.emplace_back(hash_range, begin, end);
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (hashes[x] != hashes[y]) return hashes[x] < hashes[y];
    return unit_keys[x] < unit_keys[y];
  });

  std::vector<bool> in_a(n, false);
  const std::size_t quota = split_quota(cfg.ratio, n);
  for (std::size_t i = 0; i < quota; ++i) in_a[order[i]] = true;
  return in_a;
}

SplitResult split_corpus(std::span<const SentenceRecord> records, const SplitConfig& cfg, unsigned workers) {
  std::vector<std::string> keys;
  std::unordered_map<std::string, std::size_t> index;
  std::vector<std::size_t> unit_of(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::string key = split_unit_key(records[i], cfg.unit);
    auto [it, inserted] = index.try_emplace(key, keys.size());
    if (inserted) keys.push_back(std::move(key));
    unit_of[i] = it->second;
  }

  const std::vector<bool> in_a = assign_split_units(keys, cfg, workers);
  SplitResult result;
  for (std::size_t i = 0; i < records.size(); ++i) {
    (in_a[unit_of[i]] ? result.a : result.b).push_back(records[i]);
  }
  return result;
}

void write_records(std::ostream& out, std::span<const SentenceRecord> records, bool doc_breaks) {
  const SentenceRecord* prev = nullptr;
  for (const auto& rec : records) {
    if (doc_breaks && prev && (prev->doc_no != rec.doc_no || prev->source_id != rec.source_id)) out << '\n';
    out << rec.text << '\n';
    prev = &rec;
  }
}

}  // namespace tlcorpus
