#pragma once

#include "tlcorpus/text.hpp"

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace tlcorpus {

/// Counters every reader keeps so callers can account for each physical line.
struct ReadCounts {
  std::uint64_t lines = 0;
  std::uint64_t bytes = 0;
  std::uint64_t empty = 0;      // blank after normalization
  std::uint64_t malformed = 0;  // TSV lines without a tab
};

/// Streams SentenceRecords from a one-sentence-per-line corpus. Blank lines
/// are skipped; each run of them starts a new document.
class PlainCorpusReader {
 public:
  PlainCorpusReader(std::istream& in, std::string source_id);

  std::optional<SentenceRecord> next();
  const ReadCounts& counts() const { return counts_; }

 private:
  std::istream& in_;
  std::string source_id_;
  std::string line_;
  ReadCounts counts_;
  std::uint64_t doc_no_ = 0;
  bool pending_break_ = false;
  bool seen_record_ = false;
};

std::vector<SentenceRecord> read_plain_corpus(std::istream& in, const std::string& source_id,
                                              ReadCounts* counts = nullptr);

struct BitextRecord {
  std::string source_text;
  std::string target_text;
  std::uint64_t line_no = 1;
};

enum class BitextSide { Source, Target };

BitextSide bitext_side_from_string(std::string_view name);

/// `source<TAB>target` per line. Extra columns are ignored; lines without a
/// tab are counted as malformed and skipped.
class TsvBitextReader {
 public:
  TsvBitextReader(std::istream& in, std::string source_id);

  std::optional<BitextRecord> next();
  const ReadCounts& counts() const { return counts_; }

 private:
  std::istream& in_;
  std::string source_id_;
  std::string line_;
  ReadCounts counts_;
};

/// Two line-aligned files. Unequal line counts are an error.
class PairedBitextReader {
 public:
  PairedBitextReader(std::istream& source, std::istream& target, std::string source_id);

  std::optional<BitextRecord> next();
  const ReadCounts& counts() const { return counts_; }

 private:
  std::istream& source_;
  std::istream& target_;
  std::string source_id_;
  std::string source_line_;
  std::string target_line_;
  ReadCounts counts_;
};

struct ExtractResult {
  std::vector<SentenceRecord> records;
  std::uint64_t skipped_empty = 0;
};

/// Picks one side of each bitext record, preserving order. No deduplication.
ExtractResult extract_bitext_side(std::span<const BitextRecord> records, BitextSide side,
                                  const std::string& source_id);

enum class SplitUnit { Line, Document };

SplitUnit split_unit_from_string(std::string_view name);
std::string_view to_string(SplitUnit unit);

struct SplitConfig {
  double ratio = 0.6;
  std::uint64_t seed = 0;
  SplitUnit unit = SplitUnit::Document;

  /// Empty when valid.
  std::vector<std::string> violations() const;
};

struct SplitResult {
  std::vector<SentenceRecord> a;
  std::vector<SentenceRecord> b;
};

/// Key identifying the unit a record belongs to under `unit`.
std::string split_unit_key(const SentenceRecord& record, SplitUnit unit);

/// Seeded 64-bit hash of a unit key.
std::uint64_t split_unit_hash(std::uint64_t seed, std::string_view unit_key);

/// Number of units that go to subset A: ceil(ratio * n), clamped to [0, n].
std::size_t split_quota(double ratio, std::size_t n);

/// Decides which unit keys go to subset A. Units are ordered by
/// (seeded hash, key) and the first split_quota() of them win. The result
/// does not depend on `workers` or on the order of `unit_keys`.
std::vector<bool> assign_split_units(std::span<const std::string> unit_keys, const SplitConfig& cfg,
                                     unsigned workers = 1);

/// Partitions records into (A, B), each keeping input order.
SplitResult split_corpus(std::span<const SentenceRecord> records, const SplitConfig& cfg,
                         unsigned workers = 1);

/// Writes one record per line, with a blank line between documents when
/// `doc_breaks` is set.
void write_records(std::ostream& out, std::span<const SentenceRecord> records, bool doc_breaks);

}  // namespace tlcorpus
