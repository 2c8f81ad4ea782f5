#pragma once

#include "tlcorpus/digest.hpp"
#include "tlcorpus/text.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace tlcorpus {

/// Identity of a line for exact deduplication: a 128-bit digest of the
/// normalized bytes. No case folding.
using DedupKey = Digest128;

inline DedupKey dedup_key(std::string_view normalized_text) { return digest128(normalized_text); }

/// Keep-first membership set over dedup keys.
class Deduplicator {
 public:
  explicit Deduplicator(std::size_t expected = 0) { seen_.reserve(expected); }

  /// True the first time a text is offered.
  bool insert(std::string_view text) { return seen_.insert(dedup_key(text)).second; }
  bool contains(std::string_view text) const { return seen_.contains(dedup_key(text)); }
  std::size_t size() const { return seen_.size(); }

 private:
  std::unordered_set<DedupKey, Digest128Hash> seen_;
};

struct DedupCounts {
  std::uint64_t read = 0;
  std::uint64_t kept = 0;
  std::uint64_t dropped = 0;
};

/// First occurrence of each distinct text, in input order.
std::vector<SentenceRecord> dedup_stream(std::span<const SentenceRecord> records, DedupCounts* counts = nullptr);

/// Removes from `records` every text that also appears in `exclude`.
std::vector<SentenceRecord> drop_shared_texts(std::span<const SentenceRecord> records,
                                              std::span<const SentenceRecord> exclude);

using RecordVisitor = std::function<void(const SentenceRecord&)>;

/// A re-playable record sequence: each call visits every record in the same
/// order. External deduplication replays its input twice.
using RecordScan = std::function<void(const RecordVisitor&)>;

struct ExternalDedupOptions {
  std::filesystem::path tmp_dir;
  std::size_t chunk_records = 1u << 20;  // keys held in memory per sorted run
};

/// Keep-first deduplication whose memory use is bounded by `chunk_records`
/// rather than by the number of distinct lines.
///
/// Pass one writes sorted runs of (digest, index) to disk and merges them; in
/// every digest group all but the smallest index are duplicates. Those
/// indices go to a second set of sorted runs. Pass two replays the input and
/// skips exactly the indices produced by merging the duplicate runs.
DedupCounts dedup_external(const RecordScan& scan, const RecordVisitor& emit, const ExternalDedupOptions& options);

}  // namespace tlcorpus
