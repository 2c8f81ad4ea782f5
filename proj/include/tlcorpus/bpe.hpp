#pragma once

#include "tlcorpus/text.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace tlcorpus {

/// Appended to every word as its own alphabet symbol before learning, so
/// word-final subwords carry it as a suffix ("est</w>").
inline constexpr std::string_view kEndOfWord = "</w>";

struct TokenizerConfig {
  std::size_t vocab_size = 32000;
  double character_coverage = 1.0;
  bool case_preserving = true;  // fixed: casing is never altered
  std::vector<std::string> special_tokens{"<unk>", "<pad>", "<s>", "</s>", "<mask>"};
  std::string unknown_token = "<unk>";

  /// Empty when valid. Corpus-dependent checks happen in learn_bpe.
  std::vector<std::string> violations() const;
};

using TokenId = std::int32_t;

/// Word frequencies after whitespace pre-tokenization.
class WordCounts {
 public:
  void add_text(std::string_view text);
  void add_word(std::string_view word, std::uint64_t count = 1);

  bool empty() const { return counts_.empty(); }
  /// Sorted by word, so iteration order is deterministic.
  std::vector<std::pair<std::string, std::uint64_t>> sorted() const;

 private:
  std::unordered_map<std::string, std::uint64_t> counts_;
};

WordCounts count_words(std::span<const SentenceRecord> corpus);

/// Characters by descending frequency (ties by code point), cut at the
/// shortest prefix covering `coverage` of all character occurrences.
std::vector<char32_t> build_alphabet(const WordCounts& words, double coverage);
std::vector<char32_t> build_alphabet(std::span<const SentenceRecord> corpus, double coverage);

/// A trained subword vocabulary plus its ordered merge list.
///
/// Ids: reserved special tokens first, then alphabet symbols (including the
/// end-of-word marker), then merge outputs in merge order, then any special
/// tokens added after training.
class BpeModel {
 public:
  struct Header {
    std::size_t trained_vocab_size = 0;
    double character_coverage = 1.0;
    std::string unknown_token;
    std::size_t reserved_specials = 0;
    std::size_t added_specials = 0;
  };

  BpeModel(Header header, std::vector<std::string> vocab, std::vector<std::pair<std::string, std::string>> merges);

  const Header& header() const { return header_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }
  std::size_t vocab_size() const { return vocab_.size(); }
  TokenId unknown_id() const { return unknown_id_; }

  /// Surface of `id`; throws std::out_of_range naming the id.
  const std::string& subword(TokenId id) const;
  bool is_special(TokenId id) const;
  std::optional<TokenId> special_id(std::string_view surface) const;
  /// Id of a learned (non-special) subword.
  std::optional<TokenId> subword_id(std::string_view subword) const;

  /// Merge rank and output id for an adjacent symbol pair.
  std::optional<std::pair<std::size_t, TokenId>> merge_for(TokenId left, TokenId right) const;

  void write_merges(std::ostream& out) const;
  void write_vocab(std::ostream& out) const;
  static BpeModel read(std::istream& merges, std::istream& vocab);

  void save(const std::filesystem::path& prefix) const;
  static BpeModel load(const std::filesystem::path& prefix);

  bool operator==(const BpeModel& other) const {
    return vocab_ == other.vocab_ && merges_ == other.merges_ && header_.trained_vocab_size == other.header_.trained_vocab_size &&
           header_.reserved_specials == other.header_.reserved_specials &&
           header_.added_specials == other.header_.added_specials && header_.unknown_token == other.header_.unknown_token;
  }

 private:
  Header header_;
  std::vector<std::string> vocab_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, TokenId> subword_ids_;
  std::unordered_map<std::string, TokenId> special_ids_;
  std::unordered_map<std::uint64_t, std::pair<std::size_t, TokenId>> merge_table_;
  TokenId unknown_id_ = 0;
};

/// Standard BPE learning: words start as characters plus the end-of-word
/// marker, and the most frequent adjacent pair is merged until the
/// vocabulary reaches cfg.vocab_size. Ties go to the lexicographically
/// smallest (left, right) pair.
BpeModel learn_bpe(const WordCounts& words, const TokenizerConfig& cfg);
BpeModel learn_bpe(std::span<const SentenceRecord> corpus, const TokenizerConfig& cfg);

std::vector<TokenId> encode(const BpeModel& model, std::string_view text);
std::vector<TokenId> encode_word(const BpeModel& model, std::string_view word);
std::string decode(const BpeModel& model, std::span<const TokenId> ids);

/// Appends special tokens after the current top id. They are matched as
/// whole whitespace-separated tokens by encode and never segmented.
BpeModel add_special_tokens(const BpeModel& model, std::span<const std::string> tokens);

/// encode() with a per-word memo, for bulk encoding of large files.
class CachingEncoder {
 public:
  explicit CachingEncoder(const BpeModel& model) : model_(model) {}
  std::vector<TokenId> encode(std::string_view text);

 private:
  const BpeModel& model_;
  std::unordered_map<std::string, std::vector<TokenId>> cache_;
};

}  // namespace tlcorpus
