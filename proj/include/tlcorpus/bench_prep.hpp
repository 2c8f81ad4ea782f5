#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tlcorpus {

// ---------------------------------------------------------------------------
// Tweet normalization
//
// Every stage splits on ASCII spaces and tabs and rejoins with single spaces.
// Other Unicode spaces (for instance the NBSP that &nbsp; decodes to) stay
// inside tokens, which keeps the composed pipeline idempotent.

struct TweetPrepConfig {
  std::string link_token = "[LINK]";
  std::string mention_token = "[MENTION]";
  std::string hashtag_token = "[HASHTAG]";
  std::map<std::string, std::string> entity_map = default_entity_map();

  static std::map<std::string, std::string> default_entity_map();

  std::vector<std::string> violations() const;
};

/// Re-attaches punctuation split off by a Moses-style tokenizer: sentence
/// punctuation and closing brackets join the previous token, opening
/// brackets join the next one, and clitics such as 's and n't join left.
std::string moses_detokenize(std::string_view text);

/// Replaces each token starting with http://, https:// or www. (any case).
std::string collapse_links(std::string_view text, const TweetPrepConfig& cfg = {});

/// Replaces each token that starts with '@' and is longer than one character.
std::string collapse_mentions(std::string_view text, const TweetPrepConfig& cfg = {});

/// Replaces each token that starts with '#' and is longer than one character.
std::string collapse_hashtags(std::string_view text, const TweetPrepConfig& cfg = {});

/// "it 's" -> "it's", "do n't" -> "don't", "one - two" -> "one-two".
std::string renormalize_spacing(std::string_view text);

/// Decodes mapped entities until none remain, so "&amp;lt;" becomes "<".
std::string decode_html_entities(std::string_view text, const TweetPrepConfig& cfg = {});

/// detokenize -> entities -> links -> mentions -> hashtags -> spacing.
std::string preprocess_tweet(std::string_view text, const TweetPrepConfig& cfg = {});

// ---------------------------------------------------------------------------
// Dengue labels

/// Flags in the fixed order absent, dengue, healthclasses, mosquito, sick.
struct DengueLabelVector {
  std::array<bool, 5> flags{};

  static constexpr std::array<std::string_view, 5> kNames{"absent", "dengue", "healthclasses", "mosquito", "sick"};

  bool operator==(const DengueLabelVector&) const = default;
};

/// Flags read as a binary number, first flag most significant: 11011 -> 27.
int encode_dengue_labels(const DengueLabelVector& v);

/// Inverse of encode_dengue_labels; throws std::out_of_range outside [0, 31].
DengueLabelVector decode_dengue_labels(int n);

// ---------------------------------------------------------------------------
// NLI pairs

enum class NliLabel { Entailment, Contradiction };

std::string_view to_string(NliLabel label);

struct NliPair {
  std::string premise;
  std::string hypothesis;
  NliLabel label = NliLabel::Entailment;
  // Article indices the two sentences came from.
  std::size_t premise_article = 0;
  std::size_t hypothesis_article = 0;

  bool operator==(const NliPair&) const = default;
};

struct NliOptions {
  std::uint64_t seed = 0;
  /// Default: the earlier sentence is the premise, the next one the hypothesis.
  bool later_as_premise = false;
};

struct NliResult {
  std::vector<NliPair> pairs;
  std::uint64_t skipped_articles = 0;     // fewer than two sentences
  std::uint64_t skipped_identical = 0;    // adjacent sentences with equal text
  bool contradictions_impossible = false;  // fewer than two usable articles
};

/// Adjacent sentences inside an article become Entailment pairs. Each one is
/// matched by a Contradiction pair whose other side is a seeded-random
/// sentence from a different article. Randomness for article i comes only
/// from (seed, i).
NliResult make_nli_pairs(std::span<const std::vector<std::string>> articles, const NliOptions& options);

}  // namespace tlcorpus
