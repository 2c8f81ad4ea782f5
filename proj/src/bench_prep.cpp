#include "tlcorpus/bench_prep.hpp"

#include "tlcorpus/digest.hpp"
#include "tlcorpus/utf8.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace tlcorpus {

namespace {

std::vector<std::string_view> split_ascii_ws(std::string_view text) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    const std::size_t start = i;
    while (i < text.size() && text[i] != ' ' && text[i] != '\t') ++i;
    if (i > start) tokens.push_back(text.substr(start, i - start));
  }
  return tokens;
}

template <typename Tokens>
std::string join(const Tokens& tokens) {
  std::string out;
  for (const auto& tok : tokens) {
    if (!out.empty()) out.push_back(' ');
    out.append(tok);
  }
  return out;
}

bool istarts_with(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    char c = s[i];
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c != prefix[i]) return false;
  }
  return true;
}

bool is_sentence_punct_run(std::string_view tok) {
  return !tok.empty() && tok.find_first_not_of(".,!?;:%") == std::string_view::npos;
}

bool is_closing_bracket(std::string_view tok) { return tok == ")" || tok == "]" || tok == "}"; }
bool is_opening_bracket(std::string_view tok) { return tok == "(" || tok == "[" || tok == "{"; }

// English clitics as split off by the tokenizer: 's 're 've 'll 'd 'm 't n't.
// Tagalog elisions such as 'yung or 'di are deliberately not in the list.
bool is_clitic(std::string_view tok) {
  if (tok == "n't" || tok == "N'T" || tok == "n’t") return true;
  std::string_view suffix;
  if (tok.starts_with('\'')) {
    suffix = tok.substr(1);
  } else if (tok.starts_with("’")) {
    suffix = tok.substr(3);
  } else {
    return false;
  }
  std::string lower(suffix);
  for (char& c : lower) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return lower == "s" || lower == "re" || lower == "ve" || lower == "ll" || lower == "d" || lower == "m" ||
         lower == "t";
}

bool ends_alnum(std::string_view tok) { return !tok.empty() && utf8::is_alnum(utf8::last_scalar(tok)); }
bool starts_alnum(std::string_view tok) { return !tok.empty() && utf8::is_alnum(utf8::first_scalar(tok)); }

std::string replace_prefixed(std::string_view text, char prefix, const std::string& replacement) {
  auto tokens = split_ascii_ws(text);
  std::vector<std::string_view> out;
  out.reserve(tokens.size());
  for (auto tok : tokens) {
    const bool hit = !tok.empty() && tok.front() == prefix && utf8::count_scalars(tok) > 1;
    out.push_back(hit ? std::string_view(replacement) : tok);
  }
  return join(out);
}

}  // namespace

std::map<std::string, std::string> TweetPrepConfig::default_entity_map() {
  return {{"&amp;", "&"},  {"&lt;", "<"},  {"&gt;", ">"},
          {"&quot;", "\""}, {"&#39;", "'"}, {"&nbsp;", "\xC2\xA0"}};
}

std::vector<std::string> TweetPrepConfig::violations() const {
  std::vector<std::string> out;
  if (link_token.empty() || mention_token.empty() || hashtag_token.empty()) {
    out.push_back("tweet special tokens must be non-empty");
  }
  if (link_token == mention_token || link_token == hashtag_token || mention_token == hashtag_token) {
    out.push_back("tweet special tokens must be distinct");
  }
  for (const auto& [entity, value] : entity_map) {
    if (entity.empty() || entity.front() != '&') out.push_back("entity '" + entity + "' must start with '&'");
    if (value.size() >= entity.size()) out.push_back("entity '" + entity + "' must decode to something shorter");
  }
  return out;
}

std::string moses_detokenize(std::string_view text) {
  std::string out;
  bool glue_next = false;
  for (std::string_view tok : split_ascii_ws(text)) {
    const bool attach_left = is_sentence_punct_run(tok) || is_closing_bracket(tok) || is_clitic(tok);
    if (!out.empty() && !attach_left && !glue_next) out.push_back(' ');
    out.append(tok);
    glue_next = is_opening_bracket(tok);
  }
  return out;
}

std::string collapse_links(std::string_view text, const TweetPrepConfig& cfg) {
  auto tokens = split_ascii_ws(text);
  std::vector<std::string_view> out;
  out.reserve(tokens.size());
  for (auto tok : tokens) {
    const bool link = istarts_with(tok, "http://") || istarts_with(tok, "https://") || istarts_with(tok, "www.");
    out.push_back(link ? std::string_view(cfg.link_token) : tok);
  }
  return join(out);
}

std::string collapse_mentions(std::string_view text, const TweetPrepConfig& cfg) {
  return replace_prefixed(text, '@', cfg.mention_token);
}

std::string collapse_hashtags(std::string_view text, const TweetPrepConfig& cfg) {
  return replace_prefixed(text, '#', cfg.hashtag_token);
}

std::string renormalize_spacing(std::string_view text) {
  const auto tokens = split_ascii_ws(text);
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string_view tok = tokens[i];
    if (!out.empty() && ends_alnum(out.back())) {
      if (is_clitic(tok)) {
        out.back().append(tok);
        continue;
      }
      if (tok == "-" && i + 1 < tokens.size() && starts_alnum(tokens[i + 1])) {
        out.back().append("-").append(tokens[i + 1]);
        ++i;
        continue;
      }
    }
    out.emplace_back(tok);
  }
  return join(out);
}

std::string decode_html_entities(std::string_view text, const TweetPrepConfig& cfg) {
  std::string current(text);
  // Each pass shrinks the string, so this terminates.
  for (bool changed = true; changed;) {
    changed = false;
    std::string next;
    next.reserve(current.size());
    for (std::size_t i = 0; i < current.size();) {
      bool replaced = false;
      if (current[i] == '&') {
        for (const auto& [entity, value] : cfg.entity_map) {
          if (value.size() < entity.size() && current.compare(i, entity.size(), entity) == 0) {
            next += value;
            i += entity.size();
            replaced = changed = true;
            break;
          }
        }
      }
      if (!replaced) next.push_back(current[i++]);
    }
    current = std::move(next);
  }
  return current;
}

std::string preprocess_tweet(std::string_view text, const TweetPrepConfig& cfg) {
  std::string s = moses_detokenize(text);
  s = decode_html_entities(s, cfg);
  s = collapse_links(s, cfg);
  s = collapse_mentions(s, cfg);
  s = collapse_hashtags(s, cfg);
  return renormalize_spacing(s);
}

// ---------------------------------------------------------------------------

int encode_dengue_labels(const DengueLabelVector& v) {
  int n = 0;
  for (bool flag : v.flags) n = (n << 1) | (flag ? 1 : 0);
  return n;
}

DengueLabelVector decode_dengue_labels(int n) {
  if (n < 0 || n > 31) throw std::out_of_range("dengue label " + std::to_string(n) + " is outside [0, 31]");
  DengueLabelVector v;
  for (std::size_t i = 0; i < v.flags.size(); ++i) v.flags[i] = (n >> (4 - i)) & 1;
  return v;
}

// ---------------------------------------------------------------------------

std::string_view to_string(NliLabel label) {
  return label == NliLabel::Entailment ? "entailment" : "contradiction";
}

NliResult make_nli_pairs(std::span<const std::vector<std::string>> articles, const NliOptions& options) {
  NliResult result;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < articles.size(); ++i) {
    if (articles[i].size() >= 2) {
      usable.push_back(i);
    } else {
      ++result.skipped_articles;
    }
  }

  // Picks a sentence != premise from an article other than `self`; falls back
  // to a deterministic scan when random draws keep hitting the premise.
  auto draw_other = [&](std::mt19937_64& rng, std::size_t self_pos, const std::string& premise)
      -> std::pair<std::size_t, const std::string*> {
    const std::size_t others = usable.size() - 1;
    for (int attempt = 0; attempt < 16; ++attempt) {
      std::size_t pick = rng() % others;
      if (pick >= self_pos) ++pick;
      const auto& article = articles[usable[pick]];
      const std::string& sentence = article[rng() % article.size()];
      if (sentence != premise) return {usable[pick], &sentence};
    }
    for (std::size_t pos = 0; pos < usable.size(); ++pos) {
      if (pos == self_pos) continue;
      for (const auto& sentence : articles[usable[pos]]) {
        if (sentence != premise) return {usable[pos], &sentence};
      }
    }
    return {0, nullptr};
  };

  for (std::size_t pos = 0; pos < usable.size(); ++pos) {
    const std::size_t a = usable[pos];
    const auto& sentences = articles[a];
    std::mt19937_64 rng(derive_seed(options.seed, "nli/article/" + std::to_string(a)));
    for (std::size_t j = 0; j + 1 < sentences.size(); ++j) {
      const std::string& earlier = sentences[j];
      const std::string& later = sentences[j + 1];
      if (earlier == later) {
        ++result.skipped_identical;
        continue;
      }
      const std::string& premise = options.later_as_premise ? later : earlier;
      const std::string& hypothesis = options.later_as_premise ? earlier : later;
      result.pairs.push_back({premise, hypothesis, NliLabel::Entailment, a, a});

      if (usable.size() < 2) {
        result.contradictions_impossible = true;
        continue;
      }
      auto [other, sentence] = draw_other(rng, pos, premise);
      if (!sentence) {
        result.contradictions_impossible = true;
        continue;
      }
      result.pairs.push_back({premise, *sentence, NliLabel::Contradiction, a, other});
    }
  }
  return result;
}

}  // namespace tlcorpus
