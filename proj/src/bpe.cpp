#include "tlcorpus/bpe.hpp"

#include "tlcorpus/utf8.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace tlcorpus {

namespace {

constexpr std::string_view kMagic = "#tlcorpus-bpe v1";

std::uint64_t pack(std::uint32_t a, std::uint32_t b) { return (static_cast<std::uint64_t>(a) << 32) | b; }
std::uint32_t pack_left(std::uint64_t p) { return static_cast<std::uint32_t>(p >> 32); }
std::uint32_t pack_right(std::uint64_t p) { return static_cast<std::uint32_t>(p & 0xffffffffu); }

std::string char_string(char32_t cp) {
  std::string s;
  utf8::append(s, cp);
  return s;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

bool has_whitespace(std::string_view s) {
  for (std::size_t pos = 0; pos < s.size();) {
    if (utf8::is_white_space(utf8::next(s, pos))) return true;
  }
  return false;
}

// Validation shared by training and add_special_tokens.
void check_special_surface(const std::string& tok) {
  if (tok.empty() || has_whitespace(tok)) {
    throw std::invalid_argument("special token '" + tok + "' must be non-empty and contain no whitespace");
  }
  if (tok.find(kEndOfWord) != std::string::npos) {
    throw std::invalid_argument("special token '" + tok + "' must not contain the end-of-word marker");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Config and corpus statistics

std::vector<std::string> TokenizerConfig::violations() const {
  std::vector<std::string> out;
  if (!(character_coverage > 0.0 && character_coverage <= 1.0)) {
    out.push_back("tokenizer.character_coverage must lie in (0, 1]");
  }
  if (!case_preserving) out.push_back("tokenizer.case_preserving cannot be disabled");
  if (vocab_size <= special_tokens.size()) out.push_back("tokenizer.vocab_size must exceed the special token count");
  std::unordered_set<std::string> seen;
  for (const auto& tok : special_tokens) {
    if (!seen.insert(tok).second) out.push_back("tokenizer.special_tokens contains '" + tok + "' twice");
    try {
      check_special_surface(tok);
    } catch (const std::invalid_argument& e) {
      out.push_back(std::string("tokenizer.") + e.what());
    }
  }
  if (!seen.contains(unknown_token)) out.push_back("tokenizer.unknown_token must be one of special_tokens");
  return out;
}

void WordCounts::add_text(std::string_view text) {
  for (std::string_view word : tokenize_ws(text)) add_word(word);
}

void WordCounts::add_word(std::string_view word, std::uint64_t count) {
  auto it = counts_.find(std::string(word));
  if (it == counts_.end()) {
    counts_.emplace(std::string(word), count);
  } else {
    it->second += count;
  }
}

std::vector<std::pair<std::string, std::uint64_t>> WordCounts::sorted() const {
  std::vector<std::pair<std::string, std::uint64_t>> out(counts_.begin(), counts_.end());
  std::sort(out.begin(), out.end());
  return out;
}

WordCounts count_words(std::span<const SentenceRecord> corpus) {
  WordCounts counts;
  for (const auto& rec : corpus) counts.add_text(rec.text);
  return counts;
}

std::vector<char32_t> build_alphabet(const WordCounts& words, double coverage) {
  if (!(coverage > 0.0 && coverage <= 1.0)) throw std::invalid_argument("character coverage must lie in (0, 1]");
  std::unordered_map<char32_t, std::uint64_t> freq;
  std::uint64_t total = 0;
  for (const auto& [word, count] : words.sorted()) {
    for (std::size_t pos = 0; pos < word.size();) {
      freq[utf8::next(word, pos)] += count;
      total += count;
    }
  }
  if (total == 0) throw std::invalid_argument("cannot build an alphabet from an empty corpus");

  std::vector<std::pair<char32_t, std::uint64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    return x.second != y.second ? x.second > y.second : x.first < y.first;
  });

  std::vector<char32_t> alphabet;
  if (coverage >= 1.0) {
    for (const auto& [cp, n] : ranked) alphabet.push_back(cp);
    return alphabet;
  }
  const double target = coverage * static_cast<double>(total);
  std::uint64_t cumulative = 0;
  for (const auto& [cp, n] : ranked) {
    alphabet.push_back(cp);
    cumulative += n;
    if (static_cast<double>(cumulative) + 1e-9 * static_cast<double>(total) >= target) break;
  }
  return alphabet;
}

std::vector<char32_t> build_alphabet(std::span<const SentenceRecord> corpus, double coverage) {
  return build_alphabet(count_words(corpus), coverage);
}

// ---------------------------------------------------------------------------
// Model

BpeModel::BpeModel(Header header, std::vector<std::string> vocab,
                   std::vector<std::pair<std::string, std::string>> merges)
    : header_(std::move(header)), vocab_(std::move(vocab)), merges_(std::move(merges)) {
  const std::size_t n = vocab_.size();
  if (header_.reserved_specials + header_.added_specials > n) throw std::invalid_argument("bpe: header special counts exceed vocab");
  for (std::size_t id = 0; id < n; ++id) {
    const auto tid = static_cast<TokenId>(id);
    if (is_special(tid)) {
      if (!special_ids_.emplace(vocab_[id], tid).second) {
        throw std::invalid_argument("bpe: duplicate special token '" + vocab_[id] + "'");
      }
    } else if (!subword_ids_.emplace(vocab_[id], tid).second) {
      throw std::invalid_argument("bpe: duplicate subword '" + vocab_[id] + "'");
    }
  }
  auto unk = special_ids_.find(header_.unknown_token);
  if (unk == special_ids_.end()) throw std::invalid_argument("bpe: unknown token is not a special token");
  unknown_id_ = unk->second;

  for (std::size_t rank = 0; rank < merges_.size(); ++rank) {
    const auto& [left, right] = merges_[rank];
    auto l = subword_ids_.find(left);
    auto r = subword_ids_.find(right);
    auto o = subword_ids_.find(left + right);
    if (l == subword_ids_.end() || r == subword_ids_.end() || o == subword_ids_.end()) {
      throw std::invalid_argument("bpe: merge " + std::to_string(rank + 1) + " (" + left + " " + right +
                                  ") refers to a subword missing from the vocabulary");
    }
    // A repeated pair keeps its first (lowest) rank.
    merge_table_.try_emplace(pack(static_cast<std::uint32_t>(l->second), static_cast<std::uint32_t>(r->second)),
                             rank, o->second);
  }
}

const std::string& BpeModel::subword(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocab_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " is outside the vocabulary (size " +
                            std::to_string(vocab_.size()) + ")");
  }
  return vocab_[static_cast<std::size_t>(id)];
}

bool BpeModel::is_special(TokenId id) const {
  const auto i = static_cast<std::size_t>(id);
  return i < header_.reserved_specials || i >= vocab_.size() - header_.added_specials;
}

std::optional<TokenId> BpeModel::special_id(std::string_view surface) const {
  auto it = special_ids_.find(std::string(surface));
  if (it == special_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<TokenId> BpeModel::subword_id(std::string_view subword) const {
  auto it = subword_ids_.find(std::string(subword));
  if (it == subword_ids_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::pair<std::size_t, TokenId>> BpeModel::merge_for(TokenId left, TokenId right) const {
  auto it = merge_table_.find(pack(static_cast<std::uint32_t>(left), static_cast<std::uint32_t>(right)));
  if (it == merge_table_.end()) return std::nullopt;
  return it->second;
}

void BpeModel::write_merges(std::ostream& out) const {
  out << kMagic << "\tmarker=" << kEndOfWord << "\tmarker_placement=word-final-suffix"
      << "\ttie_break=lexicographic\tcased=true"
      << "\tvocab_size=" << header_.trained_vocab_size << "\tcoverage=" << format_double(header_.character_coverage)
      << "\tunk=" << header_.unknown_token << "\treserved=" << header_.reserved_specials
      << "\tadded=" << header_.added_specials << '\n';
  for (const auto& [left, right] : merges_) out << left << ' ' << right << '\n';
}

void BpeModel::write_vocab(std::ostream& out) const {
  for (std::size_t id = 0; id < vocab_.size(); ++id) out << vocab_[id] << '\t' << id << '\n';
}

BpeModel BpeModel::read(std::istream& merges_in, std::istream& vocab_in) {
  std::string line;
  if (!std::getline(merges_in, line) || !line.starts_with(kMagic)) {
    throw std::runtime_error("bpe merges file: missing '" + std::string(kMagic) + "' header");
  }
  Header header;
  std::map<std::string, std::string> fields;
  std::istringstream header_stream(line.substr(kMagic.size()));
  std::string field;
  while (std::getline(header_stream, field, '\t')) {
    if (field.empty()) continue;
    const auto eq = field.find('=');
    if (eq == std::string::npos) throw std::runtime_error("bpe merges file: malformed header field '" + field + "'");
    fields[field.substr(0, eq)] = field.substr(eq + 1);
  }
  auto require = [&](const std::string& key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw std::runtime_error("bpe merges file: header lacks '" + key + "'");
    return it->second;
  };
  if (require("marker") != kEndOfWord) throw std::runtime_error("bpe merges file: unsupported marker " + require("marker"));
  if (require("tie_break") != "lexicographic") throw std::runtime_error("bpe merges file: unsupported tie_break");
  header.trained_vocab_size = std::stoull(require("vocab_size"));
  const std::string& cov = require("coverage");
  std::from_chars(cov.data(), cov.data() + cov.size(), header.character_coverage);
  header.unknown_token = require("unk");
  header.reserved_specials = std::stoull(require("reserved"));
  header.added_specials = std::stoull(require("added"));

  std::vector<std::pair<std::string, std::string>> merges;
  std::size_t line_no = 1;
  while (std::getline(merges_in, line)) {
    ++line_no;
    const auto sp = line.find(' ');
    if (sp == std::string::npos || sp == 0 || sp + 1 == line.size() || line.find(' ', sp + 1) != std::string::npos) {
      throw std::runtime_error("bpe merges file: line " + std::to_string(line_no) + " is not a 'left right' pair");
    }
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }

  std::vector<std::string> vocab;
  line_no = 0;
  while (std::getline(vocab_in, line)) {
    ++line_no;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) throw std::runtime_error("bpe vocab file: line " + std::to_string(line_no) + " lacks a tab");
    if (std::stoull(line.substr(tab + 1)) != vocab.size()) {
      throw std::runtime_error("bpe vocab file: line " + std::to_string(line_no) + " has a non-sequential id");
    }
    vocab.push_back(line.substr(0, tab));
  }
  return BpeModel(std::move(header), std::move(vocab), std::move(merges));
}

void BpeModel::save(const std::filesystem::path& prefix) const {
  std::ofstream merges(prefix.string() + ".merges", std::ios::binary);
  std::ofstream vocab(prefix.string() + ".vocab", std::ios::binary);
  if (!merges || !vocab) throw std::runtime_error("cannot write tokenizer files at " + prefix.string());
  write_merges(merges);
  write_vocab(vocab);
}

BpeModel BpeModel::load(const std::filesystem::path& prefix) {
  std::ifstream merges(prefix.string() + ".merges", std::ios::binary);
  std::ifstream vocab(prefix.string() + ".vocab", std::ios::binary);
  if (!merges || !vocab) throw std::runtime_error("cannot read tokenizer files at " + prefix.string());
  return read(merges, vocab);
}

// ---------------------------------------------------------------------------
// Learning

namespace {

constexpr std::uint32_t kUnkSymbol = 0xffffffffu;

class BpeTrainer {
 public:
  BpeTrainer(const WordCounts& words, const TokenizerConfig& cfg) : cfg_(cfg) {
    alphabet_ = build_alphabet(words, cfg.character_coverage);
    for (char32_t cp : alphabet_) intern(char_string(cp));
    marker_ = intern(std::string(kEndOfWord));

    std::unordered_map<char32_t, std::uint32_t> char_symbol;
    for (std::size_t i = 0; i < alphabet_.size(); ++i) char_symbol[alphabet_[i]] = static_cast<std::uint32_t>(i);
    for (auto& [word, count] : words.sorted()) {
      std::vector<std::uint32_t> syms;
      for (std::size_t pos = 0; pos < word.size();) {
        auto it = char_symbol.find(utf8::next(word, pos));
        syms.push_back(it == char_symbol.end() ? kUnkSymbol : it->second);
      }
      syms.push_back(marker_);
      words_.push_back(std::move(syms));
      freqs_.push_back(static_cast<std::int64_t>(count));
    }
  }

  BpeModel run() {
    for (const auto& tok : cfg_.special_tokens) {
      if (symbol_ids_.contains(tok)) {
        throw std::invalid_argument("special token '" + tok + "' collides with an alphabet symbol");
      }
    }
    const std::size_t base = cfg_.special_tokens.size() + symbols_.size();
    if (cfg_.vocab_size < base) {
      throw std::invalid_argument("vocab_size " + std::to_string(cfg_.vocab_size) + " is smaller than the " +
                                  std::to_string(cfg_.special_tokens.size()) + " special tokens plus " +
                                  std::to_string(symbols_.size()) + " alphabet symbols");
    }

    for (std::uint32_t w = 0; w < words_.size(); ++w) {
      add_word_pairs(w, +1);
    }
    apply_pending();

    std::vector<std::pair<std::string, std::string>> merges;
    std::vector<std::string> learned;
    while (cfg_.special_tokens.size() + symbols_.size() < cfg_.vocab_size) {
      if (queue_.empty()) {
        throw std::invalid_argument("corpus exhausted after " + std::to_string(merges.size()) +
                                    " merges; vocab_size " + std::to_string(cfg_.vocab_size) + " is unreachable");
      }
      const std::uint64_t best = queue_.begin()->second;
      const std::uint32_t left = pack_left(best);
      const std::uint32_t right = pack_right(best);
      const std::uint32_t merged = intern(symbols_[left] + symbols_[right]);
      merges.emplace_back(symbols_[left], symbols_[right]);
      merge_everywhere(best, left, right, merged);
      if (counts_.contains(best)) throw std::logic_error("bpe: merged pair still has occurrences");
    }

    std::vector<std::string> vocab = cfg_.special_tokens;
    vocab.insert(vocab.end(), symbols_.begin(), symbols_.end());
    BpeModel::Header header{cfg_.vocab_size, cfg_.character_coverage, cfg_.unknown_token,
                            cfg_.special_tokens.size(), 0};
    return BpeModel(std::move(header), std::move(vocab), std::move(merges));
  }

 private:
  // Higher count first, then lexicographic (left, right).
  struct QueueOrder {
    const std::vector<std::string>* symbols;
    bool operator()(const std::pair<std::int64_t, std::uint64_t>& x,
                    const std::pair<std::int64_t, std::uint64_t>& y) const {
      if (x.first != y.first) return x.first > y.first;
      const auto& xl = (*symbols)[pack_left(x.second)];
      const auto& yl = (*symbols)[pack_left(y.second)];
      if (xl != yl) return xl < yl;
      return (*symbols)[pack_right(x.second)] < (*symbols)[pack_right(y.second)];
    }
  };

  std::uint32_t intern(const std::string& s) {
    auto [it, inserted] = symbol_ids_.try_emplace(s, static_cast<std::uint32_t>(symbols_.size()));
    if (inserted) symbols_.push_back(s);
    return it->second;
  }

  void add_word_pairs(std::uint32_t w, std::int64_t sign) {
    const auto& syms = words_[w];
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      if (syms[i] == kUnkSymbol || syms[i + 1] == kUnkSymbol) continue;
      const std::uint64_t p = pack(syms[i], syms[i + 1]);
      pending_[p] += sign * freqs_[w];
      if (sign > 0) where_[p].push_back(w);
    }
  }

  void apply_pending() {
    for (const auto& [p, delta] : pending_) {
      if (delta == 0) continue;
      auto& count = counts_[p];
      if (count > 0) queue_.erase({count, p});
      count += delta;
      if (count > 0) {
        queue_.insert({count, p});
      } else {
        counts_.erase(p);
      }
    }
    pending_.clear();
  }

  void merge_everywhere(std::uint64_t pair, std::uint32_t left, std::uint32_t right, std::uint32_t merged) {
    auto node = where_.extract(pair);
    std::vector<std::uint32_t> affected = std::move(node.mapped());
    std::sort(affected.begin(), affected.end());
    affected.erase(std::unique(affected.begin(), affected.end()), affected.end());
    for (std::uint32_t w : affected) {
      auto& syms = words_[w];
      bool present = false;
      for (std::size_t i = 0; i + 1 < syms.size() && !present; ++i) present = syms[i] == left && syms[i + 1] == right;
      if (!present) continue;
      add_word_pairs(w, -1);
      std::vector<std::uint32_t> out;
      out.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size();) {
        if (i + 1 < syms.size() && syms[i] == left && syms[i + 1] == right) {
          out.push_back(merged);
          i += 2;
        } else {
          out.push_back(syms[i]);
          ++i;
        }
      }
      syms = std::move(out);
      add_word_pairs(w, +1);
    }
    apply_pending();
  }

  const TokenizerConfig& cfg_;
  std::vector<char32_t> alphabet_;
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, std::uint32_t> symbol_ids_;
  std::uint32_t marker_ = 0;
  std::vector<std::vector<std::uint32_t>> words_;
  std::vector<std::int64_t> freqs_;
  std::unordered_map<std::uint64_t, std::int64_t> counts_;
  std::unordered_map<std::uint64_t, std::int64_t> pending_;
  std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> where_;
  std::set<std::pair<std::int64_t, std::uint64_t>, QueueOrder> queue_{QueueOrder{&symbols_}};
};

}  // namespace

BpeModel learn_bpe(const WordCounts& words, const TokenizerConfig& cfg) {
  if (auto v = cfg.violations(); !v.empty()) throw std::invalid_argument(v.front());
  if (words.empty()) throw std::invalid_argument("cannot learn BPE from an empty corpus");
  return BpeTrainer(words, cfg).run();
}

BpeModel learn_bpe(std::span<const SentenceRecord> corpus, const TokenizerConfig& cfg) {
  return learn_bpe(count_words(corpus), cfg);
}

// ---------------------------------------------------------------------------
// Encoding

std::vector<TokenId> encode_word(const BpeModel& model, std::string_view word) {
  std::vector<TokenId> syms;
  for (std::size_t pos = 0; pos < word.size();) {
    const std::size_t start = pos;
    utf8::next(word, pos);
    const auto id = model.subword_id(word.substr(start, pos - start));
    syms.push_back(id ? *id : model.unknown_id());
  }
  syms.push_back(*model.subword_id(kEndOfWord));

  // Lowest-rank pair first; among equal ranks the leftmost occurrence.
  while (syms.size() > 1) {
    std::size_t best_rank = SIZE_MAX;
    std::size_t best_pos = 0;
    TokenId best_out = 0;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i) {
      if (auto m = model.merge_for(syms[i], syms[i + 1]); m && m->first < best_rank) {
        best_rank = m->first;
        best_pos = i;
        best_out = m->second;
      }
    }
    if (best_rank == SIZE_MAX) break;
    syms[best_pos] = best_out;
    syms.erase(syms.begin() + static_cast<std::ptrdiff_t>(best_pos) + 1);
  }
  return syms;
}

std::vector<TokenId> encode(const BpeModel& model, std::string_view text) {
  std::vector<TokenId> ids;
  for (std::string_view word : tokenize_ws(text)) {
    if (auto special = model.special_id(word); special && *special != model.unknown_id()) {
      ids.push_back(*special);
      continue;
    }
    const auto piece = encode_word(model, word);
    ids.insert(ids.end(), piece.begin(), piece.end());
  }
  return ids;
}

std::vector<TokenId> CachingEncoder::encode(std::string_view text) {
  std::vector<TokenId> ids;
  for (std::string_view word : tokenize_ws(text)) {
    if (auto special = model_.special_id(word); special && *special != model_.unknown_id()) {
      ids.push_back(*special);
      continue;
    }
    auto it = cache_.find(std::string(word));
    if (it == cache_.end()) it = cache_.emplace(std::string(word), encode_word(model_, word)).first;
    ids.insert(ids.end(), it->second.begin(), it->second.end());
  }
  return ids;
}

std::string decode(const BpeModel& model, std::span<const TokenId> ids) {
  std::string joined;
  for (TokenId id : ids) {
    const std::string& piece = model.subword(id);
    joined += piece;
    // Whole-token specials end a word; the unknown symbol lives inside one.
    if (model.is_special(id) && id != model.unknown_id()) joined += kEndOfWord;
  }
  std::string out;
  out.reserve(joined.size());
  for (std::size_t pos = 0; pos < joined.size();) {
    if (joined.compare(pos, kEndOfWord.size(), kEndOfWord) == 0) {
      out.push_back(' ');
      pos += kEndOfWord.size();
    } else {
      out.push_back(joined[pos++]);
    }
  }
  if (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

BpeModel add_special_tokens(const BpeModel& model, std::span<const std::string> tokens) {
  std::vector<std::string> vocab;
  vocab.reserve(model.vocab_size() + tokens.size());
  for (std::size_t id = 0; id < model.vocab_size(); ++id) vocab.push_back(model.subword(static_cast<TokenId>(id)));
  std::unordered_set<std::string> fresh;
  for (const auto& tok : tokens) {
    check_special_surface(tok);
    if (model.special_id(tok) || model.subword_id(tok) || !fresh.insert(tok).second) {
      throw std::invalid_argument("token '" + tok + "' is already in the vocabulary");
    }
    vocab.push_back(tok);
  }
  BpeModel::Header header = model.header();
  header.added_specials += tokens.size();
  return BpeModel(std::move(header), std::move(vocab), model.merges());
}

}  // namespace tlcorpus
