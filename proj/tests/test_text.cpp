#include "tlcorpus/digest.hpp"
#include "tlcorpus/text.hpp"
#include "tlcorpus/utf8.hpp"

#include <doctest.h>

#include <random>

using namespace tlcorpus;

namespace {

std::vector<std::string> to_strings(const std::vector<std::string_view>& v) { return {v.begin(), v.end()}; }

std::string join(const std::vector<std::string_view>& v) {
  std::string out;
  for (auto t : v) {
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

}  // namespace

TEST_CASE("tokenize_ws splits on runs of whitespace") {
  CHECK(to_strings(tokenize_ws("a  b\tc")) == std::vector<std::string>{"a", "b", "c"});
  CHECK(tokenize_ws("").empty());
  CHECK(tokenize_ws(" \t ").empty());
  CHECK(to_strings(tokenize_ws("one-two ///")) == std::vector<std::string>{"one-two", "///"});
}

TEST_CASE("tokenize_ws treats Unicode spaces as separators") {
  // NBSP, ideographic space, em space.
  CHECK(to_strings(tokenize_ws("a\xC2\xA0" "b\xE3\x80\x80" "c\xE2\x80\x83" "d")) ==
        std::vector<std::string>{"a", "b", "c", "d"});
  // Zero-width space is not White_Space.
  CHECK(tokenize_ws("a\xE2\x80\x8B" "b").size() == 1);
}

TEST_CASE("tokenize_ws round trip through single-space join") {
  std::mt19937 rng(11);
  const std::vector<std::string> pieces{"a", "bc", " ", "\t", "\xC2\xA0", "ñ", "  ", "x-y", "\xE3\x80\x80"};
  for (int trial = 0; trial < 500; ++trial) {
    std::string s;
    for (int k = 0; k < 12; ++k) s += pieces[rng() % pieces.size()];
    const auto toks = tokenize_ws(s);
    for (auto t : toks) CHECK(!t.empty());
    const std::string joined = join(toks);
    CHECK(to_strings(tokenize_ws(joined)) == to_strings(toks));
  }
}

TEST_CASE("normalize_line strips terminators and surrounding whitespace") {
  CHECK(normalize_line("  hello \r\n") == "hello");
  CHECK(normalize_line("hello") == "hello");
  CHECK(normalize_line("café\n") == "café");
  CHECK(normalize_line("") == "");
  CHECK(normalize_line("\xC2\xA0 x \xE3\x80\x80") == "x");
}

TEST_CASE("normalize_line keeps decomposed characters as they are") {
  const std::string nfd = "cafe\xCC\x81";
  CHECK(normalize_line(nfd + "\n") == nfd);
}

TEST_CASE("normalize_line never leaves a line break inside the text") {
  const std::string out = normalize_line("a\rb\r\n");
  CHECK(out == "a b");
  CHECK(out.find('\r') == std::string::npos);
  CHECK(out.find('\n') == std::string::npos);
}

TEST_CASE("normalize_line is idempotent") {
  for (std::string s : {"  x  ", "\t\ty\r\n", "a\rb", "\xC2\xA0z", "", "plain"}) {
    const auto once = normalize_line(s);
    CHECK(normalize_line(once) == once);
  }
}

TEST_CASE("normalize_line reports invalid UTF-8 with its location") {
  try {
    normalize_line("ok\xFF", {"oscar", 17});
    FAIL("expected EncodingError");
  } catch (const EncodingError& e) {
    CHECK(e.source_id() == "oscar");
    CHECK(e.line_no() == 17);
    CHECK(e.byte_offset() == 2);
    CHECK(std::string(e.what()).find("oscar") != std::string::npos);
    CHECK(std::string(e.what()).find("17") != std::string::npos);
  }
  CHECK_THROWS_AS(normalize_line("\xC0\x80"), EncodingError);      // overlong
  CHECK_THROWS_AS(normalize_line("\xED\xA0\x80"), EncodingError);  // surrogate
  CHECK_THROWS_AS(normalize_line("\xE2\x82"), EncodingError);      // truncated
}

TEST_CASE("FilterVerdict passes exactly when the reason is None") {
  CHECK(FilterVerdict::pass().passed());
  CHECK(FilterVerdict::pass().reason() == RejectReason::None);
  for (auto r : {RejectReason::NonLatin, RejectReason::Length, RejectReason::PunctRun, RejectReason::AvgWordLen,
                 RejectReason::Html}) {
    CHECK_FALSE(FilterVerdict::reject(r).passed());
    CHECK(reject_reason_from_string(to_string(r)) == r);
  }
  CHECK_THROWS(reject_reason_from_string("Bogus"));
}

TEST_CASE("utf8 character classes") {
  CHECK(utf8::is_white_space(U' '));
  CHECK(utf8::is_white_space(0x3000));
  CHECK_FALSE(utf8::is_white_space(U'a'));
  CHECK(utf8::is_punctuation(U'/'));
  CHECK(utf8::is_punctuation(U'!'));
  CHECK(utf8::is_punctuation(0x2014));  // em dash is Pd
  CHECK_FALSE(utf8::is_punctuation(U'<'));  // Sm
  CHECK(utf8::is_non_latin_letter(U'д'));
  CHECK(utf8::is_non_latin_letter(0x4E2D));
  CHECK_FALSE(utf8::is_non_latin_letter(U'ñ'));
  CHECK_FALSE(utf8::is_non_latin_letter(U'7'));
  CHECK(utf8::count_scalars("ñañ") == 3);
}

TEST_CASE("digest128 is MD5") {
  CHECK(digest128("").hex() == "d41d8cd98f00b204e9800998ecf8427e");
  CHECK(digest128("abc").hex() == "900150983cd24fb0d6963f7d28e17f72");
  CHECK(digest128("message digest").hex() == "f96b697d7cb7938d525a2f31aaf161d0");
}

TEST_CASE("seeded digests and derived seeds") {
  CHECK(seeded_digest128(1, "x") != seeded_digest128(2, "x"));
  CHECK(seeded_digest128(1, "x") == seeded_digest128(1, "x"));
  // Seed bytes are little-endian: seed 0x61 prefixes "a\0\0\0\0\0\0\0".
  CHECK(seeded_digest128(0x61, "") == digest128(std::string("a\0\0\0\0\0\0\0", 8)));
  CHECK(derive_seed(5, "split") != derive_seed(5, "nli"));
  CHECK(derive_seed(5, "split") == derive_seed(5, "split"));
}
