#include "vrar/unicode.hpp"

#include "gen.hpp"
#include "oracle.hpp"

#include <doctest.h>

using namespace vrar::unicode;

TEST_CASE("decode and encode round-trip valid text") {
  const std::string s = "a你😀é";
  const auto cps = decode(s);
  REQUIRE(cps.size() == 4);
  CHECK(cps[1] == U'你');
  CHECK(cps[2] == U'\U0001F600');
  CHECK(encode(cps) == s);
}

TEST_CASE("ill-formed bytes decode to the replacement character") {
  const std::string bad = "a\xFF" "b\xE4\xBD";
  const auto cps = decode(bad);
  REQUIRE(cps.size() == 4);
  CHECK(cps[1] == U'�');
  CHECK(cps[3] == U'�');
  CHECK_FALSE(is_valid_utf8(bad));
  CHECK(is_valid_utf8("你好"));
  CHECK_FALSE(is_valid_utf8("\xC0\x80"));  // overlong
  CHECK_FALSE(is_valid_utf8("\xED\xA0\x80"));  // surrogate
}

TEST_CASE("nfc composes decomposed input") {
  CHECK(nfc("e\xCC\x81") == "\xC3\xA9");
  CHECK(nfc("caf\xC3\xA9") == "caf\xC3\xA9");
  CHECK(nfc("plain ascii") == "plain ascii");
}

TEST_CASE("match_key folds case after normalization") {
  CHECK(match_key("ABC") == "abc");
  CHECK(match_key("E\xCC\x81") == match_key("\xC3\xA9"));
  CHECK(match_key("Straße") == "strasse");
  CHECK(match_key("ΣΑΣ") == match_key("σας"));
  CHECK(match_key("你好") == "你好");
}

TEST_CASE("match_key agrees with the table oracle on generated text") {
  gen::Rng rng(101);
  for (int i = 0; i < 2000; ++i) {
    const std::string t = gen::text(rng, 12);
    INFO(t);
    const std::u32string want = oracle::match_key(t);
    CHECK(decode(match_key(t)) == std::vector<char32_t>(want.begin(), want.end()));
  }
}

TEST_CASE("is_whitespace follows White_Space") {
  CHECK(is_whitespace(U' '));
  CHECK(is_whitespace(U'\n'));
  CHECK(is_whitespace(U'　'));
  CHECK(is_whitespace(U' '));
  CHECK_FALSE(is_whitespace(U'​'));  // zero width space is not White_Space
  CHECK_FALSE(is_whitespace(U'a'));
}

TEST_CASE("trim strips Unicode whitespace at both ends") {
  CHECK(trim("  a b \n") == "a b");
  CHECK(trim("　你好　") == "你好");
  CHECK(trim(" \t ") == "");
  CHECK(trim("") == "");
}

TEST_CASE("count_occurrences is non-overlapping and honours the limit") {
  CHECK(count_occurrences("haha", "ha") == 2);
  CHECK(count_occurrences("aaaa", "aa") == 2);
  CHECK(count_occurrences("aaa", "aa") == 1);
  CHECK(count_occurrences("abc", "") == 0);
  CHECK(count_occurrences("aaaaaa", "a", 3) == 3);
  CHECK(count_occurrences("</think></think>", "</think>") == 2);
}

TEST_CASE("erase_all removes every occurrence") {
  CHECK(erase_all("<think>a</think>b", "<think>") == "a</think>b");
  CHECK(erase_all("xxx", "x") == "");
  CHECK(erase_all("abc", "") == "abc");
}
