#include <doctest.h>

#include "genret/text.hpp"

using namespace genret;

TEST_CASE("normalize_text composes, collapses whitespace and keeps case") {
  CHECK(normalize_text("  Hello \t\n World  ") == "Hello World");
  CHECK(normalize_text("e\xCC\x81") == "\xC3\xA9");  // e + combining acute -> é
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("   ") == "");
  CHECK(normalize_text("MiXeD") == "MiXeD");
}

TEST_CASE("split helpers") {
  CHECK(split_whitespace("  a  b\tc ") == std::vector<std::string>{"a", "b", "c"});
  CHECK(join({"a", "b", "c"}, "-") == "a-b-c");
  CHECK(split_terms("The CAT, the-dog's 42!") ==
        std::vector<std::string>{"the", "cat", "the", "dog", "s", "42"});
}

TEST_CASE("hashes match reference values") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST_CASE("mix_seed is stable and key-sensitive") {
  CHECK(mix_seed(1, std::string_view("a")) == mix_seed(1, std::string_view("a")));
  CHECK(mix_seed(1, std::string_view("a")) != mix_seed(1, std::string_view("b")));
  CHECK(mix_seed(1, std::string_view("a")) != mix_seed(2, std::string_view("a")));
  CHECK(mix_seed(7, std::uint64_t{3}) != mix_seed(7, std::uint64_t{4}));
}
