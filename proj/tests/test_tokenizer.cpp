#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "collabrec/tokenizer.hpp"

#include <filesystem>
#include <string>
#include <vector>

using collabrec::lm::Tokenizer;

TEST_CASE("split_words lowercases and drops punctuation, keeps apostrophes") {
  auto w = Tokenizer::split_words("Hello, World! It's a Test-case.");
  std::vector<std::string> expect = {"hello", "world", "it's", "a",
                                     "test", "case"};
  CHECK(w == expect);
}

TEST_CASE("placeholder literals survive as single tokens") {
  auto w = Tokenizer::split_words("feature <UserID> and <TargetItemID>?");
  std::vector<std::string> expect = {"feature", "<userid>", "and",
                                     "<targetitemid>"};
  CHECK(w == expect);
}

TEST_CASE("specials occupy the reserved ids") {
  Tokenizer t = Tokenizer::build({"a b"});
  CHECK(t.token_of(Tokenizer::kPad) == "<pad>");
  CHECK(t.token_of(Tokenizer::kUnk) == "<unk>");
  CHECK(t.token_of(Tokenizer::kUid) == "<userid>");
  CHECK(t.token_of(Tokenizer::kIid) == "<targetitemid>");
  CHECK(t.token_of(Tokenizer::kYes) == "yes");
  CHECK(t.token_of(Tokenizer::kNo) == "no");
  CHECK(t.id_of("yes") == Tokenizer::kYes);
}

TEST_CASE("corpus ids are assigned by frequency then lexicographic order") {
  Tokenizer t = Tokenizer::build({"zebra zebra apple", "mango apple"});
  // apple: 2, zebra: 2, mango: 1 -> apple before zebra (lex), mango last
  CHECK(t.id_of("apple") == Tokenizer::kNumSpecials);
  CHECK(t.id_of("zebra") == Tokenizer::kNumSpecials + 1);
  CHECK(t.id_of("mango") == Tokenizer::kNumSpecials + 2);
  CHECK(t.vocab_size() == Tokenizer::kNumSpecials + 3);
}

TEST_CASE("encode maps unknown words to <unk> and round-trips known text") {
  Tokenizer t = Tokenizer::build({"the quick brown fox"});
  auto ids = t.encode("The QUICK fox says: unknownword!");
  CHECK(ids.size() == 5);
  CHECK(ids[0] == t.id_of("the"));
  CHECK(ids[1] == t.id_of("quick"));
  CHECK(ids[2] == t.id_of("fox"));
  CHECK(ids[3] == Tokenizer::kUnk);  // "says" absent
  CHECK(ids[4] == Tokenizer::kUnk);
  CHECK(t.decode({ids[0], ids[1], ids[2]}) == "the quick fox");
}

TEST_CASE("corpus words colliding with specials do not duplicate ids") {
  Tokenizer t = Tokenizer::build({"yes no yes maybe"});
  CHECK(t.id_of("yes") == Tokenizer::kYes);
  CHECK(t.id_of("no") == Tokenizer::kNo);
  CHECK(t.id_of("maybe") >= Tokenizer::kNumSpecials);
  // vocab holds specials + "maybe" only
  CHECK(t.vocab_size() == Tokenizer::kNumSpecials + 1);
}

TEST_CASE("save/load round trip preserves the vocabulary exactly") {
  Tokenizer t = Tokenizer::build({"some words to keep", "words words"});
  auto path = std::filesystem::temp_directory_path() / "vocab_test.txt";
  t.save(path.string());
  Tokenizer back = Tokenizer::load(path.string());
  CHECK(back.vocab_size() == t.vocab_size());
  for (int i = 0; i < t.vocab_size(); ++i)
    CHECK(back.token_of(i) == t.token_of(i));
  std::filesystem::remove(path);
}

TEST_CASE("load rejects files that do not start with the specials") {
  auto path = std::filesystem::temp_directory_path() / "vocab_bad.txt";
  {
    std::ofstream f(path);
    f << "wrong\norder\n";
  }
  CHECK_THROWS(Tokenizer::load(path.string()));
  std::filesystem::remove(path);
}
