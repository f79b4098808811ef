#include <doctest.h>

#include <fstream>
#include <set>

#include "stylo/corpus.hpp"

using namespace stylo;

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(line);
  return lines;
}

TaggedSentence real_sentence(int n_slots, int true_len) {
  TaggedSentence s;
  s.tag_ids.assign(static_cast<std::size_t>(n_slots), TagSet::kPad);
  for (int t = 0; t < true_len; ++t) s.tag_ids[static_cast<std::size_t>(t)] = 0;
  s.true_length = true_len;
  return s;
}

}  // namespace

TEST_CASE("split_sentences basic cases") {
  CHECK(split_sentences("A cat. A dog.") == std::vector<std::string>{"A cat.", "A dog."});
  CHECK(split_sentences("Mr. Smith ran.") == std::vector<std::string>{"Mr. Smith ran."});
  CHECK(split_sentences("") == std::vector<std::string>{});
}

TEST_CASE("split_sentences matches the hand-segmented fixture") {
  const auto expected = read_lines(std::string(STYLO_TEST_DATA_DIR) + "/sentences_expected.txt");
  REQUIRE(expected.size() == 50);
  std::string raw;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i) raw += (i % 7 == 0) ? "\n" : " ";
    raw += expected[i];
  }
  const auto got = split_sentences(raw);
  REQUIRE(got.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(got[i] == expected[i]);
}

TEST_CASE("split_sentences covers the input modulo delimiters") {
  const std::string text = "One day it rained. The cat slept! Did the dog bark? Nobody knows.";
  const auto sents = split_sentences(text);
  std::string joined;
  for (const auto& s : sents) joined += s + " ";
  // every non-space char of the input shows up in order
  std::string a, b;
  for (char c : text)
    if (c != ' ') a += c;
  for (char c : joined)
    if (c != ' ') b += c;
  CHECK(a == b);
}

TEST_CASE("tokenize detaches tag-set punctuation") {
  CHECK(tokenize("He ran, fast.").tokens == std::vector<std::string>{"He", "ran", ",", "fast", "."});
  CHECK(tokenize("cost $5").tokens == std::vector<std::string>{"cost", "$", "5"});
  CHECK(tokenize("word").tokens == std::vector<std::string>{"word"});
}

TEST_CASE("tokenize handles quotes, ellipses and abbreviations") {
  CHECK(tokenize("\"Stop!\" he said...").tokens ==
        std::vector<std::string>{"``", "Stop", "!", "''", "he", "said", "..."});
  CHECK(tokenize("Mr. Smith (the elder) left.").tokens ==
        std::vector<std::string>{"Mr.", "Smith", "(", "the", "elder", ")", "left", "."});
}

TEST_CASE("tokenize rejects whitespace-only input") {
  CHECK_THROWS_AS(tokenize("   \t "), SentenceEmpty);
  CHECK_THROWS_AS(tokenize(""), SentenceEmpty);
}

TEST_CASE("segment_document window arithmetic") {
  std::vector<TaggedSentence> doc;
  SUBCASE("250 sentences, M=100 -> 3 segments (remainder 50 kept padded)") {
    doc.assign(250, real_sentence(30, 10));
    const auto segs = segment_document(doc, 100, 0, "d");
    REQUIRE(segs.size() == 3);
    CHECK(segs[2].sentences.size() == 100);
    int fillers = 0;
    for (const auto& s : segs[2].sentences)
      if (s.is_filler()) ++fillers;
    CHECK(fillers == 50);
  }
  SUBCASE("100 sentences, M=100 -> exactly 1 segment") {
    doc.assign(100, real_sentence(30, 10));
    CHECK(segment_document(doc, 100, 0, "d").size() == 1);
  }
  SUBCASE("149 sentences, M=100 -> 1 segment, remainder 49 dropped") {
    doc.assign(149, real_sentence(30, 10));
    CHECK(segment_document(doc, 100, 0, "d").size() == 1);
  }
  SUBCASE("zero sentences -> EmptyDocument") {
    CHECK_THROWS_AS(segment_document(doc, 100, 0, "d"), EmptyDocument);
  }
}

TEST_CASE("segmentation is lossless up to the dropped tail") {
  for (int n_sent : {37, 100, 149, 250, 731}) {
    std::vector<TaggedSentence> doc(static_cast<std::size_t>(n_sent), real_sentence(20, 5));
    const int M = 100;
    const auto segs = segment_document(doc, M, 3, "doc");
    std::size_t real_count = 0;
    for (const auto& seg : segs) {
      CHECK(seg.author_id == 3);
      for (const auto& s : seg.sentences)
        if (!s.is_filler()) ++real_count;
    }
    const std::size_t windows = static_cast<std::size_t>(n_sent) / M;
    const std::size_t rem = static_cast<std::size_t>(n_sent) % M;
    const std::size_t dropped = rem >= 50 ? 0 : rem;
    CHECK(real_count + dropped == static_cast<std::size_t>(n_sent));
    (void)windows;
  }
}

TEST_CASE("compute_corpus_stats") {
  SUBCASE("single sentence of 5 tokens") {
    TokenizedSentence s;
    s.tokens = {"a", "b", "c", "d", "e"};
    const auto stats = compute_corpus_stats({{"x", {s}}});
    REQUIRE(stats.size() == 1);
    CHECK(stats[0].word_count == 5);
    CHECK(stats[0].mean_sentence_length == doctest::Approx(5.0));
  }
  SUBCASE("two sentences of 3 and 5 tokens") {
    TokenizedSentence a, b;
    a.tokens = {"x", "y", "z"};
    b.tokens = {"p", "q", "r", "s", "t"};
    const auto stats = compute_corpus_stats({{"x", {a, b}}});
    CHECK(stats[0].word_count == 8);
    CHECK(stats[0].mean_sentence_length == doctest::Approx(4.0));
  }
}

TEST_CASE("make_split is deterministic and disjoint") {
  std::vector<Segment> pool;
  for (int i = 0; i < 100; ++i) {
    Segment s;
    s.author_id = i % 4;
    s.source_doc = "doc" + std::to_string(i);
    s.position = i;
    pool.push_back(s);
  }
  const auto s1 = make_split(pool, {}, 0.1, 99);
  const auto s2 = make_split(pool, {}, 0.1, 99);
  REQUIRE(s1.validation.size() == 10);
  REQUIRE(s1.train.size() == 90);
  for (std::size_t i = 0; i < s1.train.size(); ++i)
    CHECK(s1.train[i].source_doc == s2.train[i].source_doc);
  std::set<std::string> val_docs;
  for (const auto& s : s1.validation) val_docs.insert(s.source_doc);
  for (const auto& s : s1.train) CHECK(val_docs.count(s.source_doc) == 0);

  const auto s3 = make_split(pool, {}, 0.1, 100);
  bool same = true;
  for (std::size_t i = 0; i < s1.train.size(); ++i)
    if (s1.train[i].source_doc != s3.train[i].source_doc) same = false;
  CHECK_FALSE(same);
}

TEST_CASE("normalize_nfc composes common diacritics") {
  // "e" + combining acute -> U+00E9
  const std::string decomposed = "caf\x65\xcc\x81";
  const std::string composed = "caf\xc3\xa9";
  CHECK(normalize_nfc(decomposed) == composed);
  CHECK(normalize_nfc("plain ascii") == "plain ascii");
  CHECK(normalize_nfc(composed) == composed);
}
