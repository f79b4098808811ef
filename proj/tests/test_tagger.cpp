#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <map>

#include "stylo/rng.hpp"
#include "stylo/tagger.hpp"

using namespace stylo;

namespace {

// Tagged-corpus generator: bigram chain over a small tag inventory with
// per-tag lexicons; a few words are ambiguous across tags so the fixture is
// not pure memorization.
std::vector<GoldSentence> make_fixture(std::size_t n_sentences, std::uint64_t seed) {
  struct Entry {
    const char* tag;
    std::vector<const char*> words;
    std::map<const char*, double> next;  // transition weights by tag
  };
  static const std::vector<Entry> kGrammar = {
      {"DT", {"the", "a", "this", "every"}, {{"NN", 5}, {"JJ", 3}, {"NNS", 2}}},
      {"JJ", {"old", "red", "quiet", "fast", "light"}, {{"NN", 5}, {"NNS", 2}}},
      {"NN", {"house", "run", "saw", "river", "light", "story", "dog"}, {{"VBZ", 3}, {"VBD", 3}, {"IN", 2}, {".", 2}}},
      {"NNS", {"dogs", "hills", "voices", "runs"}, {{"VBD", 3}, {"IN", 2}, {".", 2}}},
      {"PRP", {"he", "she", "they", "it"}, {{"VBD", 4}, {"VBZ", 3}, {"MD", 2}}},
      {"VBD", {"walked", "saw", "spoke", "ran"}, {{"DT", 4}, {"IN", 2}, {"RB", 2}, {".", 2}}},
      {"VBZ", {"walks", "sees", "runs", "speaks"}, {{"DT", 4}, {"IN", 2}, {"RB", 1}, {".", 2}}},
      {"MD", {"will", "can", "must"}, {{"VB", 5}}},
      {"VB", {"run", "walk", "see", "speak"}, {{"DT", 3}, {"RB", 2}, {".", 2}}},
      {"IN", {"in", "over", "under", "with"}, {{"DT", 5}, {"PRP", 2}}},
      {"RB", {"fast", "slowly", "again"}, {{".", 3}, {"IN", 1}}},
      {".", {"."}, {{"DT", 1}}},
  };
  auto find = [&](const std::string& tag) -> const Entry& {
    for (const auto& e : kGrammar)
      if (tag == e.tag) return e;
    return kGrammar.front();
  };

  Rng rng(seed);
  std::vector<GoldSentence> out;
  for (std::size_t s = 0; s < n_sentences; ++s) {
    GoldSentence sent;
    std::string tag = rng.uniform() < 0.5 ? "DT" : "PRP";
    const int len = 6 + static_cast<int>(rng.below(9));
    for (int i = 0; i < len; ++i) {
      const Entry& e = find(tag);
      sent.tokens.push_back(e.words[rng.below(e.words.size())]);
      sent.tags.push_back(e.tag);
      if (tag == ".") break;
      double total = 0;
      for (const auto& [t, w] : e.next) total += w;
      double u = rng.uniform() * total;
      const char* next = e.next.begin()->first;
      for (const auto& [t, w] : e.next) {
        u -= w;
        next = t;
        if (u <= 0) break;
      }
      tag = next;
    }
    out.push_back(std::move(sent));
  }
  return out;
}

}  // namespace

TEST_CASE("train_tagger memorizes an unambiguous token") {
  std::vector<GoldSentence> corpus;
  for (int i = 0; i < 20; ++i) {
    GoldSentence s;
    s.tokens = {"the", "dog", "ran", "."};
    s.tags = {"DT", "NN", "VBD", "."};
    corpus.push_back(s);
  }
  const auto model = PerceptronTagger::train(corpus, 3, 1);
  const auto ids = model.tag({"the", "cat"});
  CHECK(tagset().name(ids[0]) == "DT");
}

TEST_CASE("train_tagger rejects an empty corpus") {
  CHECK_THROWS_AS(PerceptronTagger::train({}, 5, 1), NoTrainingData);
}

TEST_CASE("tagger reaches 90% held-out accuracy on the 1000-sentence fixture") {
  const auto train_set = make_fixture(1000, 11);
  const auto held_out = make_fixture(200, 22);
  const auto model = PerceptronTagger::train(train_set, 5, 3);
  std::size_t correct = 0, total = 0;
  for (const auto& sent : held_out) {
    const auto ids = model.tag(sent.tokens);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (tagset().name(ids[i]) == sent.tags[i]) ++correct;
      ++total;
    }
  }
  const double acc = static_cast<double>(correct) / static_cast<double>(total);
  INFO("held-out accuracy ", acc);
  CHECK(acc >= 0.90);
}

TEST_CASE("tag_sentence maps punctuation to itself and preserves length") {
  PerceptronTagger empty;
  const auto ids = empty.tag({","});
  CHECK(ids == std::vector<int>{tagset().index(",")});
  for (std::size_t k : {std::size_t(1), std::size_t(5), std::size_t(12)}) {
    std::vector<std::string> toks(k, "word");
    CHECK(empty.tag(toks).size() == k);
  }
}

TEST_CASE("tagging is deterministic given a fixed model") {
  const auto model = PerceptronTagger::train(make_fixture(100, 5), 3, 9);
  const std::vector<std::string> toks = {"the", "saw", "runs", "fast", "."};
  CHECK(model.tag(toks) == model.tag(toks));
}

TEST_CASE("tagger checkpoint round-trips") {
  const auto model = PerceptronTagger::train(make_fixture(150, 6), 3, 9);
  const std::string path = "tagger_ckpt_test.json";
  model.save(path);
  const auto loaded = PerceptronTagger::load(path);
  const auto fixture = make_fixture(50, 77);
  for (const auto& sent : fixture) CHECK(model.tag(sent.tokens) == loaded.tag(sent.tokens));
  std::remove(path.c_str());
}

TEST_CASE("load_pretagged parses token/TAG lines") {
  const std::string path = "pretagged_test.txt";
  {
    std::ofstream out(path);
    out << "He/PRP ran/VBD ./.\n";
    out << "He/XYZ stopped/VBD\n";
  }
  std::size_t unknown = 0;
  const auto sents = load_pretagged(path, &unknown);
  REQUIRE(sents.size() == 2);
  CHECK(sents[0][0].second == tagset().index("PRP"));
  CHECK(sents[0][1].second == tagset().index("VBD"));
  CHECK(sents[0][2].second == tagset().index("."));
  CHECK(sents[1][0].second == TagSet::kUnk);
  CHECK(unknown == 1);
  std::remove(path.c_str());
}

TEST_CASE("load_pretagged reports malformed tokens with line numbers") {
  const std::string path = "pretagged_bad.txt";
  {
    std::ofstream out(path);
    out << "Heran.\n";
  }
  CHECK_THROWS_AS(load_pretagged(path), MalformedPretagged);
  try {
    load_pretagged(path);
  } catch (const MalformedPretagged& e) {
    CHECK(e.line_number == 1);
  }
  std::remove(path.c_str());
}

TEST_CASE("pretagged round-trip reproduces the file modulo whitespace") {
  const std::string p1 = "pretag_rt1.txt", p2 = "pretag_rt2.txt";
  {
    std::ofstream out(p1);
    out << "The/DT  river/NN rose/VBD ./.\n";
    out << "It/PRP   fell/VBD ./.\n";
  }
  const auto sents = load_pretagged(p1);
  save_pretagged(p2, sents);
  const auto again = load_pretagged(p2);
  REQUIRE(again.size() == sents.size());
  for (std::size_t i = 0; i < sents.size(); ++i) {
    REQUIRE(again[i].size() == sents[i].size());
    for (std::size_t j = 0; j < sents[i].size(); ++j) {
      CHECK(again[i][j].first == sents[i][j].first);
      CHECK(again[i][j].second == sents[i][j].second);
    }
  }
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("pad_or_truncate") {
  TaggedSentence s;
  s.tag_ids.assign(35, 3);
  s.true_length = 35;
  SUBCASE("truncates to the head") {
    const auto out = pad_or_truncate(s, 30);
    CHECK(out.tag_ids.size() == 30);
    CHECK(out.true_length == 30);
    for (int id : out.tag_ids) CHECK(id == 3);
  }
  SUBCASE("pads with PAD") {
    s.tag_ids.resize(13, 3);
    s.true_length = 13;
    const auto out = pad_or_truncate(s, 30);
    CHECK(out.tag_ids.size() == 30);
    CHECK(out.true_length == 13);
    for (int t = 0; t < 13; ++t) CHECK(out.tag_ids[static_cast<std::size_t>(t)] == 3);
    for (int t = 13; t < 30; ++t) CHECK(out.tag_ids[static_cast<std::size_t>(t)] == TagSet::kPad);
  }
  SUBCASE("exact length is identity") {
    s.tag_ids.resize(30, 3);
    s.true_length = 30;
    const auto out = pad_or_truncate(s, 30);
    CHECK(out.tag_ids == s.tag_ids);
    CHECK(out.true_length == 30);
  }
}

TEST_CASE("padded output never marks a real position as PAD") {
  Rng rng(4);
  for (int iter = 0; iter < 50; ++iter) {
    TaggedSentence s;
    const int len = 1 + static_cast<int>(rng.below(40));
    for (int t = 0; t < len; ++t) s.tag_ids.push_back(static_cast<int>(rng.below(47)));
    s.true_length = len;
    const auto out = pad_or_truncate(s, 30);
    int non_pad = 0;
    for (int t = 0; t < out.true_length; ++t) {
      CHECK(out.tag_ids[static_cast<std::size_t>(t)] != TagSet::kPad);
    }
    for (int id : out.tag_ids)
      if (id != TagSet::kPad) ++non_pad;
    CHECK(non_pad == out.true_length);
  }
}
