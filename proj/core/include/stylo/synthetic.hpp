#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stylo/corpus.hpp"

namespace stylo {

// Synthetic authors drawn from distinct POS-bigram Markov chains (author 0
// determiner/noun-heavy, author 1 pronoun/verb-heavy). `separation` in (0,1]
// blends each author chain with their average: 1 keeps the chains fully
// distinct, small values make the task harder.
struct SyntheticConfig {
  int authors = 2;
  int segments_per_author = 200;
  int test_segments_per_author = 0;
  int segments_per_doc = 10;
  int M = 20;
  int N = 15;
  double separation = 1.0;
  std::uint64_t seed = 42;
};

struct SyntheticCorpus {
  std::vector<Segment> train_pool;
  std::vector<Segment> test;
  std::vector<std::string> author_names;
};

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg);

// Writes the same corpus as pretagged token/TAG documents under
// <root>/<author>/<doc>.txt, with a small per-tag lexicon supplying words.
void write_synthetic_pretagged(const SyntheticConfig& cfg, const std::string& root);

}  // namespace stylo
