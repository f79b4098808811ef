#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "stylo/corpus.hpp"
#include "stylo/rng.hpp"

namespace stylo {

struct EmbeddingDimMismatch : std::runtime_error {
  EmbeddingDimMismatch(std::size_t line, std::size_t got, std::size_t want)
      : std::runtime_error("embedding line " + std::to_string(line) + " has " + std::to_string(got) +
                           " values, expected " + std::to_string(want)),
        line_number(line) {}
  std::size_t line_number;
};

// Lowercased frequency-capped vocabulary. Ids: 0 = PAD, 1 = UNK, words from 2.
class WordVocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;

  static WordVocab build(const std::vector<TokenizedSentence>& sentences, std::size_t cap);

  int id(const std::string& word) const;  // lowercases, kUnk on miss
  std::size_t size() const { return words_.size(); }  // without PAD/UNK
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

struct EmbeddingLoadReport {
  std::size_t hits = 0;
  std::size_t misses = 0;
  double coverage() const {
    const std::size_t n = hits + misses;
    return n == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(n);
  }
};

// GloVe text format: word then `dim` reals per line. Vocabulary hits fill
// rows (offset by 2 for PAD/UNK); misses get scaled-uniform rows. Writes
// into a (vocab+2) x dim row-major float table.
EmbeddingLoadReport load_pretrained_embeddings(const std::string& path, const WordVocab& vocab,
                                               std::size_t dim, std::vector<float>& table,
                                               Rng& rng);

}  // namespace stylo
