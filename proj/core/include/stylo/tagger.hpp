#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "stylo/corpus.hpp"
#include "stylo/tagset.hpp"

namespace stylo {

struct NoTrainingData : std::runtime_error {
  NoTrainingData() : std::runtime_error("tagger training corpus is empty") {}
};
struct MalformedPretagged : std::runtime_error {
  MalformedPretagged(const std::string& path, std::size_t line)
      : std::runtime_error("malformed token/TAG entry at " + path + ":" + std::to_string(line)),
        line_number(line) {}
  std::size_t line_number;
};

struct GoldSentence {
  std::vector<std::string> tokens;
  std::vector<std::string> tags;  // from the 47-tag inventory
};

// Greedy left-to-right averaged perceptron. Weights are keyed by feature
// string; each feature holds a dense row over the 47 real tags.
class PerceptronTagger {
 public:
  PerceptronTagger() = default;

  static PerceptronTagger train(const std::vector<GoldSentence>& corpus, int epochs,
                                std::uint64_t seed);

  // Predicted tag ids, one per token. Punctuation tokens in the tag set map
  // to themselves without consulting the model.
  std::vector<int> tag(const std::vector<std::string>& tokens) const;

  void save(const std::string& path) const;
  static PerceptronTagger load(const std::string& path);

  std::size_t feature_count() const { return weights_.size(); }

 private:
  friend class TaggerTrainer;
  // feature -> (tag id -> weight), averaged
  std::unordered_map<std::string, std::vector<float>> weights_;

  int predict(const std::vector<std::string>& features) const;
};

// token/TAG space-separated, one sentence per line. Unknown tags map to UNK
// and are counted in *unknown_tags when given.
std::vector<std::vector<std::pair<std::string, int>>> load_pretagged(
    const std::string& path, std::size_t* unknown_tags = nullptr);

void save_pretagged(const std::string& path,
                    const std::vector<std::vector<std::pair<std::string, int>>>& sentences);

// Parses gold token/TAG sentences keeping tag strings (for tagger training).
std::vector<GoldSentence> load_gold_tagged(const std::string& path);

TaggedSentence pad_or_truncate(const TaggedSentence& sent, int N);

}  // namespace stylo
