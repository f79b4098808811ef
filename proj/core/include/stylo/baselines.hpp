#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylo/corpus.hpp"
#include "stylo/matrix.hpp"

namespace stylo {

struct DegenerateLabels : std::runtime_error {
  DegenerateLabels() : std::runtime_error("SVM training needs at least two classes") {}
};

using SparseVec = std::vector<std::pair<std::size_t, double>>;  // sorted by index

// Symbol sequence for one segment: sentences concatenated with a boundary
// marker so n-grams never span sentences.
std::vector<std::string> segment_symbols_pos(const Segment& seg);
std::vector<std::string> segment_symbols_words(const Segment& seg,
                                               const std::vector<std::vector<std::string>>& words);

class NgramVocabulary {
 public:
  int n_min = 1;
  int n_max = 3;
  std::size_t max_features = 50000;
  bool use_idf = false;

  // Builds the gram -> index map from training sequences; cap enforced by
  // document frequency then lexicographic tie-break.
  void build(const std::vector<std::vector<std::string>>& sequences);

  // TF normalized by sequence length; IDF applied when enabled.
  SparseVec extract(const std::vector<std::string>& seq) const;

  // Raw counts through the vocabulary, no normalization (oracle target).
  std::map<std::string, std::uint64_t> raw_counts(const std::vector<std::string>& seq) const;

  void restore(std::map<std::string, std::size_t> index, std::vector<double> idf) {
    index_ = std::move(index);
    idf_ = std::move(idf);
  }

  std::size_t size() const { return index_.size(); }
  const std::map<std::string, std::size_t>& index() const { return index_; }
  const std::vector<double>& idf() const { return idf_; }
  std::size_t documents_seen() const { return n_docs_; }

 private:
  std::map<std::string, std::size_t> index_;
  std::vector<double> idf_;
  std::size_t n_docs_ = 0;
};

std::string join_gram(const std::vector<std::string>& seq, std::size_t pos, int n);

// One-vs-rest linear SVM trained by averaged stochastic subgradient descent
// on the binary hinge objective lambda/2 ||w||^2 + mean hinge.
class LinearSvmModel {
 public:
  std::size_t feature_dim = 0;
  int classes = 0;
  std::vector<std::vector<double>> weights;  // per class
  std::vector<double> bias;                  // per class

  static LinearSvmModel train(const std::vector<SparseVec>& features,
                              const std::vector<int>& labels, std::size_t feature_dim,
                              double c_reg, int epochs, std::uint64_t seed);

  double score(int cls, const SparseVec& x) const;
  // argmax over class scores, ties to the lowest class index
  int predict(const SparseVec& x, std::vector<double>* scores_out = nullptr) const;

  void save(const std::string& path, const NgramVocabulary& vocab) const;
  static LinearSvmModel load(const std::string& path, NgramVocabulary& vocab);
};

}  // namespace stylo
