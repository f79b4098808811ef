#include "stylo/embeddings.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

namespace stylo {

namespace {
std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}
}  // namespace

WordVocab WordVocab::build(const std::vector<TokenizedSentence>& sentences, std::size_t cap) {
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& sent : sentences)
    for (const auto& tok : sent.tokens) ++freq[lower(tok)];
  std::vector<std::pair<std::string, std::uint64_t>> entries(freq.begin(), freq.end());
  // frequency desc, then lexicographic for a stable cap
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (entries.size() > cap) entries.resize(cap);
  WordVocab v;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    v.words_.push_back(entries[i].first);
    v.index_[entries[i].first] = static_cast<int>(i) + 2;
  }
  return v;
}

int WordVocab::id(const std::string& word) const {
  auto it = index_.find(lower(word));
  return it == index_.end() ? kUnk : it->second;
}

EmbeddingLoadReport load_pretrained_embeddings(const std::string& path, const WordVocab& vocab,
                                               std::size_t dim, std::vector<float>& table,
                                               Rng& rng) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read embeddings file: " + path);
  table.assign((vocab.size() + 2) * dim, 0.0f);

  std::vector<bool> filled(vocab.size() + 2, false);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream iss(line);
    std::string word;
    iss >> word;
    const int id = vocab.id(word);
    std::vector<float> row;
    row.reserve(dim);
    double x;
    while (iss >> x) row.push_back(static_cast<float>(x));
    if (row.size() != dim) throw EmbeddingDimMismatch(line_no, row.size(), dim);
    if (id >= 2 && !filled[static_cast<std::size_t>(id)]) {
      std::copy(row.begin(), row.end(), table.begin() + static_cast<std::size_t>(id) * dim);
      filled[static_cast<std::size_t>(id)] = true;
    }
  }

  EmbeddingLoadReport report;
  const double limit = std::sqrt(6.0 / static_cast<double>(vocab.size() + 2 + dim));
  for (std::size_t id = 1; id < vocab.size() + 2; ++id) {  // row 0 = PAD stays zero
    if (filled[id]) {
      ++report.hits;
    } else {
      if (id >= 2) ++report.misses;
      for (std::size_t j = 0; j < dim; ++j)
        table[id * dim + j] = static_cast<float>(rng.uniform(-limit, limit));
    }
  }
  return report;
}

}  // namespace stylo
