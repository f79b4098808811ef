#include "stylo/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "stylo/rng.hpp"
#include "stylo/tagset.hpp"

namespace stylo {

namespace {
constexpr const char* kBoundary = "<S>";
constexpr const char* kMagic = "STSVM1";
}  // namespace

std::vector<std::string> segment_symbols_pos(const Segment& seg) {
  const TagSet& ts = tagset();
  std::vector<std::string> out;
  for (const auto& sent : seg.sentences) {
    if (sent.is_filler()) continue;
    for (int t = 0; t < sent.true_length; ++t) out.push_back(ts.name(sent.tag_ids[static_cast<std::size_t>(t)]));
    out.push_back(kBoundary);
  }
  if (!out.empty()) out.pop_back();  // no trailing marker
  return out;
}

std::vector<std::string> segment_symbols_words(const Segment& seg,
                                               const std::vector<std::vector<std::string>>& words) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < seg.sentences.size(); ++i) {
    if (seg.sentences[i].is_filler()) continue;
    const auto& sent = words[i];
    for (const auto& w : sent) out.push_back(w);
    out.push_back(kBoundary);
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string join_gram(const std::vector<std::string>& seq, std::size_t pos, int n) {
  std::string g = seq[pos];
  for (int k = 1; k < n; ++k) {
    g += '\x1f';
    g += seq[pos + static_cast<std::size_t>(k)];
  }
  return g;
}

void NgramVocabulary::build(const std::vector<std::vector<std::string>>& sequences) {
  std::unordered_map<std::string, std::uint64_t> df;
  for (const auto& seq : sequences) {
    std::set<std::string> seen;
    for (int n = n_min; n <= n_max; ++n)
      for (std::size_t p = 0; p + static_cast<std::size_t>(n) <= seq.size(); ++p)
        seen.insert(join_gram(seq, p, n));
    for (const auto& g : seen) ++df[g];
  }
  std::vector<std::pair<std::string, std::uint64_t>> entries(df.begin(), df.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (entries.size() > max_features) entries.resize(max_features);
  // dense indices, sorted grams for determinism
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  index_.clear();
  idf_.assign(entries.size(), 1.0);
  n_docs_ = sequences.size();
  std::size_t id = 0;
  for (const auto& [gram, count] : entries) {
    index_[gram] = id;
    idf_[id] = std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + static_cast<double>(count))) + 1.0;
    ++id;
  }
}

std::map<std::string, std::uint64_t> NgramVocabulary::raw_counts(
    const std::vector<std::string>& seq) const {
  std::map<std::string, std::uint64_t> counts;
  for (int n = n_min; n <= n_max; ++n)
    for (std::size_t p = 0; p + static_cast<std::size_t>(n) <= seq.size(); ++p) {
      const std::string g = join_gram(seq, p, n);
      if (index_.empty() || index_.count(g)) ++counts[g];
    }
  return counts;
}

SparseVec NgramVocabulary::extract(const std::vector<std::string>& seq) const {
  std::unordered_map<std::size_t, double> acc;
  for (int n = n_min; n <= n_max; ++n)
    for (std::size_t p = 0; p + static_cast<std::size_t>(n) <= seq.size(); ++p) {
      auto it = index_.find(join_gram(seq, p, n));
      if (it != index_.end()) acc[it->second] += 1.0;
    }
  const double norm = seq.empty() ? 1.0 : static_cast<double>(seq.size());
  SparseVec out(acc.begin(), acc.end());
  std::sort(out.begin(), out.end());
  for (auto& [idx, v] : out) {
    v /= norm;
    if (use_idf) v *= idf_[idx];
  }
  return out;
}

double LinearSvmModel::score(int cls, const SparseVec& x) const {
  const auto& w = weights[static_cast<std::size_t>(cls)];
  double s = bias[static_cast<std::size_t>(cls)];
  for (const auto& [idx, v] : x) {
    if (idx >= feature_dim) throw ShapeMismatch(1, feature_dim, 1, idx + 1);
    s += w[idx] * v;
  }
  return s;
}

int LinearSvmModel::predict(const SparseVec& x, std::vector<double>* scores_out) const {
  int best = 0;
  double best_score = score(0, x);
  if (scores_out) scores_out->assign(static_cast<std::size_t>(classes), 0.0);
  if (scores_out) (*scores_out)[0] = best_score;
  for (int c = 1; c < classes; ++c) {
    const double s = score(c, x);
    if (scores_out) (*scores_out)[static_cast<std::size_t>(c)] = s;
    if (s > best_score) {
      best = c;
      best_score = s;
    }
  }
  return best;
}

LinearSvmModel LinearSvmModel::train(const std::vector<SparseVec>& features,
                                     const std::vector<int>& labels, std::size_t feature_dim,
                                     double c_reg, int epochs, std::uint64_t seed) {
  int classes = 0;
  for (int y : labels) classes = std::max(classes, y + 1);
  std::set<int> present(labels.begin(), labels.end());
  if (present.size() < 2) throw DegenerateLabels();

  LinearSvmModel model;
  model.feature_dim = feature_dim;
  model.classes = classes;
  model.weights.assign(static_cast<std::size_t>(classes), std::vector<double>(feature_dim, 0.0));
  model.bias.assign(static_cast<std::size_t>(classes), 0.0);

  const double lambda = 1.0 / (c_reg * static_cast<double>(features.size()));
  for (int cls = 0; cls < classes; ++cls) {
    std::vector<double> w(feature_dim, 0.0), w_avg(feature_dim, 0.0);
    double b = 0.0, b_avg = 0.0;
    std::vector<std::size_t> order(features.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed, 100 + static_cast<std::uint64_t>(cls));
    std::uint64_t t = 0;
    std::uint64_t n_avg = 0;
    for (int e = 0; e < epochs; ++e) {
      rng.shuffle(order);
      for (std::size_t i : order) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double y = labels[i] == cls ? 1.0 : -1.0;
        double margin = b;
        for (const auto& [idx, v] : features[i]) margin += w[idx] * v;
        margin *= y;
        for (auto& wj : w) wj *= (1.0 - eta * lambda);
        if (margin < 1.0) {
          for (const auto& [idx, v] : features[i]) w[idx] += eta * y * v;
          b += eta * y;
        }
        // running average of iterates
        ++n_avg;
        const double k = 1.0 / static_cast<double>(n_avg);
        for (std::size_t j = 0; j < feature_dim; ++j) w_avg[j] += k * (w[j] - w_avg[j]);
        b_avg += k * (b - b_avg);
      }
    }
    model.weights[static_cast<std::size_t>(cls)] = std::move(w_avg);
    model.bias[static_cast<std::size_t>(cls)] = b_avg;
  }
  return model;
}

void LinearSvmModel::save(const std::string& path, const NgramVocabulary& vocab) const {
  nlohmann::json j;
  j["classes"] = classes;
  j["feature_dim"] = feature_dim;
  j["n_min"] = vocab.n_min;
  j["n_max"] = vocab.n_max;
  j["use_idf"] = vocab.use_idf;
  nlohmann::json v = nlohmann::json::object();
  for (const auto& [gram, idx] : vocab.index()) v[gram] = idx;
  j["vocabulary"] = std::move(v);
  j["idf"] = vocab.idf();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write SVM model: " + path);
  out << kMagic << "\n" << j.dump() << "\n";
  for (int c = 0; c < classes; ++c) {
    out.write(reinterpret_cast<const char*>(weights[static_cast<std::size_t>(c)].data()),
              static_cast<std::streamsize>(feature_dim * sizeof(double)));
  }
  out.write(reinterpret_cast<const char*>(bias.data()),
            static_cast<std::streamsize>(bias.size() * sizeof(double)));
}

LinearSvmModel LinearSvmModel::load(const std::string& path, NgramVocabulary& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read SVM model: " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw std::runtime_error("bad SVM model magic in " + path);
  std::string header;
  std::getline(in, header);
  const nlohmann::json j = nlohmann::json::parse(header);
  LinearSvmModel model;
  model.classes = j.at("classes");
  model.feature_dim = j.at("feature_dim");
  vocab.n_min = j.at("n_min");
  vocab.n_max = j.at("n_max");
  vocab.use_idf = j.at("use_idf");
  std::map<std::string, std::size_t> index;
  for (const auto& [gram, idx] : j.at("vocabulary").items()) index[gram] = idx.get<std::size_t>();
  vocab.restore(std::move(index), j.at("idf").get<std::vector<double>>());
  model.weights.assign(static_cast<std::size_t>(model.classes),
                       std::vector<double>(model.feature_dim, 0.0));
  model.bias.assign(static_cast<std::size_t>(model.classes), 0.0);
  for (int c = 0; c < model.classes; ++c)
    in.read(reinterpret_cast<char*>(model.weights[static_cast<std::size_t>(c)].data()),
            static_cast<std::streamsize>(model.feature_dim * sizeof(double)));
  in.read(reinterpret_cast<char*>(model.bias.data()),
          static_cast<std::streamsize>(model.bias.size() * sizeof(double)));
  if (!in) throw std::runtime_error("truncated SVM model: " + path);
  return model;
}

}  // namespace stylo
