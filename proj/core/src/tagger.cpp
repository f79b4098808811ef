#include "stylo/tagger.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "stylo/rng.hpp"
#include <nlohmann/json.hpp>

namespace stylo {

namespace {

constexpr const char* kMagic = "STTAG1";

std::string word_shape(const std::string& w) {
  std::string shape;
  for (char c : w) {
    char s = std::isupper(static_cast<unsigned char>(c))   ? 'X'
             : std::islower(static_cast<unsigned char>(c)) ? 'x'
             : std::isdigit(static_cast<unsigned char>(c)) ? 'd'
                                                           : c;
    if (shape.empty() || shape.back() != s) shape.push_back(s);
  }
  return shape;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Feature template shared by training and inference.
std::vector<std::string> features_at(const std::vector<std::string>& tokens, std::size_t i,
                                     const std::string& prev_tag, const std::string& prev2_tag) {
  const std::string& w = tokens[i];
  const std::string lw = lower(w);
  std::vector<std::string> f;
  f.reserve(12);
  f.push_back("bias");
  f.push_back("w=" + lw);
  f.push_back("shape=" + word_shape(w));
  for (std::size_t k = 1; k <= 3 && k <= lw.size(); ++k) f.push_back("suf" + std::to_string(k) + "=" + lw.substr(lw.size() - k));
  f.push_back("pre1=" + lw.substr(0, std::min<std::size_t>(1, lw.size())));
  f.push_back("t-1=" + prev_tag);
  f.push_back("t-2,t-1=" + prev2_tag + "|" + prev_tag);
  f.push_back("w-1=" + (i > 0 ? lower(tokens[i - 1]) : std::string("<s>")));
  f.push_back("w+1=" + (i + 1 < tokens.size() ? lower(tokens[i + 1]) : std::string("</s>")));
  f.push_back("t-1,w=" + prev_tag + "|" + lw);
  return f;
}

}  // namespace

class TaggerTrainer {
 public:
  TaggerTrainer() = default;

  void update(int truth, int guess, const std::vector<std::string>& features) {
    ++step_;
    if (truth == guess) return;
    for (const auto& f : features) {
      bump(f, truth, 1.0);
      bump(f, guess, -1.0);
    }
  }

  int predict(const std::vector<std::string>& features) const {
    std::vector<double> scores(TagSet::kNumRealTags, 0.0);
    for (const auto& f : features) {
      auto it = cur_.find(f);
      if (it == cur_.end()) continue;
      for (int t = 0; t < TagSet::kNumRealTags; ++t) scores[t] += it->second[t];
    }
    return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  }

  PerceptronTagger finalize() {
    PerceptronTagger model;
    for (auto& [f, w] : cur_) {
      auto& acc = acc_[f];
      auto& ts = stamp_[f];
      std::vector<float> avg(TagSet::kNumRealTags, 0.0f);
      bool any = false;
      for (int t = 0; t < TagSet::kNumRealTags; ++t) {
        acc[t] += static_cast<double>(step_ - ts[t]) * w[t];
        const double a = acc[t] / static_cast<double>(std::max<std::uint64_t>(step_, 1));
        avg[t] = static_cast<float>(a);
        if (a != 0.0) any = true;
      }
      if (any) model.weights_.emplace(f, std::move(avg));
    }
    return model;
  }

 private:
  void bump(const std::string& f, int tag, double delta) {
    auto& w = cur_[f];
    auto& acc = acc_[f];
    auto& ts = stamp_[f];
    if (w.empty()) {
      w.assign(TagSet::kNumRealTags, 0.0);
      acc.assign(TagSet::kNumRealTags, 0.0);
      ts.assign(TagSet::kNumRealTags, 0);
    }
    acc[tag] += static_cast<double>(step_ - ts[tag]) * w[tag];
    ts[tag] = step_;
    w[tag] += delta;
  }

  std::uint64_t step_ = 0;
  std::unordered_map<std::string, std::vector<double>> cur_;
  std::unordered_map<std::string, std::vector<double>> acc_;
  std::unordered_map<std::string, std::vector<std::uint64_t>> stamp_;
};

PerceptronTagger PerceptronTagger::train(const std::vector<GoldSentence>& corpus, int epochs,
                                         std::uint64_t seed) {
  if (corpus.empty()) throw NoTrainingData();
  const TagSet& ts = tagset();
  TaggerTrainer trainer;
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed, /*stream=*/7);
  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t idx : order) {
      const GoldSentence& sent = corpus[idx];
      std::string prev = "<s>", prev2 = "<s2>";
      for (std::size_t i = 0; i < sent.tokens.size(); ++i) {
        const int self = ts.punct_token_tag(sent.tokens[i]);
        int guess;
        if (self >= 0) {
          guess = self;
        } else {
          auto feats = features_at(sent.tokens, i, prev, prev2);
          guess = trainer.predict(feats);
          const int truth = ts.index(sent.tags[i]);
          if (truth < TagSet::kNumRealTags) trainer.update(truth, guess, feats);
        }
        prev2 = prev;
        prev = ts.name(guess);
      }
    }
  }
  return trainer.finalize();
}

int PerceptronTagger::predict(const std::vector<std::string>& features) const {
  std::vector<double> scores(TagSet::kNumRealTags, 0.0);
  for (const auto& f : features) {
    auto it = weights_.find(f);
    if (it == weights_.end()) continue;
    for (int t = 0; t < TagSet::kNumRealTags; ++t) scores[t] += it->second[t];
  }
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

std::vector<int> PerceptronTagger::tag(const std::vector<std::string>& tokens) const {
  const TagSet& ts = tagset();
  std::vector<int> out;
  out.reserve(tokens.size());
  std::string prev = "<s>", prev2 = "<s2>";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int self = ts.punct_token_tag(tokens[i]);
    const int id = self >= 0 ? self : predict(features_at(tokens, i, prev, prev2));
    out.push_back(id);
    prev2 = prev;
    prev = ts.name(id);
  }
  return out;
}

void PerceptronTagger::save(const std::string& path) const {
  nlohmann::json j;
  j["tagset_hash"] = tagset().hash();
  nlohmann::json w = nlohmann::json::object();
  for (const auto& [f, row] : weights_) {
    nlohmann::json entry = nlohmann::json::object();
    for (int t = 0; t < TagSet::kNumRealTags; ++t)
      if (row[t] != 0.0f) entry[tagset().name(t)] = row[t];
    w[f] = std::move(entry);
  }
  j["weights"] = std::move(w);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write tagger checkpoint: " + path);
  out << kMagic << "\n" << j.dump() << "\n";
}

PerceptronTagger PerceptronTagger::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read tagger checkpoint: " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw std::runtime_error("bad tagger checkpoint magic in " + path);
  nlohmann::json j;
  in >> j;
  PerceptronTagger model;
  for (const auto& [f, entry] : j.at("weights").items()) {
    std::vector<float> row(TagSet::kNumRealTags, 0.0f);
    for (const auto& [tag, w] : entry.items()) row[tagset().index(tag)] = w.get<float>();
    model.weights_.emplace(f, std::move(row));
  }
  return model;
}

namespace {

std::pair<std::string, std::string> split_slash(const std::string& tok, const std::string& path,
                                                std::size_t line_no) {
  const std::size_t slash = tok.rfind('/');
  if (slash == std::string::npos || slash == 0 || slash + 1 == tok.size())
    throw MalformedPretagged(path, line_no);
  return {tok.substr(0, slash), tok.substr(slash + 1)};
}

}  // namespace

std::vector<std::vector<std::pair<std::string, int>>> load_pretagged(const std::string& path,
                                                                     std::size_t* unknown_tags) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read pretagged file: " + path);
  const TagSet& ts = tagset();
  std::vector<std::vector<std::pair<std::string, int>>> out;
  std::string line;
  std::size_t line_no = 0;
  std::size_t unknown = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream iss(line);
    std::vector<std::pair<std::string, int>> sent;
    std::string tok;
    while (iss >> tok) {
      auto [word, tag] = split_slash(tok, path, line_no);
      const int id = ts.index(tag);
      if (id == TagSet::kUnk && tag != "UNK") ++unknown;
      sent.emplace_back(word, id);
    }
    if (!sent.empty()) out.push_back(std::move(sent));
  }
  if (unknown_tags) *unknown_tags = unknown;
  return out;
}

void save_pretagged(const std::string& path,
                    const std::vector<std::vector<std::pair<std::string, int>>>& sentences) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write pretagged file: " + path);
  const TagSet& ts = tagset();
  for (const auto& sent : sentences) {
    for (std::size_t i = 0; i < sent.size(); ++i) {
      if (i) out << ' ';
      out << sent[i].first << '/' << ts.name(sent[i].second);
    }
    out << '\n';
  }
}

std::vector<GoldSentence> load_gold_tagged(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read tagged file: " + path);
  std::vector<GoldSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream iss(line);
    GoldSentence sent;
    std::string tok;
    while (iss >> tok) {
      auto [word, tag] = split_slash(tok, path, line_no);
      sent.tokens.push_back(word);
      sent.tags.push_back(tag);
    }
    if (!sent.tokens.empty()) out.push_back(std::move(sent));
  }
  return out;
}

TaggedSentence pad_or_truncate(const TaggedSentence& sent, int N) {
  const std::size_t n = static_cast<std::size_t>(N);
  TaggedSentence out = sent;
  out.true_length = static_cast<int>(std::min<std::size_t>(sent.tag_ids.size(), n));
  out.tag_ids.resize(n, TagSet::kPad);
  if (!out.word_ids.empty() || !sent.word_ids.empty()) out.word_ids.resize(n, 0);
  return out;
}

}  // namespace stylo
