#include "stylo/synthetic.hpp"

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "stylo/rng.hpp"
#include "stylo/tagger.hpp"
#include "stylo/tagset.hpp"

namespace stylo {

namespace {

// Chain states (subset of the tag inventory).
const char* kStates[] = {"DT", "NN", "NNS", "JJ", "PRP", "VBD", "VBZ", "IN", "RB", ",", "."};
constexpr int kNumStates = 11;

using Chain = std::array<std::array<double, kNumStates>, kNumStates>;

Chain normalized(Chain c) {
  for (auto& row : c) {
    double s = 0.0;
    for (double v : row) s += v;
    for (auto& v : row) v /= s;
  }
  return c;
}

// DT-NN-heavy: determiner-noun-noun chains with adjectives.
Chain author0_chain() {
  Chain c{};
  auto set = [&](int i, int j, double v) { c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v; };
  // DT -> NN/JJ/NNS
  set(0, 1, 6); set(0, 3, 3); set(0, 2, 2);
  // NN -> IN/VBZ/,/.
  set(1, 7, 4); set(1, 6, 2); set(1, 9, 2); set(1, 10, 2);
  // NNS -> IN/VBD/.
  set(2, 7, 3); set(2, 5, 2); set(2, 10, 2);
  // JJ -> NN/NNS
  set(3, 1, 6); set(3, 2, 2);
  // PRP -> VBZ
  set(4, 6, 3); set(4, 5, 1);
  // VBD -> DT/IN
  set(5, 0, 4); set(5, 7, 2);
  // VBZ -> DT/JJ
  set(6, 0, 4); set(6, 3, 2);
  // IN -> DT/NN
  set(7, 0, 6); set(7, 1, 2);
  // RB -> VBD/JJ
  set(8, 5, 2); set(8, 3, 2);
  // , -> DT/IN
  set(9, 0, 3); set(9, 7, 2);
  // . -> DT (restart)
  set(10, 0, 5); set(10, 1, 1);
  for (auto& row : c)
    for (auto& v : row) v += 0.05;  // smoothing
  return normalized(c);
}

// PRP-VBD-heavy: pronoun-verb-adverb chains.
Chain author1_chain() {
  Chain c{};
  auto set = [&](int i, int j, double v) { c[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = v; };
  set(0, 1, 3); set(0, 3, 1);
  set(1, 5, 3); set(1, 10, 2);
  set(2, 5, 3); set(2, 10, 1);
  set(3, 1, 2); set(3, 2, 1);
  // PRP -> VBD/VBZ heavy
  set(4, 5, 6); set(4, 6, 3);
  // VBD -> RB/PRP/IN
  set(5, 8, 4); set(5, 4, 2); set(5, 7, 2); set(5, 10, 2);
  set(6, 8, 3); set(6, 4, 2); set(6, 10, 1);
  // IN -> PRP
  set(7, 4, 5); set(7, 0, 1);
  // RB -> ,/. /VBD
  set(8, 9, 2); set(8, 10, 3); set(8, 5, 2);
  // , -> PRP/RB
  set(9, 4, 4); set(9, 8, 1);
  // . -> PRP (restart)
  set(10, 4, 5); set(10, 8, 1);
  for (auto& row : c)
    for (auto& v : row) v += 0.05;
  return normalized(c);
}

Chain blend(const Chain& a, const Chain& b, double wa) {
  Chain out{};
  for (int i = 0; i < kNumStates; ++i)
    for (int j = 0; j < kNumStates; ++j)
      out[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          wa * a[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] +
          (1.0 - wa) * b[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return out;
}

Chain random_chain(Rng& rng) {
  Chain c{};
  for (auto& row : c)
    for (auto& v : row) v = 0.05 + rng.uniform();
  return normalized(c);
}

std::vector<Chain> author_chains(const SyntheticConfig& cfg) {
  const Chain a0 = author0_chain();
  const Chain a1 = author1_chain();
  const Chain mid = blend(a0, a1, 0.5);
  std::vector<Chain> chains;
  Rng rng(cfg.seed, /*stream=*/11);
  for (int k = 0; k < cfg.authors; ++k) {
    Chain base = k == 0 ? a0 : k == 1 ? a1 : random_chain(rng);
    chains.push_back(blend(base, mid, cfg.separation));
  }
  return chains;
}

int sample(const std::array<double, kNumStates>& dist, Rng& rng) {
  double u = rng.uniform();
  for (int j = 0; j < kNumStates; ++j) {
    u -= dist[static_cast<std::size_t>(j)];
    if (u <= 0.0) return j;
  }
  return kNumStates - 1;
}

std::vector<int> generate_sentence_states(const Chain& chain, int max_len, Rng& rng) {
  const int len = 5 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, max_len - 4))));
  std::vector<int> states;
  int s = sample(chain[10], rng);  // start from the "." row, i.e. sentence start
  for (int t = 0; t < len; ++t) {
    states.push_back(s);
    s = sample(chain[static_cast<std::size_t>(s)], rng);
  }
  return states;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticConfig& cfg) {
  const TagSet& ts = tagset();
  std::vector<int> state_tag_ids;
  for (const char* s : kStates) state_tag_ids.push_back(ts.index(s));

  const std::vector<Chain> chains = author_chains(cfg);
  SyntheticCorpus out;

  auto make_segments = [&](int author, int count, const std::string& doc_prefix, Rng& rng) {
    std::vector<Segment> segments;
    for (int sidx = 0; sidx < count; ++sidx) {
      Segment seg;
      seg.author_id = author;
      const int doc = sidx / std::max(1, cfg.segments_per_doc);
      seg.source_doc = doc_prefix + std::to_string(author) + "_d" + std::to_string(doc);
      seg.position = sidx % std::max(1, cfg.segments_per_doc);
      for (int i = 0; i < cfg.M; ++i) {
        const auto states = generate_sentence_states(chains[static_cast<std::size_t>(author)], cfg.N, rng);
        TaggedSentence sent;
        for (int s : states) sent.tag_ids.push_back(state_tag_ids[static_cast<std::size_t>(s)]);
        sent.true_length = static_cast<int>(sent.tag_ids.size());
        seg.sentences.push_back(pad_or_truncate(sent, cfg.N));
      }
      segments.push_back(std::move(seg));
    }
    return segments;
  };

  for (int a = 0; a < cfg.authors; ++a) {
    out.author_names.push_back("author" + std::to_string(a));
    Rng train_rng(cfg.seed, 1000 + static_cast<std::uint64_t>(a));
    auto train = make_segments(a, cfg.segments_per_author, "a", train_rng);
    out.train_pool.insert(out.train_pool.end(), train.begin(), train.end());
    if (cfg.test_segments_per_author > 0) {
      Rng test_rng(cfg.seed, 2000 + static_cast<std::uint64_t>(a));
      auto test = make_segments(a, cfg.test_segments_per_author, "test_a", test_rng);
      out.test.insert(out.test.end(), test.begin(), test.end());
    }
  }
  return out;
}

void write_synthetic_pretagged(const SyntheticConfig& cfg, const std::string& root) {
  namespace fs = std::filesystem;
  // Small per-tag lexicon so lexical mode has words to chew on.
  auto word_for = [&](int tag_id, Rng& rng) -> std::string {
    static const std::unordered_map<std::string, std::vector<std::string>> kLex = {
        {"DT", {"the", "a", "this"}},       {"NN", {"house", "river", "story"}},
        {"NNS", {"fields", "voices", "days"}}, {"JJ", {"old", "quiet", "dark"}},
        {"PRP", {"he", "she", "they"}},     {"VBD", {"walked", "spoke", "turned"}},
        {"VBZ", {"stands", "seems", "holds"}}, {"IN", {"in", "over", "through"}},
        {"RB", {"slowly", "again", "softly"}}, {",", {","}},
        {".", {"."}}};
    const auto& options = kLex.at(tagset().name(tag_id));
    return options[rng.below(options.size())];
  };

  const SyntheticCorpus corpus = generate_synthetic(cfg);
  Rng word_rng(cfg.seed, /*stream=*/3000);
  auto write_all = [&](const std::vector<Segment>& segments, const std::string& subdir) {
    for (const auto& seg : segments) {
      const fs::path dir = fs::path(root) / subdir / corpus.author_names[static_cast<std::size_t>(seg.author_id)];
      fs::create_directories(dir);
      const fs::path file = dir / (seg.source_doc + ".txt");
      std::ofstream out(file, std::ios::app | std::ios::binary);
      if (!out) throw std::runtime_error("cannot write synthetic corpus file: " + file.string());
      for (const auto& sent : seg.sentences) {
        if (sent.is_filler()) continue;
        for (int t = 0; t < sent.true_length; ++t) {
          const int id = sent.tag_ids[static_cast<std::size_t>(t)];
          if (t) out << ' ';
          out << word_for(id, word_rng) << '/' << tagset().name(id);
        }
        out << '\n';
      }
    }
  };
  write_all(corpus.train_pool, "train");
  if (!corpus.test.empty()) write_all(corpus.test, "test");
}

}  // namespace stylo
