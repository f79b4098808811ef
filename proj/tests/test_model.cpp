#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "stylo/embeddings.hpp"
#include "stylo/gradcheck.hpp"
#include "stylo/model.hpp"

using namespace stylo;

namespace {

TaggedSentence sent_of(std::vector<int> ids, int true_len) {
  TaggedSentence s;
  s.tag_ids = std::move(ids);
  s.true_length = true_len;
  return s;
}

Segment random_segment(const ModelConfig& cfg, Rng& rng, bool with_filler = false) {
  Segment seg;
  seg.author_id = 0;
  seg.source_doc = "t";
  seg.position = 0;
  for (int i = 0; i < cfg.M; ++i) {
    TaggedSentence s;
    if (with_filler && i == cfg.M - 1) {
      s.tag_ids.assign(static_cast<std::size_t>(cfg.N), TagSet::kPad);
      s.true_length = 0;
    } else {
      const int len = cfg.N - static_cast<int>(rng.below(3));
      for (int t = 0; t < cfg.N; ++t)
        s.tag_ids.push_back(t < len ? static_cast<int>(rng.below(TagSet::kNumRealTags))
                                    : TagSet::kPad);
      s.true_length = len;
    }
    seg.sentences.push_back(std::move(s));
  }
  return seg;
}

// Flatten/scatter the trainable parameters, skipping frozen rows, so finite
// differences see exactly what the optimizer sees.
template <class T>
std::vector<T> flatten(SyntacticModel<T>& m, bool grads) {
  std::vector<T> out;
  m.visit_params([&](Param<T>& p, int frozen_row) {
    const Mat<T>& src = grads ? p.g : p.v;
    for (std::size_t i = 0; i < src.rows; ++i) {
      if (frozen_row >= 0 && i == static_cast<std::size_t>(frozen_row)) continue;
      for (std::size_t j = 0; j < src.cols; ++j) out.push_back(src(i, j));
    }
  });
  return out;
}

template <class T>
void unflatten(SyntacticModel<T>& m, const std::vector<T>& theta) {
  std::size_t k = 0;
  m.visit_params([&](Param<T>& p, int frozen_row) {
    for (std::size_t i = 0; i < p.v.rows; ++i) {
      if (frozen_row >= 0 && i == static_cast<std::size_t>(frozen_row)) continue;
      for (std::size_t j = 0; j < p.v.cols; ++j) p.v(i, j) = theta[k++];
    }
  });
  REQUIRE(k == theta.size());
}

// Reference single-direction LSTM written as plain step-by-step scalar code.
struct RefLstm {
  // weights indexed [gate][row][col], gates i,f,o,g
  std::vector<std::vector<std::vector<double>>> W, U;
  std::vector<std::vector<double>> b;

  static double sg(double x) { return 1.0 / (1.0 + std::exp(-x)); }

  std::vector<std::vector<double>> run(const std::vector<std::vector<double>>& xs) const {
    const std::size_t hid = b[0].size();
    std::vector<double> h(hid, 0.0), c(hid, 0.0);
    std::vector<std::vector<double>> hs;
    for (const auto& x : xs) {
      std::vector<double> a(4 * hid, 0.0);
      for (int g = 0; g < 4; ++g)
        for (std::size_t j = 0; j < hid; ++j) {
          double acc = b[static_cast<std::size_t>(g)][j];
          for (std::size_t t = 0; t < x.size(); ++t)
            acc += W[static_cast<std::size_t>(g)][j][t] * x[t];
          for (std::size_t t = 0; t < hid; ++t)
            acc += U[static_cast<std::size_t>(g)][j][t] * h[t];
          a[static_cast<std::size_t>(g) * hid + j] = acc;
        }
      std::vector<double> hn(hid), cn(hid);
      for (std::size_t j = 0; j < hid; ++j) {
        const double gi = sg(a[0 * hid + j]);
        const double gf = sg(a[1 * hid + j]);
        const double go = sg(a[2 * hid + j]);
        const double gg = std::tanh(a[3 * hid + j]);
        cn[j] = gf * c[j] + gi * gg;
        hn[j] = go * std::tanh(cn[j]);
      }
      h = hn;
      c = cn;
      hs.push_back(h);
    }
    return hs;
  }
};

}  // namespace

TEST_CASE("embed_sentence copies table rows by id") {
  ModelConfig cfg;
  cfg.d_p = 3;
  cfg.M = 1;
  cfg.N = 4;
  SyntacticModel<double> m(cfg);
  for (int i = 0; i < TagSet::kSize; ++i)
    for (int j = 0; j < 3; ++j) m.tag_table.v(i, j) = i * 10 + j;
  const auto S = m.embed_sentence(sent_of({5, 0, TagSet::kPad}, 2));
  REQUIRE(S.rows == 3);
  CHECK(S(0, 0) == doctest::Approx(50));
  CHECK(S(0, 2) == doctest::Approx(52));
  CHECK(S(1, 1) == doctest::Approx(1));
  CHECK(S(2, 0) == doctest::Approx(470));
}

TEST_CASE("embed_sentence rejects out-of-range ids") {
  SyntacticModel<double> m(ModelConfig{});
  CHECK_THROWS_AS(m.embed_sentence(sent_of({49}, 1)), BadTokenId);
  CHECK_THROWS_AS(m.embed_sentence(sent_of({-1}, 1)), BadTokenId);
}

TEST_CASE("cnn encoder matches a hand-computed single-filter case") {
  ModelConfig cfg;
  cfg.d_p = 2;
  cfg.filters_per_width = 1;
  cfg.windows = {2};
  cfg.N = 3;
  SyntacticModel<double> m(cfg);
  Mat<double> S(3, 2);
  S(0, 0) = 1; S(0, 1) = 2;
  S(1, 0) = 3; S(1, 1) = 4;
  S(2, 0) = 5; S(2, 1) = 6;
  auto& layer = m.conv[0][0];
  layer.W.v(0, 0) = 1;
  layer.W.v(1, 0) = -1;
  layer.W.v(2, 0) = 0.5;
  layer.W.v(3, 0) = 0.25;
  layer.b.v(0, 0) = 0.1;
  std::vector<CnnWidthCache<double>> caches;
  const auto h = m.encode_sentence_cnn(S, caches);
  // position 0: 1-2+1.5+1 = 1.5; position 1: 3-4+2.5+1.5 = 3; +bias, pool = 3.1
  REQUIRE(h.size() == 1);
  CHECK(h[0] == doctest::Approx(3.1));
  CHECK(caches[0].maps[0](0, 0) == doctest::Approx(1.6));
  CHECK(caches[0].argmax[0] == 1);

  SUBCASE("relu clamps negative pre-activations to zero") {
    layer.b.v(0, 0) = -100;
    const auto h2 = m.encode_sentence_cnn(S, caches);
    CHECK(h2[0] == 0.0);
  }
}

TEST_CASE("cnn feature map has N-r+1 positions per width") {
  ModelConfig cfg;
  cfg.d_p = 4;
  cfg.filters_per_width = 3;
  cfg.windows = {3, 5};
  cfg.N = 12;
  SyntacticModel<double> m(cfg);
  Rng rng(3);
  m.init(rng);
  Mat<double> S(12, 4);
  for (auto& v : S.data) v = rng.uniform(-1, 1);
  std::vector<CnnWidthCache<double>> caches;
  const auto h = m.encode_sentence_cnn(S, caches);
  CHECK(h.size() == 6);
  CHECK(caches[0].maps[0].rows == 10);
  CHECK(caches[1].maps[0].rows == 8);

  SUBCASE("sentences shorter than the receptive field are rejected") {
    Mat<double> tiny(2, 4);
    CHECK_THROWS_AS(m.encode_sentence_cnn(tiny, caches), SentenceTooShort);
  }
}

TEST_CASE("max-pooling makes the cnn encoder shift-invariant for isolated patterns") {
  ModelConfig cfg;
  cfg.d_p = 3;
  cfg.filters_per_width = 4;
  cfg.windows = {2};
  cfg.N = 10;
  SyntacticModel<double> m(cfg);
  Rng rng(9);
  m.init(rng);
  m.conv[0][0].b.v.fill(0.0);  // bias-free so all-zero context contributes nothing

  const std::vector<double> pat0 = {0.7, -0.3, 0.2}, pat1 = {-0.1, 0.9, 0.4};
  auto place = [&](std::size_t at) {
    Mat<double> S(10, 3);
    for (int j = 0; j < 3; ++j) {
      S(at, static_cast<std::size_t>(j)) = pat0[static_cast<std::size_t>(j)];
      S(at + 1, static_cast<std::size_t>(j)) = pat1[static_cast<std::size_t>(j)];
    }
    return S;
  };
  std::vector<CnnWidthCache<double>> c1, c2;
  const auto h1 = m.encode_sentence_cnn(place(1), c1);
  const auto h2 = m.encode_sentence_cnn(place(6), c2);
  REQUIRE(h1.size() == h2.size());
  for (std::size_t k = 0; k < h1.size(); ++k) CHECK(h1[k] == doctest::Approx(h2[k]));
}

TEST_CASE("lstm_run matches an independently written reference") {
  const int in = 3, hid = 4, len = 6;
  Rng rng(21);
  LstmCell<double> cell;
  cell.configure("x", in, hid);
  cell.init(rng);

  RefLstm ref;
  ref.W.assign(4, std::vector<std::vector<double>>(hid, std::vector<double>(in)));
  ref.U.assign(4, std::vector<std::vector<double>>(hid, std::vector<double>(hid)));
  ref.b.assign(4, std::vector<double>(hid));
  for (int g = 0; g < 4; ++g)
    for (int j = 0; j < hid; ++j) {
      for (int t = 0; t < in; ++t) ref.W[g][j][t] = cell.W[g].v(j, t);
      for (int t = 0; t < hid; ++t) ref.U[g][j][t] = cell.U[g].v(j, t);
      ref.b[g][j] = cell.b[g].v(0, j);
    }

  std::vector<Vec<double>> xs(len, Vec<double>(in));
  std::vector<std::vector<double>> rxs(len, std::vector<double>(in));
  for (int t = 0; t < len; ++t)
    for (int j = 0; j < in; ++j) rxs[t][j] = xs[t][j] = rng.uniform(-1, 1);

  std::vector<std::size_t> order(len);
  for (int t = 0; t < len; ++t) order[static_cast<std::size_t>(t)] = static_cast<std::size_t>(t);
  LstmRunCache<double> cache;
  lstm_run(cell, xs, order, cache);
  const auto want = ref.run(rxs);
  REQUIRE(cache.steps() == static_cast<std::size_t>(len));
  for (int t = 0; t < len; ++t)
    for (int j = 0; j < hid; ++j)
      CHECK(cache.h[t][j] == doctest::Approx(want[t][j]).epsilon(1e-12));
}

TEST_CASE("lstm sentence encoder ignores PAD slots entirely") {
  ModelConfig cfg;
  cfg.encoder = EncoderKind::lstm;
  cfg.d_p = 3;
  cfg.d_l = 4;
  SyntacticModel<double> m(cfg);
  Rng rng(5);
  m.init(rng);

  std::vector<Vec<double>> rows;
  for (int t = 0; t < 4; ++t) {
    Vec<double> r(3);
    for (auto& v : r) v = rng.uniform(-1, 1);
    rows.push_back(r);
  }
  LstmRunCache<double> cf, cb;
  const auto v1 = m.encode_sentence_lstm(rows, 4, cf, cb);

  auto padded = rows;
  padded.push_back(Vec<double>(3, 0.0));
  padded.push_back(Vec<double>(3, 0.0));
  const auto v2 = m.encode_sentence_lstm(padded, 4, cf, cb);
  REQUIRE(v1.size() == v2.size());
  for (std::size_t j = 0; j < v1.size(); ++j) CHECK(v1[j] == doctest::Approx(v2[j]));

  SUBCASE("all-PAD filler encodes to the zero vector") {
    const auto z = m.encode_sentence_lstm(padded, 0, cf, cb);
    for (double x : z) CHECK(x == 0.0);
  }
}

TEST_CASE("attention hand arithmetic") {
  ModelConfig cfg;
  cfg.d_l = 1;
  cfg.attention_width = 2;
  SyntacticModel<double> m(cfg);
  m.attn_W.v.fill(0.0);
  m.attn_W.v(0, 0) = 1.0;
  m.attn_W.v(1, 1) = 1.0;
  m.attn_b.v.fill(0.0);
  m.attn_u.v(0, 0) = 1.0;
  m.attn_u.v(0, 1) = 0.0;

  const std::vector<Vec<double>> H = {{0.5, -0.25}, {-0.5, 1.0}};
  std::vector<Vec<double>> u;
  Vec<double> alpha, V;
  m.attend(H, u, alpha, V);

  const double s0 = std::tanh(0.5), s1 = std::tanh(-0.5);
  const double z = std::exp(s0) + std::exp(s1);
  CHECK(alpha[0] == doctest::Approx(std::exp(s0) / z));
  CHECK(alpha[1] == doctest::Approx(std::exp(s1) / z));
  CHECK(V[0] == doctest::Approx(alpha[0] * 0.5 - alpha[1] * 0.5));
  CHECK(V[1] == doctest::Approx(-alpha[0] * 0.25 + alpha[1] * 1.0));

  SUBCASE("a single position takes all the weight") {
    m.attend({{0.3, 0.7}}, u, alpha, V);
    CHECK(alpha == Vec<double>{1.0});
    CHECK(V[0] == doctest::Approx(0.3));
    CHECK(V[1] == doctest::Approx(0.7));
  }
  SUBCASE("identical positions get uniform weights") {
    m.attend({{0.2, 0.4}, {0.2, 0.4}, {0.2, 0.4}}, u, alpha, V);
    for (double a : alpha) CHECK(a == doctest::Approx(1.0 / 3));
  }
}

TEST_CASE("attention output stays in the convex hull and weights sum to one") {
  ModelConfig cfg;
  cfg.d_l = 3;
  SyntacticModel<double> m(cfg);
  Rng rng(13);
  m.init(rng);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t M = 1 + rng.below(8);
    std::vector<Vec<double>> H(M, Vec<double>(6));
    for (auto& h : H)
      for (auto& v : h) v = rng.uniform(-3, 3);
    std::vector<Vec<double>> u;
    Vec<double> alpha, V;
    m.attend(H, u, alpha, V);
    double sum = 0;
    for (double a : alpha) {
      CHECK(a > 0.0);
      sum += a;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t j = 0; j < 6; ++j) {
      double lo = H[0][j], hi = H[0][j];
      for (const auto& h : H) {
        lo = std::min(lo, h[j]);
        hi = std::max(hi, h[j]);
      }
      CHECK(V[j] >= lo - 1e-12);
      CHECK(V[j] <= hi + 1e-12);
    }
  }
}

TEST_CASE("zeroed classifier yields uniform probabilities and ln C loss") {
  ModelConfig cfg;
  cfg.d_p = 4;
  cfg.d_l = 3;
  cfg.filters_per_width = 4;
  cfg.windows = {2};
  cfg.M = 3;
  cfg.N = 5;
  cfg.classes = 3;
  SyntacticModel<double> m(cfg);
  Rng rng(1);
  m.init(rng);
  m.cls_W.v.fill(0.0);
  m.cls_b.v.fill(0.0);
  const Segment seg = random_segment(cfg, rng);
  ForwardCache<double> cache;
  const auto probs = m.forward(seg, cache);
  for (double p : probs) CHECK(p == doctest::Approx(1.0 / 3));
  m.zero_grads();
  const double loss = m.backward(seg, cache, 1, 1.0);
  CHECK(loss == doctest::Approx(std::log(3.0)));
}

TEST_CASE("backward rejects out-of-range labels") {
  ModelConfig cfg;
  cfg.d_p = 4;
  cfg.d_l = 3;
  cfg.filters_per_width = 2;
  cfg.windows = {2};
  cfg.M = 2;
  cfg.N = 4;
  SyntacticModel<double> m(cfg);
  Rng rng(2);
  m.init(rng);
  const Segment seg = random_segment(cfg, rng);
  ForwardCache<double> cache;
  m.forward(seg, cache);
  CHECK_THROWS_AS(m.backward(seg, cache, 2, 1.0), BadLabel);
  CHECK_THROWS_AS(m.backward(seg, cache, -1, 1.0), BadLabel);
}

// Extended precision keeps the oracle's ulp noise floor far below the 1e-12
// absolute bar that the 1e-8 denominator floor implies for near-zero
// gradients; the jitter moves the check to a generic point so no relu kink
// or pooling tie sits within eps of a parameter.
TEST_CASE("analytic gradients match central finite differences") {
  ModelConfig cfg;
  cfg.d_p = 4;
  cfg.d_l = 5;
  cfg.filters_per_width = 6;
  cfg.windows = {2, 3};
  cfg.M = 3;
  cfg.N = 6;
  cfg.classes = 3;

  for (EncoderKind enc : {EncoderKind::cnn, EncoderKind::lstm}) {
    cfg.encoder = enc;
    for (std::uint64_t seed : {7ull, 8ull, 9ull}) {
      CAPTURE(static_cast<int>(enc));
      CAPTURE(seed);
      SyntacticModel<long double> m(cfg);
      Rng rng(seed);
      m.init(rng);
      const Segment seg = random_segment(cfg, rng, /*with_filler=*/true);
      const int label = static_cast<int>(seed % 3);

      auto theta0 = flatten(m, false);
      Rng jitter(seed * 977 + 13);
      for (auto& v : theta0) v += static_cast<long double>(jitter.uniform(-0.05, 0.05));
      auto f = [&](const std::vector<long double>& theta) -> long double {
        unflatten(m, theta);
        ForwardCache<long double> cache;
        const auto probs = m.forward(seg, cache);
        long double p = probs[static_cast<std::size_t>(label)];
        if (p < static_cast<long double>(1e-12)) p = static_cast<long double>(1e-12);
        return -std::log(p);
      };

      unflatten(m, theta0);
      ForwardCache<long double> cache;
      m.forward(seg, cache);
      m.zero_grads();
      m.backward(seg, cache, label, static_cast<long double>(1));
      const auto analytic = flatten(m, true);
      const auto numeric = finite_difference_gradient(f, theta0, static_cast<long double>(1e-5));
      REQUIRE(analytic.size() == numeric.size());
      double worst = 0;
      for (std::size_t i = 0; i < analytic.size(); ++i)
        worst = std::max(worst, relative_error(static_cast<double>(analytic[i]),
                                               static_cast<double>(numeric[i])));
      INFO("max relative error ", worst);
      CHECK(worst <= 1e-4);
    }
  }
}

TEST_CASE("trainable_param_count matches the closed form") {
  ModelConfig cfg;
  cfg.d_p = 4;
  cfg.d_l = 5;
  cfg.filters_per_width = 6;
  cfg.windows = {2, 3};
  cfg.classes = 3;
  auto lstm_params = [](int in, int hid) { return 4 * (hid * in + hid * hid + hid); };

  SUBCASE("cnn encoder") {
    SyntacticModel<double> m(cfg);
    std::size_t want = (TagSet::kSize - 1) * 4;  // tag table minus frozen PAD row
    for (int r : cfg.windows) want += static_cast<std::size_t>(r * 4 * 6 + 6);
    want += static_cast<std::size_t>(2 * lstm_params(12, 5));  // segment BiLSTM
    const std::size_t a = 10;
    want += a * 10 + a + a;        // attention
    want += 3 * 10 + 3;            // classifier
    CHECK(m.trainable_param_count() == want);
  }
  SUBCASE("lstm encoder") {
    cfg.encoder = EncoderKind::lstm;
    SyntacticModel<double> m(cfg);
    std::size_t want = (TagSet::kSize - 1) * 4;
    want += static_cast<std::size_t>(2 * lstm_params(4, 5));   // sentence BiLSTM
    want += static_cast<std::size_t>(2 * lstm_params(10, 5));  // segment BiLSTM
    const std::size_t a = 10;
    want += a * 10 + a + a + 3 * 10 + 3;
    CHECK(m.trainable_param_count() == want);
  }
}

TEST_CASE("word vocabulary builds by frequency with a cap") {
  TokenizedSentence a, b;
  a.tokens = {"The", "cat", "the", "dog", "cat", "the"};
  b.tokens = {"dog", "bird"};
  const auto vocab = WordVocab::build({a, b}, 3);
  CHECK(vocab.size() == 3);
  CHECK(vocab.id("the") == 2);   // freq 4
  CHECK(vocab.id("THE") == 2);   // lowercased lookup
  CHECK(vocab.id("cat") == 3);   // freq 2, beats dog lexicographically
  CHECK(vocab.id("dog") == 4);
  CHECK(vocab.id("bird") == WordVocab::kUnk);  // capped out
  CHECK(vocab.id("zzz") == WordVocab::kUnk);
}

TEST_CASE("load_pretrained_embeddings fills hit rows and reports coverage") {
  TokenizedSentence s;
  s.tokens = {"alpha", "beta", "gamma"};
  const auto vocab = WordVocab::build({s}, 10);
  const std::string path = "glove_test.txt";
  {
    std::ofstream out(path);
    out << "alpha 0.1 0.2 0.3\n";
    out << "beta -1 0 1\n";
    out << "unrelated 9 9 9\n";
  }
  std::vector<float> table;
  Rng rng(4);
  const auto report = load_pretrained_embeddings(path, vocab, 3, table, rng);
  CHECK(report.hits == 2);
  CHECK(report.misses == 1);  // gamma
  CHECK(report.coverage() == doctest::Approx(2.0 / 3));
  REQUIRE(table.size() == (vocab.size() + 2) * 3);
  const std::size_t row = static_cast<std::size_t>(vocab.id("alpha")) * 3;
  CHECK(table[row] == doctest::Approx(0.1f));
  CHECK(table[row + 2] == doctest::Approx(0.3f));
  // PAD row stays zero
  CHECK(table[0] == 0.0f);
  CHECK(table[1] == 0.0f);
  CHECK(table[2] == 0.0f);
  std::remove(path.c_str());
}

TEST_CASE("load_pretrained_embeddings rejects dimension mismatches with a line number") {
  TokenizedSentence s;
  s.tokens = {"alpha"};
  const auto vocab = WordVocab::build({s}, 10);
  const std::string path = "glove_bad.txt";
  {
    std::ofstream out(path);
    out << "alpha 0.1 0.2 0.3\n";
    out << "beta 1 2\n";
  }
  std::vector<float> table;
  Rng rng(4);
  CHECK_THROWS_AS(load_pretrained_embeddings(path, vocab, 3, table, rng), EmbeddingDimMismatch);
  try {
    load_pretrained_embeddings(path, vocab, 3, table, rng);
  } catch (const EmbeddingDimMismatch& e) {
    CHECK(e.line_number == 2);
  }
  std::remove(path.c_str());
}
