#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stylo/corpus.hpp"
#include "stylo/matrix.hpp"
#include "stylo/rng.hpp"
#include "stylo/tagset.hpp"

namespace stylo {

struct BadTokenId : std::runtime_error {
  explicit BadTokenId(int id) : std::runtime_error("token id out of table range: " + std::to_string(id)) {}
};
struct SentenceTooShort : std::runtime_error {
  SentenceTooShort(int n, int need)
      : std::runtime_error("sentence length " + std::to_string(n) + " shorter than receptive field " +
                           std::to_string(need)) {}
};
struct NumericOverflow : std::runtime_error {
  explicit NumericOverflow(const std::string& layer)
      : std::runtime_error("non-finite activation in layer: " + layer) {}
};
struct BadLabel : std::runtime_error {
  BadLabel(int label, int classes)
      : std::runtime_error("label " + std::to_string(label) + " out of range for " +
                           std::to_string(classes) + " classes") {}
};

enum class FeatureMode { syntactic, lexical };
enum class EncoderKind { cnn, lstm };

struct ModelConfig {
  FeatureMode mode = FeatureMode::syntactic;
  EncoderKind encoder = EncoderKind::cnn;
  int M = 100;
  int N = 30;
  int d_p = 64;
  int d_l = 128;
  int filters_per_width = 100;  // per receptive-field size
  std::vector<int> windows = {3, 5};
  int cnn_layers = 1;
  int attention_width = 0;  // 0 -> 2*d_l
  int classes = 2;
  int word_vocab = 0;   // lexical mode: capped vocabulary size (without PAD/UNK)
  int word_dim = 300;
  bool finetune_embeddings = false;

  int input_dim() const { return mode == FeatureMode::syntactic ? d_p : word_dim; }
  int total_filters() const { return filters_per_width * static_cast<int>(windows.size()); }
  int sentence_vec_width() const {
    return encoder == EncoderKind::cnn ? total_filters() : 2 * d_l;
  }
  int attn_width() const { return attention_width > 0 ? attention_width : 2 * d_l; }
};

template <class T>
struct Param {
  std::string name;
  Mat<T> v;
  Mat<T> g;

  void resize(std::size_t r, std::size_t c) {
    v = Mat<T>(r, c);
    g = Mat<T>(r, c);
  }
};

// Glorot-style scaled uniform.
template <class T>
void init_uniform(Mat<T>& m, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (auto& x : m.data) x = static_cast<T>(rng.uniform(-limit, limit));
}

template <class T>
struct LstmCell {
  // Gate order: input, forget, output, candidate.
  Param<T> W[4];  // hid x in
  Param<T> U[4];  // hid x hid
  Param<T> b[4];  // 1 x hid
  int in = 0, hid = 0;

  void configure(const std::string& prefix, int in_dim, int hid_dim) {
    static const char* gate[4] = {"i", "f", "o", "g"};
    in = in_dim;
    hid = hid_dim;
    for (int k = 0; k < 4; ++k) {
      W[k].name = prefix + ".W" + gate[k];
      U[k].name = prefix + ".U" + gate[k];
      b[k].name = prefix + ".b" + gate[k];
      W[k].resize(hid, in);
      U[k].resize(hid, hid);
      b[k].resize(1, hid);
    }
  }

  void init(Rng& rng) {
    for (int k = 0; k < 4; ++k) {
      init_uniform(W[k].v, in, hid, rng);
      init_uniform(U[k].v, hid, hid, rng);
      b[k].v.fill(k == 1 ? T(1) : T(0));  // forget-gate bias 1
    }
  }
};

template <class T>
struct LstmRunCache {
  // Per processed step, in processing order.
  std::vector<Vec<T>> gi, gf, go, gg, c, tc, h;
  void clear() {
    gi.clear(); gf.clear(); go.clear(); gg.clear(); c.clear(); tc.clear(); h.clear();
  }
  std::size_t steps() const { return h.size(); }
};

// Runs the cell over xs[order[0]], xs[order[1]], ... from a zero state.
template <class T>
void lstm_run(const LstmCell<T>& cell, const std::vector<Vec<T>>& xs,
              const std::vector<std::size_t>& order, LstmRunCache<T>& cache) {
  cache.clear();
  const std::size_t hid = static_cast<std::size_t>(cell.hid);
  Vec<T> h(hid, T(0)), c(hid, T(0));
  for (std::size_t step = 0; step < order.size(); ++step) {
    const Vec<T>& x = xs[order[step]];
    Vec<T> pre[4];
    for (int k = 0; k < 4; ++k) {
      pre[k] = matvec(cell.W[k].v, x);
      Vec<T> uh = matvec(cell.U[k].v, h);
      for (std::size_t j = 0; j < hid; ++j) pre[k][j] += uh[j] + cell.b[k].v(0, j);
    }
    Vec<T> gi(hid), gf(hid), go(hid), gg(hid), cn(hid), tc(hid), hn(hid);
    for (std::size_t j = 0; j < hid; ++j) {
      gi[j] = sigmoid_scalar(pre[0][j]);
      gf[j] = sigmoid_scalar(pre[1][j]);
      go[j] = sigmoid_scalar(pre[2][j]);
      gg[j] = std::tanh(pre[3][j]);
      cn[j] = gf[j] * c[j] + gi[j] * gg[j];
      tc[j] = std::tanh(cn[j]);
      hn[j] = go[j] * tc[j];
    }
    cache.gi.push_back(gi);
    cache.gf.push_back(gf);
    cache.go.push_back(go);
    cache.gg.push_back(gg);
    cache.c.push_back(cn);
    cache.tc.push_back(tc);
    cache.h.push_back(hn);
    h = std::move(hn);
    c = std::move(cn);
  }
}

// BPTT. dh_steps[k] is the gradient arriving at the hidden state of step k
// from outside the recurrence. Accumulates parameter grads into the cell and
// input grads into dx (indexed like xs).
template <class T>
void lstm_backward(LstmCell<T>& cell, const LstmRunCache<T>& cache, const std::vector<Vec<T>>& xs,
                   const std::vector<std::size_t>& order, const std::vector<Vec<T>>& dh_steps,
                   std::vector<Vec<T>>& dx) {
  const std::size_t hid = static_cast<std::size_t>(cell.hid);
  const std::size_t L = cache.steps();
  Vec<T> dh_carry(hid, T(0)), dc_carry(hid, T(0));
  for (std::size_t s = L; s-- > 0;) {
    const Vec<T>& x = xs[order[s]];
    const Vec<T>& h_prev = s > 0 ? cache.h[s - 1] : Vec<T>(hid, T(0));
    const Vec<T>& c_prev = s > 0 ? cache.c[s - 1] : Vec<T>(hid, T(0));

    Vec<T> dh(hid), da[4];
    for (std::size_t j = 0; j < hid; ++j) dh[j] = dh_steps[s][j] + dh_carry[j];
    for (int k = 0; k < 4; ++k) da[k].assign(hid, T(0));

    Vec<T> dc(hid);
    for (std::size_t j = 0; j < hid; ++j) {
      const T go = cache.go[s][j], tc = cache.tc[s][j];
      dc[j] = dh[j] * go * (T(1) - tc * tc) + dc_carry[j];
      const T d_go = dh[j] * tc;
      const T gi = cache.gi[s][j], gf = cache.gf[s][j], gg = cache.gg[s][j];
      da[0][j] = dc[j] * gg * gi * (T(1) - gi);
      da[1][j] = dc[j] * c_prev[j] * gf * (T(1) - gf);
      da[2][j] = d_go * go * (T(1) - go);
      da[3][j] = dc[j] * gi * (T(1) - gg * gg);
      dc_carry[j] = dc[j] * gf;
    }

    dh_carry.assign(hid, T(0));
    for (int k = 0; k < 4; ++k) {
      add_outer(cell.W[k].g, da[k], x);
      add_outer(cell.U[k].g, da[k], h_prev);
      for (std::size_t j = 0; j < hid; ++j) cell.b[k].g(0, j) += da[k][j];
      Vec<T> dxk = matvec_t(cell.W[k].v, da[k]);
      axpy(dx[order[s]], T(1), dxk);
      Vec<T> dhk = matvec_t(cell.U[k].v, da[k]);
      axpy(dh_carry, T(1), dhk);
    }
  }
}

template <class T>
struct ConvLayer {
  Param<T> W;  // (r * in_ch) x filters
  Param<T> b;  // 1 x filters
};

template <class T>
struct CnnWidthCache {
  // maps[l] is the post-relu feature map of layer l: (positions x filters).
  std::vector<Mat<T>> maps;
  std::vector<std::size_t> argmax;  // per filter, winning position in last map
  Vec<T> pooled;
};

template <class T>
struct ForwardCache {
  std::vector<Mat<T>> S;  // per sentence: N x d embedding
  std::vector<std::vector<CnnWidthCache<T>>> cnn;  // [sentence][width]
  std::vector<LstmRunCache<T>> sent_f, sent_b;
  std::vector<std::vector<Vec<T>>> sent_rows;  // per sentence: rows of S as vectors
  std::vector<Vec<T>> sent_vec;                // M sentence vectors
  LstmRunCache<T> seg_f, seg_b;
  std::vector<Vec<T>> H;       // M x 2d_l
  std::vector<Vec<T>> attn_u;  // M x a
  Vec<T> alpha;
  Vec<T> V;
  Vec<T> logits;
  Vec<T> probs;
};

template <class T>
class SyntacticModel {
 public:
  ModelConfig cfg;

  Param<T> tag_table;   // 49 x d_p, PAD row frozen at zero
  Param<T> word_table;  // (vocab+2) x word_dim, row 0 PAD, row 1 UNK
  std::vector<std::vector<ConvLayer<T>>> conv;  // [width][layer]
  LstmCell<T> sent_fwd, sent_bwd;
  LstmCell<T> seg_fwd, seg_bwd;
  Param<T> attn_W;  // a x 2d_l
  Param<T> attn_b;  // 1 x a
  Param<T> attn_u;  // 1 x a, the learned context vector
  Param<T> cls_W;   // C x 2d_l
  Param<T> cls_b;   // 1 x C

  explicit SyntacticModel(const ModelConfig& config) : cfg(config) { allocate(); }

  void allocate() {
    const int d = cfg.input_dim();
    tag_table.name = "tag_table";
    tag_table.resize(TagSet::kSize, cfg.d_p);
    if (cfg.mode == FeatureMode::lexical) {
      word_table.name = "word_table";
      word_table.resize(static_cast<std::size_t>(cfg.word_vocab) + 2, cfg.word_dim);
    }
    conv.clear();
    if (cfg.encoder == EncoderKind::cnn) {
      for (std::size_t wi = 0; wi < cfg.windows.size(); ++wi) {
        const int r = cfg.windows[wi];
        std::vector<ConvLayer<T>> stack;
        for (int l = 0; l < cfg.cnn_layers; ++l) {
          const int in_ch = l == 0 ? d : cfg.filters_per_width;
          ConvLayer<T> layer;
          layer.W.name = "conv.r" + std::to_string(r) + ".l" + std::to_string(l) + ".W";
          layer.b.name = "conv.r" + std::to_string(r) + ".l" + std::to_string(l) + ".b";
          layer.W.resize(static_cast<std::size_t>(r) * in_ch, cfg.filters_per_width);
          layer.b.resize(1, cfg.filters_per_width);
          stack.push_back(std::move(layer));
        }
        conv.push_back(std::move(stack));
      }
    } else {
      sent_fwd.configure("sent_fwd", d, cfg.d_l);
      sent_bwd.configure("sent_bwd", d, cfg.d_l);
    }
    seg_fwd.configure("seg_fwd", cfg.sentence_vec_width(), cfg.d_l);
    seg_bwd.configure("seg_bwd", cfg.sentence_vec_width(), cfg.d_l);
    const int a = cfg.attn_width();
    attn_W.name = "attn.W";
    attn_b.name = "attn.b";
    attn_u.name = "attn.u";
    attn_W.resize(a, 2 * cfg.d_l);
    attn_b.resize(1, a);
    attn_u.resize(1, a);
    cls_W.name = "cls.W";
    cls_b.name = "cls.b";
    cls_W.resize(cfg.classes, 2 * cfg.d_l);
    cls_b.resize(1, cfg.classes);
  }

  void init(Rng& rng) {
    init_uniform(tag_table.v, TagSet::kSize, cfg.d_p, rng);
    for (int j = 0; j < cfg.d_p; ++j) tag_table.v(TagSet::kPad, j) = T(0);
    if (cfg.mode == FeatureMode::lexical) {
      init_uniform(word_table.v, word_table.v.rows, cfg.word_dim, rng);
      for (int j = 0; j < cfg.word_dim; ++j) word_table.v(0, j) = T(0);
    }
    for (auto& stack : conv)
      for (auto& layer : stack) {
        init_uniform(layer.W.v, layer.W.v.rows, layer.W.v.cols, rng);
        layer.b.v.fill(T(0));
      }
    if (cfg.encoder == EncoderKind::lstm) {
      sent_fwd.init(rng);
      sent_bwd.init(rng);
    }
    seg_fwd.init(rng);
    seg_bwd.init(rng);
    init_uniform(attn_W.v, 2 * cfg.d_l, cfg.attn_width(), rng);
    attn_b.v.fill(T(0));
    init_uniform(attn_u.v, cfg.attn_width(), 1, rng);
    init_uniform(cls_W.v, 2 * cfg.d_l, cfg.classes, rng);
    cls_b.v.fill(T(0));
  }

  // Enumerates trainable parameter blocks in the documented checkpoint order.
  // frozen_row >= 0 marks one gradient-masked, penalty-exempt row.
  template <class F>
  void visit_params(F&& f) {
    if (cfg.mode == FeatureMode::syntactic) {
      f(tag_table, TagSet::kPad);
    } else if (cfg.finetune_embeddings) {
      f(word_table, 0);
    }
    for (auto& stack : conv)
      for (auto& layer : stack) {
        f(layer.W, -1);
        f(layer.b, -1);
      }
    if (cfg.encoder == EncoderKind::lstm) {
      for (auto* cell : {&sent_fwd, &sent_bwd})
        for (int k = 0; k < 4; ++k) {
          f(cell->W[k], -1);
          f(cell->U[k], -1);
          f(cell->b[k], -1);
        }
    }
    for (auto* cell : {&seg_fwd, &seg_bwd})
      for (int k = 0; k < 4; ++k) {
        f(cell->W[k], -1);
        f(cell->U[k], -1);
        f(cell->b[k], -1);
      }
    f(attn_W, -1);
    f(attn_b, -1);
    f(attn_u, -1);
    f(cls_W, -1);
    f(cls_b, -1);
  }

  // All stored blocks including frozen tables (for checkpoints).
  template <class F>
  void visit_all_blocks(F&& f) {
    f(tag_table);
    if (cfg.mode == FeatureMode::lexical) f(word_table);
    for (auto& stack : conv)
      for (auto& layer : stack) {
        f(layer.W);
        f(layer.b);
      }
    if (cfg.encoder == EncoderKind::lstm)
      for (auto* cell : {&sent_fwd, &sent_bwd})
        for (int k = 0; k < 4; ++k) {
          f(cell->W[k]);
          f(cell->U[k]);
          f(cell->b[k]);
        }
    for (auto* cell : {&seg_fwd, &seg_bwd})
      for (int k = 0; k < 4; ++k) {
        f(cell->W[k]);
        f(cell->U[k]);
        f(cell->b[k]);
      }
    f(attn_W);
    f(attn_b);
    f(attn_u);
    f(cls_W);
    f(cls_b);
  }

  std::size_t trainable_param_count() {
    std::size_t n = 0;
    visit_params([&](Param<T>& p, int frozen_row) {
      n += p.v.size();
      if (frozen_row >= 0) n -= p.v.cols;
    });
    return n;
  }

  void zero_grads() {
    visit_params([](Param<T>& p, int) { p.g.fill(T(0)); });
  }

  Mat<T> embed_sentence(const TaggedSentence& sent) const {
    const bool lex = cfg.mode == FeatureMode::lexical;
    const Mat<T>& table = lex ? word_table.v : tag_table.v;
    const std::vector<int>& ids = lex ? sent.word_ids : sent.tag_ids;
    const std::size_t n = ids.size();
    Mat<T> S(n, table.cols);
    for (std::size_t t = 0; t < n; ++t) {
      const int id = ids[t];
      if (id < 0 || static_cast<std::size_t>(id) >= table.rows) throw BadTokenId(id);
      const T* src = table.row(static_cast<std::size_t>(id));
      T* dst = S.row(t);
      for (std::size_t j = 0; j < table.cols; ++j) dst[j] = src[j];
    }
    return S;
  }

  Vec<T> encode_sentence_cnn(const Mat<T>& S, std::vector<CnnWidthCache<T>>& caches) const {
    Vec<T> h;
    caches.clear();
    for (std::size_t wi = 0; wi < cfg.windows.size(); ++wi) {
      const int r = cfg.windows[wi];
      if (static_cast<int>(S.rows) < r) throw SentenceTooShort(static_cast<int>(S.rows), r);
      CnnWidthCache<T> cache;
      const Mat<T>* input = &S;
      for (int l = 0; l < cfg.cnn_layers; ++l) {
        const auto& layer = conv[wi][static_cast<std::size_t>(l)];
        const std::size_t in_ch = input->cols;
        const std::size_t positions = input->rows - static_cast<std::size_t>(r) + 1;
        if (static_cast<long long>(input->rows) < r) throw SentenceTooShort(static_cast<int>(input->rows), r);
        Mat<T> out(positions, layer.b.v.cols);
        for (std::size_t j = 0; j < positions; ++j) {
          for (std::size_t k = 0; k < out.cols; ++k) {
            T acc = layer.b.v(0, k);
            for (int rr = 0; rr < r; ++rr) {
              const T* row = input->row(j + static_cast<std::size_t>(rr));
              const std::size_t base = static_cast<std::size_t>(rr) * in_ch;
              for (std::size_t ch = 0; ch < in_ch; ++ch)
                acc += row[ch] * layer.W.v(base + ch, k);
            }
            out(j, k) = acc > T(0) ? acc : T(0);
          }
        }
        cache.maps.push_back(std::move(out));
        input = &cache.maps.back();
      }
      // temporal max-pool per filter
      const Mat<T>& last = cache.maps.back();
      cache.pooled.assign(last.cols, T(0));
      cache.argmax.assign(last.cols, 0);
      for (std::size_t k = 0; k < last.cols; ++k) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < last.rows; ++j)
          if (last(j, k) > last(best, k)) best = j;
        cache.pooled[k] = last(best, k);
        cache.argmax[k] = best;
      }
      h.insert(h.end(), cache.pooled.begin(), cache.pooled.end());
      caches.push_back(std::move(cache));
    }
    return h;
  }

  void backward_sentence_cnn(const Mat<T>& S, const std::vector<CnnWidthCache<T>>& caches,
                             const Vec<T>& dh, Mat<T>& dS) {
    std::size_t off = 0;
    for (std::size_t wi = 0; wi < cfg.windows.size(); ++wi) {
      const int r = cfg.windows[wi];
      const CnnWidthCache<T>& cache = caches[wi];
      const std::size_t filters = cache.pooled.size();

      // Gradient of the pooled vector lands on the argmax positions only.
      std::vector<Mat<T>> dmaps(cache.maps.size());
      for (std::size_t l = 0; l < cache.maps.size(); ++l)
        dmaps[l] = Mat<T>(cache.maps[l].rows, cache.maps[l].cols);
      Mat<T>& dlast = dmaps.back();
      for (std::size_t k = 0; k < filters; ++k) dlast(cache.argmax[k], k) = dh[off + k];
      off += filters;

      Mat<T> dS_local(S.rows, S.cols);
      for (std::size_t l = cache.maps.size(); l-- > 0;) {
        auto& layer = conv[wi][l];
        const Mat<T>& input = l == 0 ? S : cache.maps[l - 1];
        const Mat<T>& output = cache.maps[l];
        Mat<T>& dout = dmaps[l];
        Mat<T>& dinput = l == 0 ? dS_local : dmaps[l - 1];
        const std::size_t in_ch = input.cols;
        for (std::size_t j = 0; j < output.rows; ++j) {
          for (std::size_t k = 0; k < output.cols; ++k) {
            T dz = dout(j, k);
            if (dz == T(0) || output(j, k) <= T(0)) continue;  // relu gate
            layer.b.g(0, k) += dz;
            for (int rr = 0; rr < r; ++rr) {
              const std::size_t base = static_cast<std::size_t>(rr) * in_ch;
              const T* in_row = input.row(j + static_cast<std::size_t>(rr));
              T* din_row = dinput.row(j + static_cast<std::size_t>(rr));
              for (std::size_t ch = 0; ch < in_ch; ++ch) {
                layer.W.g(base + ch, k) += dz * in_row[ch];
                din_row[ch] += dz * layer.W.v(base + ch, k);
              }
            }
          }
        }
      }
      for (std::size_t i = 0; i < S.rows; ++i)
        for (std::size_t j = 0; j < S.cols; ++j) dS(i, j) += dS_local(i, j);
    }
  }

  // Bidirectional sentence encoding with the PAD-masked unweighted sum. Both
  // directions run over the real tokens only; the backward direction starts
  // at the last real token so reversal reads real text first.
  Vec<T> encode_sentence_lstm(const std::vector<Vec<T>>& rows, int true_length,
                              LstmRunCache<T>& cf, LstmRunCache<T>& cb) const {
    const std::size_t L = static_cast<std::size_t>(true_length);
    Vec<T> out(2 * static_cast<std::size_t>(cfg.d_l), T(0));
    cf.clear();
    cb.clear();
    if (L == 0) return out;  // all-PAD filler
    std::vector<std::size_t> fwd(L), bwd(L);
    for (std::size_t t = 0; t < L; ++t) {
      fwd[t] = t;
      bwd[t] = L - 1 - t;
    }
    lstm_run(sent_fwd, rows, fwd, cf);
    lstm_run(sent_bwd, rows, bwd, cb);
    const std::size_t d = static_cast<std::size_t>(cfg.d_l);
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t j = 0; j < d; ++j) {
        out[j] += cf.h[t][j];           // forward state at position t
        out[d + j] += cb.h[L - 1 - t][j];  // backward state at position t
      }
    }
    return out;
  }

  ModelConfig config() const { return cfg; }

  // Full forward over one segment. Returns class probabilities; cache holds
  // everything the backward pass needs.
  Vec<T> forward(const Segment& seg, ForwardCache<T>& cache) const {
    const std::size_t M = seg.sentences.size();
    cache = ForwardCache<T>();
    cache.sent_vec.resize(M);
    cache.S.resize(M);
    if (cfg.encoder == EncoderKind::cnn) {
      cache.cnn.resize(M);
    } else {
      cache.sent_f.resize(M);
      cache.sent_b.resize(M);
      cache.sent_rows.resize(M);
    }
    for (std::size_t i = 0; i < M; ++i) {
      cache.S[i] = embed_sentence(seg.sentences[i]);
      if (cfg.encoder == EncoderKind::cnn) {
        cache.sent_vec[i] = encode_sentence_cnn(cache.S[i], cache.cnn[i]);
      } else {
        auto& rows = cache.sent_rows[i];
        rows.resize(cache.S[i].rows);
        for (std::size_t t = 0; t < cache.S[i].rows; ++t)
          rows[t].assign(cache.S[i].row(t), cache.S[i].row(t) + cache.S[i].cols);
        cache.sent_vec[i] = encode_sentence_lstm(rows, seg.sentences[i].true_length,
                                                 cache.sent_f[i], cache.sent_b[i]);
      }
      if (!all_finite(cache.sent_vec[i])) throw NumericOverflow("sentence_encoder");
    }

    std::vector<std::size_t> fwd(M), bwd(M);
    for (std::size_t i = 0; i < M; ++i) {
      fwd[i] = i;
      bwd[i] = M - 1 - i;
    }
    lstm_run(seg_fwd, cache.sent_vec, fwd, cache.seg_f);
    lstm_run(seg_bwd, cache.sent_vec, bwd, cache.seg_b);
    const std::size_t d = static_cast<std::size_t>(cfg.d_l);
    cache.H.resize(M);
    for (std::size_t i = 0; i < M; ++i) {
      cache.H[i].resize(2 * d);
      for (std::size_t j = 0; j < d; ++j) {
        cache.H[i][j] = cache.seg_f.h[i][j];
        cache.H[i][d + j] = cache.seg_b.h[M - 1 - i][j];
      }
    }
    if (!all_finite(cache.H.back())) throw NumericOverflow("segment_encoder");

    attend(cache.H, cache.attn_u, cache.alpha, cache.V);
    if (!all_finite(cache.V)) throw NumericOverflow("attention");

    const Vec<T> wv = matvec(cls_W.v, cache.V);
    cache.logits.resize(cfg.classes);
    for (int k = 0; k < cfg.classes; ++k) cache.logits[static_cast<std::size_t>(k)] = wv[static_cast<std::size_t>(k)] + cls_b.v(0, k);
    if (!all_finite(cache.logits)) throw NumericOverflow("classifier");
    cache.probs = softmax(cache.logits);
    return cache.probs;
  }

  void attend(const std::vector<Vec<T>>& H, std::vector<Vec<T>>& u_rows, Vec<T>& alpha,
              Vec<T>& V) const {
    const std::size_t M = H.size();
    u_rows.resize(M);
    Vec<T> scores(M);
    for (std::size_t i = 0; i < M; ++i) {
      Vec<T> z = matvec(attn_W.v, H[i]);
      for (std::size_t j = 0; j < z.size(); ++j) z[j] = std::tanh(z[j] + attn_b.v(0, j));
      u_rows[i] = z;
      T s = T(0);
      for (std::size_t j = 0; j < z.size(); ++j) s += z[j] * attn_u.v(0, j);
      scores[i] = s;
    }
    alpha = softmax(scores);
    V.assign(H[0].size(), T(0));
    for (std::size_t i = 0; i < M; ++i) axpy(V, alpha[i], H[i]);
  }

  // Cross-entropy on the cached forward pass. Accumulates grads scaled by
  // `scale` (1/batch for minibatches). Returns the unscaled CE term.
  T backward(const Segment& seg, const ForwardCache<T>& cache, int label, T scale) {
    if (label < 0 || label >= cfg.classes) throw BadLabel(label, cfg.classes);
    const std::size_t M = seg.sentences.size();
    const std::size_t d = static_cast<std::size_t>(cfg.d_l);

    const T p = std::max(cache.probs[static_cast<std::size_t>(label)], T(1e-12));
    const T loss = -std::log(p);

    // softmax + CE
    Vec<T> dz(cache.probs);
    dz[static_cast<std::size_t>(label)] -= T(1);
    for (auto& v : dz) v *= scale;

    add_outer(cls_W.g, dz, cache.V);
    for (int k = 0; k < cfg.classes; ++k) cls_b.g(0, k) += dz[static_cast<std::size_t>(k)];
    Vec<T> dV = matvec_t(cls_W.v, dz);

    // attention backward
    std::vector<Vec<T>> dH(M, Vec<T>(2 * d, T(0)));
    Vec<T> dalpha(M, T(0));
    for (std::size_t i = 0; i < M; ++i) {
      dalpha[i] = dot(cache.H[i], dV);
      axpy(dH[i], cache.alpha[i], dV);
    }
    T inner = T(0);
    for (std::size_t i = 0; i < M; ++i) inner += cache.alpha[i] * dalpha[i];
    for (std::size_t i = 0; i < M; ++i) {
      const T de = cache.alpha[i] * (dalpha[i] - inner);
      // de -> u_i and u_s
      const Vec<T>& u = cache.attn_u[i];
      Vec<T> du(u.size());
      for (std::size_t j = 0; j < u.size(); ++j) {
        du[j] = de * attn_u.v(0, j);
        attn_u.g(0, j) += de * u[j];
      }
      Vec<T> dzt(u.size());
      for (std::size_t j = 0; j < u.size(); ++j) dzt[j] = du[j] * (T(1) - u[j] * u[j]);
      add_outer(attn_W.g, dzt, cache.H[i]);
      for (std::size_t j = 0; j < u.size(); ++j) attn_b.g(0, j) += dzt[j];
      Vec<T> dhi = matvec_t(attn_W.v, dzt);
      axpy(dH[i], T(1), dhi);
    }

    // segment BiLSTM backward
    std::vector<std::size_t> fwd(M), bwd(M);
    for (std::size_t i = 0; i < M; ++i) {
      fwd[i] = i;
      bwd[i] = M - 1 - i;
    }
    std::vector<Vec<T>> dh_f(M, Vec<T>(d, T(0))), dh_b(M, Vec<T>(d, T(0)));
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        dh_f[i][j] = dH[i][j];
        dh_b[M - 1 - i][j] = dH[i][d + j];
      }
    std::vector<Vec<T>> dsent(M, Vec<T>(cache.sent_vec[0].size(), T(0)));
    lstm_backward(seg_fwd, cache.seg_f, cache.sent_vec, fwd, dh_f, dsent);
    lstm_backward(seg_bwd, cache.seg_b, cache.sent_vec, bwd, dh_b, dsent);

    // per-sentence encoder backward + embedding scatter
    const bool lex = cfg.mode == FeatureMode::lexical;
    const bool update_table = !lex || cfg.finetune_embeddings;
    Param<T>& table = lex ? word_table : tag_table;
    const int pad_row = lex ? 0 : TagSet::kPad;
    for (std::size_t i = 0; i < M; ++i) {
      Mat<T> dS(cache.S[i].rows, cache.S[i].cols);
      if (cfg.encoder == EncoderKind::cnn) {
        backward_sentence_cnn(cache.S[i], cache.cnn[i], dsent[i], dS);
      } else {
        const std::size_t L = static_cast<std::size_t>(seg.sentences[i].true_length);
        if (L > 0) {
          std::vector<std::size_t> sfwd(L), sbwd(L);
          for (std::size_t t = 0; t < L; ++t) {
            sfwd[t] = t;
            sbwd[t] = L - 1 - t;
          }
          // the unweighted sum spreads the same gradient to every step
          std::vector<Vec<T>> df(L, Vec<T>(d)), db(L, Vec<T>(d));
          for (std::size_t t = 0; t < L; ++t)
            for (std::size_t j = 0; j < d; ++j) {
              df[t][j] = dsent[i][j];
              db[t][j] = dsent[i][d + j];
            }
          std::vector<Vec<T>> dx(cache.sent_rows[i].size(), Vec<T>(cache.S[i].cols, T(0)));
          lstm_backward(sent_fwd, cache.sent_f[i], cache.sent_rows[i], sfwd, df, dx);
          lstm_backward(sent_bwd, cache.sent_b[i], cache.sent_rows[i], sbwd, db, dx);
          for (std::size_t t = 0; t < dx.size(); ++t)
            for (std::size_t j = 0; j < dS.cols; ++j) dS(t, j) += dx[t][j];
        }
      }
      if (update_table) {
        const std::vector<int>& ids = lex ? seg.sentences[i].word_ids : seg.sentences[i].tag_ids;
        for (std::size_t t = 0; t < ids.size(); ++t) {
          if (ids[t] == pad_row) continue;  // frozen row
          T* grow = table.g.row(static_cast<std::size_t>(ids[t]));
          const T* drow = dS.row(t);
          for (std::size_t j = 0; j < dS.cols; ++j) grow[j] += drow[j];
        }
      }
    }
    return loss;
  }
};

}  // namespace stylo
