#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stylo {

struct ShapeMismatch : std::runtime_error {
  ShapeMismatch(std::size_t ar, std::size_t ac, std::size_t br, std::size_t bc)
      : std::runtime_error("shape mismatch: (" + std::to_string(ar) + "x" + std::to_string(ac) +
                           ") vs (" + std::to_string(br) + "x" + std::to_string(bc) + ")") {}
};

// Row-major dense matrix. Feature dims here are small (<=300 embedding,
// <=256 hidden) so no sparse or blocked storage.
template <class T>
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, T fill = T(0)) : rows(r), cols(c), data(r * c, fill) {}

  T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  T operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  T* row(std::size_t i) { return data.data() + i * cols; }
  const T* row(std::size_t i) const { return data.data() + i * cols; }

  std::size_t size() const { return data.size(); }
  void fill(T v) { data.assign(data.size(), v); }
};

template <class T>
using Vec = std::vector<T>;

template <class T>
Mat<T> matmul(const Mat<T>& a, const Mat<T>& b) {
  if (a.cols != b.rows) throw ShapeMismatch(a.rows, a.cols, b.rows, b.cols);
  Mat<T> out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const T* ai = a.row(i);
    T* oi = out.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const T aik = ai[k];
      if (aik == T(0)) continue;
      const T* bk = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) oi[j] += aik * bk[j];
    }
  }
  return out;
}

// y = A x, A is (m x n), x has n entries.
template <class T>
Vec<T> matvec(const Mat<T>& a, const Vec<T>& x) {
  if (a.cols != x.size()) throw ShapeMismatch(a.rows, a.cols, x.size(), 1);
  Vec<T> y(a.rows, T(0));
  for (std::size_t i = 0; i < a.rows; ++i) {
    const T* ai = a.row(i);
    T acc = T(0);
    for (std::size_t j = 0; j < a.cols; ++j) acc += ai[j] * x[j];
    y[i] = acc;
  }
  return y;
}

// y = A^T x, A is (m x n), x has m entries.
template <class T>
Vec<T> matvec_t(const Mat<T>& a, const Vec<T>& x) {
  if (a.rows != x.size()) throw ShapeMismatch(a.rows, a.cols, 1, x.size());
  Vec<T> y(a.cols, T(0));
  for (std::size_t i = 0; i < a.rows; ++i) {
    const T xi = x[i];
    if (xi == T(0)) continue;
    const T* ai = a.row(i);
    for (std::size_t j = 0; j < a.cols; ++j) y[j] += xi * ai[j];
  }
  return y;
}

// G += u v^T, G is (|u| x |v|).
template <class T>
void add_outer(Mat<T>& g, const Vec<T>& u, const Vec<T>& v) {
  if (g.rows != u.size() || g.cols != v.size()) throw ShapeMismatch(g.rows, g.cols, u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const T ui = u[i];
    if (ui == T(0)) continue;
    T* gi = g.row(i);
    for (std::size_t j = 0; j < v.size(); ++j) gi[j] += ui * v[j];
  }
}

template <class T>
Mat<T> add_bias(const Mat<T>& a, const Vec<T>& b) {
  if (a.cols != b.size()) throw ShapeMismatch(a.rows, a.cols, 1, b.size());
  Mat<T> out = a;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) += b[j];
  return out;
}

template <class T>
void axpy(Vec<T>& y, T alpha, const Vec<T>& x) {
  if (y.size() != x.size()) throw ShapeMismatch(y.size(), 1, x.size(), 1);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

template <class T>
T dot(const Vec<T>& a, const Vec<T>& b) {
  if (a.size() != b.size()) throw ShapeMismatch(a.size(), 1, b.size(), 1);
  T acc = T(0);
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <class T>
Mat<T> relu(const Mat<T>& a) {
  Mat<T> out = a;
  for (auto& v : out.data) v = v > T(0) ? v : T(0);
  return out;
}

template <class T>
Mat<T> tanh_elem(const Mat<T>& a) {
  Mat<T> out = a;
  for (auto& v : out.data) v = std::tanh(v);
  return out;
}

template <class T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
Mat<T> sigmoid(const Mat<T>& a) {
  Mat<T> out = a;
  for (auto& v : out.data) v = sigmoid_scalar(v);
  return out;
}

// Per-row maximum; argmax returned alongside for pooling backward.
template <class T>
void rowmax(const Mat<T>& a, Vec<T>& maxima, std::vector<std::size_t>& argmax) {
  if (a.cols == 0) throw ShapeMismatch(a.rows, a.cols, a.rows, 1);
  maxima.assign(a.rows, T(0));
  argmax.assign(a.rows, 0);
  for (std::size_t i = 0; i < a.rows; ++i) {
    const T* ai = a.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < a.cols; ++j)
      if (ai[j] > ai[best]) best = j;
    maxima[i] = ai[best];
    argmax[i] = best;
  }
}

// Horizontal concatenation.
template <class T>
Mat<T> concat(const Mat<T>& a, const Mat<T>& b) {
  if (a.rows != b.rows) throw ShapeMismatch(a.rows, a.cols, b.rows, b.cols);
  Mat<T> out(a.rows, a.cols + b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols; ++j) out(i, a.cols + j) = b(i, j);
  }
  return out;
}

template <class T>
Vec<T> concat(const Vec<T>& a, const Vec<T>& b) {
  Vec<T> out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

// Max-subtraction keeps exp() in range for logits up to +-1e3 and beyond.
template <class T>
Vec<T> softmax(const Vec<T>& v) {
  Vec<T> out(v.size(), T(0));
  if (v.empty()) return out;
  T m = v[0];
  for (T x : v)
    if (x > m) m = x;
  // exponent floor keeps every output strictly positive even at logit gaps
  // beyond the underflow threshold
  const T floor = sizeof(T) == 4 ? T(-80) : T(-700);
  T z = T(0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    T d = v[i] - m;
    if (d < floor) d = floor;
    out[i] = std::exp(d);
    z += out[i];
  }
  for (auto& x : out) x /= z;
  return out;
}

template <class T>
bool all_finite(const Vec<T>& v) {
  for (T x : v)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

template <class T>
bool all_finite(const Mat<T>& m) {
  return all_finite(m.data);
}

}  // namespace stylo
