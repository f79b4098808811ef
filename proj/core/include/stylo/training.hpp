#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "stylo/model.hpp"
#include "stylo/model_io.hpp"

namespace stylo {

struct NonFiniteGradient : std::runtime_error {
  explicit NonFiniteGradient(const std::string& block)
      : std::runtime_error("non-finite gradient in block: " + block) {}
};
struct Diverged : std::runtime_error {
  Diverged() : std::runtime_error("training diverged: loss > 10x initial for 3 epochs") {}
};

struct TrainingConfig {
  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lambda = 1e-4;
  bool squared_l2 = true;  // penalty lambda*sum(theta^2); plain L2 norm when false
  double clip_norm = 5.0;  // infinity disables
  std::uint64_t seed = 1;
  double validation_fraction = 0.1;
};

inline bool is_bias_block(const std::string& name) { return name.find(".b") != std::string::npos; }

// lambda * ||theta||^2 (or lambda * ||theta||), excluding biases and frozen rows.
template <class T>
double l2_penalty(SyntacticModel<T>& model, double lambda, bool squared) {
  double sumsq = 0.0;
  model.visit_params([&](Param<T>& p, int frozen_row) {
    if (is_bias_block(p.name)) return;
    for (std::size_t i = 0; i < p.v.rows; ++i) {
      if (static_cast<int>(i) == frozen_row) continue;
      const T* row = p.v.row(i);
      for (std::size_t j = 0; j < p.v.cols; ++j) sumsq += static_cast<double>(row[j]) * row[j];
    }
  });
  if (lambda == 0.0) return 0.0;
  return squared ? lambda * sumsq : lambda * std::sqrt(sumsq);
}

template <class T>
double mean_cross_entropy(const std::vector<Vec<T>>& probs, const std::vector<int>& labels,
                          int classes) {
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= classes) throw BadLabel(labels[i], classes);
    const double p = std::max(static_cast<double>(probs[i][static_cast<std::size_t>(labels[i])]), 1e-12);
    sum -= std::log(p);
  }
  return probs.empty() ? 0.0 : sum / static_cast<double>(probs.size());
}

template <class T>
double regularized_loss(const std::vector<Vec<T>>& probs, const std::vector<int>& labels,
                        double lambda, SyntacticModel<T>& model, bool squared_l2 = true) {
  return mean_cross_entropy(probs, labels, model.cfg.classes) +
         l2_penalty(model, lambda, squared_l2);
}

// Adds the penalty gradient in place after batch grads are accumulated.
template <class T>
void add_l2_grads(SyntacticModel<T>& model, double lambda, bool squared) {
  if (lambda == 0.0) return;
  double norm = 1.0;
  if (!squared) {
    const double sumsq = l2_penalty(model, 1.0, true);
    norm = std::sqrt(std::max(sumsq, 1e-12));
  }
  model.visit_params([&](Param<T>& p, int frozen_row) {
    if (is_bias_block(p.name)) return;
    for (std::size_t i = 0; i < p.v.rows; ++i) {
      if (static_cast<int>(i) == frozen_row) continue;
      const T* vr = p.v.row(i);
      T* gr = p.g.row(i);
      for (std::size_t j = 0; j < p.v.cols; ++j) {
        const double d = squared ? 2.0 * lambda * vr[j] : lambda * vr[j] / norm;
        gr[j] += static_cast<T>(d);
      }
    }
  });
}

template <class T>
void mask_frozen_rows(SyntacticModel<T>& model) {
  model.visit_params([&](Param<T>& p, int frozen_row) {
    if (frozen_row >= 0)
      for (std::size_t j = 0; j < p.g.cols; ++j) p.g(static_cast<std::size_t>(frozen_row), j) = T(0);
  });
}

// Returns the global grad norm before clipping.
template <class T>
double clip_gradients(SyntacticModel<T>& model, double clip) {
  double sumsq = 0.0;
  model.visit_params([&](Param<T>& p, int) {
    for (const T g : p.g.data) sumsq += static_cast<double>(g) * g;
  });
  const double norm = std::sqrt(sumsq);
  if (std::isfinite(clip) && norm > clip && norm > 0.0) {
    const T scale = static_cast<T>(clip / norm);
    model.visit_params([&](Param<T>& p, int) {
      for (auto& g : p.g.data) g *= scale;
    });
  }
  return norm;
}

// Nesterov-Adam. Update, per step t (documented in docs/optimizer.md):
//   m <- b1 m + (1-b1) g          v <- b2 v + (1-b2) g^2
//   mhat = m / (1-b1^t)           vhat = v / (1-b2^t)
//   theta <- theta - lr * (b1 mhat + (1-b1) g / (1-b1^t)) / (sqrt(vhat) + eps)
template <class T>
class Nadam {
 public:
  explicit Nadam(const TrainingConfig& cfg) : cfg_(cfg) {}

  void step(SyntacticModel<T>& model) {
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    model.visit_params([&](Param<T>& p, int frozen_row) {
      auto& m = moments1_[p.name];
      auto& v = moments2_[p.name];
      if (m.size() != p.v.size()) {
        m.assign(p.v.size(), 0.0);
        v.assign(p.v.size(), 0.0);
      }
      for (std::size_t i = 0; i < p.v.size(); ++i) {
        if (frozen_row >= 0 && i / p.v.cols == static_cast<std::size_t>(frozen_row)) continue;
        const double g = static_cast<double>(p.g.data[i]);
        if (!std::isfinite(g)) throw NonFiniteGradient(p.name);
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        const double lookahead = b1 * mhat + (1.0 - b1) * g / bc1;
        p.v.data[i] -= static_cast<T>(cfg_.learning_rate * lookahead / (std::sqrt(vhat) + cfg_.epsilon));
      }
    });
  }

  std::uint64_t steps() const { return t_; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["t"] = t_;
    for (const auto& [name, m] : moments1_) j["m"][name] = m;
    for (const auto& [name, v] : moments2_) j["v"][name] = v;
    return j;
  }

  void from_json(const nlohmann::json& j) {
    t_ = j.at("t").get<std::uint64_t>();
    moments1_.clear();
    moments2_.clear();
    if (j.contains("m"))
      for (const auto& [name, m] : j.at("m").items()) moments1_[name] = m.template get<std::vector<double>>();
    if (j.contains("v"))
      for (const auto& [name, v] : j.at("v").items()) moments2_[name] = v.template get<std::vector<double>>();
  }

 private:
  TrainingConfig cfg_;
  std::uint64_t t_ = 0;
  std::unordered_map<std::string, std::vector<double>> moments1_;
  std::unordered_map<std::string, std::vector<double>> moments2_;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double seconds = 0.0;
};

template <class T>
struct FitResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;
  double best_val_acc = 0.0;
  // parameter snapshot of the best epoch, in visit_all_blocks order
  std::vector<std::vector<T>> best_params;
};

template <class T>
double segment_accuracy(SyntacticModel<T>& model, const std::vector<Segment>& segments) {
  if (segments.empty()) return 0.0;
  ForwardCache<T> cache;
  std::size_t correct = 0;
  for (const auto& seg : segments) {
    const Vec<T> probs = model.forward(seg, cache);
    std::size_t best = 0;
    for (std::size_t k = 1; k < probs.size(); ++k)
      if (probs[k] > probs[best]) best = k;
    if (static_cast<int>(best) == seg.author_id) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(segments.size());
}

template <class T>
void snapshot_params(SyntacticModel<T>& model, std::vector<std::vector<T>>& out) {
  out.clear();
  model.visit_all_blocks([&](Param<T>& p) { out.push_back(p.v.data); });
}

template <class T>
void restore_params(SyntacticModel<T>& model, const std::vector<std::vector<T>>& snap) {
  std::size_t i = 0;
  model.visit_all_blocks([&](Param<T>& p) { p.v.data = snap.at(i++); });
}

template <class T>
FitResult<T> fit(SyntacticModel<T>& model, const DatasetSplit& split, const TrainingConfig& cfg,
                 const std::function<void(const EpochStats&)>& on_epoch = nullptr) {
  if (split.train.empty()) throw std::runtime_error("empty training split");
  FitResult<T> result;
  Nadam<T> opt(cfg);
  Rng rng(cfg.seed, /*stream=*/2);

  std::vector<std::size_t> order(split.train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double initial_loss = -1.0;
  int bad_epochs = 0;
  ForwardCache<T> cache;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);
    double ce_sum = 0.0;
    std::size_t correct = 0, seen = 0;

    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const T scale = T(1) / static_cast<T>(end - start);
      model.zero_grads();
      for (std::size_t i = start; i < end; ++i) {
        const Segment& seg = split.train[order[i]];
        const Vec<T> probs = model.forward(seg, cache);
        ce_sum += static_cast<double>(model.backward(seg, cache, seg.author_id, scale));
        std::size_t best = 0;
        for (std::size_t k = 1; k < probs.size(); ++k)
          if (probs[k] > probs[best]) best = k;
        if (static_cast<int>(best) == seg.author_id) ++correct;
        ++seen;
      }
      add_l2_grads(model, cfg.lambda, cfg.squared_l2);
      mask_frozen_rows(model);
      clip_gradients(model, cfg.clip_norm);
      opt.step(model);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = ce_sum / static_cast<double>(seen) + l2_penalty(model, cfg.lambda, cfg.squared_l2);
    stats.train_acc = static_cast<double>(correct) / static_cast<double>(seen);

    if (!split.validation.empty()) {
      std::vector<Vec<T>> vprobs;
      std::vector<int> vlabels;
      std::size_t vcorrect = 0;
      for (const auto& seg : split.validation) {
        const Vec<T> probs = model.forward(seg, cache);
        std::size_t best = 0;
        for (std::size_t k = 1; k < probs.size(); ++k)
          if (probs[k] > probs[best]) best = k;
        if (static_cast<int>(best) == seg.author_id) ++vcorrect;
        vprobs.push_back(probs);
        vlabels.push_back(seg.author_id);
      }
      stats.val_loss = regularized_loss(vprobs, vlabels, cfg.lambda, model, cfg.squared_l2);
      stats.val_acc = static_cast<double>(vcorrect) / static_cast<double>(split.validation.size());
    }
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);

    const double select_acc = split.validation.empty() ? stats.train_acc : stats.val_acc;
    if (result.best_epoch < 0 || select_acc > result.best_val_acc) {
      result.best_epoch = epoch;
      result.best_val_acc = select_acc;
      snapshot_params(model, result.best_params);
    }

    if (initial_loss < 0.0) initial_loss = stats.train_loss;
    if (stats.train_loss > 10.0 * initial_loss) {
      if (++bad_epochs >= 3) throw Diverged();
    } else {
      bad_epochs = 0;
    }
  }
  return result;
}

// Full training checkpoint: model blocks plus optimizer state so a reloaded
// run continues bit-for-bit at 32-bit precision.
template <class T>
void save_training_checkpoint(SyntacticModel<T>& model, const Nadam<T>& opt, int epoch,
                              double val_acc, const std::string& config_hash,
                              const std::string& path) {
  nlohmann::json extra;
  extra["epoch"] = epoch;
  extra["val_acc"] = val_acc;
  extra["config_hash"] = config_hash;
  extra["optimizer"] = opt.to_json();
  save_model(model, path, extra);
}

template <class T>
SyntacticModel<T> load_training_checkpoint(const std::string& path, Nadam<T>& opt,
                                           nlohmann::json* header_out = nullptr) {
  nlohmann::json header;
  SyntacticModel<T> model = load_model<T>(path, &header);
  if (header.contains("optimizer")) opt.from_json(header.at("optimizer"));
  if (header_out) *header_out = header;
  return model;
}

}  // namespace stylo
