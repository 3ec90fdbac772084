#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "camstat/error.hpp"
#include "camstat/minicnn.hpp"
#include "camstat/random.hpp"

namespace camstat::minicnn {

struct TrainConfig {
  double lr = 0.001;
  double momentum = 0.9;
  double decay_factor = 0.9;
  int patience = 10;
  int epochs = 100;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  bool class_weighted = true;

  void validate() const {
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(decay_factor > 0.0 && decay_factor < 1.0)) throw ConfigError("decay factor must lie in (0, 1)");
    if (patience < 1) throw ConfigError("patience must be at least 1");
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  }
};

/// Multiplies the learning rate by `factor` once the monitored loss has gone
/// `patience` consecutive epochs without a strict improvement.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, double factor, int patience) : lr_(lr), factor_(factor), patience_(patience) {}

  // Returns true when the loss improved on the best so far.
  bool step(double loss) {
    if (loss < best_) {
      best_ = loss;
      bad_epochs_ = 0;
      return true;
    }
    if (++bad_epochs_ >= patience_) {
      lr_ *= factor_;
      bad_epochs_ = 0;
    }
    return false;
  }

  double lr() const { return lr_; }
  double best() const { return best_; }

 private:
  double lr_;
  double factor_;
  int patience_;
  int bad_epochs_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct LabeledSet {
  std::vector<Tensor> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
};

/// Inverse class frequency, N / (2 * N_c); both classes must be present.
inline std::array<double, kClasses> class_weights(std::span<const int> labels) {
  std::array<std::size_t, kClasses> counts{};
  for (int y : labels) {
    check_class(y);
    ++counts[static_cast<std::size_t>(y)];
  }
  if (counts[0] == 0 || counts[1] == 0) throw DegenerateClassError("training data must contain both classes");
  const double n = static_cast<double>(labels.size());
  return {n / (2.0 * static_cast<double>(counts[0])), n / (2.0 * static_cast<double>(counts[1]))};
}

inline double cross_entropy(const std::array<float, kClasses>& logits, int label) {
  const double a = logits[0], b = logits[1];
  const double mx = std::max(a, b);
  const double lse = mx + std::log(std::exp(a - mx) + std::exp(b - mx));
  return lse - (label == 1 ? b : a);
}

/// Weighted mean cross-entropy, sum(w_i * l_i) / sum(w_i).
inline double dataset_loss(const MiniCnn& m, const LabeledSet& set, const std::array<double, kClasses>& weights) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const double w = weights[static_cast<std::size_t>(set.labels[i])];
    num += w * cross_entropy(forward(m, set.images[i]).logits, set.labels[i]);
    den += w;
  }
  return den > 0.0 ? num / den : 0.0;
}

struct EpochLog {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  MiniCnn model;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::vector<EpochLog> history;
};

/// SGD with momentum on class-weighted cross-entropy. The learning rate
/// decays on validation plateaus and the parameters with the lowest
/// validation loss are returned.
inline TrainResult train(const LabeledSet& train_set, const LabeledSet& val_set, const TrainConfig& cfg) {
  cfg.validate();
  if (train_set.size() == 0) throw DegenerateClassError("empty training set");
  const auto weights = cfg.class_weighted ? class_weights(train_set.labels) : std::array<double, kClasses>{1.0, 1.0};
  if (!cfg.class_weighted) class_weights(train_set.labels);

  TrainResult result;
  result.model = init_model(derive_seed(cfg.seed, 0));
  MiniCnn& m = result.model;
  MiniCnn velocity;  // zero-initialized
  Rng shuffle_rng(derive_seed(cfg.seed, 1));
  PlateauScheduler sched(cfg.lr, cfg.decay_factor, cfg.patience);

  const LabeledSet& monitor = val_set.size() > 0 ? val_set : train_set;
  MiniCnn best = m;
  result.best_val_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0, epoch_weight = 0.0;
    const float lr = static_cast<float>(sched.lr());
    const float mu = static_cast<float>(cfg.momentum);

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const float inv_batch = 1.0f / static_cast<float>(stop - start);
      MiniCnn grads;
      for (std::size_t i = start; i < stop; ++i) {
        const auto idx = order[i];
        const int y = train_set.labels[idx];
        const double w = weights[static_cast<std::size_t>(y)];
        const auto f = forward(m, train_set.images[idx]);
        epoch_loss += w * cross_entropy(f.logits, y);
        epoch_weight += w;
        const double p1 = softmax_positive(f.logits);
        std::array<float, kClasses> d{static_cast<float>(w * ((1.0 - p1) - (y == 0 ? 1.0 : 0.0))),
                                      static_cast<float>(w * (p1 - (y == 1 ? 1.0 : 0.0)))};
        for (auto& v : d) v *= inv_batch;
        backward(m, f, std::span<const float, kClasses>(d), grads);
      }
      // v <- mu * v + g; p <- p - lr * v
      auto step = [&](Tensor& p, Tensor& v, const Tensor& g) {
        for (std::size_t i = 0; i < p.size(); ++i) {
          v[i] = mu * v[i] + g[i];
          p[i] -= lr * v[i];
        }
      };
      step(m.conv1_w, velocity.conv1_w, grads.conv1_w);
      step(m.conv1_b, velocity.conv1_b, grads.conv1_b);
      step(m.conv2_w, velocity.conv2_w, grads.conv2_w);
      step(m.conv2_b, velocity.conv2_b, grads.conv2_b);
      step(m.fc_w, velocity.fc_w, grads.fc_w);
      step(m.fc_b, velocity.fc_b, grads.fc_b);
    }

    const double val_loss = dataset_loss(m, monitor, weights);
    if (!std::isfinite(val_loss)) throw InstabilityError("validation loss diverged at epoch " + std::to_string(epoch));
    result.history.push_back({epoch_weight > 0 ? epoch_loss / epoch_weight : 0.0, val_loss, sched.lr()});
    if (sched.step(val_loss)) {
      best = m;
      result.best_epoch = epoch;
      result.best_val_loss = val_loss;
    }
  }
  result.model = best;
  return result;
}

}  // namespace camstat::minicnn
