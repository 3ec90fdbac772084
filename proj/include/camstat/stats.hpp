#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "camstat/error.hpp"
#include "camstat/random.hpp"

namespace camstat::stats {

struct TestResult {
  double statistic = 0.0;
  double df = 0.0;
  double p_value = 1.0;  // two-sided
};

/// Two equal-length samples of finite values.
struct PairedSamples {
  std::vector<double> x;
  std::vector<double> y;

  PairedSamples(std::vector<double> xs, std::vector<double> ys) : x(std::move(xs)), y(std::move(ys)) {
    if (x.size() != y.size()) {
      throw DimensionError("paired samples differ in length: " + std::to_string(x.size()) + " vs " +
                           std::to_string(y.size()));
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (!std::isfinite(x[i]) || !std::isfinite(y[i])) {
        throw DataError("paired samples contain a non-finite value at index " + std::to_string(i));
      }
    }
  }
  std::size_t size() const { return x.size(); }
};

// ---------------------------------------------------------------------------
// Descriptive helpers

inline double mean(std::span<const double> v) {
  if (v.empty()) throw ParameterError("mean of an empty sample");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) throw ParameterError("standard deviation needs at least two values");
  // Welford; exact zero for constant input.
  double m = 0.0, ss = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double d = v[k] - m;
    m += d / static_cast<double>(k + 1);
    ss += d * (v[k] - m);
  }
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

/// Analytic standard error of the mean, sd / sqrt(n).
inline double standard_error(std::span<const double> v) {
  return sample_sd(v) / std::sqrt(static_cast<double>(v.size()));
}

// ---------------------------------------------------------------------------
// Student t tail

namespace detail {

// Continued fraction for the incomplete beta function (modified Lentz).
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw InstabilityError("incomplete beta continued fraction did not converge");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw ParameterError("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                           b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// Two-sided tail probability 2 * P(T >= |t|) of Student's t with df degrees.
inline double t_sf(double t, double df) {
  if (!(df >= 1.0)) throw ParameterError("t distribution needs df >= 1, got " + std::to_string(df));
  if (std::isnan(t)) throw ParameterError("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const double x = df / (df + t * t);
  return std::clamp(incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Tests

/// Paired-sample t-test on d = x - y.
inline TestResult paired_t_test(const PairedSamples& s) {
  const std::size_t n = s.size();
  if (n < 2) throw ParameterError("paired t-test needs at least two pairs");
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = s.x[i] - s.y[i];
  const double sd = sample_sd(d);
  if (sd == 0.0) throw DegenerateVarianceError("paired differences have zero variance");
  const double t = mean(d) * std::sqrt(static_cast<double>(n)) / sd;
  const double df = static_cast<double>(n - 1);
  return {t, df, t_sf(t, df)};
}

/// Pearson's r with the t-approximation for significance (df = n - 2).
inline TestResult pearson(const PairedSamples& s) {
  const std::size_t n = s.size();
  if (n < 3) throw ParameterError("correlation needs at least three pairs");
  const double mx = mean(s.x), my = mean(s.y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = s.x[i] - mx, dy = s.y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateVarianceError("correlation of a constant sample");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(n - 2);
  if (std::abs(r) == 1.0) return {r, df, 0.0};
  const double t = r * std::sqrt(df / (1.0 - r * r));
  return {r, df, t_sf(t, df)};
}

/// 1-based ranks; tied values share the mean of their positions.
inline std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman's rho: Pearson on average ranks.
inline TestResult spearman(const PairedSamples& s) {
  if (s.size() < 3) throw ParameterError("correlation needs at least three pairs");
  return pearson(PairedSamples(average_ranks(s.x), average_ranks(s.y)));
}

// ---------------------------------------------------------------------------
// Classification metrics

namespace detail {

inline void check_labels(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DimensionError("scores and labels differ in length: " + std::to_string(scores.size()) +
                         " vs " + std::to_string(labels.size()));
  }
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
  }
}

inline std::size_t count_positive(std::span<const int> labels) {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
}

inline void require_both_classes(std::span<const int> labels, const char* what) {
  const std::size_t pos = count_positive(labels);
  if (pos == 0 || pos == labels.size()) {
    throw DegenerateClassError(std::string(what) + " needs both classes present");
  }
}

}  // namespace detail

/// Mann-Whitney estimate: share of (positive, negative) pairs ranked
/// correctly, ties counting one half. Computed from mid-ranks.
inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_labels(scores, labels);
  detail::require_both_classes(labels, "AUROC");
  const auto ranks = average_ranks(scores);
  const double P = static_cast<double>(detail::count_positive(labels));
  const double N = static_cast<double>(labels.size()) - P;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) rank_sum += ranks[i];
  }
  return (rank_sum - P * (P + 1.0) / 2.0) / (P * N);
}

/// Average precision over the descending ranking (ties by original index).
inline double auprc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_labels(scores, labels);
  const std::size_t P = detail::count_positive(labels);
  if (P == 0) throw DegenerateClassError("AUPRC needs at least one positive");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  std::size_t tp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == 1) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(k + 1);
    }
  }
  return ap / static_cast<double>(P);
}

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

/// A ratio with a zero denominator is left empty.
struct ConfusionMetrics {
  ConfusionCounts counts;
  std::optional<double> accuracy, sensitivity, specificity, ppv, npv;
};

inline std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

inline ConfusionCounts confusion_counts(std::span<const double> scores, std::span<const int> labels,
                                        double tau) {
  detail::check_labels(scores, labels);
  ConfusionCounts c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= tau;
    if (labels[i] == 1) (pred ? c.tp : c.fn)++;
    else (pred ? c.fp : c.tn)++;
  }
  return c;
}

/// Predict positive iff score >= tau.
inline ConfusionMetrics confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                                          double tau) {
  detail::check_labels(scores, labels);
  detail::require_both_classes(labels, "confusion metrics");
  ConfusionMetrics m;
  m.counts = confusion_counts(scores, labels, tau);
  const auto& c = m.counts;
  m.accuracy = ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  m.ppv = ratio(c.tp, c.tp + c.fp);
  m.npv = ratio(c.tn, c.tn + c.fn);
  return m;
}

enum class ThresholdCriterion { youden, accuracy };

struct ThresholdReport {
  double tau = 0.0;
  double criterion_value = 0.0;
};

/// Scans the distinct scores as candidate thresholds and keeps the best
/// criterion value; ties go to the smallest threshold.
inline ThresholdReport select_threshold(std::span<const double> scores, std::span<const int> labels,
                                        ThresholdCriterion criterion = ThresholdCriterion::youden) {
  detail::check_labels(scores, labels);
  detail::require_both_classes(labels, "threshold selection");
  std::vector<double> candidates(scores.begin(), scores.end());
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  ThresholdReport best{candidates.front(), -std::numeric_limits<double>::infinity()};
  for (double tau : candidates) {
    const auto c = confusion_counts(scores, labels, tau);
    double value = 0.0;
    if (criterion == ThresholdCriterion::youden) {
      value = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) +
              static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp) - 1.0;
    } else {
      value = static_cast<double>(c.tp + c.tn) / static_cast<double>(scores.size());
    }
    if (value > best.criterion_value) best = {tau, value};
  }
  return best;
}

// ---------------------------------------------------------------------------
// Bootstrap

using MetricFn = std::function<double(std::span<const double>, std::span<const int>)>;

struct BootstrapOptions {
  std::size_t resamples = 1000;
  std::uint64_t seed = 0;
};

/// Standard error of `metric` over resamples with replacement of the
/// (score, label) pairs. Resample b draws from its own stream derived from
/// (seed, b); a resample on which the metric throws DegenerateClassError is
/// redrawn, with at most 10 * B redraws in total.
inline double bootstrap_se(const MetricFn& metric, std::span<const double> scores,
                           std::span<const int> labels, BootstrapOptions opt) {
  detail::check_labels(scores, labels);
  if (opt.resamples < 2) throw ParameterError("bootstrap needs at least two resamples");
  if (scores.empty()) throw ParameterError("bootstrap of an empty sample");
  const std::size_t n = scores.size();
  const std::size_t budget = 10 * opt.resamples;
  std::size_t redraws = 0;

  std::vector<double> values(opt.resamples);
  std::vector<double> rs(n);
  std::vector<int> rl(n);
  for (std::size_t b = 0; b < opt.resamples; ++b) {
    Rng rng(derive_seed(opt.seed, b));
    for (;;) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto j = rng.index(n);
        rs[i] = scores[j];
        rl[i] = labels[j];
      }
      try {
        values[b] = metric(rs, rl);
        break;
      } catch (const DegenerateClassError&) {
        if (++redraws > budget) {
          throw InstabilityError("bootstrap redraw budget of " + std::to_string(budget) +
                                 " exhausted by degenerate resamples");
        }
      }
    }
  }
  return sample_sd(values);
}

/// Metric value plus bootstrap standard error; either may be absent.
struct Estimate {
  std::optional<double> value;
  std::optional<double> se;
};

struct MetricsReport {
  Estimate auroc, auprc, accuracy, sensitivity, specificity, ppv, npv;
};

// Wraps an optional-valued metric so an undefined value counts as a
// degenerate resample.
template <typename F>
MetricFn defined_or_redraw(F f) {
  return [f](std::span<const double> s, std::span<const int> l) {
    const std::optional<double> v = f(s, l);
    if (!v) throw DegenerateClassError("metric undefined on resample");
    return *v;
  };
}

/// The seven classification metrics on a test set at threshold tau, each
/// with a bootstrap SE. A metric whose bootstrap cannot complete keeps its
/// value and leaves the SE empty.
inline MetricsReport evaluate_classification(std::span<const double> scores, std::span<const int> labels,
                                             double tau, BootstrapOptions opt) {
  MetricsReport rep;
  auto run = [&](Estimate& e, std::optional<double> value, const MetricFn& fn, std::uint64_t salt) {
    e.value = value;
    if (!value) return;
    try {
      e.se = bootstrap_se(fn, scores, labels, {opt.resamples, derive_seed(opt.seed, salt)});
    } catch (const InstabilityError&) {
      e.se.reset();
    }
  };
  const auto cm = confusion_metrics(scores, labels, tau);
  auto confusion_field = [tau](std::optional<double> ConfusionMetrics::*field) {
    return defined_or_redraw([tau, field](std::span<const double> s, std::span<const int> l) {
      return confusion_metrics(s, l, tau).*field;
    });
  };
  run(rep.auroc, auroc(scores, labels), [](auto s, auto l) { return auroc(s, l); }, 1);
  run(rep.auprc, auprc(scores, labels), [](auto s, auto l) { return auprc(s, l); }, 2);
  run(rep.accuracy, cm.accuracy, confusion_field(&ConfusionMetrics::accuracy), 3);
  run(rep.sensitivity, cm.sensitivity, confusion_field(&ConfusionMetrics::sensitivity), 4);
  run(rep.specificity, cm.specificity, confusion_field(&ConfusionMetrics::specificity), 5);
  run(rep.ppv, cm.ppv, confusion_field(&ConfusionMetrics::ppv), 6);
  run(rep.npv, cm.npv, confusion_field(&ConfusionMetrics::npv), 7);
  return rep;
}

}  // namespace camstat::stats
