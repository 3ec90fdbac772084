#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "camstat/cam.hpp"
#include "camstat/error.hpp"
#include "camstat/focus.hpp"
#include "camstat/manifest.hpp"
#include "camstat/minicnn.hpp"
#include "camstat/overlay.hpp"
#include "camstat/random.hpp"
#include "camstat/splits.hpp"
#include "camstat/stats.hpp"
#include "camstat/train.hpp"

namespace camstat {

enum class ExplainMode { mini, bundle };
enum class TargetPolicy { predicted, label };

inline constexpr const char* kInternal = "internal";
inline constexpr const char* kExternal = "external";
inline constexpr const char* kMiniCnnName = "mini-cnn";

struct ExperimentConfig {
  ExplainMode mode = ExplainMode::mini;
  std::vector<CamMethod> methods{std::begin(kAllCamMethods), std::end(kAllCamMethods)};
  double fraction = kDefaultFocusFraction;
  TargetPolicy target = TargetPolicy::predicted;
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 0;
  stats::ThresholdCriterion criterion = stats::ThresholdCriterion::youden;
  minicnn::TrainConfig train;  // its seed is replaced per scenario
  std::size_t overlays_per_scenario = 2;
  bool explain = true;
  std::optional<std::filesystem::path> checkpoint_dir;  // model_s<k>.camb loaded when present
  std::function<void(const std::string&)> log;
};

struct ScenarioSummary {
  std::string evaluation;
  int scenario = 0;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  double tau = 0.0;
  double criterion_value = 0.0;
  int best_epoch = 0;
  stats::MetricsReport metrics;
};

struct RatioRow {
  std::string evaluation;
  int scenario = 0;
  std::string sample_id;
  int label = 0;
  int target_class = 0;
  CamMethod method = CamMethod::grad_cam;
  std::string anatomy;
  RatioRecord ratio;
};

struct ClassificationRow {
  std::string evaluation;
  std::string model;
  std::string scenario;  // "1".."6" or "mean"
  std::optional<double> tau;
  stats::MetricsReport metrics;
};

struct MeanSe {
  double mean = 0.0;
  std::optional<double> se;
};

struct ExplanationRow {
  std::string evaluation;
  std::string model;
  CamMethod method = CamMethod::grad_cam;
  std::string anatomy;
  std::size_t n = 0;
  MeanSe activation, structure, difference;
  std::optional<stats::TestResult> t_test;
};

struct CorrelationRow {
  std::string evaluation;
  std::string model;
  std::string anatomy;
  std::size_t points = 0;
  std::optional<stats::TestResult> pearson, spearman;
};

struct Artifact {
  std::string relative_path;
  std::vector<std::uint8_t> bytes;
};

struct ExperimentReport {
  std::string model;
  std::vector<SplitScenario> splits;
  std::vector<std::string> sample_ids;
  std::vector<ScenarioSummary> scenarios;
  std::vector<RatioRow> ratios;
  std::vector<ClassificationRow> classification;
  std::vector<ExplanationRow> explanation;
  std::vector<CorrelationRow> correlation;
  std::vector<Artifact> overlays;
  std::vector<std::pair<int, minicnn::MiniCnn>> models;
};

// ---------------------------------------------------------------------------
// Table aggregation; pure functions of the per-sample and per-scenario rows.

namespace detail {

inline int evaluation_rank(const std::string& e) { return e == kInternal ? 0 : e == kExternal ? 1 : 2; }

inline MeanSe mean_se(const std::vector<double>& v) {
  MeanSe out{stats::mean(v), std::nullopt};
  if (v.size() >= 2) out.se = stats::standard_error(v);
  return out;
}

template <typename F>
std::optional<stats::TestResult> try_test(F&& f) {
  try {
    return f();
  } catch (const DegenerateVarianceError&) {
    return std::nullopt;
  } catch (const ParameterError&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Per-scenario metric rows plus one "mean" row per evaluation whose value
/// is the mean over scenarios and whose SE is the analytic SE across them.
inline std::vector<ClassificationRow> classification_table(const std::vector<ScenarioSummary>& scenarios,
                                                           const std::string& model) {
  std::vector<ClassificationRow> rows;
  std::vector<std::string> evaluations;
  for (const auto& s : scenarios) {
    if (std::find(evaluations.begin(), evaluations.end(), s.evaluation) == evaluations.end()) {
      evaluations.push_back(s.evaluation);
    }
  }
  std::stable_sort(evaluations.begin(), evaluations.end(), [](const auto& a, const auto& b) {
    return detail::evaluation_rank(a) < detail::evaluation_rank(b);
  });
  using Field = stats::Estimate stats::MetricsReport::*;
  static constexpr Field kFields[] = {&stats::MetricsReport::auroc,       &stats::MetricsReport::auprc,
                                      &stats::MetricsReport::accuracy,    &stats::MetricsReport::sensitivity,
                                      &stats::MetricsReport::specificity, &stats::MetricsReport::ppv,
                                      &stats::MetricsReport::npv};
  for (const auto& ev : evaluations) {
    std::vector<const ScenarioSummary*> group;
    for (const auto& s : scenarios) {
      if (s.evaluation == ev) group.push_back(&s);
    }
    for (const auto* s : group) rows.push_back({ev, model, std::to_string(s->scenario), s->tau, s->metrics});
    ClassificationRow mean_row{ev, model, "mean", std::nullopt, {}};
    for (Field f : kFields) {
      std::vector<double> values;
      for (const auto* s : group) {
        if ((s->metrics.*f).value) values.push_back(*(s->metrics.*f).value);
      }
      if (values.empty()) continue;
      auto ms = detail::mean_se(values);
      (mean_row.metrics.*f).value = ms.mean;
      (mean_row.metrics.*f).se = ms.se;
    }
    rows.push_back(std::move(mean_row));
  }
  return rows;
}

/// Ratio means with analytic SE and the paired t-test of activation ratio
/// against structure ratio, pooled over all scenarios of an evaluation.
inline std::vector<ExplanationRow> explanation_table(const std::vector<RatioRow>& ratios, const std::string& model) {
  using Key = std::tuple<int, std::string, int, std::string>;
  std::map<Key, std::vector<const RatioRow*>> groups;
  for (const auto& r : ratios) {
    groups[{detail::evaluation_rank(r.evaluation), r.evaluation, static_cast<int>(r.method), r.anatomy}].push_back(&r);
  }
  std::vector<ExplanationRow> rows;
  for (const auto& [key, members] : groups) {
    std::vector<double> act, str, diff;
    for (const auto* r : members) {
      act.push_back(r->ratio.activation_ratio);
      str.push_back(r->ratio.structure_ratio);
      diff.push_back(r->ratio.difference);
    }
    ExplanationRow row;
    row.evaluation = std::get<1>(key);
    row.model = model;
    row.method = static_cast<CamMethod>(std::get<2>(key));
    row.anatomy = std::get<3>(key);
    row.n = members.size();
    row.activation = detail::mean_se(act);
    row.structure = detail::mean_se(str);
    row.difference = detail::mean_se(diff);
    row.t_test = detail::try_test([&] { return stats::paired_t_test(stats::PairedSamples(act, str)); });
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Pearson and Spearman between scenario AUROC and the scenario's mean
/// activation ratio; one point per (scenario, CAM method).
inline std::vector<CorrelationRow> correlation_table(const std::vector<RatioRow>& ratios,
                                                     const std::vector<ScenarioSummary>& scenarios,
                                                     const std::string& model) {
  std::map<std::pair<std::string, int>, double> auroc_of;
  for (const auto& s : scenarios) {
    if (s.metrics.auroc.value) auroc_of[{s.evaluation, s.scenario}] = *s.metrics.auroc.value;
  }
  using PointKey = std::tuple<int, std::string, std::string, int, int>;  // eval rank, eval, anatomy, scenario, method
  std::map<PointKey, std::pair<double, std::size_t>> sums;
  for (const auto& r : ratios) {
    auto& acc = sums[{detail::evaluation_rank(r.evaluation), r.evaluation, r.anatomy, r.scenario,
                      static_cast<int>(r.method)}];
    acc.first += r.ratio.activation_ratio;
    acc.second += 1;
  }
  using GroupKey = std::tuple<int, std::string, std::string>;
  std::map<GroupKey, std::pair<std::vector<double>, std::vector<double>>> points;
  for (const auto& [key, acc] : sums) {
    const auto& [rank, ev, anatomy, scenario, method] = key;
    auto it = auroc_of.find({ev, scenario});
    if (it == auroc_of.end()) continue;
    auto& p = points[{rank, ev, anatomy}];
    p.first.push_back(it->second);
    p.second.push_back(acc.first / static_cast<double>(acc.second));
  }
  std::vector<CorrelationRow> rows;
  for (const auto& [key, xy] : points) {
    CorrelationRow row{std::get<1>(key), model, std::get<2>(key), xy.first.size(), std::nullopt, std::nullopt};
    row.pearson = detail::try_test([&] { return stats::pearson(stats::PairedSamples(xy.first, xy.second)); });
    row.spearman = detail::try_test([&] { return stats::spearman(stats::PairedSamples(xy.first, xy.second)); });
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Per-sample explanation

struct SampleExplanation {
  int predicted = 0;
  int target = 0;
  std::vector<std::pair<CamMethod, SaliencyMap>> maps;
};

inline int resolve_target(TargetPolicy policy, int predicted, int label) {
  return policy == TargetPolicy::predicted ? predicted : label;
}

/// All requested CAMs for one image under the mini-CNN.
inline SampleExplanation explain_with_model(const minicnn::MiniCnn& model, const SampleRecord& s,
                                            const ExperimentConfig& cfg) {
  SampleExplanation out;
  const auto f = minicnn::forward(model, s.image);
  out.predicted = minicnn::predicted_class(f.logits);
  out.target = resolve_target(cfg.target, out.predicted, s.label);
  const LayerActivations acts(f.acts);
  const Extent ext = s.extent();
  std::optional<LayerGradients> grads;
  const minicnn::MiniCnnOracle oracle(model);
  for (CamMethod m : cfg.methods) {
    if (needs_gradients(m) && !grads) grads.emplace(minicnn::activation_gradients(model, f, out.target));
    switch (m) {
      case CamMethod::grad_cam: out.maps.emplace_back(m, grad_cam(acts, *grads, ext)); break;
      case CamMethod::xgrad_cam: out.maps.emplace_back(m, xgrad_cam(acts, *grads, ext)); break;
      case CamMethod::layer_cam: out.maps.emplace_back(m, layer_cam(acts, *grads, ext)); break;
      case CamMethod::eigen_cam: out.maps.emplace_back(m, eigen_cam(acts, ext)); break;
      case CamMethod::score_cam: out.maps.emplace_back(m, score_cam(acts, s.image, out.target, &oracle)); break;
    }
  }
  return out;
}

/// All requested CAMs for one sample from its exported tensors. The target
/// class was fixed by the exporter; `predicted` is derived from the score.
inline SampleExplanation explain_from_bundle(const SampleRecord& s, const ExperimentConfig& cfg) {
  const auto& e = *s.explanation;
  SampleExplanation out;
  out.predicted = e.score >= 0.5 ? 1 : 0;
  out.target = resolve_target(cfg.target, out.predicted, s.label);
  const LayerActivations acts(e.acts);
  const Extent ext = s.extent();
  std::optional<LayerGradients> grads;
  if (e.grads) grads.emplace(*e.grads);
  std::optional<ScoreTable> table;
  if (e.scorecam_scores) table = ScoreTable{*e.scorecam_scores};
  for (CamMethod m : cfg.methods) {
    switch (m) {
      case CamMethod::grad_cam: out.maps.emplace_back(m, grad_cam(acts, *grads, ext)); break;
      case CamMethod::xgrad_cam: out.maps.emplace_back(m, xgrad_cam(acts, *grads, ext)); break;
      case CamMethod::layer_cam: out.maps.emplace_back(m, layer_cam(acts, *grads, ext)); break;
      case CamMethod::eigen_cam: out.maps.emplace_back(m, eigen_cam(acts, ext)); break;
      case CamMethod::score_cam: out.maps.emplace_back(m, score_cam(acts, ext, table ? &*table : nullptr)); break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Orchestration

namespace detail {

inline void log(const ExperimentConfig& cfg, const std::string& msg) {
  if (cfg.log) cfg.log(msg);
}

inline std::string sanitize(const std::string& s) {
  std::string out = s;
  for (auto& ch : out) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '-' ||
                    ch == '_' || ch == '.';
    if (!ok) ch = '_';
  }
  return out;
}

inline void validate_dataset(const Dataset& ds, const ExperimentConfig& cfg, const char* which) {
  if (cfg.methods.empty() && cfg.explain) throw ConfigError("no CAM method selected");
  for (const auto& s : ds.samples) {
    const std::string where = std::string(which) + " sample '" + s.id + "'";
    if (cfg.mode == ExplainMode::mini) {
      try {
        (void)minicnn::as_network_input(s.image);
      } catch (const DimensionError& e) {
        throw DimensionError(where + ": " + e.what());
      }
      continue;
    }
    if (!s.explanation) throw ConfigError(where + ": bundle mode needs an explanation bundle for every sample");
    if (!cfg.explain) continue;
    for (CamMethod m : cfg.methods) {
      if (needs_gradients(m) && !s.explanation->grads) {
        throw ConfigError(where + ": " + std::string(to_string(m)) + " needs 'grads' in the bundle");
      }
      if (m == CamMethod::score_cam && !s.explanation->scorecam_scores) {
        throw ConfigError(where + ": score-cam requested but the bundle has no 'scorecam_scores' and bundle mode "
                                  "has no model to query");
      }
    }
  }
}

inline minicnn::LabeledSet gather(const Dataset& ds, const std::vector<std::size_t>& idx) {
  minicnn::LabeledSet set;
  for (auto i : idx) {
    set.images.push_back(ds.samples[i].image);
    set.labels.push_back(ds.samples[i].label);
  }
  return set;
}

struct Scorer {
  const minicnn::MiniCnn* model = nullptr;  // null in bundle mode

  std::vector<double> scores(const Dataset& ds, const std::vector<std::size_t>& idx) const {
    std::vector<double> out;
    for (auto i : idx) {
      const auto& s = ds.samples[i];
      out.push_back(model ? minicnn::predict_proba(*model, s.image) : s.explanation->score);
    }
    return out;
  }
};

inline std::vector<int> labels_of(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  for (auto i : idx) out.push_back(ds.samples[i].label);
  return out;
}

// Threshold on the validation indices, metrics on the test indices, then
// explanations of every test sample.
inline void evaluate(const Dataset& ds, const std::vector<std::size_t>& val, const std::vector<std::size_t>& test,
                     const Scorer& scorer, const std::string& evaluation, int scenario, std::uint64_t stream,
                     const ExperimentConfig& cfg, ScenarioSummary& summary, ExperimentReport& report) {
  const auto val_scores = scorer.scores(ds, val);
  const auto val_labels = labels_of(ds, val);
  const auto thr = stats::select_threshold(val_scores, val_labels, cfg.criterion);
  summary.tau = thr.tau;
  summary.criterion_value = thr.criterion_value;
  summary.n_val = val.size();
  summary.n_test = test.size();

  const auto test_scores = scorer.scores(ds, test);
  const auto test_labels = labels_of(ds, test);
  summary.metrics = stats::evaluate_classification(test_scores, test_labels, thr.tau,
                                                   {cfg.bootstrap, derive_seed(cfg.seed, stream)});
  log(cfg, evaluation + " scenario " + std::to_string(scenario) + ": tau " + std::to_string(thr.tau) + ", AUROC " +
               std::to_string(*summary.metrics.auroc.value));
  if (!cfg.explain) return;

  std::size_t rendered = 0;
  for (auto i : test) {
    const auto& s = ds.samples[i];
    const auto ex = scorer.model ? explain_with_model(*scorer.model, s, cfg) : explain_from_bundle(s, cfg);
    const bool overlay = rendered < cfg.overlays_per_scenario;
    rendered += overlay;
    for (const auto& [method, map] : ex.maps) {
      const FocusRegion region = top_fraction_region(map, cfg.fraction);
      for (const auto& [anatomy, mask] : s.masks) {
        report.ratios.push_back(
            {evaluation, scenario, s.id, s.label, ex.target, method, anatomy, compare_region(region, mask)});
        if (overlay) {
          report.overlays.push_back({"overlays/" + evaluation + "_s" + std::to_string(scenario) + "_" +
                                         sanitize(s.id) + "_" + std::string(to_string(method)) + "_" +
                                         sanitize(anatomy) + ".ppm",
                                     encode_overlay(s.image, map, mask, cfg.fraction)});
        }
      }
    }
  }
}

}  // namespace detail

inline std::filesystem::path checkpoint_name(int scenario) {
  return "model_s" + std::to_string(scenario) + ".camb";
}

/// Runs the full double cross-validation: for each of the six scenarios a
/// model is trained (or loaded), thresholded on validation, scored on test
/// and explained; an optional external dataset is evaluated with every
/// scenario model on its own 50:50 validation/test split.
inline ExperimentReport run_experiment(const Dataset& internal, const Dataset* external, const ExperimentConfig& cfg) {
  if (!(cfg.fraction > 0.0 && cfg.fraction <= 1.0)) throw ConfigError("focus fraction must lie in (0, 1]");
  if (cfg.bootstrap < 2) throw ConfigError("bootstrap needs at least two resamples");
  cfg.train.validate();
  detail::validate_dataset(internal, cfg, kInternal);
  if (external) detail::validate_dataset(*external, cfg, kExternal);

  ExperimentReport report;
  report.model = cfg.mode == ExplainMode::mini ? kMiniCnnName : internal.model.value_or("exported");
  for (const auto& s : internal.samples) report.sample_ids.push_back(s.id);
  const auto labels = internal.labels();
  report.splits = make_splits(labels, cfg.seed);
  std::optional<ExternalSplit> ext_split;
  if (external) ext_split = make_external_split(external->labels(), derive_seed(cfg.seed, 300));

  for (const auto& split : report.splits) {
    const int k = split.index;
    ScenarioSummary summary;
    summary.evaluation = kInternal;
    summary.scenario = k;
    summary.n_train = split.train.size();

    std::optional<minicnn::MiniCnn> model;
    if (cfg.mode == ExplainMode::mini) {
      std::filesystem::path ckpt;
      if (cfg.checkpoint_dir) ckpt = *cfg.checkpoint_dir / checkpoint_name(k);
      if (!ckpt.empty() && std::filesystem::exists(ckpt)) {
        model = minicnn::load_checkpoint(ckpt);
        detail::log(cfg, "scenario " + std::to_string(k) + ": loaded " + ckpt.string());
      } else {
        auto tc = cfg.train;
        tc.seed = derive_seed(cfg.seed, 100 + static_cast<std::uint64_t>(k));
        auto result = minicnn::train(detail::gather(internal, split.train), detail::gather(internal, split.val), tc);
        summary.best_epoch = result.best_epoch;
        detail::log(cfg, "scenario " + std::to_string(k) + ": trained, best epoch " +
                             std::to_string(result.best_epoch) + ", val loss " + std::to_string(result.best_val_loss));
        model = std::move(result.model);
      }
      report.models.emplace_back(k, *model);
    }
    const detail::Scorer scorer{model ? &*model : nullptr};

    try {
      detail::evaluate(internal, split.val, split.test, scorer, kInternal, k, 200 + static_cast<std::uint64_t>(k), cfg,
                       summary, report);
    } catch (const Error& e) {
      throw Error(e.kind(), "internal scenario " + std::to_string(k) + ": " + e.what());
    }
    report.scenarios.push_back(summary);

    if (external) {
      ScenarioSummary ext;
      ext.evaluation = kExternal;
      ext.scenario = k;
      ext.n_train = split.train.size();
      ext.best_epoch = summary.best_epoch;
      try {
        detail::evaluate(*external, ext_split->val, ext_split->test, scorer, kExternal, k,
                         400 + static_cast<std::uint64_t>(k), cfg, ext, report);
      } catch (const Error& e) {
        throw Error(e.kind(), "external scenario " + std::to_string(k) + ": " + e.what());
      }
      report.scenarios.push_back(ext);
    }
  }

  report.classification = classification_table(report.scenarios, report.model);
  if (cfg.explain) {
    report.explanation = explanation_table(report.ratios, report.model);
    report.correlation = correlation_table(report.ratios, report.scenarios, report.model);
  }
  return report;
}

}  // namespace camstat
