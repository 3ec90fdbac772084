#include <gtest/gtest.h>

#include "camstat/camstat.hpp"

using namespace camstat;

namespace {

std::vector<SyntheticSample> small_samples(std::uint64_t seed, std::size_t count = 36) {
  SyntheticConfig sc;
  sc.count = count;
  sc.size = 24;
  sc.min_radius = 3;
  sc.max_radius = 5;
  sc.seed = seed;
  return make_synthetic_dataset(sc);
}

ExperimentConfig quick_config() {
  ExperimentConfig cfg;
  cfg.bootstrap = 50;
  cfg.train.epochs = 4;
  cfg.seed = 11;
  cfg.overlays_per_scenario = 1;
  return cfg;
}

// Explanation tensors as an exporter would write them, from a fixed model.
Dataset with_bundles(Dataset ds, bool scores) {
  const auto model = minicnn::init_model(5);
  for (auto& s : ds.samples) {
    const auto f = minicnn::forward(model, s.image);
    ExplanationBundle e;
    e.acts = f.acts;
    e.grads = minicnn::activation_gradients(model, f, 1);
    e.score = minicnn::softmax_positive(f.logits);
    if (scores) e.scorecam_scores = std::vector<double>(f.acts.dim(0), 0.0);
    s.explanation = e;
  }
  return ds;
}

}  // namespace

TEST(Experiment, MiniModeShapesAndConsistency) {
  const auto ds = to_dataset(small_samples(1));
  const auto rep = run_experiment(ds, nullptr, quick_config());
  ASSERT_EQ(rep.scenarios.size(), 6u);
  ASSERT_EQ(rep.models.size(), 6u);
  ASSERT_EQ(rep.classification.size(), 7u);
  EXPECT_EQ(rep.classification.back().scenario, "mean");
  EXPECT_EQ(rep.model, "mini-cnn");
  // Each sample is tested twice, once per method.
  EXPECT_EQ(rep.ratios.size(), 2 * ds.samples.size() * 5);
  ASSERT_EQ(rep.explanation.size(), 5u);
  for (const auto& row : rep.explanation) {
    EXPECT_EQ(row.n, 2 * ds.samples.size());
    EXPECT_NEAR(row.difference.mean, row.activation.mean - row.structure.mean, 1e-9);
  }
  for (const auto& r : rep.ratios) EXPECT_NEAR(r.ratio.difference, r.ratio.activation_ratio - r.ratio.structure_ratio, 1e-9);
  ASSERT_EQ(rep.correlation.size(), 1u);
  EXPECT_EQ(rep.correlation[0].points, 30u);
  EXPECT_EQ(rep.overlays.size(), 6u * 5u);

  double mean = 0.0;
  for (std::size_t k = 0; k < 6; ++k) mean += *rep.classification[k].metrics.auroc.value / 6.0;
  EXPECT_NEAR(*rep.classification[6].metrics.auroc.value, mean, 1e-12);
}

TEST(Experiment, TablesRecomputableFromPersistedCsv) {
  const auto rep = run_experiment(to_dataset(small_samples(2)), nullptr, quick_config());
  const auto ratios = parse_ratios_csv(ratios_csv(rep.ratios), "ratios");
  std::string model;
  const auto scen = parse_scenarios_from_classification(classification_csv(rep.classification), "cls", &model);
  EXPECT_EQ(model, "mini-cnn");
  EXPECT_EQ(explanation_csv(explanation_table(ratios, model)), explanation_csv(rep.explanation));
  EXPECT_EQ(correlation_csv(correlation_table(ratios, scen, model)), correlation_csv(rep.correlation));
}

TEST(Experiment, Deterministic) {
  const auto ds = to_dataset(small_samples(3));
  auto cfg = quick_config();
  cfg.methods = {CamMethod::grad_cam};
  const auto a = run_experiment(ds, nullptr, cfg), b = run_experiment(ds, nullptr, cfg);
  EXPECT_EQ(classification_csv(a.classification), classification_csv(b.classification));
  EXPECT_EQ(ratios_csv(a.ratios), ratios_csv(b.ratios));
  for (std::size_t i = 0; i < a.overlays.size(); ++i) EXPECT_EQ(a.overlays[i].bytes, b.overlays[i].bytes);
}

TEST(Experiment, ExternalSectionAdded) {
  auto cfg = quick_config();
  cfg.methods = {CamMethod::grad_cam, CamMethod::eigen_cam};
  const auto internal = to_dataset(small_samples(4));
  const auto external = to_dataset(small_samples(5, 20), "other");
  const auto rep = run_experiment(internal, &external, cfg);
  ASSERT_EQ(rep.scenarios.size(), 12u);
  ASSERT_EQ(rep.classification.size(), 14u);
  EXPECT_EQ(rep.classification.back().evaluation, "external");
  std::size_t external_rows = 0;
  for (const auto& r : rep.ratios) external_rows += r.evaluation == "external";
  EXPECT_EQ(external_rows, 6u * 10u * 2u);
  EXPECT_EQ(rep.explanation.size(), 4u);
}

TEST(Experiment, BundleMode) {
  auto cfg = quick_config();
  cfg.mode = ExplainMode::bundle;
  const auto ds = with_bundles(to_dataset(small_samples(6)), true);
  const auto rep = run_experiment(ds, nullptr, cfg);
  EXPECT_TRUE(rep.models.empty());
  EXPECT_EQ(rep.model, "exported");
  EXPECT_EQ(rep.ratios.size(), 2 * ds.samples.size() * 5);
}

TEST(Experiment, BundleModeScoreCamWithoutScoresIsConfigError) {
  auto cfg = quick_config();
  cfg.mode = ExplainMode::bundle;
  const auto ds = with_bundles(to_dataset(small_samples(6)), false);
  EXPECT_THROW(run_experiment(ds, nullptr, cfg), ConfigError);
  cfg.methods = {CamMethod::grad_cam};
  EXPECT_NO_THROW(run_experiment(ds, nullptr, cfg));
}

TEST(Experiment, ConfigAndDataErrors) {
  const auto ds = to_dataset(small_samples(7));
  auto cfg = quick_config();
  cfg.fraction = 0.0;
  EXPECT_THROW(run_experiment(ds, nullptr, cfg), ConfigError);
  cfg = quick_config();
  cfg.bootstrap = 1;
  EXPECT_THROW(run_experiment(ds, nullptr, cfg), ConfigError);
  cfg = quick_config();
  auto odd = ds;
  odd.samples[0].image = Tensor({1, 10, 10});
  EXPECT_THROW(run_experiment(odd, nullptr, cfg), DimensionError);
  auto few = to_dataset(small_samples(8, 4));
  EXPECT_THROW(run_experiment(few, nullptr, cfg), DegenerateSplitError);
}

TEST(Experiment, CheckpointsReloaded) {
  const auto dir = std::filesystem::temp_directory_path() / "camstat_ckpt_reload";
  std::filesystem::remove_all(dir);
  const auto ds = to_dataset(small_samples(9));
  auto cfg = quick_config();
  cfg.methods = {CamMethod::grad_cam};
  const auto first = run_experiment(ds, nullptr, cfg);
  write_report(first, dir, {false, false, false, false, false, true});
  cfg.checkpoint_dir = dir / "models";
  cfg.train.epochs = 1;  // ignored when checkpoints exist
  const auto second = run_experiment(ds, nullptr, cfg);
  EXPECT_EQ(ratios_csv(first.ratios), ratios_csv(second.ratios));
  std::filesystem::remove_all(dir);
}
