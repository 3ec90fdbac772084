// camstat: command line front end.
//
//   camstat synth   --out DIR [--count N --size S --seed U64]
//   camstat splits  --manifest PATH --out DIR [--seed U64]
//   camstat train   --manifest PATH --out DIR [--seed U64 --epochs N]
//   camstat explain --manifest PATH --out DIR [--mode ... --method ... --models DIR]
//   camstat stats   --out DIR [--ratios CSV --classification CSV]
//   camstat report  --manifest PATH --out DIR [all of the above]
//
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "camstat/camstat.hpp"

namespace fs = std::filesystem;
using namespace camstat;

namespace {

struct Options {
  std::string manifest;
  std::string external;
  std::string mode = "mini";
  std::vector<std::string> methods{"all"};
  double fraction = kDefaultFocusFraction;
  std::string target = "predicted";
  std::size_t bootstrap = 1000;
  std::uint64_t seed = 0;
  std::string out = "camstat_out";
  std::string models;
  std::string criterion = "youden";
  int epochs = 100;
  std::size_t batch_size = 1;
  std::size_t overlays = 2;
  bool quiet = false;

  // synth
  std::size_t count = 200;
  std::size_t size = 56;
  double contrast = 0.6;

  // stats
  std::string ratios;
  std::string classification;
};

void add_run_options(CLI::App* sub, Options& o, bool needs_manifest) {
  auto* m = sub->add_option("--manifest", o.manifest, "Dataset manifest (JSON)");
  if (needs_manifest) m->required();
  sub->add_option("--external", o.external, "External evaluation manifest (50:50 validation/test)");
  sub->add_option("--mode", o.mode, "Tensor source")->check(CLI::IsMember({"mini", "bundle"}));
  sub->add_option("--method", o.methods, "CAM method(s)")
      ->check(CLI::IsMember({"grad-cam", "xgrad-cam", "score-cam", "eigen-cam", "layer-cam", "all"}))
      ->delimiter(',');
  sub->add_option("--fraction", o.fraction, "Focus-region fraction of pixels")->check(CLI::Range(0.0, 1.0));
  sub->add_option("--target-class", o.target, "CAM target class")->check(CLI::IsMember({"predicted", "label"}));
  sub->add_option("--bootstrap", o.bootstrap, "Bootstrap resamples for metric SE");
  sub->add_option("--seed", o.seed, "Seed for splits, training and bootstrap");
  sub->add_option("--out", o.out, "Output directory");
  sub->add_option("--models", o.models, "Directory of model_s<k>.camb checkpoints to reuse");
  sub->add_option("--threshold-criterion", o.criterion, "Validation criterion for tau")
      ->check(CLI::IsMember({"youden", "accuracy"}));
  sub->add_option("--epochs", o.epochs, "Training epochs per scenario");
  sub->add_option("--batch-size", o.batch_size, "Training mini-batch size");
  sub->add_option("--overlays", o.overlays, "Overlay images per scenario (0 disables)");
  sub->add_flag("--quiet", o.quiet, "Suppress progress output");
}

ExperimentConfig make_config(const Options& o) {
  ExperimentConfig cfg;
  cfg.mode = o.mode == "bundle" ? ExplainMode::bundle : ExplainMode::mini;
  cfg.methods.clear();
  for (const auto& m : o.methods) {
    if (m == "all") {
      cfg.methods.assign(std::begin(kAllCamMethods), std::end(kAllCamMethods));
      break;
    }
    const auto parsed = parse_cam_method(m);
    if (std::find(cfg.methods.begin(), cfg.methods.end(), parsed) == cfg.methods.end()) cfg.methods.push_back(parsed);
  }
  cfg.fraction = o.fraction;
  cfg.target = o.target == "label" ? TargetPolicy::label : TargetPolicy::predicted;
  cfg.bootstrap = o.bootstrap;
  cfg.seed = o.seed;
  cfg.criterion = o.criterion == "accuracy" ? stats::ThresholdCriterion::accuracy : stats::ThresholdCriterion::youden;
  cfg.train.epochs = o.epochs;
  cfg.train.batch_size = o.batch_size;
  cfg.overlays_per_scenario = o.overlays;
  if (!o.models.empty()) cfg.checkpoint_dir = fs::path(o.models);
  if (!o.quiet) cfg.log = [](const std::string& msg) { std::cerr << msg << '\n'; };
  return cfg;
}

Dataset load(const std::string& path, bool quiet) {
  Dataset ds = load_manifest(path);
  for (const auto& w : ds.warnings) std::cerr << "warning: " << w << '\n';
  if (!quiet) std::cerr << ds.summary() << '\n';
  return ds;
}

int run_synth(const Options& o) {
  SyntheticConfig sc;
  sc.count = o.count;
  sc.size = o.size;
  sc.case_contrast = o.contrast;
  sc.seed = o.seed;
  const auto path = write_synthetic_dataset(o.out, make_synthetic_dataset(sc));
  std::cout << path.string() << '\n';
  return 0;
}

int run_splits(const Options& o) {
  const Dataset ds = load(o.manifest, o.quiet);
  const auto labels = ds.labels();
  const auto splits = make_splits(labels, o.seed);
  std::vector<std::string> ids;
  for (const auto& s : ds.samples) ids.push_back(s.id);
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "splits.csv", splits_csv(splits, ids));
  const auto part = partition_three(labels, o.seed);
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t cases = 0;
    for (auto i : part.subsets[k]) cases += labels[i] == 1;
    std::cout << "subset " << k + 1 << ": " << cases << " case / " << part.subsets[k].size() - cases << " control\n";
  }
  return 0;
}

int run_pipeline(const Options& o, const std::string& command) {
  ExperimentConfig cfg = make_config(o);
  if (command == "train") {
    if (cfg.mode != ExplainMode::mini) throw ConfigError("train works in mini mode only");
    cfg.explain = false;
  }
  if (command == "explain" && !cfg.checkpoint_dir && fs::exists(fs::path(o.out) / "models")) {
    cfg.checkpoint_dir = fs::path(o.out) / "models";
  }
  const Dataset internal = load(o.manifest, o.quiet);
  std::optional<Dataset> external;
  if (!o.external.empty()) external = load(o.external, o.quiet);
  const auto rep = run_experiment(internal, external ? &*external : nullptr, cfg);

  OutputSelection sel;
  if (command == "train") {
    sel = {true, true, false, false, false, true};
  } else if (command == "explain") {
    sel = {true, true, false, true, true, false};
  } else {
    sel.checkpoints = cfg.mode == ExplainMode::mini;
  }
  write_report(rep, o.out, sel);
  if (!o.quiet) std::cerr << "wrote " << o.out << '\n';
  return 0;
}

int run_stats(const Options& o) {
  const fs::path dir = o.out;
  const fs::path ratios_path = o.ratios.empty() ? dir / "per_sample_ratios.csv" : fs::path(o.ratios);
  const fs::path class_path = o.classification.empty() ? dir / "classification.csv" : fs::path(o.classification);
  if (!fs::exists(ratios_path)) throw ConfigError("missing per-sample ratios '" + ratios_path.string() + "'");
  const auto ratios = parse_ratios_csv(read_text(ratios_path), ratios_path.string());
  std::string model = "unknown";
  std::vector<ScenarioSummary> scenarios;
  if (fs::exists(class_path)) {
    scenarios = parse_scenarios_from_classification(read_text(class_path), class_path.string(), &model);
  } else if (!o.quiet) {
    std::cerr << "warning: no classification table at " << class_path.string() << "; correlation table will be empty\n";
  }
  fs::create_directories(dir);
  write_text(dir / "explanation.csv", explanation_csv(explanation_table(ratios, model)));
  write_text(dir / "correlation.csv", correlation_csv(correlation_table(ratios, scenarios, model)));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistical comparison of CAM focus regions with anatomical masks"};
  app.require_subcommand(1);
  Options o;

  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic dataset (bundles + manifest)");
  synth->add_option("--out", o.out, "Output directory")->required();
  synth->add_option("--count", o.count, "Number of images");
  synth->add_option("--size", o.size, "Image height and width (multiple of 4)");
  synth->add_option("--contrast", o.contrast, "Disk contrast in class 1 images");
  synth->add_option("--seed", o.seed, "Generator seed");

  auto* splits = app.add_subcommand("splits", "Write the six double cross-validation scenarios");
  splits->add_option("--manifest", o.manifest, "Dataset manifest (JSON)")->required();
  splits->add_option("--seed", o.seed, "Split seed");
  splits->add_option("--out", o.out, "Output directory");
  splits->add_flag("--quiet", o.quiet, "Suppress progress output");

  auto* train = app.add_subcommand("train", "Train one mini-CNN per scenario and report classification metrics");
  add_run_options(train, o, true);
  auto* explain = app.add_subcommand("explain", "Compute CAMs, focus regions and per-sample ratios");
  add_run_options(explain, o, true);
  auto* report = app.add_subcommand("report", "Run the whole pipeline and write every table");
  add_run_options(report, o, true);

  auto* stats_cmd = app.add_subcommand("stats", "Recompute explanation and correlation tables from persisted CSVs");
  stats_cmd->add_option("--out", o.out, "Directory holding per_sample_ratios.csv and classification.csv");
  stats_cmd->add_option("--ratios", o.ratios, "Per-sample ratio CSV");
  stats_cmd->add_option("--classification", o.classification, "Classification CSV");
  stats_cmd->add_flag("--quiet", o.quiet, "Suppress progress output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(o);
    if (splits->parsed()) return run_splits(o);
    if (stats_cmd->parsed()) return run_stats(o);
    if (train->parsed()) return run_pipeline(o, "train");
    if (explain->parsed()) return run_pipeline(o, "explain");
    if (report->parsed()) return run_pipeline(o, "report");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
