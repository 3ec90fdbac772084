#pragma once

// CSV outputs of an experiment. Every number is printed with 17 significant
// digits so a value read back is the value that was written; an empty cell
// means "undefined" (for example a PPV with no positive predictions).

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "camstat/error.hpp"
#include "camstat/experiment.hpp"
#include "camstat/overlay.hpp"

namespace camstat {

namespace csv {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

inline std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class Writer {
 public:
  explicit Writer(std::vector<std::string> header) : width_(header.size()) { row(header); }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != width_) throw DataError("csv row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << field(cells[i]);
    }
    os_ << '\n';
  }

  std::string str() const { return os_.str(); }

 private:
  std::size_t width_;
  std::ostringstream os_;
};

using Row = std::map<std::string, std::string>;

/// Parses CSV with a header line (RFC 4180 quoting) into header-keyed rows.
inline std::vector<Row> parse(const std::string& text, const std::string& origin) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> cur;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      cur.push_back(std::move(cell));
      cell.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (any || !cell.empty()) {
        cur.push_back(std::move(cell));
        records.push_back(std::move(cur));
      }
      cur.clear();
      cell.clear();
      any = false;
    } else {
      cell += c;
      any = true;
    }
  }
  if (any || !cell.empty()) {
    cur.push_back(std::move(cell));
    records.push_back(std::move(cur));
  }
  if (records.empty()) throw DataError(origin + ": empty CSV");
  std::vector<Row> rows;
  const auto& header = records.front();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != header.size()) {
      throw DataError(origin + ":" + std::to_string(r + 1) + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(records[r].size()));
    }
    Row row;
    for (std::size_t c = 0; c < header.size(); ++c) row[header[c]] = records[r][c];
    rows.push_back(std::move(row));
  }
  return rows;
}

inline const std::string& get(const Row& row, const std::string& key, const std::string& origin) {
  auto it = row.find(key);
  if (it == row.end()) throw DataError(origin + ": missing column '" + key + "'");
  return it->second;
}

inline double to_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(what + ": '" + s + "' is not a number");
  }
}

inline std::optional<double> to_optional(const std::string& s, const std::string& what) {
  if (s.empty()) return std::nullopt;
  return to_double(s, what);
}

}  // namespace csv

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Writers

inline constexpr const char* kMetricNames[] = {"auroc", "auprc", "accuracy", "sensitivity", "specificity", "ppv", "npv"};

inline std::string classification_csv(const std::vector<ClassificationRow>& rows) {
  std::vector<std::string> header{"evaluation", "model", "scenario", "tau"};
  for (const char* m : kMetricNames) {
    header.emplace_back(m);
    header.push_back(std::string(m) + "_se");
  }
  csv::Writer w(header);
  for (const auto& r : rows) {
    std::vector<std::string> cells{r.evaluation, r.model, r.scenario, csv::num(r.tau)};
    for (const auto* e : {&r.metrics.auroc, &r.metrics.auprc, &r.metrics.accuracy, &r.metrics.sensitivity,
                          &r.metrics.specificity, &r.metrics.ppv, &r.metrics.npv}) {
      cells.push_back(csv::num(e->value));
      cells.push_back(csv::num(e->se));
    }
    w.row(cells);
  }
  return w.str();
}

inline std::string explanation_csv(const std::vector<ExplanationRow>& rows) {
  csv::Writer w({"evaluation", "model", "method", "anatomy", "n", "activation_ratio", "activation_ratio_se",
                 "structure_ratio", "structure_ratio_se", "ratio_difference", "ratio_difference_se", "t_statistic",
                 "df", "p_value"});
  for (const auto& r : rows) {
    w.row({r.evaluation, r.model, std::string(to_string(r.method)), r.anatomy, std::to_string(r.n),
           csv::num(r.activation.mean), csv::num(r.activation.se), csv::num(r.structure.mean),
           csv::num(r.structure.se), csv::num(r.difference.mean), csv::num(r.difference.se),
           r.t_test ? csv::num(r.t_test->statistic) : "", r.t_test ? csv::num(r.t_test->df) : "",
           r.t_test ? csv::num(r.t_test->p_value) : ""});
  }
  return w.str();
}

inline std::string correlation_csv(const std::vector<CorrelationRow>& rows) {
  csv::Writer w({"evaluation", "model", "anatomy", "points", "pearson_r", "pearson_p", "spearman_rho", "spearman_p"});
  for (const auto& r : rows) {
    w.row({r.evaluation, r.model, r.anatomy, std::to_string(r.points), r.pearson ? csv::num(r.pearson->statistic) : "",
           r.pearson ? csv::num(r.pearson->p_value) : "", r.spearman ? csv::num(r.spearman->statistic) : "",
           r.spearman ? csv::num(r.spearman->p_value) : ""});
  }
  return w.str();
}

inline std::string ratios_csv(const std::vector<RatioRow>& rows) {
  csv::Writer w({"evaluation", "scenario", "sample_id", "label", "target_class", "method", "anatomy",
                 "activation_ratio", "structure_ratio", "ratio_difference"});
  for (const auto& r : rows) {
    w.row({r.evaluation, std::to_string(r.scenario), r.sample_id, std::to_string(r.label),
           std::to_string(r.target_class), std::string(to_string(r.method)), r.anatomy,
           csv::num(r.ratio.activation_ratio), csv::num(r.ratio.structure_ratio), csv::num(r.ratio.difference)});
  }
  return w.str();
}

inline std::string splits_csv(const std::vector<SplitScenario>& splits, const std::vector<std::string>& ids) {
  csv::Writer w({"scenario", "train_subset", "val_subset", "test_subset", "role", "sample_id"});
  for (const auto& s : splits) {
    auto emit = [&](const char* role, const std::vector<std::size_t>& idx) {
      for (auto i : idx) {
        w.row({std::to_string(s.index), std::to_string(s.subsets[0]), std::to_string(s.subsets[1]),
               std::to_string(s.subsets[2]), role, ids.at(i)});
      }
    };
    emit("train", s.train);
    emit("val", s.val);
    emit("test", s.test);
  }
  return w.str();
}

struct OutputSelection {
  bool splits = true;
  bool classification = true;
  bool explanation = true;
  bool ratios = true;
  bool overlays = true;
  bool checkpoints = false;
};

inline void write_report(const ExperimentReport& rep, const std::filesystem::path& dir, OutputSelection sel = {}) {
  std::filesystem::create_directories(dir);
  if (sel.splits) write_text(dir / "splits.csv", splits_csv(rep.splits, rep.sample_ids));
  if (sel.classification) write_text(dir / "classification.csv", classification_csv(rep.classification));
  if (sel.explanation) {
    write_text(dir / "explanation.csv", explanation_csv(rep.explanation));
    write_text(dir / "correlation.csv", correlation_csv(rep.correlation));
  }
  if (sel.ratios) write_text(dir / "per_sample_ratios.csv", ratios_csv(rep.ratios));
  if (sel.overlays && !rep.overlays.empty()) {
    std::filesystem::create_directories(dir / "overlays");
    for (const auto& a : rep.overlays) write_file(dir / a.relative_path, a.bytes);
  }
  if (sel.checkpoints && !rep.models.empty()) {
    std::filesystem::create_directories(dir / "models");
    for (const auto& [k, m] : rep.models) minicnn::save_checkpoint(dir / "models" / checkpoint_name(k), m);
  }
}

// ---------------------------------------------------------------------------
// Readers, used to recompute the tables from persisted per-sample data.

inline std::vector<RatioRow> parse_ratios_csv(const std::string& text, const std::string& origin) {
  std::vector<RatioRow> out;
  const auto rows = csv::parse(text, origin);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = origin + ":" + std::to_string(i + 2);
    RatioRow row;
    row.evaluation = csv::get(r, "evaluation", where);
    row.scenario = static_cast<int>(csv::to_double(csv::get(r, "scenario", where), where + " scenario"));
    row.sample_id = csv::get(r, "sample_id", where);
    row.label = static_cast<int>(csv::to_double(csv::get(r, "label", where), where + " label"));
    row.target_class = static_cast<int>(csv::to_double(csv::get(r, "target_class", where), where + " target_class"));
    row.method = parse_cam_method(csv::get(r, "method", where));
    row.anatomy = csv::get(r, "anatomy", where);
    row.ratio = RatioRecord::make(csv::to_double(csv::get(r, "activation_ratio", where), where),
                                  csv::to_double(csv::get(r, "structure_ratio", where), where));
    out.push_back(std::move(row));
  }
  return out;
}

/// Scenario rows (numeric "scenario") of a classification table; enough to
/// rebuild the correlation table.
inline std::vector<ScenarioSummary> parse_scenarios_from_classification(const std::string& text,
                                                                        const std::string& origin,
                                                                        std::string* model = nullptr) {
  std::vector<ScenarioSummary> out;
  const auto rows = csv::parse(text, origin);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const std::string where = origin + ":" + std::to_string(i + 2);
    const auto& scen = csv::get(r, "scenario", where);
    if (model) *model = csv::get(r, "model", where);
    if (scen == "mean") continue;
    ScenarioSummary s;
    s.evaluation = csv::get(r, "evaluation", where);
    s.scenario = static_cast<int>(csv::to_double(scen, where + " scenario"));
    if (auto tau = csv::to_optional(csv::get(r, "tau", where), where + " tau")) s.tau = *tau;
    s.metrics.auroc.value = csv::to_optional(csv::get(r, "auroc", where), where + " auroc");
    s.metrics.auroc.se = csv::to_optional(csv::get(r, "auroc_se", where), where + " auroc_se");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace camstat
