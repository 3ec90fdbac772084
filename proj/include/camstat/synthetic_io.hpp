#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "camstat/bundle.hpp"
#include "camstat/manifest.hpp"
#include "camstat/report.hpp"
#include "camstat/synthetic.hpp"

namespace camstat {

/// Writes one bundle per sample (entries "image" and the anatomy mask) plus
/// a manifest.json referencing them. Returns the manifest path.
inline std::filesystem::path write_synthetic_dataset(const std::filesystem::path& dir,
                                                     const std::vector<SyntheticSample>& samples,
                                                     const std::string& name = "synthetic") {
  std::filesystem::create_directories(dir / "bundles");
  nlohmann::ordered_json doc;
  doc["version"] = 1;
  doc["dataset"] = name;
  doc["samples"] = nlohmann::ordered_json::array();
  for (const auto& s : samples) {
    Bundle b;
    b.add("image", s.image);
    b.add(kSyntheticAnatomy, s.mask);
    const std::string rel = "bundles/" + s.id + ".camb";
    write_bundle(dir / rel, b);
    nlohmann::ordered_json js;
    js["id"] = s.id;
    js["label"] = s.label;
    js["image"] = rel + "#image";
    js["masks"][kSyntheticAnatomy] = rel + "#" + kSyntheticAnatomy;
    doc["samples"].push_back(std::move(js));
  }
  const auto path = dir / "manifest.json";
  write_text(path, doc.dump(2) + "\n");
  return path;
}

/// In-memory equivalent of writing and reloading a synthetic dataset.
inline Dataset to_dataset(const std::vector<SyntheticSample>& samples, const std::string& name = "synthetic") {
  Dataset ds;
  ds.name = name;
  for (const auto& s : samples) {
    SampleRecord r;
    r.id = s.id;
    r.label = s.label;
    r.image = s.image;
    r.masks.emplace(kSyntheticAnatomy, AnatomyMask(s.mask));
    ds.samples.push_back(std::move(r));
  }
  return ds;
}

}  // namespace camstat
