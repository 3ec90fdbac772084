#pragma once

// JSON manifest describing a dataset. Schema (version 1):
//
//   {
//     "version": 1,                         optional
//     "dataset": "ORIGA",                   optional
//     "model": "vgg11",                     optional, names the exporter's model
//     "samples": [
//       {
//         "id": "img001",                   unique
//         "label": 1,                       1 = case, 0 = control
//         "image": "bundles/img001.camb#image",
//         "masks": {"optic_cup": "bundles/img001.camb#optic_cup", ...},
//         "bundle": "bundles/img001.camb"   optional, explanation tensors
//       }
//     ]
//   }
//
// Tensor references are "path#entry", relative to the manifest's directory.
// Without "#entry" the entry name defaults to "image" for the image and to
// the mask's key for masks.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "camstat/bundle.hpp"
#include "camstat/cam.hpp"
#include "camstat/error.hpp"
#include "camstat/focus.hpp"
#include "camstat/tensor.hpp"

namespace camstat {

struct TensorRef {
  std::filesystem::path file;
  std::string entry;

  std::string to_string() const { return file.generic_string() + "#" + entry; }
};

/// Explanation tensors captured for one sample by an exporter.
struct ExplanationBundle {
  Tensor acts;                                // K x h x w
  std::optional<Tensor> grads;                // K x h x w
  double score = 0.0;                         // probability of class 1
  std::optional<std::vector<double>> scorecam_scores;  // K
};

struct SampleRecord {
  std::string id;
  int label = 0;
  TensorRef image_ref;
  Tensor image;
  std::map<std::string, AnatomyMask> masks;
  std::map<std::string, TensorRef> mask_refs;
  std::optional<std::filesystem::path> bundle_path;
  std::optional<ExplanationBundle> explanation;

  Extent extent() const { return detail::spatial_extent(image); }
};

struct Dataset {
  std::string name;
  std::optional<std::string> model;
  std::vector<SampleRecord> samples;
  std::vector<std::string> warnings;

  std::size_t cases() const {
    std::size_t n = 0;
    for (const auto& s : samples) n += s.label == 1;
    return n;
  }
  std::size_t controls() const { return samples.size() - cases(); }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.label);
    return out;
  }

  std::string summary() const {
    std::ostringstream os;
    os << (name.empty() ? "dataset" : name) << ": " << samples.size() << " samples, " << cases() << " case / "
       << controls() << " control";
    return os.str();
  }
};

class ManifestError : public Error {
 public:
  explicit ManifestError(const std::string& w) : Error(ErrorKind::data, w) {}
};

namespace detail {

inline TensorRef parse_ref(const std::string& text, const std::string& default_entry,
                           const std::filesystem::path& base) {
  TensorRef ref;
  const auto hash = text.rfind('#');
  std::string file = hash == std::string::npos ? text : text.substr(0, hash);
  ref.entry = hash == std::string::npos ? default_entry : text.substr(hash + 1);
  if (file.empty() || ref.entry.empty()) throw ManifestError("malformed tensor reference '" + text + "'");
  ref.file = std::filesystem::path(file).is_absolute() ? std::filesystem::path(file) : base / file;
  return ref;
}

inline std::size_t line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

class BundleCache {
 public:
  const Bundle& get(const std::filesystem::path& p) {
    auto key = p.lexically_normal().string();
    auto it = cache_.find(key);
    if (it == cache_.end()) it = cache_.emplace(key, read_bundle(p)).first;
    return it->second;
  }

 private:
  std::map<std::string, Bundle> cache_;
};

inline const Tensor& resolve(BundleCache& cache, const TensorRef& ref, const std::string& field) {
  if (!std::filesystem::exists(ref.file)) {
    throw ManifestError(field + ": referenced bundle '" + ref.file.string() + "' does not exist");
  }
  const Tensor* t = cache.get(ref.file).find(ref.entry);
  if (t == nullptr) throw ManifestError(field + ": bundle '" + ref.file.string() + "' has no entry '" + ref.entry + "'");
  return *t;
}

inline ExplanationBundle load_explanation(const Bundle& b, const std::string& field) {
  ExplanationBundle e;
  const Tensor* acts = b.find("acts");
  if (acts == nullptr) throw ManifestError(field + ": explanation bundle lacks 'acts'");
  if (acts->ndim() != 3) throw DimensionError(field + ": 'acts' must be K x h x w, got " + dims_to_string(acts->dims()));
  e.acts = *acts;
  if (const Tensor* g = b.find("grads")) {
    if (g->dims() != acts->dims()) {
      throw DimensionError(field + ": 'grads' " + dims_to_string(g->dims()) + " does not match 'acts' " +
                           dims_to_string(acts->dims()));
    }
    e.grads = *g;
  }
  const Tensor* score = b.find("score");
  if (score == nullptr || score->size() != 1) throw ManifestError(field + ": explanation bundle needs a scalar 'score'");
  e.score = (*score)[0];
  if (const Tensor* s = b.find("scorecam_scores")) {
    if (s->size() != acts->dim(0)) {
      throw DimensionError(field + ": 'scorecam_scores' has " + std::to_string(s->size()) + " values for " +
                           std::to_string(acts->dim(0)) + " channels");
    }
    e.scorecam_scores = std::vector<double>(s->data().begin(), s->data().end());
  }
  return e;
}

}  // namespace detail

/// Parses and validates a manifest, loading every referenced tensor.
/// Duplicate ids, dangling references and image/mask shape mismatches are
/// rejected.
inline Dataset parse_manifest(const std::string& text, const std::filesystem::path& base_dir,
                              const std::string& origin = "manifest") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ManifestError(origin + ":" + std::to_string(detail::line_of_offset(text, e.byte)) + ": JSON parse error: " +
                        e.what());
  }
  if (!doc.is_object()) throw ManifestError(origin + ": top level must be a JSON object");
  if (doc.contains("version") && doc["version"] != 1) throw ManifestError(origin + ": unsupported manifest version");
  if (!doc.contains("samples") || !doc["samples"].is_array()) {
    throw ManifestError(origin + ": field 'samples' must be an array");
  }

  Dataset ds;
  if (doc.contains("dataset")) ds.name = doc["dataset"].get<std::string>();
  if (doc.contains("model")) ds.model = doc["model"].get<std::string>();

  detail::BundleCache cache;
  std::set<std::string> seen;
  const auto& samples = doc["samples"];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& js = samples[i];
    const std::string field = origin + ": samples[" + std::to_string(i) + "]";
    if (!js.is_object()) throw ManifestError(field + ": must be an object");
    auto require_string = [&](const char* key) {
      if (!js.contains(key) || !js[key].is_string()) throw ManifestError(field + "." + key + ": required string");
      return js[key].get<std::string>();
    };

    SampleRecord rec;
    rec.id = require_string("id");
    if (rec.id.empty()) throw ManifestError(field + ".id: must not be empty");
    if (!seen.insert(rec.id).second) throw ManifestError(field + ".id: duplicate id '" + rec.id + "'");
    if (!js.contains("label") || !js["label"].is_number_integer() ||
        (js["label"].get<int>() != 0 && js["label"].get<int>() != 1)) {
      throw ManifestError(field + ".label: must be 0 or 1");
    }
    rec.label = js["label"].get<int>();

    rec.image_ref = detail::parse_ref(require_string("image"), "image", base_dir);
    rec.image = detail::resolve(cache, rec.image_ref, field + ".image");
    Extent ext;
    try {
      ext = rec.extent();
    } catch (const DimensionError& e) {
      throw DimensionError(field + ".image: " + e.what());
    }

    if (js.contains("masks")) {
      if (!js["masks"].is_object()) throw ManifestError(field + ".masks: must be an object");
      for (const auto& [name, value] : js["masks"].items()) {
        const std::string mfield = field + ".masks." + name;
        if (!value.is_string()) throw ManifestError(mfield + ": must be a tensor reference string");
        auto ref = detail::parse_ref(value.get<std::string>(), name, base_dir);
        Tensor t = detail::resolve(cache, ref, mfield);
        if (t.ndim() == 3 && t.dim(0) == 1) t = t.reshaped({t.dim(1), t.dim(2)});
        if (t.ndim() != 2 || t.dim(0) != ext.height || t.dim(1) != ext.width) {
          throw DimensionError(mfield + ": mask dims " + dims_to_string(t.dims()) + " do not match image dims " +
                               dims_to_string(rec.image.dims()));
        }
        try {
          rec.masks.emplace(name, AnatomyMask(std::move(t)));
        } catch (const Error& e) {
          throw ManifestError(mfield + ": " + e.what());
        }
        rec.mask_refs.emplace(name, std::move(ref));
      }
    }

    if (js.contains("bundle")) {
      if (!js["bundle"].is_string()) throw ManifestError(field + ".bundle: must be a path string");
      auto path = std::filesystem::path(js["bundle"].get<std::string>());
      if (!path.is_absolute()) path = base_dir / path;
      if (!std::filesystem::exists(path)) {
        throw ManifestError(field + ".bundle: referenced bundle '" + path.string() + "' does not exist");
      }
      rec.bundle_path = path;
      rec.explanation = detail::load_explanation(cache.get(path), field + ".bundle");
    }
    ds.samples.push_back(std::move(rec));
  }
  if (ds.samples.empty()) ds.warnings.push_back(origin + ": manifest lists no samples");
  return ds;
}

inline Dataset load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path(), path.string());
}

}  // namespace camstat
