#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "camstat/error.hpp"
#include "camstat/tensor.hpp"

namespace camstat {

/// Post-nonlinearity activations at the explanation layer, K x h x w.
struct LayerActivations {
  Tensor maps;

  explicit LayerActivations(Tensor t) : maps(std::move(t)) {
    if (maps.ndim() != 3) {
      throw DimensionError("layer activations must be K x h x w, got " + dims_to_string(maps.dims()));
    }
  }
  std::size_t channels() const { return maps.dim(0); }
  std::size_t height() const { return maps.dim(1); }
  std::size_t width() const { return maps.dim(2); }
};

/// d(class logit) / d(activations), same layout as the activations.
struct LayerGradients {
  Tensor maps;

  explicit LayerGradients(Tensor t) : maps(std::move(t)) {
    if (maps.ndim() != 3) {
      throw DimensionError("layer gradients must be K x h x w, got " + dims_to_string(maps.dims()));
    }
  }
};

struct Extent {
  std::size_t height = 0;
  std::size_t width = 0;
};

/// Per-pixel importance at input resolution, values in [0, 1].
struct SaliencyMap {
  Tensor values;

  std::size_t height() const { return values.dim(0); }
  std::size_t width() const { return values.dim(1); }
};

/// Anything that scores an image for a class deterministically.
class ModelOracle {
 public:
  virtual ~ModelOracle() = default;
  virtual double score(const Tensor& image, int class_idx) const = 0;
};

/// Per-channel scores of the masked inputs, computed ahead of time (bundle mode).
struct ScoreTable {
  std::vector<double> scores;
};

enum class CamMethod { grad_cam, xgrad_cam, score_cam, eigen_cam, layer_cam };

inline constexpr CamMethod kAllCamMethods[] = {CamMethod::grad_cam, CamMethod::xgrad_cam,
                                               CamMethod::score_cam, CamMethod::eigen_cam,
                                               CamMethod::layer_cam};

inline std::string_view to_string(CamMethod m) {
  switch (m) {
    case CamMethod::grad_cam: return "grad-cam";
    case CamMethod::xgrad_cam: return "xgrad-cam";
    case CamMethod::score_cam: return "score-cam";
    case CamMethod::eigen_cam: return "eigen-cam";
    case CamMethod::layer_cam: return "layer-cam";
  }
  return "?";
}

inline CamMethod parse_cam_method(std::string_view s) {
  for (auto m : kAllCamMethods) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown CAM method '" + std::string(s) + "'");
}

inline bool needs_gradients(CamMethod m) {
  return m == CamMethod::grad_cam || m == CamMethod::xgrad_cam || m == CamMethod::layer_cam;
}

namespace detail {

using FeatureMap = BasicTensor<double>;

inline void check_pair(const LayerActivations& a, const LayerGradients& g) {
  if (a.maps.dims() != g.maps.dims()) {
    throw DimensionError("activations " + dims_to_string(a.maps.dims()) + " and gradients " +
                         dims_to_string(g.maps.dims()) + " differ in shape");
  }
}

inline void check_finite(const LayerActivations& a) {
  for (float v : a.maps.data()) {
    if (!std::isfinite(v)) throw DataError("layer activations contain a non-finite value");
  }
}

// Shared tail of every method: ReLU at feature resolution, upsample to the
// input grid, normalize per image. Runs in double and rounds once at the end.
inline SaliencyMap finish(const FeatureMap& combined, Extent out) {
  if (out.height == 0 || out.width == 0) throw DimensionError("saliency extent must be positive");
  auto up = bilinear_resize(relu(combined), out.height, out.width);
  return SaliencyMap{minmax_normalize(up).cast<float>()};
}

// sum_k weight_k * A^k
inline FeatureMap weighted_sum(const LayerActivations& acts, std::span<const double> weights) {
  const std::size_t K = acts.channels(), plane = acts.height() * acts.width();
  FeatureMap out({acts.height(), acts.width()}, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    if (weights[k] == 0.0) continue;
    const float* a = acts.maps.data().data() + k * plane;
    for (std::size_t i = 0; i < plane; ++i) out[i] += weights[k] * static_cast<double>(a[i]);
  }
  return out;
}

inline std::vector<double> softmax(std::span<const double> x) {
  std::vector<double> out(x.size());
  if (x.empty()) return out;
  const double mx = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += out[i] = std::exp(x[i] - mx);
  for (auto& v : out) v /= sum;
  return out;
}

// Multiplies a normalized h x w mask into every channel of an image that is
// H x W, 1 x H x W or C x H x W.
inline Tensor apply_mask(const Tensor& image, const FeatureMap& mask) {
  Tensor out = image;
  const std::size_t plane = mask.size();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(out[i]) * mask[i % plane]);
  }
  return out;
}

inline Extent spatial_extent(const Tensor& image) {
  if (image.ndim() == 2) return {image.dim(0), image.dim(1)};
  if (image.ndim() == 3) return {image.dim(1), image.dim(2)};
  throw DimensionError("image must be H x W or C x H x W, got " + dims_to_string(image.dims()));
}

inline SaliencyMap combine_with_scores(const LayerActivations& acts, Extent out,
                                       std::span<const double> scores) {
  if (scores.size() != acts.channels()) {
    throw DimensionError("score-cam needs one score per channel: " + std::to_string(scores.size()) +
                         " scores for " + std::to_string(acts.channels()) + " channels");
  }
  const auto w = softmax(scores);
  return finish(weighted_sum(acts, w), out);
}

}  // namespace detail

/// Grad-CAM: channel weights are the spatial mean of the gradients.
inline SaliencyMap grad_cam(const LayerActivations& acts, const LayerGradients& grads, Extent out) {
  detail::check_pair(acts, grads);
  detail::check_finite(acts);
  const std::size_t K = acts.channels(), plane = acts.height() * acts.width();
  std::vector<double> alpha(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const float* g = grads.maps.data().data() + k * plane;
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += g[i];
    alpha[k] = s / static_cast<double>(plane);
  }
  return detail::finish(detail::weighted_sum(acts, alpha), out);
}

/// XGrad-CAM: w_k = sum(grad * A) / sum(A); a channel with no activation mass gets 0.
inline SaliencyMap xgrad_cam(const LayerActivations& acts, const LayerGradients& grads, Extent out) {
  detail::check_pair(acts, grads);
  detail::check_finite(acts);
  const std::size_t K = acts.channels(), plane = acts.height() * acts.width();
  std::vector<double> w(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const float* a = acts.maps.data().data() + k * plane;
    const float* g = grads.maps.data().data() + k * plane;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      num += static_cast<double>(g[i]) * a[i];
      den += a[i];
    }
    w[k] = den == 0.0 ? 0.0 : num / den;
  }
  return detail::finish(detail::weighted_sum(acts, w), out);
}

/// Layer-CAM: ReLU(sum_k ReLU(grad_k) * A^k), pixelwise.
inline SaliencyMap layer_cam(const LayerActivations& acts, const LayerGradients& grads, Extent out) {
  detail::check_pair(acts, grads);
  detail::check_finite(acts);
  const std::size_t K = acts.channels(), plane = acts.height() * acts.width();
  detail::FeatureMap combined({acts.height(), acts.width()}, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const float* a = acts.maps.data().data() + k * plane;
    const float* g = grads.maps.data().data() + k * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      if (g[i] > 0.0f) combined[i] += static_cast<double>(g[i]) * a[i];
    }
  }
  return detail::finish(combined, out);
}

/// Score-CAM with a live oracle: each upsampled, normalized channel masks
/// the input, and the oracle's class scores of the masked inputs are
/// softmaxed into channel weights.
inline SaliencyMap score_cam(const LayerActivations& acts, const Tensor& input, int class_idx,
                             const ModelOracle* oracle) {
  if (oracle == nullptr) throw ConfigError("score-cam requires a model oracle or a score table");
  detail::check_finite(acts);
  const Extent ext = detail::spatial_extent(input);
  std::vector<double> scores(acts.channels());
  for (std::size_t k = 0; k < acts.channels(); ++k) {
    auto up = bilinear_resize(acts.maps.channel(k).cast<double>(), ext.height, ext.width);
    auto mask = minmax_normalize(up);
    scores[k] = oracle->score(detail::apply_mask(input, mask), class_idx);
  }
  return detail::combine_with_scores(acts, ext, scores);
}

/// Score-CAM from a precomputed per-channel score table.
inline SaliencyMap score_cam(const LayerActivations& acts, Extent out, const ScoreTable* table) {
  if (table == nullptr) throw ConfigError("score-cam requires a model oracle or a score table");
  detail::check_finite(acts);
  return detail::combine_with_scores(acts, out, table->scores);
}

struct PowerIterationOptions {
  double tolerance = 1e-10;
  int max_iterations = 1000;
};

/// Eigen-CAM: projection of the activations (hw x K) onto their first right
/// singular vector, sign fixed so the map sums to a nonnegative value.
inline SaliencyMap eigen_cam(const LayerActivations& acts, Extent out,
                             PowerIterationOptions opt = {}) {
  detail::check_finite(acts);
  const std::size_t K = acts.channels(), plane = acts.height() * acts.width();
  const float* A = acts.maps.data().data();

  // Gram matrix G = M^T M, K x K.
  std::vector<double> G(K * K, 0.0);
  for (std::size_t i = 0; i < K; ++i) {
    for (std::size_t j = i; j < K; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < plane; ++p) s += static_cast<double>(A[i * plane + p]) * A[j * plane + p];
      G[i * K + j] = G[j * K + i] = s;
    }
  }

  std::vector<double> v(K, 1.0 / std::sqrt(static_cast<double>(K))), next(K);
  bool zero = false;
  for (int it = 0; it < opt.max_iterations; ++it) {
    double norm = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < K; ++j) s += G[i * K + j] * v[j];
      next[i] = s;
      norm += s * s;
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      zero = true;
      break;
    }
    double delta = 0.0;
    for (std::size_t i = 0; i < K; ++i) {
      next[i] /= norm;
      delta += (next[i] - v[i]) * (next[i] - v[i]);
    }
    v.swap(next);
    if (std::sqrt(delta) < opt.tolerance) break;
  }

  detail::FeatureMap proj({acts.height(), acts.width()}, 0.0);
  if (!zero) {
    proj = detail::weighted_sum(acts, v);
    double total = 0.0;
    for (double x : proj.data()) total += x;
    if (total < 0.0) {
      for (auto& x : proj.data()) x = -x;
    }
  }
  return detail::finish(proj, out);
}

}  // namespace camstat
