#pragma once

// A two-convolution network small enough to train on a laptop CPU, with a
// hand-written backward pass. It serves as the classifier being explained
// and as the scoring oracle for Score-CAM.
//
//   input 1xHxW -> conv3x3(8) -> ReLU -> maxpool2
//               -> conv3x3(16) -> ReLU            (explanation layer)
//               -> maxpool2 -> global average pool -> fc(16 -> 2)

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "camstat/bundle.hpp"
#include "camstat/cam.hpp"
#include "camstat/error.hpp"
#include "camstat/random.hpp"
#include "camstat/tensor.hpp"

namespace camstat::minicnn {

inline constexpr std::size_t kConv1Filters = 8;
inline constexpr std::size_t kConv2Filters = 16;
inline constexpr std::size_t kClasses = 2;
inline constexpr std::size_t kKernel = 3;

template <typename T>
struct BasicMiniCnn {
  BasicTensor<T> conv1_w{{kConv1Filters, 1, kKernel, kKernel}};
  BasicTensor<T> conv1_b{{kConv1Filters}};
  BasicTensor<T> conv2_w{{kConv2Filters, kConv1Filters, kKernel, kKernel}};
  BasicTensor<T> conv2_b{{kConv2Filters}};
  BasicTensor<T> fc_w{{kClasses, kConv2Filters}};
  BasicTensor<T> fc_b{{kClasses}};

  template <typename F>
  void for_each_parameter(F&& f) {
    f("conv1.w", conv1_w);
    f("conv1.b", conv1_b);
    f("conv2.w", conv2_w);
    f("conv2.b", conv2_b);
    f("fc.w", fc_w);
    f("fc.b", fc_b);
  }
  template <typename F>
  void for_each_parameter(F&& f) const {
    f("conv1.w", conv1_w);
    f("conv1.b", conv1_b);
    f("conv2.w", conv2_w);
    f("conv2.b", conv2_b);
    f("fc.w", fc_w);
    f("fc.b", fc_b);
  }

  template <typename U>
  BasicMiniCnn<U> cast() const {
    BasicMiniCnn<U> out;
    out.conv1_w = conv1_w.template cast<U>();
    out.conv1_b = conv1_b.template cast<U>();
    out.conv2_w = conv2_w.template cast<U>();
    out.conv2_b = conv2_b.template cast<U>();
    out.fc_w = fc_w.template cast<U>();
    out.fc_b = fc_b.template cast<U>();
    return out;
  }

  friend bool operator==(const BasicMiniCnn&, const BasicMiniCnn&) = default;
};

using MiniCnn = BasicMiniCnn<float>;

// ---------------------------------------------------------------------------
// Layer kernels

namespace detail {

// 3x3 convolution, stride 1, zero padding 1. in: C x H x W, w: Co x C x 3 x 3.
template <typename T>
BasicTensor<T> conv3x3(const BasicTensor<T>& in, const BasicTensor<T>& w, const BasicTensor<T>& b) {
  const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2), Co = w.dim(0);
  BasicTensor<T> out({Co, H, W});
  for (std::size_t co = 0; co < Co; ++co) {
    T* o = out.data().data() + co * H * W;
    for (std::size_t i = 0; i < H * W; ++i) o[i] = b[co];
    for (std::size_t ci = 0; ci < C; ++ci) {
      const T* src = in.data().data() + ci * H * W;
      for (std::size_t ky = 0; ky < kKernel; ++ky) {
        for (std::size_t kx = 0; kx < kKernel; ++kx) {
          const T wv = w[((co * C + ci) * kKernel + ky) * kKernel + kx];
          const std::size_t y_lo = ky == 0 ? 1 : 0, y_hi = ky == 2 ? H - 1 : H;
          const std::size_t x_lo = kx == 0 ? 1 : 0, x_hi = kx == 2 ? W - 1 : W;
          for (std::size_t y = y_lo; y < y_hi; ++y) {
            T* orow = o + y * W;
            const T* srow = src + (y + ky - 1) * W + (kx - 1);
            for (std::size_t x = x_lo; x < x_hi; ++x) orow[x] += wv * srow[x];
          }
        }
      }
    }
  }
  return out;
}

// Accumulates dW and db; returns d(input) when `want_input` is set.
template <typename T>
BasicTensor<T> conv3x3_backward(const BasicTensor<T>& in, const BasicTensor<T>& w, const BasicTensor<T>& dout,
                                BasicTensor<T>& dw, BasicTensor<T>& db, bool want_input) {
  const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2), Co = w.dim(0);
  BasicTensor<T> din({C, H, W});
  for (std::size_t co = 0; co < Co; ++co) {
    const T* g = dout.data().data() + co * H * W;
    T bsum = 0;
    for (std::size_t i = 0; i < H * W; ++i) bsum += g[i];
    db[co] += bsum;
    for (std::size_t ci = 0; ci < C; ++ci) {
      const T* src = in.data().data() + ci * H * W;
      T* dsrc = din.data().data() + ci * H * W;
      for (std::size_t ky = 0; ky < kKernel; ++ky) {
        for (std::size_t kx = 0; kx < kKernel; ++kx) {
          const std::size_t widx = ((co * C + ci) * kKernel + ky) * kKernel + kx;
          const T wv = w[widx];
          const std::size_t y_lo = ky == 0 ? 1 : 0, y_hi = ky == 2 ? H - 1 : H;
          const std::size_t x_lo = kx == 0 ? 1 : 0, x_hi = kx == 2 ? W - 1 : W;
          T acc = 0;
          for (std::size_t y = y_lo; y < y_hi; ++y) {
            const T* grow = g + y * W;
            const T* srow = src + (y + ky - 1) * W + (kx - 1);
            for (std::size_t x = x_lo; x < x_hi; ++x) acc += grow[x] * srow[x];
            if (want_input) {
              T* drow = dsrc + (y + ky - 1) * W + (kx - 1);
              for (std::size_t x = x_lo; x < x_hi; ++x) drow[x] += wv * grow[x];
            }
          }
          dw[widx] += acc;
        }
      }
    }
  }
  return din;
}

// 2x2 max pool, stride 2. argmax holds the flat input index of each winner;
// ties go to the first position in row-major order.
template <typename T>
BasicTensor<T> maxpool2(const BasicTensor<T>& in, std::vector<std::uint32_t>& argmax) {
  const std::size_t C = in.dim(0), H = in.dim(1), W = in.dim(2), Ho = H / 2, Wo = W / 2;
  BasicTensor<T> out({C, Ho, Wo});
  argmax.assign(C * Ho * Wo, 0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < Ho; ++y) {
      for (std::size_t x = 0; x < Wo; ++x) {
        std::size_t best = (c * H + 2 * y) * W + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = (c * H + 2 * y + dy) * W + 2 * x + dx;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (c * Ho + y) * Wo + x;
        out[o] = in[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> maxpool2_backward(const BasicTensor<T>& dout, const std::vector<std::uint32_t>& argmax,
                                 const Dims& in_dims) {
  BasicTensor<T> din(in_dims);
  for (std::size_t o = 0; o < dout.size(); ++o) din[argmax[o]] += dout[o];
  return din;
}

template <typename T>
BasicTensor<T> relu_inplace(BasicTensor<T> t) {
  for (auto& v : t.data()) v = v > T{0} ? v : T{0};
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward / backward

/// Everything the backward pass needs from one forward evaluation.
template <typename T>
struct ForwardPass {
  BasicTensor<T> input;  // 1 x H x W
  BasicTensor<T> z1;     // conv1 pre-activation, 8 x H x W
  BasicTensor<T> p1;     // pooled ReLU(z1), 8 x H/2 x W/2
  std::vector<std::uint32_t> arg1;
  BasicTensor<T> z2;    // conv2 pre-activation, 16 x H/2 x W/2
  BasicTensor<T> acts;  // ReLU(z2): the explanation layer
  BasicTensor<T> p2;    // 16 x H/4 x W/4
  std::vector<std::uint32_t> arg2;
  std::array<T, kConv2Filters> pooled{};
  std::array<T, kClasses> logits{};
};

template <typename T>
BasicTensor<T> as_network_input(const BasicTensor<T>& image) {
  Dims d = image.dims();
  if (d.size() == 2) d = {1, d[0], d[1]};
  if (d.size() != 3 || d[0] != 1) {
    throw DimensionError("mini-CNN expects a 1 x H x W grayscale image, got " + dims_to_string(image.dims()));
  }
  if (d[1] % 4 != 0 || d[2] % 4 != 0) {
    throw DimensionError("mini-CNN image height and width must be divisible by 4, got " +
                         dims_to_string(image.dims()));
  }
  return image.reshaped(d);
}

namespace detail {

template <typename T>
void head(const BasicMiniCnn<T>& m, ForwardPass<T>& f) {
  f.p2 = maxpool2(f.acts, f.arg2);
  const std::size_t plane = f.p2.dim(1) * f.p2.dim(2);
  for (std::size_t k = 0; k < kConv2Filters; ++k) {
    T s = 0;
    for (std::size_t i = 0; i < plane; ++i) s += f.p2[k * plane + i];
    f.pooled[k] = s / static_cast<T>(plane);
  }
  for (std::size_t c = 0; c < kClasses; ++c) {
    T s = m.fc_b[c];
    for (std::size_t k = 0; k < kConv2Filters; ++k) s += m.fc_w[c * kConv2Filters + k] * f.pooled[k];
    f.logits[c] = s;
  }
}

}  // namespace detail

template <typename T>
ForwardPass<T> forward(const BasicMiniCnn<T>& m, const BasicTensor<T>& image) {
  ForwardPass<T> f;
  f.input = as_network_input(image);
  f.z1 = detail::conv3x3(f.input, m.conv1_w, m.conv1_b);
  f.p1 = detail::maxpool2(detail::relu_inplace(f.z1), f.arg1);
  f.z2 = detail::conv3x3(f.p1, m.conv2_w, m.conv2_b);
  f.acts = detail::relu_inplace(f.z2);
  detail::head(m, f);
  return f;
}

/// Logits computed from explanation-layer activations alone (pool, average, fc).
template <typename T>
std::array<T, kClasses> logits_from_activations(const BasicMiniCnn<T>& m, const BasicTensor<T>& acts) {
  ForwardPass<T> f;
  f.acts = acts;
  detail::head(m, f);
  return f.logits;
}

namespace detail {

template <typename T>
BasicTensor<T> head_backward(const BasicMiniCnn<T>& m, const ForwardPass<T>& f,
                             std::span<const T, kClasses> dlogits, BasicMiniCnn<T>* grads) {
  std::array<T, kConv2Filters> dpooled{};
  for (std::size_t c = 0; c < kClasses; ++c) {
    if (grads) grads->fc_b[c] += dlogits[c];
    for (std::size_t k = 0; k < kConv2Filters; ++k) {
      if (grads) grads->fc_w[c * kConv2Filters + k] += dlogits[c] * f.pooled[k];
      dpooled[k] += dlogits[c] * m.fc_w[c * kConv2Filters + k];
    }
  }
  BasicTensor<T> dp2(f.p2.dims());
  const std::size_t plane = f.p2.dim(1) * f.p2.dim(2);
  for (std::size_t k = 0; k < kConv2Filters; ++k) {
    const T g = dpooled[k] / static_cast<T>(plane);
    for (std::size_t i = 0; i < plane; ++i) dp2[k * plane + i] = g;
  }
  return maxpool2_backward(dp2, f.arg2, f.acts.dims());
}

}  // namespace detail

/// Accumulates d(sum_c dlogits[c] * logit_c) / d(parameters) into `grads`
/// and returns the gradient with respect to the explanation activations.
template <typename T>
BasicTensor<T> backward(const BasicMiniCnn<T>& m, const ForwardPass<T>& f, std::span<const T, kClasses> dlogits,
                        BasicMiniCnn<T>& grads) {
  BasicTensor<T> dacts = detail::head_backward(m, f, dlogits, &grads);
  BasicTensor<T> dz2 = dacts;
  for (std::size_t i = 0; i < dz2.size(); ++i) {
    if (!(f.z2[i] > T{0})) dz2[i] = 0;
  }
  BasicTensor<T> dp1 = detail::conv3x3_backward(f.p1, m.conv2_w, dz2, grads.conv2_w, grads.conv2_b, true);
  BasicTensor<T> dz1 = detail::maxpool2_backward(dp1, f.arg1, f.z1.dims());
  for (std::size_t i = 0; i < dz1.size(); ++i) {
    if (!(f.z1[i] > T{0})) dz1[i] = 0;
  }
  detail::conv3x3_backward(f.input, m.conv1_w, dz1, grads.conv1_w, grads.conv1_b, false);
  return dacts;
}

inline void check_class(int class_idx) {
  if (class_idx < 0 || class_idx >= static_cast<int>(kClasses)) {
    throw ParameterError("class index must be 0 or 1, got " + std::to_string(class_idx));
  }
}

/// Gradient of the pre-softmax logit of `class_idx` with respect to every parameter.
template <typename T>
BasicMiniCnn<T> parameter_gradients(const BasicMiniCnn<T>& m, const BasicTensor<T>& image, int class_idx) {
  check_class(class_idx);
  const auto f = forward(m, image);
  std::array<T, kClasses> d{};
  d[static_cast<std::size_t>(class_idx)] = 1;
  BasicMiniCnn<T> grads;
  backward(m, f, std::span<const T, kClasses>(d), grads);
  return grads;
}

/// Gradient of the pre-softmax logit of `class_idx` with respect to the
/// explanation-layer activations.
template <typename T>
BasicTensor<T> activation_gradients(const BasicMiniCnn<T>& m, const ForwardPass<T>& f, int class_idx) {
  check_class(class_idx);
  std::array<T, kClasses> d{};
  d[static_cast<std::size_t>(class_idx)] = 1;
  return detail::head_backward<T>(m, f, std::span<const T, kClasses>(d), nullptr);
}

inline LayerGradients backward_to_activations(const MiniCnn& m, const Tensor& image, int class_idx) {
  check_class(class_idx);
  return LayerGradients(activation_gradients(m, forward(m, image), class_idx));
}

template <typename T>
double softmax_positive(const std::array<T, kClasses>& logits) {
  const double d = static_cast<double>(logits[0]) - static_cast<double>(logits[1]);
  return 1.0 / (1.0 + std::exp(d));
}

/// Probability of class 1.
inline double predict_proba(const MiniCnn& m, const Tensor& image) {
  return softmax_positive(forward(m, image).logits);
}

inline int predicted_class(const std::array<float, kClasses>& logits) { return logits[1] > logits[0] ? 1 : 0; }

/// Scores an image by the raw logit of the requested class.
class MiniCnnOracle final : public ModelOracle {
 public:
  explicit MiniCnnOracle(const MiniCnn& m) : model_(m) {}
  double score(const Tensor& image, int class_idx) const override {
    check_class(class_idx);
    return forward(model_, image).logits[static_cast<std::size_t>(class_idx)];
  }

 private:
  const MiniCnn& model_;
};

// ---------------------------------------------------------------------------
// Initialization, checkpoints

/// Per-layer uniform weights in +-sqrt(6 / fan_in); zero biases.
inline MiniCnn init_model(std::uint64_t seed) {
  MiniCnn m;
  Rng rng(seed);
  auto fill = [&](Tensor& w, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : w.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  };
  fill(m.conv1_w, 1 * kKernel * kKernel);
  fill(m.conv2_w, kConv1Filters * kKernel * kKernel);
  fill(m.fc_w, kConv2Filters);
  return m;
}

inline Bundle to_bundle(const MiniCnn& m) {
  Bundle b;
  m.for_each_parameter([&](const char* name, const Tensor& t) { b.add(name, t); });
  return b;
}

inline MiniCnn from_bundle(const Bundle& b) {
  MiniCnn m;
  m.for_each_parameter([&](const char* name, Tensor& t) {
    const Tensor& src = b.get(name);
    if (src.dims() != t.dims()) {
      throw DimensionError(std::string("checkpoint entry ") + name + " has dims " + dims_to_string(src.dims()) +
                           ", expected " + dims_to_string(t.dims()));
    }
    t = src;
  });
  return m;
}

inline void save_checkpoint(const std::filesystem::path& path, const MiniCnn& m) { write_bundle(path, to_bundle(m)); }
inline MiniCnn load_checkpoint(const std::filesystem::path& path) { return from_bundle(read_bundle(path)); }

}  // namespace camstat::minicnn
