#include <gtest/gtest.h>

#include <filesystem>

#include "camstat/synthetic.hpp"
#include "camstat/train.hpp"
#include "gradcheck.hpp"

using namespace camstat;
using namespace camstat::minicnn;

TEST(Conv, IdentityCenterKernelCopiesInput) {
  BasicTensor<double> in({1, 4, 4});
  for (std::size_t i = 0; i < 16; ++i) in[i] = static_cast<double>(i) - 5.0;
  BasicTensor<double> w({1, 1, 3, 3}, 0.0), b({1}, 0.0);
  w[4] = 1.0;
  EXPECT_EQ(minicnn::detail::conv3x3(in, w, b), in);
}

TEST(Conv, ZeroPaddingAtBorder) {
  BasicTensor<double> in({1, 3, 3}, 1.0);
  BasicTensor<double> w({1, 1, 3, 3}, 1.0), b({1}, 0.5);
  auto out = minicnn::detail::conv3x3(in, w, b);
  EXPECT_EQ(out.at(0, 0, 0), 4.5);
  EXPECT_EQ(out.at(0, 0, 1), 6.5);
  EXPECT_EQ(out.at(0, 1, 1), 9.5);
}

TEST(MaxPool, RoutesGradientToFirstArgmax) {
  BasicTensor<double> in({1, 2, 4}, std::vector<double>{3, 3, 1, 5, 3, 0, 5, 2});
  std::vector<std::uint32_t> arg;
  auto out = minicnn::detail::maxpool2(in, arg);
  EXPECT_EQ(out, BasicTensor<double>({1, 1, 2}, std::vector<double>{3, 5}));
  EXPECT_EQ(arg, (std::vector<std::uint32_t>{0, 3}));
  auto din = minicnn::detail::maxpool2_backward(BasicTensor<double>({1, 1, 2}, std::vector<double>{1, 2}), arg, in.dims());
  EXPECT_EQ(din, BasicTensor<double>({1, 2, 4}, std::vector<double>{1, 0, 0, 2, 0, 0, 0, 0}));
}

TEST(Forward, ShapesAndInputChecks) {
  const auto m = init_model(1);
  const auto f = forward(m, Tensor({1, 16, 12}, 0.5f));
  EXPECT_EQ(f.acts.dims(), (Dims{16, 8, 6}));
  EXPECT_EQ(f.p2.dims(), (Dims{16, 4, 3}));
  EXPECT_EQ(forward(m, Tensor({16, 12}, 0.5f)).logits, f.logits);
  EXPECT_THROW(forward(m, Tensor({1, 10, 12})), DimensionError);
  EXPECT_THROW(forward(m, Tensor({3, 16, 16})), DimensionError);
  EXPECT_EQ(logits_from_activations(m, f.acts), f.logits);
}

TEST(GradientCheck, ParametersBothClasses) {
  const auto m = gradcheck::random_net(3);
  const auto img = gradcheck::random_image(12, 4);
  for (int cls : {0, 1}) {
    auto o = gradcheck::check_parameters(m, img, cls, 60, 10 + cls);
    EXPECT_EQ(o.failed, 0) << "worst " << o.worst << " at " << o.worst_where;
  }
}

TEST(GradientCheck, Activations) {
  const auto m = gradcheck::random_net(5);
  const auto img = gradcheck::random_image(16, 6);
  auto o = gradcheck::check_activations(m, img, 1, 100, 7);
  EXPECT_EQ(o.failed, 0) << "worst " << o.worst << " at " << o.worst_where;
}

TEST(GradientCheck, FloatMatchesDoubleModel) {
  const auto m = init_model(9);
  Tensor img({1, 8, 8});
  Rng rng(2);
  for (auto& v : img.data()) v = static_cast<float>(rng.uniform());
  const auto gf = backward_to_activations(m, img, 1).maps;
  const auto fd = forward(m.cast<double>(), img.cast<double>());
  const auto gd = activation_gradients(m.cast<double>(), fd, 1);
  for (std::size_t i = 0; i < gf.size(); ++i) EXPECT_NEAR(gf[i], gd[i], 1e-5);
  EXPECT_THROW(backward_to_activations(m, img, 2), ParameterError);
}

TEST(Scheduler, DecaysAfterPatience) {
  PlateauScheduler s(0.001, 0.9, 10);
  EXPECT_TRUE(s.step(1.0));
  for (int i = 0; i < 9; ++i) s.step(1.0);
  EXPECT_DOUBLE_EQ(s.lr(), 0.001);
  s.step(1.5);
  EXPECT_DOUBLE_EQ(s.lr(), 0.001 * 0.9);
  for (int i = 0; i < 15; ++i) s.step(2.0);
  EXPECT_DOUBLE_EQ(s.lr(), 0.001 * 0.9 * 0.9);
  EXPECT_TRUE(s.step(0.5));
  EXPECT_DOUBLE_EQ(s.best(), 0.5);
}

TEST(Training, ClassWeights) {
  auto w = class_weights(std::vector<int>{0, 0, 0, 1});
  EXPECT_DOUBLE_EQ(w[0], 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(w[1], 2.0);
  EXPECT_THROW(class_weights(std::vector<int>{1, 1}), DegenerateClassError);
}

TEST(Training, LossDecreasesAndIsDeterministic) {
  SyntheticConfig sc;
  sc.count = 40;
  sc.size = 24;
  sc.min_radius = 3;
  sc.max_radius = 5;
  sc.seed = 1;
  auto samples = make_synthetic_dataset(sc);
  LabeledSet tr, va;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (i < 30 ? tr : va).images.push_back(samples[i].image);
    (i < 30 ? tr : va).labels.push_back(samples[i].label);
  }
  TrainConfig tc;
  tc.epochs = 8;
  tc.seed = 4;
  auto a = train(tr, va, tc);
  ASSERT_EQ(a.history.size(), 8u);
  EXPECT_LT(a.history.back().train_loss, a.history.front().train_loss);
  EXPECT_GE(a.best_epoch, 1);
  auto b = train(tr, va, tc);
  EXPECT_EQ(a.model, b.model);
  tc.epochs = 0;
  EXPECT_THROW(train(tr, va, tc), ConfigError);
}

TEST(Checkpoint, RoundTrip) {
  const auto m = init_model(77);
  const auto path = std::filesystem::temp_directory_path() / "camstat_ckpt_test.camb";
  save_checkpoint(path, m);
  EXPECT_EQ(load_checkpoint(path), m);
  std::filesystem::remove(path);
  Bundle b = to_bundle(m);
  Bundle bad;
  for (const auto& e : b.entries()) bad.add(e.name, e.name == "fc.w" ? Tensor({16, 2}) : e.tensor);
  EXPECT_THROW(from_bundle(bad), DimensionError);
}

TEST(Oracle, ScoresClassLogit) {
  const auto m = init_model(3);
  MiniCnnOracle o(m);
  Tensor img({1, 8, 8}, 0.3f);
  EXPECT_EQ(o.score(img, 1), forward(m, img).logits[1]);
  EXPECT_NEAR(predict_proba(m, img), softmax_positive(forward(m, img).logits), 0);
}
