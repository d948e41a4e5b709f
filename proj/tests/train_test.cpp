#include "support.hpp"

#include "modelraider/dsm.hpp"
#include "modelraider/train.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <limits>

using namespace modelraider;
using namespace modelraider::testing;

namespace {

/// 20 points in the plane, labelled by the side of x0 + x1 = 1 with a margin.
LabeledDataset separable_points(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  LabeledDataset d;
  while (d.size() < 20) {
    const float a = u(rng), b = u(rng);
    const float side = a + b - 1.0f;
    if (std::abs(side) < 0.2f)
      continue;
    d.add(Tensor({2}, Tensor::Vector{{a, b}}), side > 0 ? 1 : 0);
  }
  return d;
}

LabeledDataset random_images(int n, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LabeledDataset d;
  for (int i = 0; i < n; ++i)
    d.add(uniform_tensor({6, 6, 1}, rng), i % classes);
  return d;
}

TrainConfig quick(int epochs) {
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = epochs;
  cfg.batch_size = 4;
  cfg.seed = 11;
  return cfg;
}

} // namespace

TEST(Train, SeparableToySetReachesFullAccuracy) {
  const auto data = separable_points(3);
  const auto r = train(dense_softmax(2, 2, 5), data, quick(50));
  ASSERT_EQ(r.history.size(), 50u);
  EXPECT_DOUBLE_EQ(accuracy(r.model, data), 1.0);
  EXPECT_DOUBLE_EQ(r.history.back().accuracy, 1.0);
}

TEST(Train, ZeroEpochsLeavesParametersUnchanged) {
  const auto m = mixed_model({6, 6, 1}, 3, true, 2);
  const auto r = train(m, random_images(12, 3, 1), quick(0));
  EXPECT_TRUE(r.history.empty());
  EXPECT_EQ(serialize_model(r.model), serialize_model(m));
}

TEST(Train, SameSeedGivesIdenticalTrajectories) {
  const auto data = random_images(24, 3, 7);
  auto cfg = quick(3);
  cfg.augment = true;
  const auto a = train(mixed_model({6, 6, 1}, 3, false, 2), data, cfg);
  const auto b = train(mixed_model({6, 6, 1}, 3, false, 2), data, cfg);
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].loss, b.history[e].loss);
    EXPECT_EQ(a.history[e].accuracy, b.history[e].accuracy);
  }
  EXPECT_EQ(serialize_model(a.model), serialize_model(b.model));
}

TEST(Train, FrozenLayersNeverChange) {
  auto m = mixed_model({6, 6, 1}, 3, true, 2);
  m.freeze_prefix(5);
  const auto r = train(m, random_images(24, 3, 7), quick(4));
  for (int k = 0; k < m.layer_count(); ++k) {
    if (m.layers[k].params.empty())
      continue;
    const bool same = layer_param_bytes(m.layers[k]) == layer_param_bytes(r.model.layers[k]);
    EXPECT_EQ(same, k < 5) << "layer " << k;
  }
}

TEST(Train, NonFiniteLossAborts) {
  auto m = dense_softmax(2, 2);
  m.layers[0].params[0][0] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(train(m, separable_points(1), quick(1)), TrainingError);
}

TEST(Train, RejectsEmptyDataAndBadLabels) {
  EXPECT_THROW(train(dense_softmax(2, 2), LabeledDataset{}, quick(1)), std::invalid_argument);
  LabeledDataset bad;
  bad.add(Tensor::zeros({2}), 2);
  EXPECT_THROW(train(dense_softmax(2, 2), bad, quick(1)), std::out_of_range);
}

TEST(Train, RejectsInvalidConfig) {
  auto cfg = quick(1);
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = quick(1);
  cfg.beta1 = 1.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Augment, ForcedFlipTwiceIsIdentity) {
  std::mt19937_64 rng(2);
  const auto img = uniform_tensor({5, 7, 2}, rng);
  const auto once = apply_augmentation(img, {true, 0});
  EXPECT_NE(once.data, img.data);
  EXPECT_EQ(apply_augmentation(once, {true, 0}).data, img.data);
}

TEST(Augment, ZeroRotationIsIdentity) {
  std::mt19937_64 rng(2);
  const auto img = uniform_tensor({4, 4, 3}, rng);
  EXPECT_EQ(apply_augmentation(img, {false, 0}).data, img.data);
  EXPECT_EQ(apply_augmentation(img, {false, 4}).data, img.data);
}

TEST(Augment, QuarterTurnMovesCorner) {
  Tensor img = Tensor::zeros({3, 3, 1});
  img[0] = 1.0f; // top-left
  const auto r = apply_augmentation(img, {false, 1});
  // Counter-clockwise: top-left goes to bottom-left.
  EXPECT_EQ(r[6], 1.0f);
}

TEST(Augment, PreservesDimsAndPixelMultiset) {
  std::mt19937_64 rng(9);
  for (const Shape &dims : {Shape{6, 6, 1}, Shape{4, 7, 2}}) {
    for (int i = 0; i < 50; ++i) {
      const auto img = uniform_tensor(dims, rng);
      const auto out = augment(img, rng);
      ASSERT_EQ(out.dims, img.dims);
      std::vector<float> a(img.data.begin(), img.data.end()), b(out.data.begin(), out.data.end());
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      EXPECT_EQ(a, b);
    }
  }
}

TEST(Augment, NonImageDimsRejected) {
  std::mt19937_64 rng(1);
  EXPECT_THROW(augment(Tensor::zeros({5}), rng), std::invalid_argument);
  EXPECT_THROW(apply_augmentation(Tensor::zeros({4, 5, 1}), {false, 1}), std::invalid_argument);
}
