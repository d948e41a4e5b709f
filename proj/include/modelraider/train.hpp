#ifndef MODELRAIDER_TRAIN_HPP
#define MODELRAIDER_TRAIN_HPP

#include "modelraider/engine.hpp"

#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace modelraider {

struct LabeledDataset {
  std::vector<Tensor> images;
  std::vector<int> labels;

  std::size_t size() const { return images.size(); }
  bool empty() const { return images.empty(); }
  void add(Tensor image, int label) {
    images.push_back(std::move(image));
    labels.push_back(label);
  }
};

/// Adam hyper-parameters default to learning rate 1e-3, beta1 0.9, beta2 0.999.
struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-7;
  int epochs = 10;
  int batch_size = 32;
  std::uint64_t seed = 0;
  bool augment = false;

  void validate() const;
};

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
};

/// Raised when a batch produces a NaN/Inf loss; training stops there.
class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Mini-batch Adam over the trainable layers of a private copy of a model.
/// Kept as an object so callers can train epoch by epoch with persistent
/// optimiser state.
class Trainer {
public:
  Trainer(Model model, TrainConfig cfg);

  EpochStats run_epoch(const LabeledDataset &data);

  const Model &model() const { return model_; }
  Model release() && { return std::move(model_); }
  int epochs_run() const { return epochs_run_; }

private:
  void adam_step(const std::vector<std::vector<Tensor>> &grads);

  Model model_;
  TrainConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<std::vector<Tensor::Vector>> m_, v_;
  std::int64_t step_ = 0;
  int epochs_run_ = 0;
};

/// Trains a copy of `model` for cfg.epochs. Identical inputs give
/// bit-identical parameters and history.
TrainResult train(Model model, const LabeledDataset &data, const TrainConfig &cfg);

/// Fraction of images whose prediction equals the label.
double accuracy(const Model &model, const LabeledDataset &data);

struct Augmentation {
  bool flip = false;    // horizontal mirror, applied first
  int quarter_turns = 0; // counter-clockwise rotation by 90 degrees each
};

/// Applies a fixed augmentation to an HxWxC image. Odd quarter turns need a
/// square image.
Tensor apply_augmentation(const Tensor &image, const Augmentation &aug);

/// Samples a flip with p = 0.5 and a uniformly random multiple of 90 degrees
/// (0 or 180 only for non-square images), then applies it.
Tensor augment(const Tensor &image, std::mt19937_64 &rng);

} // namespace modelraider

#endif // MODELRAIDER_TRAIN_HPP
