#include "modelraider/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace modelraider {

void TrainConfig::validate() const {
  if (!(learning_rate > 0))
    throw std::invalid_argument("learning_rate must be positive");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw std::invalid_argument("beta1 and beta2 must lie in [0, 1)");
  if (epochs < 0)
    throw std::invalid_argument("epochs must be non-negative");
  if (batch_size <= 0)
    throw std::invalid_argument("batch_size must be positive");
}

Trainer::Trainer(Model model, TrainConfig cfg)
    : model_(std::move(model)), cfg_(cfg), rng_(cfg.seed) {
  cfg_.validate();
  resolve_model(model_);
  m_.resize(model_.layers.size());
  v_.resize(model_.layers.size());
  for (int k = 0; k < model_.layer_count(); ++k) {
    if (!model_.trainable(k))
      continue;
    for (const auto &p : model_.layers[k].params) {
      m_[k].push_back(Tensor::Vector::Zero(p.size()));
      v_[k].push_back(Tensor::Vector::Zero(p.size()));
    }
  }
}

void Trainer::adam_step(const std::vector<std::vector<Tensor>> &grads) {
  ++step_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const float lr_t = static_cast<float>(cfg_.learning_rate * std::sqrt(c2) / c1);
  const float b1 = static_cast<float>(cfg_.beta1), b2 = static_cast<float>(cfg_.beta2);
  const float eps = static_cast<float>(cfg_.adam_epsilon);
  for (int k = 0; k < model_.layer_count(); ++k) {
    if (!model_.trainable(k))
      continue;
    auto &params = model_.layers[k].params;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto &g = grads[k][i].data;
      m_[k][i] = b1 * m_[k][i] + (1.0f - b1) * g;
      v_[k][i] = b2 * v_[k][i] + (1.0f - b2) * g.cwiseAbs2();
      params[i].data.array() -=
          lr_t * m_[k][i].array() / (v_[k][i].array().sqrt() + eps);
    }
  }
}

EpochStats Trainer::run_epoch(const LabeledDataset &data) {
  if (data.empty())
    throw std::invalid_argument("training data is empty");
  if (data.images.size() != data.labels.size())
    throw std::invalid_argument("images and labels differ in length");
  for (int label : data.labels)
    if (label < 0 || label >= model_.num_classes)
      throw std::out_of_range("label " + std::to_string(label) + " outside [0, " +
                              std::to_string(model_.num_classes) + ")");

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);

  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < order.size(); start += cfg_.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
    std::vector<Tensor> images;
    std::vector<int> labels;
    for (std::size_t i = start; i < end; ++i) {
      const auto &img = data.images[order[i]];
      images.push_back(cfg_.augment ? augment(img, rng_) : img);
      labels.push_back(data.labels[order[i]]);
    }
    auto r = param_gradients(model_, stack(images), labels);
    if (!std::isfinite(r.loss)) {
      std::ostringstream os;
      os << "non-finite loss at epoch " << epochs_run_ << ", batch starting at sample " << start;
      throw TrainingError(os.str());
    }
    const int n = r.probs.dims[1];
    for (std::size_t b = 0; b < labels.size(); ++b)
      if (argmax_lowest(r.probs.data.segment(static_cast<Eigen::Index>(b) * n, n)) == labels[b])
        ++correct;
    loss_sum += r.loss * static_cast<double>(labels.size());
    adam_step(r.params);
  }
  ++epochs_run_;
  return {loss_sum / static_cast<double>(data.size()),
          static_cast<double>(correct) / static_cast<double>(data.size())};
}

TrainResult train(Model model, const LabeledDataset &data, const TrainConfig &cfg) {
  if (data.empty())
    throw std::invalid_argument("training data is empty");
  Trainer trainer(std::move(model), cfg);
  TrainResult result;
  for (int e = 0; e < cfg.epochs; ++e)
    result.history.push_back(trainer.run_epoch(data));
  result.model = std::move(trainer).release();
  return result;
}

double accuracy(const Model &model, const LabeledDataset &data) {
  if (data.empty())
    return 0.0;
  const auto predicted = predict_labels(model, data.images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    correct += predicted[i] == data.labels[i];
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

Tensor apply_augmentation(const Tensor &image, const Augmentation &aug) {
  if (image.rank() != 3)
    throw std::invalid_argument("augmentation needs an HxWxC image, got " +
                                shape_to_string(image.dims));
  const int H = image.dims[0], W = image.dims[1], C = image.dims[2];
  const int turns = ((aug.quarter_turns % 4) + 4) % 4;
  if (turns % 2 == 1 && H != W)
    throw std::invalid_argument("quarter turn of a non-square image changes its dims");

  Tensor out(image.dims);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      // Source pixel after undoing the rotation, then the flip.
      int sy = y, sx = x;
      for (int t = 0; H == W && t < turns; ++t) {
        // inverse of one CCW turn on a square: (y, x) <- (x, W-1-y)
        const int ny = sx, nx = W - 1 - sy;
        sy = ny;
        sx = nx;
      }
      if (turns == 2 && H != W) {
        sy = H - 1 - y;
        sx = W - 1 - x;
      }
      if (aug.flip)
        sx = W - 1 - sx;
      for (int c = 0; c < C; ++c)
        out[(static_cast<Eigen::Index>(y) * W + x) * C + c] =
            image[(static_cast<Eigen::Index>(sy) * W + sx) * C + c];
    }
  return out;
}

Tensor augment(const Tensor &image, std::mt19937_64 &rng) {
  if (image.rank() != 3)
    throw std::invalid_argument("augmentation needs an HxWxC image, got " +
                                shape_to_string(image.dims));
  std::bernoulli_distribution coin(0.5);
  Augmentation aug;
  aug.flip = coin(rng);
  if (image.dims[0] == image.dims[1])
    aug.quarter_turns = std::uniform_int_distribution<int>(0, 3)(rng);
  else
    aug.quarter_turns = coin(rng) ? 2 : 0;
  return apply_augmentation(image, aug);
}

} // namespace modelraider
