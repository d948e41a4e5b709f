#ifndef MODELRAIDER_MODEL_HPP
#define MODELRAIDER_MODEL_HPP

#include "modelraider/tensor.hpp"

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace modelraider {

/// On-disk codes are the enumerator values; do not renumber.
enum class LayerKind : std::uint8_t {
  Conv2d = 1,
  DepthwiseConv2d = 2,
  Dense = 3,
  Relu6 = 4,
  Softmax = 5,
  GlobalAvgPool = 6,
  Flatten = 7,
};

enum class DType : std::uint8_t { F32 = 1 };

std::string_view kind_name(LayerKind kind);
std::optional<LayerKind> kind_from_code(std::uint8_t code);
std::string_view dtype_name(DType dtype);
std::optional<DType> dtype_from_code(std::uint8_t code);

/// Number of parameter tensors a layer kind carries (weights, bias).
int param_count(LayerKind kind);
std::string_view param_name(LayerKind kind, int index);

/// Raised when a layer's declared shapes or parameters do not line up with
/// its input. `layer` is the zero-based index of the offending layer.
class ShapeError : public std::runtime_error {
public:
  ShapeError(int layer, const std::string &what)
      : std::runtime_error("shape mismatch at layer " + std::to_string(layer) + ": " + what),
        layer_(layer) {}
  int layer() const { return layer_; }

private:
  int layer_;
};

template <typename Scalar> struct BasicLayer {
  std::string id;
  LayerKind kind = LayerKind::Dense;
  Shape output_shape; // excludes batch
  DType dtype = DType::F32;
  std::vector<BasicTensor<Scalar>> params;

  template <typename Other> BasicLayer<Other> cast() const {
    BasicLayer<Other> out{id, kind, output_shape, dtype, {}};
    for (const auto &p : params)
      out.params.push_back(p.template cast<Other>());
    return out;
  }
};

template <typename Scalar> struct BasicModel {
  std::vector<BasicLayer<Scalar>> layers;
  Shape input_shape;
  int num_classes = 0;
  /// true = updated during training. Frozen layers always form a prefix.
  std::vector<bool> trainable_mask;

  int layer_count() const { return static_cast<int>(layers.size()); }

  bool trainable(int layer) const {
    return layer < static_cast<int>(trainable_mask.size()) && trainable_mask[layer];
  }

  /// Number of leading frozen layers (F).
  int frozen_count() const {
    int f = 0;
    while (f < layer_count() && !trainable(f))
      ++f;
    return f;
  }

  /// Freezes the first `frozen` layers and marks the rest trainable.
  void freeze_prefix(int frozen) {
    trainable_mask.assign(layers.size(), true);
    for (int k = 0; k < frozen && k < layer_count(); ++k)
      trainable_mask[k] = false;
  }

  template <typename Other> BasicModel<Other> cast() const {
    BasicModel<Other> out;
    out.input_shape = input_shape;
    out.num_classes = num_classes;
    out.trainable_mask = trainable_mask;
    for (const auto &l : layers)
      out.layers.push_back(l.template cast<Other>());
    return out;
  }
};

using Layer = BasicLayer<float>;
using Model = BasicModel<float>;

/// Resolved geometry for one layer: everything the engine needs to run it.
struct LayerGeometry {
  Shape input;
  Shape output;
  // conv / depthwise only
  int kernel = 0;
  int stride = 1;
  int pad_top = 0;
  int pad_left = 0;
};

/// Validates a layer against its input shape and parameter element counts.
/// Throws ShapeError naming `index` on any inconsistency.
LayerGeometry resolve_layer(int index, LayerKind kind, const Shape &input, const Shape &output,
                            const std::vector<std::int64_t> &param_sizes);

/// Resolves every layer in order and checks the classifier contract (last
/// layer is softmax over num_classes, mask length). Throws ShapeError.
template <typename Scalar> std::vector<LayerGeometry> resolve_model(const BasicModel<Scalar> &m) {
  std::vector<LayerGeometry> geo;
  geo.reserve(m.layers.size());
  Shape current = m.input_shape;
  for (int k = 0; k < m.layer_count(); ++k) {
    const auto &layer = m.layers[k];
    std::vector<std::int64_t> sizes;
    for (const auto &p : layer.params)
      sizes.push_back(p.size());
    geo.push_back(resolve_layer(k, layer.kind, current, layer.output_shape, sizes));
    current = layer.output_shape;
  }
  const int last = m.layer_count() - 1;
  if (last < 0)
    throw ShapeError(0, "model has no layers");
  if (m.layers[last].kind != LayerKind::Softmax || current != Shape{m.num_classes})
    throw ShapeError(last, "last layer must be softmax over " + std::to_string(m.num_classes) +
                               " classes, got " + std::string(kind_name(m.layers[last].kind)) +
                               " " + shape_to_string(current));
  if (!m.trainable_mask.empty() && m.trainable_mask.size() != m.layers.size())
    throw ShapeError(0, "trainable mask length differs from layer count");
  return geo;
}

/// Restores canonical parameter dims (e.g. conv weights [k,k,cin,cout]) on a
/// model whose parameters were loaded flat. Layers that do not resolve keep
/// their flat parameters; the engine reports them when run.
void infer_param_dims(Model &model);

/// Appends layers while tracking the running output shape. Weights use
/// Glorot-uniform initialisation from a seeded generator; biases start at 0.
class ModelBuilder {
public:
  ModelBuilder(Shape input_shape, std::uint64_t seed);

  ModelBuilder &conv2d(std::string id, int kernel, int filters, int stride = 1);
  ModelBuilder &depthwise_conv2d(std::string id, int kernel, int stride = 1);
  ModelBuilder &dense(std::string id, int units);
  ModelBuilder &relu6(std::string id);
  ModelBuilder &softmax(std::string id);
  ModelBuilder &global_avg_pool(std::string id);
  ModelBuilder &flatten(std::string id);

  /// Appends an already-built layer (e.g. copied from a pre-trained base).
  ModelBuilder &append(Layer layer);

  const Shape &current_shape() const { return shape_; }

  /// All layers trainable; num_classes taken from the final shape.
  Model build() const;

private:
  Tensor glorot(Shape dims, std::int64_t fan_in, std::int64_t fan_out);

  Model model_;
  Shape shape_;
  std::mt19937_64 rng_;
};

} // namespace modelraider

#endif // MODELRAIDER_MODEL_HPP
