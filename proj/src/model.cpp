#include "modelraider/model.hpp"

#include <sstream>

namespace modelraider {

std::string shape_to_string(const Shape &dims) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims.size(); ++i)
    os << (i ? "," : "") << dims[i];
  os << ']';
  return os.str();
}

std::string_view kind_name(LayerKind kind) {
  switch (kind) {
  case LayerKind::Conv2d:
    return "conv2d";
  case LayerKind::DepthwiseConv2d:
    return "depthwise-conv2d";
  case LayerKind::Dense:
    return "dense";
  case LayerKind::Relu6:
    return "relu6";
  case LayerKind::Softmax:
    return "softmax";
  case LayerKind::GlobalAvgPool:
    return "global-avg-pool";
  case LayerKind::Flatten:
    return "flatten";
  }
  return "unknown";
}

std::optional<LayerKind> kind_from_code(std::uint8_t code) {
  if (code >= 1 && code <= 7)
    return static_cast<LayerKind>(code);
  return std::nullopt;
}

std::string_view dtype_name(DType dtype) {
  switch (dtype) {
  case DType::F32:
    return "float32";
  }
  return "unknown";
}

std::optional<DType> dtype_from_code(std::uint8_t code) {
  if (code == 1)
    return DType::F32;
  return std::nullopt;
}

int param_count(LayerKind kind) {
  switch (kind) {
  case LayerKind::Conv2d:
  case LayerKind::DepthwiseConv2d:
  case LayerKind::Dense:
    return 2;
  default:
    return 0;
  }
}

std::string_view param_name(LayerKind kind, int index) {
  if (index >= param_count(kind))
    return "";
  return index == 0 ? "weights" : "bias";
}

namespace {

// Smallest stride reproducing SAME-padding output extent ceil(in / stride).
std::optional<int> same_stride(int in, int out) {
  for (int s = 1; s <= in; ++s)
    if ((in + s - 1) / s == out)
      return s;
  return std::nullopt;
}

int same_pad_before(int in, int out, int stride, int kernel) {
  const int total = std::max((out - 1) * stride + kernel - in, 0);
  return total / 2;
}

void require(bool ok, int index, const std::string &what) {
  if (!ok)
    throw ShapeError(index, what);
}

} // namespace

LayerGeometry resolve_layer(int index, LayerKind kind, const Shape &input, const Shape &output,
                            const std::vector<std::int64_t> &param_sizes) {
  LayerGeometry g{input, output};
  const auto kname = std::string(kind_name(kind));
  require(static_cast<int>(param_sizes.size()) == param_count(kind), index,
          kname + " expects " + std::to_string(param_count(kind)) + " parameter tensors, got " +
              std::to_string(param_sizes.size()));
  for (int d : output)
    require(d > 0, index, "non-positive output dim in " + shape_to_string(output));
  require(!output.empty(), index, "empty output shape");

  switch (kind) {
  case LayerKind::Conv2d:
  case LayerKind::DepthwiseConv2d: {
    require(input.size() == 3 && output.size() == 3, index,
            kname + " needs HxWxC input/output, got " + shape_to_string(input) + " -> " +
                shape_to_string(output));
    const auto sh = same_stride(input[0], output[0]);
    const auto sw = same_stride(input[1], output[1]);
    require(sh && sw && *sh == *sw, index,
            "no common stride maps " + shape_to_string(input) + " to " + shape_to_string(output));
    g.stride = *sh;
    const std::int64_t cin = input[2], cout = output[2];
    std::int64_t per_tap = cin * cout;
    if (kind == LayerKind::DepthwiseConv2d) {
      require(cin == cout, index, "depthwise conv must preserve channels");
      per_tap = cin;
    }
    const std::int64_t taps = param_sizes[0] / per_tap;
    int k = 1;
    while (static_cast<std::int64_t>(k) * k < taps)
      ++k;
    require(param_sizes[0] % per_tap == 0 && static_cast<std::int64_t>(k) * k == taps, index,
            "weight count " + std::to_string(param_sizes[0]) + " is not a square kernel");
    require(param_sizes[1] == cout, index, "bias length " + std::to_string(param_sizes[1]) +
                                               " != channels " + std::to_string(cout));
    g.kernel = k;
    g.pad_top = same_pad_before(input[0], output[0], g.stride, k);
    g.pad_left = same_pad_before(input[1], output[1], g.stride, k);
    break;
  }
  case LayerKind::Dense:
    require(input.size() == 1 && output.size() == 1, index,
            "dense needs rank-1 input/output, got " + shape_to_string(input) + " -> " +
                shape_to_string(output));
    require(param_sizes[0] == static_cast<std::int64_t>(input[0]) * output[0], index,
            "weight count " + std::to_string(param_sizes[0]) + " != " +
                std::to_string(input[0]) + "x" + std::to_string(output[0]));
    require(param_sizes[1] == output[0], index, "bias length mismatch");
    break;
  case LayerKind::Relu6:
    require(input == output, index,
            "relu6 must preserve shape " + shape_to_string(input) + " != " +
                shape_to_string(output));
    break;
  case LayerKind::Softmax:
    require(input.size() == 1 && input == output, index,
            "softmax needs matching rank-1 shapes, got " + shape_to_string(input) + " -> " +
                shape_to_string(output));
    break;
  case LayerKind::GlobalAvgPool:
    require(input.size() == 3 && output == Shape{input[2]}, index,
            "global-avg-pool maps HxWxC to [C], got " + shape_to_string(input) + " -> " +
                shape_to_string(output));
    break;
  case LayerKind::Flatten:
    require(output.size() == 1 && output[0] == shape_size(input), index,
            "flatten output " + shape_to_string(output) + " does not hold " +
                shape_to_string(input));
    break;
  }
  return g;
}

void infer_param_dims(Model &model) {
  Shape current = model.input_shape;
  for (int k = 0; k < model.layer_count(); ++k) {
    auto &layer = model.layers[k];
    std::vector<std::int64_t> sizes;
    for (const auto &p : layer.params)
      sizes.push_back(p.size());
    try {
      const auto g = resolve_layer(k, layer.kind, current, layer.output_shape, sizes);
      if (layer.kind == LayerKind::Conv2d) {
        layer.params[0] = layer.params[0].reshaped({g.kernel, g.kernel, g.input[2], g.output[2]});
      } else if (layer.kind == LayerKind::DepthwiseConv2d) {
        layer.params[0] = layer.params[0].reshaped({g.kernel, g.kernel, g.input[2]});
      } else if (layer.kind == LayerKind::Dense) {
        layer.params[0] = layer.params[0].reshaped({g.input[0], g.output[0]});
      }
    } catch (const ShapeError &) {
      // left flat
    }
    current = layer.output_shape;
  }
}

ModelBuilder::ModelBuilder(Shape input_shape, std::uint64_t seed)
    : shape_(std::move(input_shape)), rng_(seed) {
  model_.input_shape = shape_;
}

Tensor ModelBuilder::glorot(Shape dims, std::int64_t fan_in, std::int64_t fan_out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(dims));
  for (Eigen::Index i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(dist(rng_));
  return t;
}

ModelBuilder &ModelBuilder::conv2d(std::string id, int kernel, int filters, int stride) {
  if (shape_.size() != 3)
    throw std::invalid_argument("conv2d needs HxWxC input");
  const int cin = shape_[2];
  Shape out{(shape_[0] + stride - 1) / stride, (shape_[1] + stride - 1) / stride, filters};
  Layer l{std::move(id), LayerKind::Conv2d, out, DType::F32, {}};
  l.params.push_back(glorot({kernel, kernel, cin, filters}, std::int64_t{kernel} * kernel * cin,
                            std::int64_t{kernel} * kernel * filters));
  l.params.push_back(Tensor::zeros({filters}));
  return append(std::move(l));
}

ModelBuilder &ModelBuilder::depthwise_conv2d(std::string id, int kernel, int stride) {
  if (shape_.size() != 3)
    throw std::invalid_argument("depthwise conv needs HxWxC input");
  const int c = shape_[2];
  Shape out{(shape_[0] + stride - 1) / stride, (shape_[1] + stride - 1) / stride, c};
  Layer l{std::move(id), LayerKind::DepthwiseConv2d, out, DType::F32, {}};
  l.params.push_back(glorot({kernel, kernel, c}, std::int64_t{kernel} * kernel,
                            std::int64_t{kernel} * kernel));
  l.params.push_back(Tensor::zeros({c}));
  return append(std::move(l));
}

ModelBuilder &ModelBuilder::dense(std::string id, int units) {
  if (shape_.size() != 1)
    throw std::invalid_argument("dense needs rank-1 input");
  Layer l{std::move(id), LayerKind::Dense, {units}, DType::F32, {}};
  l.params.push_back(glorot({shape_[0], units}, shape_[0], units));
  l.params.push_back(Tensor::zeros({units}));
  return append(std::move(l));
}

ModelBuilder &ModelBuilder::relu6(std::string id) {
  return append(Layer{std::move(id), LayerKind::Relu6, shape_, DType::F32, {}});
}

ModelBuilder &ModelBuilder::softmax(std::string id) {
  return append(Layer{std::move(id), LayerKind::Softmax, shape_, DType::F32, {}});
}

ModelBuilder &ModelBuilder::global_avg_pool(std::string id) {
  if (shape_.size() != 3)
    throw std::invalid_argument("global-avg-pool needs HxWxC input");
  return append(Layer{std::move(id), LayerKind::GlobalAvgPool, {shape_[2]}, DType::F32, {}});
}

ModelBuilder &ModelBuilder::flatten(std::string id) {
  return append(Layer{std::move(id), LayerKind::Flatten, {static_cast<int>(shape_size(shape_))},
                      DType::F32, {}});
}

ModelBuilder &ModelBuilder::append(Layer layer) {
  shape_ = layer.output_shape;
  model_.layers.push_back(std::move(layer));
  return *this;
}

Model ModelBuilder::build() const {
  Model m = model_;
  m.num_classes = shape_.size() == 1 ? shape_[0] : 0;
  m.trainable_mask.assign(m.layers.size(), true);
  return m;
}

} // namespace modelraider
