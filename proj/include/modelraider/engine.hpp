#ifndef MODELRAIDER_ENGINE_HPP
#define MODELRAIDER_ENGINE_HPP

// Forward inference and reverse-mode gradients for BasicModel. Templated on
// the scalar so the same code path runs in float (production) and double
// (finite-difference checks).

#include "modelraider/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace modelraider {

inline constexpr double kProbabilityClamp = 1e-12;

template <typename Scalar> struct Trace {
  std::vector<LayerGeometry> geometry;
  /// activations[0] is the input batch; activations[k + 1] is layer k's output.
  std::vector<BasicTensor<Scalar>> activations;

  const BasicTensor<Scalar> &output() const { return activations.back(); }
};

template <typename Scalar> struct Gradients {
  /// Per layer, per parameter. Empty for frozen (or unrequested) layers.
  std::vector<std::vector<BasicTensor<Scalar>>> params;
  BasicTensor<Scalar> input;
};

namespace detail {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar> using RowMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar> using ConstRowMap = Eigen::Map<const RowMatrix<Scalar>>;

// Patch matrix for one image: rows = output pixels, cols = (ky, kx, ci).
template <typename Scalar>
RowMatrix<Scalar> im2col(const Scalar *img, const LayerGeometry &g) {
  const int H = g.input[0], W = g.input[1], C = g.input[2];
  const int Ho = g.output[0], Wo = g.output[1], k = g.kernel;
  RowMatrix<Scalar> P = RowMatrix<Scalar>::Zero(Ho * Wo, k * k * C);
  for (int oy = 0; oy < Ho; ++oy)
    for (int ox = 0; ox < Wo; ++ox) {
      Scalar *row = P.data() + static_cast<Eigen::Index>(oy * Wo + ox) * k * k * C;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * g.stride + ky - g.pad_top;
        if (iy < 0 || iy >= H)
          continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * g.stride + kx - g.pad_left;
          if (ix < 0 || ix >= W)
            continue;
          std::copy_n(img + (static_cast<Eigen::Index>(iy) * W + ix) * C, C,
                      row + (ky * k + kx) * C);
        }
      }
    }
  return P;
}

template <typename Scalar>
void col2im_add(const RowMatrix<Scalar> &dP, Scalar *dimg, const LayerGeometry &g) {
  const int W = g.input[1], H = g.input[0], C = g.input[2];
  const int Ho = g.output[0], Wo = g.output[1], k = g.kernel;
  for (int oy = 0; oy < Ho; ++oy)
    for (int ox = 0; ox < Wo; ++ox) {
      const Scalar *row = dP.data() + static_cast<Eigen::Index>(oy * Wo + ox) * k * k * C;
      for (int ky = 0; ky < k; ++ky) {
        const int iy = oy * g.stride + ky - g.pad_top;
        if (iy < 0 || iy >= H)
          continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = ox * g.stride + kx - g.pad_left;
          if (ix < 0 || ix >= W)
            continue;
          Scalar *dst = dimg + (static_cast<Eigen::Index>(iy) * W + ix) * C;
          const Scalar *src = row + (ky * k + kx) * C;
          for (int c = 0; c < C; ++c)
            dst[c] += src[c];
        }
      }
    }
}

template <typename Scalar>
void conv2d_forward(const BasicLayer<Scalar> &layer, const LayerGeometry &g, int batch,
                    const Scalar *in, Scalar *out) {
  const Eigen::Index in_n = shape_size(g.input), out_n = shape_size(g.output);
  const int cout = g.output[2];
  ConstRowMap<Scalar> Wm(layer.params[0].data.data(),
                         static_cast<Eigen::Index>(g.kernel) * g.kernel * g.input[2], cout);
  const auto bias = layer.params[1].data.transpose();
  for (int b = 0; b < batch; ++b) {
    const auto P = im2col(in + b * in_n, g);
    RowMap<Scalar> Y(out + b * out_n, P.rows(), cout);
    Y.noalias() = P * Wm;
    Y.rowwise() += bias;
  }
}

template <typename Scalar>
void conv2d_backward(const BasicLayer<Scalar> &layer, const LayerGeometry &g, int batch,
                     const Scalar *in, const Scalar *dout, Scalar *din,
                     std::vector<BasicTensor<Scalar>> *dparams) {
  const Eigen::Index in_n = shape_size(g.input), out_n = shape_size(g.output);
  const int cout = g.output[2];
  const Eigen::Index kkc = static_cast<Eigen::Index>(g.kernel) * g.kernel * g.input[2];
  ConstRowMap<Scalar> Wm(layer.params[0].data.data(), kkc, cout);
  RowMatrix<Scalar> dW;
  if (dparams)
    dW = RowMatrix<Scalar>::Zero(kkc, cout);
  for (int b = 0; b < batch; ++b) {
    ConstRowMap<Scalar> dY(dout + b * out_n, g.output[0] * g.output[1], cout);
    if (dparams) {
      const auto P = im2col(in + b * in_n, g);
      dW.noalias() += P.transpose() * dY;
      (*dparams)[1].data += dY.colwise().sum().transpose();
    }
    if (din) {
      RowMatrix<Scalar> dP = dY * Wm.transpose();
      col2im_add(dP, din + b * in_n, g);
    }
  }
  if (dparams)
    (*dparams)[0].data = Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>>(
        dW.data(), dW.size());
}

template <typename Scalar>
void depthwise_forward(const BasicLayer<Scalar> &layer, const LayerGeometry &g, int batch,
                       const Scalar *in, Scalar *out) {
  const int H = g.input[0], W = g.input[1], C = g.input[2];
  const int Ho = g.output[0], Wo = g.output[1], k = g.kernel;
  const Scalar *w = layer.params[0].data.data();
  const Scalar *bias = layer.params[1].data.data();
  const Eigen::Index in_n = shape_size(g.input), out_n = shape_size(g.output);
  for (int b = 0; b < batch; ++b) {
    const Scalar *img = in + b * in_n;
    Scalar *o = out + b * out_n;
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        Scalar *dst = o + (static_cast<Eigen::Index>(oy) * Wo + ox) * C;
        std::copy_n(bias, C, dst);
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * g.stride + ky - g.pad_top;
          if (iy < 0 || iy >= H)
            continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * g.stride + kx - g.pad_left;
            if (ix < 0 || ix >= W)
              continue;
            const Scalar *src = img + (static_cast<Eigen::Index>(iy) * W + ix) * C;
            const Scalar *wk = w + (ky * k + kx) * C;
            for (int c = 0; c < C; ++c)
              dst[c] += src[c] * wk[c];
          }
        }
      }
  }
}

template <typename Scalar>
void depthwise_backward(const BasicLayer<Scalar> &layer, const LayerGeometry &g, int batch,
                        const Scalar *in, const Scalar *dout, Scalar *din,
                        std::vector<BasicTensor<Scalar>> *dparams) {
  const int H = g.input[0], W = g.input[1], C = g.input[2];
  const int Ho = g.output[0], Wo = g.output[1], k = g.kernel;
  const Scalar *w = layer.params[0].data.data();
  const Eigen::Index in_n = shape_size(g.input), out_n = shape_size(g.output);
  Scalar *dw = dparams ? (*dparams)[0].data.data() : nullptr;
  Scalar *db = dparams ? (*dparams)[1].data.data() : nullptr;
  for (int b = 0; b < batch; ++b) {
    const Scalar *img = in + b * in_n;
    Scalar *dimg = din ? din + b * in_n : nullptr;
    const Scalar *dy = dout + b * out_n;
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) {
        const Scalar *g_out = dy + (static_cast<Eigen::Index>(oy) * Wo + ox) * C;
        if (db)
          for (int c = 0; c < C; ++c)
            db[c] += g_out[c];
        for (int ky = 0; ky < k; ++ky) {
          const int iy = oy * g.stride + ky - g.pad_top;
          if (iy < 0 || iy >= H)
            continue;
          for (int kx = 0; kx < k; ++kx) {
            const int ix = ox * g.stride + kx - g.pad_left;
            if (ix < 0 || ix >= W)
              continue;
            const Eigen::Index at = (static_cast<Eigen::Index>(iy) * W + ix) * C;
            const int tap = (ky * k + kx) * C;
            for (int c = 0; c < C; ++c) {
              if (dw)
                dw[tap + c] += img[at + c] * g_out[c];
              if (dimg)
                dimg[at + c] += w[tap + c] * g_out[c];
            }
          }
        }
      }
  }
}

} // namespace detail

/// Runs every layer, keeping all intermediate activations for backward().
/// Throws ShapeError on a batch/model mismatch, naming the offending layer.
template <typename Scalar>
Trace<Scalar> forward_trace(const BasicModel<Scalar> &model, const BasicTensor<Scalar> &batch) {
  Trace<Scalar> t;
  t.geometry = resolve_model(model);
  if (batch.rank() != static_cast<int>(model.input_shape.size()) + 1 ||
      !std::equal(model.input_shape.begin(), model.input_shape.end(), batch.dims.begin() + 1))
    throw ShapeError(0, "batch dims " + shape_to_string(batch.dims) + " do not match input " +
                            shape_to_string(model.input_shape));
  const int B = batch.dims[0];
  t.activations.reserve(model.layers.size() + 1);
  t.activations.push_back(batch);
  for (int k = 0; k < model.layer_count(); ++k) {
    const auto &layer = model.layers[k];
    const auto &g = t.geometry[k];
    const auto &x = t.activations.back();
    Shape dims{B};
    dims.insert(dims.end(), g.output.begin(), g.output.end());
    BasicTensor<Scalar> y(dims);
    switch (layer.kind) {
    case LayerKind::Conv2d:
      detail::conv2d_forward(layer, g, B, x.data.data(), y.data.data());
      break;
    case LayerKind::DepthwiseConv2d:
      detail::depthwise_forward(layer, g, B, x.data.data(), y.data.data());
      break;
    case LayerKind::Dense: {
      detail::ConstRowMap<Scalar> X(x.data.data(), B, g.input[0]);
      detail::ConstRowMap<Scalar> Wm(layer.params[0].data.data(), g.input[0], g.output[0]);
      detail::RowMap<Scalar> Y(y.data.data(), B, g.output[0]);
      Y.noalias() = X * Wm;
      Y.rowwise() += layer.params[1].data.transpose();
      break;
    }
    case LayerKind::Relu6:
      y.data = x.data.cwiseMax(Scalar(0)).cwiseMin(Scalar(6));
      break;
    case LayerKind::Softmax: {
      detail::ConstRowMap<Scalar> X(x.data.data(), B, g.input[0]);
      detail::RowMap<Scalar> Y(y.data.data(), B, g.input[0]);
      for (int b = 0; b < B; ++b) {
        Y.row(b) = (X.row(b).array() - X.row(b).maxCoeff()).exp();
        Y.row(b) /= Y.row(b).sum();
      }
      break;
    }
    case LayerKind::GlobalAvgPool: {
      const int hw = g.input[0] * g.input[1], C = g.input[2];
      for (int b = 0; b < B; ++b) {
        detail::ConstRowMap<Scalar> X(x.data.data() + static_cast<Eigen::Index>(b) * hw * C, hw,
                                      C);
        y.data.segment(static_cast<Eigen::Index>(b) * C, C) =
            X.colwise().mean().transpose();
      }
      break;
    }
    case LayerKind::Flatten:
      y.data = x.data;
      break;
    }
    t.activations.push_back(std::move(y));
  }
  return t;
}

/// Probabilities, dims [B, num_classes].
template <typename Scalar>
BasicTensor<Scalar> forward(const BasicModel<Scalar> &model, const BasicTensor<Scalar> &batch) {
  return forward_trace(model, batch).output();
}

/// Pre-softmax activations of the final layer, dims [B, num_classes].
template <typename Scalar> const BasicTensor<Scalar> &logits_of(const Trace<Scalar> &t) {
  return t.activations[t.activations.size() - 2];
}

/// Back-propagates `grad`, the gradient w.r.t. the output of layer `from`,
/// down to the input. Parameter gradients are produced for trainable layers
/// only when `want_params` is set.
template <typename Scalar>
Gradients<Scalar> backward(const BasicModel<Scalar> &model, const Trace<Scalar> &trace,
                           BasicTensor<Scalar> grad, int from, bool want_params,
                           bool want_input = true) {
  Gradients<Scalar> out;
  out.params.resize(model.layers.size());
  const int B = trace.activations[0].dims[0];
  int lowest = 0;
  if (!want_input) {
    // Nothing below the first trainable layer needs a gradient.
    lowest = model.layer_count();
    for (int k = 0; k < model.layer_count(); ++k)
      if (model.trainable(k)) {
        lowest = k;
        break;
      }
  }
  for (int k = from; k >= lowest; --k) {
    const auto &layer = model.layers[k];
    const auto &g = trace.geometry[k];
    const auto &x = trace.activations[k];
    const auto &y = trace.activations[k + 1];
    const bool params_here = want_params && model.trainable(k) && !layer.params.empty();
    std::vector<BasicTensor<Scalar>> dparams;
    if (params_here)
      for (const auto &p : layer.params)
        dparams.emplace_back(p.dims);
    const bool need_din = k > lowest || want_input;
    BasicTensor<Scalar> dx(x.dims);
    switch (layer.kind) {
    case LayerKind::Conv2d:
      detail::conv2d_backward(layer, g, B, x.data.data(), grad.data.data(),
                              need_din ? dx.data.data() : nullptr,
                              params_here ? &dparams : nullptr);
      break;
    case LayerKind::DepthwiseConv2d:
      detail::depthwise_backward(layer, g, B, x.data.data(), grad.data.data(),
                                 need_din ? dx.data.data() : nullptr,
                                 params_here ? &dparams : nullptr);
      break;
    case LayerKind::Dense: {
      detail::ConstRowMap<Scalar> X(x.data.data(), B, g.input[0]);
      detail::ConstRowMap<Scalar> dY(grad.data.data(), B, g.output[0]);
      detail::ConstRowMap<Scalar> Wm(layer.params[0].data.data(), g.input[0], g.output[0]);
      if (params_here) {
        detail::RowMap<Scalar> dW(dparams[0].data.data(), g.input[0], g.output[0]);
        dW.noalias() = X.transpose() * dY;
        dparams[1].data = dY.colwise().sum().transpose();
      }
      if (need_din) {
        detail::RowMap<Scalar> dX(dx.data.data(), B, g.input[0]);
        dX.noalias() = dY * Wm.transpose();
      }
      break;
    }
    case LayerKind::Relu6:
      dx.data = (x.data.array() > Scalar(0) && x.data.array() < Scalar(6))
                    .select(grad.data, Scalar(0));
      break;
    case LayerKind::Softmax: {
      detail::ConstRowMap<Scalar> Y(y.data.data(), B, g.input[0]);
      detail::ConstRowMap<Scalar> dY(grad.data.data(), B, g.input[0]);
      detail::RowMap<Scalar> dX(dx.data.data(), B, g.input[0]);
      for (int b = 0; b < B; ++b)
        dX.row(b) = Y.row(b).cwiseProduct(
            (dY.row(b).array() - dY.row(b).dot(Y.row(b))).matrix());
      break;
    }
    case LayerKind::GlobalAvgPool: {
      const int hw = g.input[0] * g.input[1], C = g.input[2];
      for (int b = 0; b < B; ++b) {
        detail::RowMap<Scalar> dX(dx.data.data() + static_cast<Eigen::Index>(b) * hw * C, hw, C);
        dX.rowwise() = grad.data.segment(static_cast<Eigen::Index>(b) * C, C).transpose() /
                       static_cast<Scalar>(hw);
      }
      break;
    }
    case LayerKind::Flatten:
      dx.data = grad.data;
      break;
    }
    if (params_here)
      out.params[k] = std::move(dparams);
    grad = std::move(dx);
  }
  if (want_input && lowest == 0)
    out.input = std::move(grad);
  return out;
}

/// Mean sparse categorical cross-entropy of probability rows, p clamped at
/// 1e-12 before the log.
template <typename Scalar>
double loss_sce(const BasicTensor<Scalar> &probs, const std::vector<int> &labels) {
  if (probs.rank() != 2 || probs.dims[0] != static_cast<int>(labels.size()))
    throw std::invalid_argument("loss_sce: probs " + shape_to_string(probs.dims) + " vs " +
                                std::to_string(labels.size()) + " labels");
  const int B = probs.dims[0], n = probs.dims[1];
  double total = 0.0;
  for (int b = 0; b < B; ++b) {
    if (labels[b] < 0 || labels[b] >= n)
      throw std::out_of_range("label " + std::to_string(labels[b]) + " outside [0, " +
                              std::to_string(n) + ")");
    const double p = static_cast<double>(probs.data[static_cast<Eigen::Index>(b) * n + labels[b]]);
    total -= std::log(std::max(p, kProbabilityClamp));
  }
  return B ? total / B : 0.0;
}

/// d loss_sce / d logits for a softmax-terminated model: (p - onehot) / B,
/// zeroed for rows whose label probability sits below the clamp.
template <typename Scalar>
BasicTensor<Scalar> loss_grad_logits(const BasicTensor<Scalar> &probs,
                                     const std::vector<int> &labels) {
  const int B = probs.dims[0], n = probs.dims[1];
  BasicTensor<Scalar> g(probs.dims);
  for (int b = 0; b < B; ++b) {
    if (labels[b] < 0 || labels[b] >= n)
      throw std::out_of_range("label " + std::to_string(labels[b]) + " outside [0, " +
                              std::to_string(n) + ")");
    const Eigen::Index row = static_cast<Eigen::Index>(b) * n;
    if (static_cast<double>(probs.data[row + labels[b]]) < kProbabilityClamp)
      continue;
    g.data.segment(row, n) = probs.data.segment(row, n) / static_cast<Scalar>(B);
    g.data[row + labels[b]] -= Scalar(1) / static_cast<Scalar>(B);
  }
  return g;
}

template <typename Scalar> struct LossAndGradients {
  double loss = 0.0;
  BasicTensor<Scalar> probs;
  std::vector<std::vector<BasicTensor<Scalar>>> params;
};

/// Gradients of loss_sce(forward(model, batch), labels) w.r.t. every
/// parameter of trainable layers. Frozen layers get empty entries.
template <typename Scalar>
LossAndGradients<Scalar> param_gradients(const BasicModel<Scalar> &model,
                                         const BasicTensor<Scalar> &batch,
                                         const std::vector<int> &labels) {
  auto trace = forward_trace(model, batch);
  LossAndGradients<Scalar> r;
  r.probs = trace.output();
  r.loss = loss_sce(r.probs, labels);
  const int last = model.layer_count() - 1;
  auto g = backward(model, trace, loss_grad_logits(r.probs, labels), last - 1, true, false);
  g.params.resize(model.layers.size());
  r.params = std::move(g.params);
  return r;
}

/// Gradient of the loss w.r.t. one unbatched input `x`.
template <typename Scalar>
BasicTensor<Scalar> input_gradient(const BasicModel<Scalar> &model, const BasicTensor<Scalar> &x,
                                   int label) {
  if (x.dims != model.input_shape)
    throw ShapeError(0, "input dims " + shape_to_string(x.dims) + " do not match " +
                            shape_to_string(model.input_shape));
  const auto trace = forward_trace(model, stack(std::vector<BasicTensor<Scalar>>{x}));
  const int last = model.layer_count() - 1;
  auto g = backward(model, trace, loss_grad_logits(trace.output(), {label}), last - 1, false);
  return g.input.reshaped(x.dims);
}

template <typename Scalar> struct Prediction {
  int label = 0;
  BasicTensor<Scalar> probs;
};

/// Index of the largest entry; ties go to the lowest index.
template <typename Derived> int argmax_lowest(const Eigen::MatrixBase<Derived> &v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best))
      best = static_cast<int>(i);
  return best;
}

template <typename Scalar>
Prediction<Scalar> predict(const BasicModel<Scalar> &model, const BasicTensor<Scalar> &x) {
  if (x.dims != model.input_shape)
    throw ShapeError(0, "input dims " + shape_to_string(x.dims) + " do not match " +
                            shape_to_string(model.input_shape));
  auto probs = forward(model, stack(std::vector<BasicTensor<Scalar>>{x}));
  Prediction<Scalar> p;
  p.probs = probs.reshaped({model.num_classes});
  p.label = argmax_lowest(p.probs.data);
  return p;
}

/// Class predictions for a list of images, evaluated in chunks.
template <typename Scalar>
std::vector<int> predict_labels(const BasicModel<Scalar> &model,
                                const std::vector<BasicTensor<Scalar>> &images,
                                int chunk = 64) {
  std::vector<int> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += chunk) {
    const std::size_t end = std::min(images.size(), start + static_cast<std::size_t>(chunk));
    std::vector<BasicTensor<Scalar>> part(images.begin() + start, images.begin() + end);
    const auto probs = forward(model, stack(part));
    const int n = probs.dims[1];
    for (std::size_t i = 0; i < part.size(); ++i)
      out.push_back(argmax_lowest(probs.data.segment(static_cast<Eigen::Index>(i) * n, n)));
  }
  return out;
}

} // namespace modelraider

#endif // MODELRAIDER_ENGINE_HPP
