#ifndef MODELRAIDER_TENSOR_HPP
#define MODELRAIDER_TENSOR_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace modelraider {

/// Dimensions of a tensor, outermost first.
using Shape = std::vector<int>;

inline std::int64_t shape_size(const Shape &dims) {
  return std::accumulate(dims.begin(), dims.end(), std::int64_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape &dims);

/// Dense row-major tensor. The flat storage is an Eigen column vector so
/// element-wise and norm expressions can be written directly against `data`.
template <typename Scalar> struct BasicTensor {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Shape dims;
  Vector data;

  BasicTensor() = default;
  explicit BasicTensor(Shape d) : dims(std::move(d)), data(Vector::Zero(shape_size(dims))) {}
  BasicTensor(Shape d, Vector v) : dims(std::move(d)), data(std::move(v)) {
    if (shape_size(dims) != data.size())
      throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                  " does not match dims " + shape_to_string(dims));
  }

  static BasicTensor zeros(Shape d) { return BasicTensor(std::move(d)); }
  static BasicTensor constant(Shape d, Scalar v) {
    BasicTensor t(std::move(d));
    t.data.setConstant(v);
    return t;
  }

  Eigen::Index size() const { return data.size(); }
  int rank() const { return static_cast<int>(dims.size()); }

  Scalar &operator[](Eigen::Index i) { return data[i]; }
  Scalar operator[](Eigen::Index i) const { return data[i]; }

  bool all_finite() const { return data.allFinite(); }

  template <typename Other> BasicTensor<Other> cast() const {
    return BasicTensor<Other>(dims, data.template cast<Other>());
  }

  /// Same storage, new dims. Element count must not change.
  BasicTensor reshaped(Shape d) const { return BasicTensor(std::move(d), data); }
};

using Tensor = BasicTensor<float>;

/// Stacks equally-shaped tensors into a batch with a new leading dimension.
template <typename Scalar>
BasicTensor<Scalar> stack(const std::vector<BasicTensor<Scalar>> &items) {
  if (items.empty())
    throw std::invalid_argument("cannot stack an empty list");
  Shape dims{static_cast<int>(items.size())};
  dims.insert(dims.end(), items.front().dims.begin(), items.front().dims.end());
  BasicTensor<Scalar> out(dims);
  const Eigen::Index n = items.front().size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].dims != items.front().dims)
      throw std::invalid_argument("cannot stack tensors of different dims");
    out.data.segment(static_cast<Eigen::Index>(i) * n, n) = items[i].data;
  }
  return out;
}

/// Row `i` of a batch as its own tensor (leading dimension dropped).
template <typename Scalar>
BasicTensor<Scalar> unstack_row(const BasicTensor<Scalar> &batch, int i) {
  Shape inner(batch.dims.begin() + 1, batch.dims.end());
  const Eigen::Index n = shape_size(inner);
  return BasicTensor<Scalar>(inner, batch.data.segment(static_cast<Eigen::Index>(i) * n, n));
}

} // namespace modelraider

#endif // MODELRAIDER_TENSOR_HPP
