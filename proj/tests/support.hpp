#ifndef MODELRAIDER_TESTS_SUPPORT_HPP
#define MODELRAIDER_TESTS_SUPPORT_HPP

#include "modelraider/engine.hpp"
#include "modelraider/model.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace modelraider::testing {

/// Scratch directory removed on destruction.
class TempDir {
public:
  explicit TempDir(const std::string &tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("modelraider-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }

private:
  std::filesystem::path path_;
};

inline Tensor uniform_tensor(Shape dims, std::mt19937_64 &rng, float lo = 0.0f, float hi = 1.0f) {
  Tensor t(std::move(dims));
  std::uniform_real_distribution<float> u(lo, hi);
  for (Eigen::Index i = 0; i < t.size(); ++i)
    t[i] = u(rng);
  return t;
}

/// Dense -> softmax over a flat input.
inline Model dense_softmax(int inputs, int classes, std::uint64_t seed = 1) {
  return ModelBuilder({inputs}, seed).dense("fc", classes).softmax("prob").build();
}

/// Small image classifier touching every layer kind.
inline Model mixed_model(const Shape &input, int classes, bool pool, std::uint64_t seed) {
  ModelBuilder b(input, seed);
  b.conv2d("c0", 3, 3, 1).relu6("r0").depthwise_conv2d("dw", 3, 2).relu6("r1").conv2d("pw", 1, 4);
  if (pool)
    b.global_avg_pool("gap");
  else
    b.flatten("flat");
  return b.dense("fc", classes).softmax("prob").build();
}

/// Copy of `model` with every parameter scaled by `factor` (keeps structure).
inline Model scaled_params(Model model, float factor) {
  for (auto &l : model.layers)
    for (auto &p : l.params)
      p.data *= factor;
  return model;
}

} // namespace modelraider::testing

#endif // MODELRAIDER_TESTS_SUPPORT_HPP
