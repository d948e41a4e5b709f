#ifndef MODELRAIDER_TESTS_GRADCHECK_HPP
#define MODELRAIDER_TESTS_GRADCHECK_HPP

#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace modelraider::testing {

struct GradCheck {
  double max_param_error = 0.0;
  double max_input_error = 0.0;
  std::int64_t entries = 0;
  double worst_analytic = 0.0, worst_numeric = 0.0; // the worst parameter entry
  std::int64_t skipped = 0; // finite differences straddling a relu6 kink
  std::vector<LayerKind> kinds; // kinds whose parameters or inputs were checked
};

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-5});
}

/// Which linear piece of relu6 every relu6 input element sits on.
inline std::vector<std::int8_t> relu6_pattern(const BasicModel<double> &model,
                                              const BasicTensor<double> &x) {
  const auto t = forward_trace(model, x);
  std::vector<std::int8_t> out;
  for (int k = 0; k < model.layer_count(); ++k) {
    if (model.layers[k].kind != LayerKind::Relu6)
      continue;
    const auto &a = t.activations[k];
    for (Eigen::Index i = 0; i < a.size(); ++i)
      out.push_back(a[i] <= 0.0 ? 0 : a[i] >= 6.0 ? 2 : 1);
  }
  return out;
}

/// Central difference at steps h and h/2 combined by Richardson extrapolation, so the
/// O(h^2) truncation term cancels. `probe(d)` returns the loss and relu6 pattern at
/// offset d; nullopt when any probe leaves the base pattern (a kink lies within h).
template <typename Probe>
std::optional<double> richardson(double h, const std::vector<std::int8_t> &base, Probe probe) {
  double d[2];
  for (int s = 0; s < 2; ++s) {
    const double step = s == 0 ? h : h / 2;
    const auto [lp, pp] = probe(step);
    const auto [lm, pm] = probe(-step);
    if (pp != base || pm != base)
      return std::nullopt;
    d[s] = (lp - lm) / (2 * step);
  }
  return (4 * d[1] - d[0]) / 3;
}

/// Compares analytic parameter and input gradients of a random model against
/// extrapolated central finite differences, in double precision. Entries whose probes
/// land on different relu6 pieces are not differentiable at that scale and are skipped.
inline GradCheck gradient_check(std::uint64_t seed, double h = 1e-3) {
  std::mt19937_64 rng(seed);
  const int hw = 4 + static_cast<int>(rng() % 3);
  const int channels = 1 + static_cast<int>(rng() % 2);
  const int classes = 2 + static_cast<int>(rng() % 3);
  const int batch = 1 + static_cast<int>(rng() % 3);
  const bool pool = rng() % 2 == 0;
  const float gain = 1.0f + static_cast<float>(rng() % 3);
  auto model =
      scaled_params(mixed_model({hw, hw, channels}, classes, pool, rng()), gain).cast<double>();
  // Zero-initialised biases put activations exactly on the relu6 kink; jitter them off it.
  std::uniform_real_distribution<double> jitter(-0.1, 0.1);
  for (auto &l : model.layers)
    for (auto &p : l.params)
      for (Eigen::Index i = 0; i < p.size(); ++i)
        p[i] += jitter(rng);

  std::vector<BasicTensor<double>> items;
  std::vector<int> labels;
  for (int i = 0; i < batch; ++i) {
    items.push_back(uniform_tensor({hw, hw, channels}, rng).cast<double>());
    labels.push_back(static_cast<int>(rng() % classes));
  }
  const auto x = stack(items);

  GradCheck out;
  const auto base_pattern = relu6_pattern(model, x);
  const auto analytic = param_gradients(model, x, labels);
  for (int k = 0; k < model.layer_count(); ++k) {
    if (!model.layers[k].params.empty())
      out.kinds.push_back(model.layers[k].kind);
    for (std::size_t p = 0; p < model.layers[k].params.size(); ++p) {
      for (Eigen::Index i = 0; i < model.layers[k].params[p].size(); ++i) {
        const auto numeric = richardson(h, base_pattern, [&](double d) {
          auto m = model;
          m.layers[k].params[p][i] += d;
          return std::pair{loss_sce(forward(m, x), labels), relu6_pattern(m, x)};
        });
        if (!numeric) {
          ++out.skipped;
          continue;
        }
        const double e = relative_error(analytic.params[k][p][i], *numeric);
        if (e > out.max_param_error) {
          out.max_param_error = e;
          out.worst_analytic = analytic.params[k][p][i];
          out.worst_numeric = *numeric;
        }
        ++out.entries;
      }
    }
  }

  const auto &x0 = items.front();
  const auto gx = input_gradient(model, x0, labels.front());
  const auto x0_pattern = relu6_pattern(model, stack(std::vector{x0}));
  for (Eigen::Index i = 0; i < x0.size(); ++i) {
    const auto numeric = richardson(h, x0_pattern, [&](double d) {
      auto xi = x0;
      xi[i] += d;
      const auto b = stack(std::vector{xi});
      return std::pair{loss_sce(forward(model, b), {labels.front()}), relu6_pattern(model, b)};
    });
    if (!numeric) {
      ++out.skipped;
      continue;
    }
    out.max_input_error = std::max(out.max_input_error, relative_error(gx[i], *numeric));
    ++out.entries;
  }
  for (const auto &l : model.layers)
    if (l.params.empty())
      out.kinds.push_back(l.kind);
  return out;
}

} // namespace modelraider::testing

#endif // MODELRAIDER_TESTS_GRADCHECK_HPP
