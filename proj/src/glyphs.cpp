#include "modelraider/glyphs.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>

namespace modelraider {

namespace {

// Shapes are defined on centred coordinates (u, v) in units of the glyph
// radius r: |u|, |v| <= 1 roughly spans the drawing area. Each returns ink
// coverage in [0, 1].
using Shader = std::function<double(double u, double v, double px)>;

double band(double d, double centre, double half_width, double px) {
  // anti-aliased band |d - centre| <= half_width, px = one pixel in units of r
  const double edge = std::abs(d - centre) - half_width;
  return std::clamp(0.5 - edge / px, 0.0, 1.0);
}

double inside(double d, double limit, double px) { return std::clamp(0.5 - (d - limit) / px, 0.0, 1.0); }

const std::map<std::string, Shader> &shaders() {
  static const std::map<std::string, Shader> table = {
      {"disk", [](double u, double v, double px) { return inside(std::hypot(u, v), 0.75, px); }},
      {"ring", [](double u, double v, double px) { return band(std::hypot(u, v), 0.7, 0.12, px); }},
      {"ring-dot",
       [](double u, double v, double px) {
         const double r = std::hypot(u, v);
         return std::max(band(r, 0.7, 0.12, px), inside(r, 0.2, px));
       }},
      {"double-ring",
       [](double u, double v, double px) {
         const double r = std::hypot(u, v);
         return std::max(band(r, 0.8, 0.09, px), band(r, 0.38, 0.09, px));
       }},
      {"square",
       [](double u, double v, double px) {
         return inside(std::max(std::abs(u), std::abs(v)), 0.65, px);
       }},
      {"frame",
       [](double u, double v, double px) {
         return band(std::max(std::abs(u), std::abs(v)), 0.7, 0.11, px);
       }},
      {"frame-dot",
       [](double u, double v, double px) {
         const double c = std::max(std::abs(u), std::abs(v));
         return std::max(band(c, 0.7, 0.11, px), inside(c, 0.18, px));
       }},
      {"diamond",
       [](double u, double v, double px) { return inside(std::abs(u) + std::abs(v), 0.85, px); }},
      {"diamond-outline",
       [](double u, double v, double px) {
         return band(std::abs(u) + std::abs(v), 0.8, 0.13, px);
       }},
      {"plus",
       [](double u, double v, double px) {
         const double a = std::abs(u), b = std::abs(v);
         return std::max(inside(a, 0.14, px) * inside(b, 0.85, px),
                         inside(b, 0.14, px) * inside(a, 0.85, px));
       }},
      {"cross",
       [](double u, double v, double px) {
         const double d1 = std::abs(u - v) / std::sqrt(2.0), d2 = std::abs(u + v) / std::sqrt(2.0);
         const double span = inside(std::max(std::abs(u), std::abs(v)), 0.8, px);
         return span * std::max(inside(d1, 0.12, px), inside(d2, 0.12, px));
       }},
      {"star",
       [](double u, double v, double px) {
         const double a = std::abs(u), b = std::abs(v);
         const double d1 = std::abs(u - v) / std::sqrt(2.0), d2 = std::abs(u + v) / std::sqrt(2.0);
         const double radial = inside(std::hypot(u, v), 0.9, px);
         return radial * std::max({inside(a, 0.09, px), inside(b, 0.09, px), inside(d1, 0.09, px),
                                   inside(d2, 0.09, px)});
       }},
      {"corners",
       [](double u, double v, double px) {
         return inside(std::hypot(std::abs(u) - 0.6, std::abs(v) - 0.6), 0.22, px);
       }},
      {"checker",
       [](double u, double v, double px) {
         const double span = inside(std::max(std::abs(u), std::abs(v)), 0.8, px);
         const int iu = static_cast<int>(std::floor((u + 1.0) * 2.5));
         const int iv = static_cast<int>(std::floor((v + 1.0) * 2.5));
         return span * (((iu + iv) & 1) ? 0.0 : 1.0);
       }},
      {"grid",
       [](double u, double v, double px) {
         const double span = inside(std::max(std::abs(u), std::abs(v)), 0.85, px);
         const double a = std::abs(u), b = std::abs(v);
         return span * std::max(band(a, 0.4, 0.08, px), band(b, 0.4, 0.08, px));
       }},
      {"dot", [](double u, double v, double px) { return inside(std::hypot(u, v), 0.3, px); }},
      {"small-ring",
       [](double u, double v, double px) { return band(std::hypot(u, v), 0.4, 0.12, px); }},
      {"dots9",
       [](double u, double v, double px) {
         const double a = std::abs(u), b = std::abs(v);
         const double du = std::min(a, std::abs(a - 0.6)), dv = std::min(b, std::abs(b - 0.6));
         return inside(std::hypot(du, dv), 0.15, px);
       }},
      {"nested-frames",
       [](double u, double v, double px) {
         const double c = std::max(std::abs(u), std::abs(v));
         return std::max(band(c, 0.8, 0.09, px), band(c, 0.38, 0.09, px));
       }},
      {"ring-plus",
       [](double u, double v, double px) {
         const double a = std::abs(u), b = std::abs(v), r = std::hypot(u, v);
         const double bars = inside(r, 0.8, px) * std::max(inside(a, 0.09, px), inside(b, 0.09, px));
         return std::max(band(r, 0.7, 0.09, px), bars);
       }},
      {"frame-cross",
       [](double u, double v, double px) {
         const double c = std::max(std::abs(u), std::abs(v));
         const double d1 = std::abs(u - v) / std::sqrt(2.0), d2 = std::abs(u + v) / std::sqrt(2.0);
         const double diag = inside(c, 0.7, px) * std::max(inside(d1, 0.09, px), inside(d2, 0.09, px));
         return std::max(band(c, 0.7, 0.09, px), diag);
       }},
      {"octagon",
       [](double u, double v, double px) {
         const double a = std::abs(u), b = std::abs(v);
         return band(std::max(std::max(a, b), (a + b) / std::sqrt(2.0)), 0.7, 0.11, px);
       }},
  };
  return table;
}

} // namespace

const std::vector<std::string> &glyph_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto &[k, _] : shaders())
      n.push_back(k);
    return n;
  }();
  return names;
}

bool is_glyph(const std::string &name) { return shaders().count(name) > 0; }

Tensor render_glyph(const std::string &name, const GlyphStyle &style, std::mt19937_64 &rng) {
  const auto it = shaders().find(name);
  if (it == shaders().end())
    throw std::invalid_argument("unknown glyph class '" + name + "'");
  if (style.height <= 0 || style.width <= 0 || style.channels <= 0)
    throw std::invalid_argument("glyph dims must be positive");
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> ink(style.ink_lo, style.ink_hi);
  std::uniform_real_distribution<double> back(style.background_lo, style.background_hi);
  std::normal_distribution<double> gauss(0.0, style.noise);

  const int H = style.height, W = style.width, C = style.channels;
  const double r = 0.5 * std::min(H, W) * (1.0 + style.scale_jitter * unit(rng)) * 0.9;
  const double cy = 0.5 * (H - 1) + style.jitter * unit(rng);
  const double cx = 0.5 * (W - 1) + style.jitter * unit(rng);
  const double level = ink(rng);
  const double background = back(rng);
  const double px = 1.0 / r;

  Tensor img({H, W, C});
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double cover = it->second((x - cx) / r, (y - cy) / r, px);
      const double base = background + (level - background) * cover;
      for (int c = 0; c < C; ++c) {
        const double value = base + (style.noise > 0 ? gauss(rng) : 0.0);
        img[(static_cast<Eigen::Index>(y) * W + x) * C + c] =
            static_cast<float>(std::clamp(value, 0.0, 1.0));
      }
    }
  return img;
}

LabeledDataset make_glyph_dataset(const std::vector<std::string> &classes, int per_class,
                                  const GlyphStyle &style, std::uint64_t seed) {
  if (per_class < 0)
    throw std::invalid_argument("per_class must be non-negative");
  std::mt19937_64 rng(seed);
  LabeledDataset d;
  for (int i = 0; i < per_class; ++i)
    for (std::size_t k = 0; k < classes.size(); ++k)
      d.add(render_glyph(classes[k], style, rng), static_cast<int>(k));
  return d;
}

} // namespace modelraider
