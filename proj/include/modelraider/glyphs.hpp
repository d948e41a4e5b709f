#ifndef MODELRAIDER_GLYPHS_HPP
#define MODELRAIDER_GLYPHS_HPP

#include "modelraider/train.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace modelraider {

/// Procedural glyph images: simple shapes drawn with random jitter in scale,
/// offset and stroke intensity, plus additive Gaussian pixel noise, clipped
/// to [0, 1]. Every glyph is symmetric under the square's rotations and
/// mirrors, so flip/rotation augmentation keeps the class.
struct GlyphStyle {
  int height = 16;
  int width = 16;
  int channels = 1;
  double noise = 0.08;    // pixel noise standard deviation
  double jitter = 1.0;    // maximum centre offset in pixels
  double scale_jitter = 0.12;
  double background_lo = 0.3, background_hi = 0.5; // uniform background level
  double ink_lo = 0.85, ink_hi = 1.0;               // stroke level
};

/// Every glyph class name the generator knows, in a fixed order.
const std::vector<std::string> &glyph_names();
bool is_glyph(const std::string &name);

/// Throws std::invalid_argument for unknown names or non-positive sizes.
Tensor render_glyph(const std::string &name, const GlyphStyle &style, std::mt19937_64 &rng);

/// `per_class` images of each class; label i is classes[i]. Images are
/// interleaved by class so prefixes stay balanced.
LabeledDataset make_glyph_dataset(const std::vector<std::string> &classes, int per_class,
                                  const GlyphStyle &style, std::uint64_t seed);

} // namespace modelraider

#endif // MODELRAIDER_GLYPHS_HPP
