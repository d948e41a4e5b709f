#ifndef MODELRAIDER_DSM_HPP
#define MODELRAIDER_DSM_HPP

// DSM on-device model container.
//
// All integers little-endian.
//
//   header   "DSM1"                     4 bytes
//            version                    u16 (= 1)
//            input rank r               u8
//            input dims                 r x u32
//            num_classes                u32
//            layer count                u32
//   layer    id length                  u16
//            id                         UTF-8 bytes
//            kind code                  u8   (LayerKind)
//            dtype code                 u8   (DType)
//            output rank                u8
//            output dims                rank x u32
//            blob count                 u8
//            per blob: element count n  u32, then n x f32
//
// Trainability and optimiser state are deliberately absent: a parsed model
// comes back fully frozen.

#include "modelraider/bytes.hpp"
#include "modelraider/model.hpp"

#include <stdexcept>
#include <string_view>

namespace modelraider {

inline constexpr std::string_view kDsmMagic = "DSM1";
inline constexpr std::uint16_t kDsmVersion = 1;

enum class ParseErrorKind {
  BadMagic,
  UnsupportedVersion,
  Truncated,
  BadLayerKind,
  BadDType,
  Malformed, // declared sizes out of range, trailing bytes, empty model
};

std::string_view parse_error_name(ParseErrorKind kind);

class ParseError : public std::runtime_error {
public:
  ParseError(ParseErrorKind kind, std::size_t offset, const std::string &detail);
  ParseErrorKind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

private:
  ParseErrorKind kind_;
  std::size_t offset_;
};

/// Throws std::invalid_argument("no layers") for an empty model.
Bytes serialize_model(const Model &model);

/// Returns an inference-only model (trainable_mask all false). Shapes are not
/// cross-checked here; forward() reports inconsistencies.
Model parse_model(ByteView bytes);

/// Exact serialized size: header + sum of per-layer records.
std::size_t container_size(const Model &model);

/// A layer's parameter section as it appears in the container
/// (per blob: u32 count + f32 data), without the blob-count byte.
Bytes layer_param_bytes(const Layer &layer);

} // namespace modelraider

#endif // MODELRAIDER_DSM_HPP
