#include "modelraider/dsm.hpp"

#include <limits>

namespace modelraider {

namespace {

constexpr int kMaxRank = 8;
constexpr std::uint32_t kMaxDim = 1u << 20;
constexpr std::int64_t kMaxElements = std::int64_t{1} << 28;
constexpr int kMaxBlobs = 8;

void write_dims(ByteWriter &w, const Shape &dims) {
  w.u8(static_cast<std::uint8_t>(dims.size()));
  for (int d : dims)
    w.u32(static_cast<std::uint32_t>(d));
}

void write_blobs(ByteWriter &w, const Layer &layer) {
  for (const auto &p : layer.params) {
    w.u32(static_cast<std::uint32_t>(p.size()));
    for (Eigen::Index i = 0; i < p.size(); ++i)
      w.f32(p[i]);
  }
}

Shape read_dims(ByteReader &r) {
  const std::size_t at = r.pos();
  const int rank = r.u8();
  if (rank == 0 || rank > kMaxRank)
    throw ParseError(ParseErrorKind::Malformed, at, "rank " + std::to_string(rank));
  Shape dims;
  for (int i = 0; i < rank; ++i) {
    const std::size_t dim_at = r.pos();
    const std::uint32_t d = r.u32();
    if (d == 0 || d > kMaxDim)
      throw ParseError(ParseErrorKind::Malformed, dim_at, "dim " + std::to_string(d));
    dims.push_back(static_cast<int>(d));
  }
  if (shape_size(dims) > kMaxElements)
    throw ParseError(ParseErrorKind::Malformed, at, "shape too large");
  return dims;
}

} // namespace

std::string_view parse_error_name(ParseErrorKind kind) {
  switch (kind) {
  case ParseErrorKind::BadMagic:
    return "BadMagic";
  case ParseErrorKind::UnsupportedVersion:
    return "UnsupportedVersion";
  case ParseErrorKind::Truncated:
    return "Truncated";
  case ParseErrorKind::BadLayerKind:
    return "BadLayerKind";
  case ParseErrorKind::BadDType:
    return "BadDType";
  case ParseErrorKind::Malformed:
    return "Malformed";
  }
  return "Unknown";
}

ParseError::ParseError(ParseErrorKind kind, std::size_t offset, const std::string &detail)
    : std::runtime_error(std::string(parse_error_name(kind)) + " at offset " +
                         std::to_string(offset) + (detail.empty() ? "" : ": " + detail)),
      kind_(kind), offset_(offset) {}

Bytes layer_param_bytes(const Layer &layer) {
  ByteWriter w;
  write_blobs(w, layer);
  return std::move(w).take();
}

std::size_t container_size(const Model &model) {
  std::size_t n = 4 + 2 + 1 + 4 * model.input_shape.size() + 4 + 4;
  for (const auto &l : model.layers) {
    n += 2 + l.id.size() + 1 + 1 + 1 + 4 * l.output_shape.size() + 1;
    for (const auto &p : l.params)
      n += 4 + 4 * static_cast<std::size_t>(p.size());
  }
  return n;
}

Bytes serialize_model(const Model &model) {
  if (model.layers.empty())
    throw std::invalid_argument("no layers");
  ByteWriter w;
  w.bytes().reserve(container_size(model));
  w.raw(kDsmMagic);
  w.u16(kDsmVersion);
  write_dims(w, model.input_shape);
  w.u32(static_cast<std::uint32_t>(model.num_classes));
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const auto &l : model.layers) {
    if (l.id.size() > std::numeric_limits<std::uint16_t>::max())
      throw std::invalid_argument("layer identifier too long: " + l.id.substr(0, 32) + "...");
    w.u16(static_cast<std::uint16_t>(l.id.size()));
    w.raw(l.id);
    w.u8(static_cast<std::uint8_t>(l.kind));
    w.u8(static_cast<std::uint8_t>(l.dtype));
    write_dims(w, l.output_shape);
    w.u8(static_cast<std::uint8_t>(l.params.size()));
    write_blobs(w, l);
  }
  return std::move(w).take();
}

Model parse_model(ByteView bytes) {
  ByteReader r(bytes);
  try {
    if (r.remaining() < kDsmMagic.size() ||
        to_string(bytes.first(kDsmMagic.size())) != kDsmMagic) {
      if (r.remaining() < kDsmMagic.size() &&
          to_string(bytes) == kDsmMagic.substr(0, bytes.size()))
        throw ShortRead{0, kDsmMagic.size()};
      throw ParseError(ParseErrorKind::BadMagic, 0, "");
    }
    r.raw(kDsmMagic.size());
    const std::size_t version_at = r.pos();
    const std::uint16_t version = r.u16();
    if (version != kDsmVersion)
      throw ParseError(ParseErrorKind::UnsupportedVersion, version_at,
                       "version " + std::to_string(version));

    Model model;
    model.input_shape = read_dims(r);
    const std::size_t classes_at = r.pos();
    const std::uint32_t classes = r.u32();
    if (classes == 0 || classes > kMaxDim)
      throw ParseError(ParseErrorKind::Malformed, classes_at,
                       "num_classes " + std::to_string(classes));
    model.num_classes = static_cast<int>(classes);
    const std::size_t count_at = r.pos();
    const std::uint32_t count = r.u32();
    if (count == 0)
      throw ParseError(ParseErrorKind::Malformed, count_at, "no layers");
    // Every layer record is at least 10 bytes; reject impossible counts early.
    if (count > r.remaining() / 10 + 1)
      throw ParseError(ParseErrorKind::Truncated, count_at,
                       std::to_string(count) + " layers cannot fit");

    for (std::uint32_t k = 0; k < count; ++k) {
      Layer layer;
      const std::uint16_t id_len = r.u16();
      layer.id = to_string(r.raw(id_len));
      const std::size_t kind_at = r.pos();
      const auto kind = kind_from_code(r.u8());
      if (!kind)
        throw ParseError(ParseErrorKind::BadLayerKind, kind_at,
                         "code " + std::to_string(bytes[kind_at]));
      layer.kind = *kind;
      const std::size_t dtype_at = r.pos();
      const auto dtype = dtype_from_code(r.u8());
      if (!dtype)
        throw ParseError(ParseErrorKind::BadDType, dtype_at,
                         "code " + std::to_string(bytes[dtype_at]));
      layer.dtype = *dtype;
      layer.output_shape = read_dims(r);
      const std::size_t blobs_at = r.pos();
      const int blobs = r.u8();
      if (blobs > kMaxBlobs)
        throw ParseError(ParseErrorKind::Malformed, blobs_at,
                         std::to_string(blobs) + " parameter blobs");
      for (int b = 0; b < blobs; ++b) {
        const std::uint32_t n = r.u32();
        if (static_cast<std::int64_t>(n) > kMaxElements)
          throw ParseError(ParseErrorKind::Malformed, r.pos() - 4,
                           "blob of " + std::to_string(n) + " elements");
        r.need(4 * static_cast<std::size_t>(n));
        Tensor t({static_cast<int>(n)});
        for (std::uint32_t i = 0; i < n; ++i)
          t[i] = r.f32();
        layer.params.push_back(std::move(t));
      }
      model.layers.push_back(std::move(layer));
    }
    if (r.remaining() != 0)
      throw ParseError(ParseErrorKind::Malformed, r.pos(),
                       std::to_string(r.remaining()) + " trailing bytes");
    model.trainable_mask.assign(model.layers.size(), false);
    infer_param_dims(model);
    return model;
  } catch (const ShortRead &s) {
    throw ParseError(ParseErrorKind::Truncated, s.offset,
                     "needed " + std::to_string(s.wanted) + " bytes, " +
                         std::to_string(bytes.size() - std::min(bytes.size(), s.offset)) +
                         " available");
  }
}

} // namespace modelraider
