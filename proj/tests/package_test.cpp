#include "support.hpp"

#include "modelraider/app_package.hpp"
#include "modelraider/dsm.hpp"
#include "modelraider/extractor.hpp"
#include "modelraider/zip.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace modelraider;
using namespace modelraider::testing;

namespace {

Model sample_model(std::uint64_t seed = 3) { return mixed_model({6, 6, 1}, 3, true, seed); }

/// Byte offsets of every parameter blob's f32 payload: [begin, end).
std::vector<std::pair<std::size_t, std::size_t>> blob_ranges(const Model &m) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t at = 4 + 2 + 1 + 4 * m.input_shape.size() + 4 + 4;
  for (const auto &l : m.layers) {
    at += 2 + l.id.size() + 1 + 1 + 1 + 4 * l.output_shape.size() + 1;
    for (const auto &p : l.params) {
      at += 4;
      out.emplace_back(at, at + 4 * static_cast<std::size_t>(p.size()));
      at += 4 * static_cast<std::size_t>(p.size());
    }
  }
  return out;
}

ParseErrorKind parse_kind(const Bytes &b) {
  try {
    parse_model(b);
  } catch (const ParseError &e) {
    return e.kind();
  }
  ADD_FAILURE() << "container parsed";
  return ParseErrorKind::Malformed;
}

} // namespace

TEST(Dsm, RoundTripIsIdentity) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto bytes = serialize_model(sample_model(seed));
    EXPECT_EQ(serialize_model(parse_model(bytes)), bytes);
  }
}

TEST(Dsm, ParsedModelIsFrozenAndRuns) {
  const auto m = sample_model();
  const auto parsed = parse_model(serialize_model(m));
  EXPECT_EQ(parsed.layer_count(), m.layer_count());
  EXPECT_EQ(parsed.frozen_count(), parsed.layer_count());
  std::mt19937_64 rng(1);
  const auto x = uniform_tensor({6, 6, 1}, rng);
  EXPECT_EQ(predict(parsed, x).probs.data, predict(m, x).probs.data);
}

TEST(Dsm, ParameterChangesOnlyTouchBlobs) {
  const auto a = sample_model(1);
  auto b = a;
  for (auto &l : b.layers)
    for (auto &p : l.params)
      p.data.array() += 0.5f;
  const auto ba = serialize_model(a), bb = serialize_model(b);
  ASSERT_EQ(ba.size(), bb.size());
  const auto ranges = blob_ranges(a);
  bool any = false;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    if (ba[i] == bb[i])
      continue;
    any = true;
    bool inside = false;
    for (const auto &[lo, hi] : ranges)
      inside |= i >= lo && i < hi;
    EXPECT_TRUE(inside) << "byte " << i << " differs outside the parameter blobs";
  }
  EXPECT_TRUE(any);
}

TEST(Dsm, EmptyModelHasNoLayers) {
  Model m;
  m.input_shape = {2};
  m.num_classes = 2;
  try {
    serialize_model(m);
    FAIL();
  } catch (const std::invalid_argument &e) {
    EXPECT_STREQ(e.what(), "no layers");
  }
}

TEST(Dsm, BadMagic) {
  auto b = serialize_model(sample_model());
  std::copy_n("XXXX", 4, b.begin());
  EXPECT_EQ(parse_kind(b), ParseErrorKind::BadMagic);
}

TEST(Dsm, UnsupportedVersion) {
  auto b = serialize_model(sample_model());
  b[4] = 2;
  try {
    parse_model(b);
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.kind(), ParseErrorKind::UnsupportedVersion);
    EXPECT_EQ(e.offset(), 4u);
  }
}

TEST(Dsm, BadLayerKindAndDType) {
  const auto m = dense_softmax(3, 2);
  const auto good = serialize_model(m);
  const std::size_t kind_at = 4 + 2 + 1 + 4 + 4 + 4 + 2 + m.layers[0].id.size();
  auto b = good;
  b[kind_at] = 99;
  try {
    parse_model(b);
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.kind(), ParseErrorKind::BadLayerKind);
    EXPECT_EQ(e.offset(), kind_at);
  }
  b = good;
  b[kind_at + 1] = 7;
  EXPECT_EQ(parse_kind(b), ParseErrorKind::BadDType);
}

TEST(Dsm, TruncatedMidBlobReportsOffsetInsideBlob) {
  const auto m = sample_model();
  const auto full = serialize_model(m);
  const auto [lo, hi] = blob_ranges(m)[1];
  const Bytes cut(full.begin(), full.begin() + static_cast<std::ptrdiff_t>((lo + hi) / 2));
  try {
    parse_model(cut);
    FAIL();
  } catch (const ParseError &e) {
    EXPECT_EQ(e.kind(), ParseErrorKind::Truncated);
    EXPECT_GE(e.offset(), lo - 4);
    EXPECT_LT(e.offset(), hi);
  }
}

TEST(Dsm, EveryPrefixFailsCleanly) {
  const auto full = serialize_model(dense_softmax(3, 2));
  for (std::size_t n = 0; n < full.size(); ++n) {
    const Bytes cut(full.begin(), full.begin() + static_cast<std::ptrdiff_t>(n));
    const auto kind = parse_kind(cut);
    EXPECT_TRUE(kind == ParseErrorKind::Truncated || kind == ParseErrorKind::Malformed)
        << "prefix " << n << ": " << parse_error_name(kind);
  }
}

TEST(Dsm, TrailingBytesAreMalformed) {
  auto b = serialize_model(dense_softmax(3, 2));
  b.push_back(0);
  EXPECT_EQ(parse_kind(b), ParseErrorKind::Malformed);
}

TEST(Dsm, ContainerSizeClosedForm) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto m = mixed_model({5 + static_cast<int>(seed), 6, 2}, 4, seed % 2 == 0, seed);
    std::size_t expected = 4 + 2 + 1 + 4 * 3 + 4 + 4;
    for (const auto &l : m.layers) {
      expected += 2 + l.id.size() + 3 + 4 * l.output_shape.size() + 1;
      for (const auto &p : l.params)
        expected += 4 + 4 * static_cast<std::size_t>(p.size());
    }
    EXPECT_EQ(container_size(m), expected);
    EXPECT_EQ(serialize_model(m).size(), expected);
  }
}

TEST(Dsm, DistinctModelsGiveDistinctBytes) {
  const auto a = sample_model(1);
  auto b = a;
  b.layers[0].params[0][0] = std::nextafter(b.layers[0].params[0][0], 1.0f);
  auto c = a;
  c.layers[1].id = "r0x";
  EXPECT_NE(serialize_model(a), serialize_model(b));
  EXPECT_NE(serialize_model(a), serialize_model(c));
  EXPECT_NE(serialize_model(b), serialize_model(c));
}

TEST(Labels, FormatHasNoTrailingNewline) {
  EXPECT_EQ(format_labels({"ring", "frame", "plus"}), "ring\nframe\nplus");
  EXPECT_EQ(parse_labels("ring\nframe\nplus"), (std::vector<std::string>{"ring", "frame", "plus"}));
  EXPECT_TRUE(parse_labels("").empty());
}

TEST(AppPackage, ModelLandsUnderAssets) {
  const auto zip = build_app_package({{"m", sample_model()}}, {"a", "b", "c"});
  const auto entries = list_zip(zip);
  ASSERT_EQ(entries.size(), 2u);
  EXPECT_EQ(entries[0].path, "assets/m.tflite");
  EXPECT_EQ(entries[1].path, "assets/labels.txt");
}

TEST(AppPackage, ZeroModelsGiveLabelsOnly) {
  const auto entries = read_zip(build_app_package({}, {"x", "y"}));
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].path, "assets/labels.txt");
  EXPECT_EQ(to_string(entries[0].data), "x\ny");
}

TEST(AppPackage, DuplicateNamesRejected) {
  EXPECT_THROW(build_app_package({{"m", sample_model()}, {"m", sample_model(2)}}, {}),
               std::invalid_argument);
}

TEST(AppPackage, BuildIsDeterministic) {
  const std::vector<PackageModel> models{{"a", sample_model(1)}, {"b", sample_model(2)}};
  EXPECT_EQ(build_app_package(models, {"p", "q", "r"}), build_app_package(models, {"p", "q", "r"}));
}

TEST(Zip, ReadsBackWhatWasWritten) {
  const std::vector<ZipEntry> in{{"a.txt", to_bytes("hello")}, {"dir/b.bin", Bytes{0, 1, 2, 255}}};
  const auto out = read_zip(write_zip(in));
  ASSERT_EQ(out.size(), 2u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(out[i].path, in[i].path);
    EXPECT_EQ(out[i].data, in[i].data);
  }
}

TEST(Zip, CorruptArchiveThrows) {
  auto z = write_zip({{"a.txt", to_bytes("hello world")}});
  EXPECT_THROW(list_zip(Bytes(z.begin(), z.begin() + 10)), ZipError);
  z[30 + 5 + 3] ^= 0xff; // a payload byte: local header (30) + name (5) + 3
  EXPECT_THROW(read_zip(z), ZipError);
}

TEST(Scan, PicksModelFilesBySuffix) {
  const auto zip = write_zip({{"assets/m.tflite", Bytes{1}}, {"res/x.png", Bytes{2}}});
  const auto c = scan_package(zip, {".tflite"});
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].path, "assets/m.tflite");
  EXPECT_EQ(c[0].size, 1u);
}

TEST(Scan, SeveralSuffixesInArchiveOrder) {
  const auto zip = write_zip({{"a.lite", Bytes{1}}, {"x.txt", Bytes{}}, {"b.tflite", Bytes{2}}});
  const auto c = scan_package(zip, {".lite", ".tflite"});
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].path, "a.lite");
  EXPECT_EQ(c[1].path, "b.tflite");
}

TEST(Scan, NoMatchesIsEmpty) {
  EXPECT_TRUE(scan_package(write_zip({{"res/x.png", Bytes{2}}}), default_model_suffixes()).empty());
}

TEST(Scan, CorruptZipThrows) {
  EXPECT_THROW(scan_package(to_bytes("definitely not a zip"), {".tflite"}), ZipError);
}

TEST(Operability, HealthyModelPasses) {
  const auto r = operability_check(sample_model(), 1);
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(r.code.empty());
}

TEST(Operability, NanWeightsFail) {
  auto m = sample_model();
  m.layers[m.layer_count() - 2].params[0].data.setConstant(std::numeric_limits<float>::quiet_NaN());
  const auto r = operability_check(m, 1);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.reason, "non-finite output");
  EXPECT_EQ(r.code, "non_finite_output");
}

TEST(Operability, InternalShapeMismatchNamesLayer) {
  auto m = sample_model();
  m.layers[4].output_shape = {3, 3, 5}; // pointwise conv declares 4 filters' worth of weights
  const auto r = operability_check(m, 1);
  EXPECT_FALSE(r.pass);
  EXPECT_EQ(r.reason, "shape mismatch at layer 4");
  EXPECT_EQ(r.layer, 4);
}

TEST(Extract, TwoValidOneCorrupt) {
  const auto good = build_app_package({{"a", sample_model(1)}, {"b", sample_model(2)}},
                                      {"x", "y", "z"});
  auto entries = read_zip(good);
  auto broken = serialize_model(sample_model(3));
  broken.resize(broken.size() - 7);
  entries.insert(entries.begin() + 1, ZipEntry{"assets/c.tflite", broken});
  const auto rep = extract_models(write_zip(entries), default_model_suffixes());
  EXPECT_EQ(rep.candidates.size(), 3u);
  ASSERT_EQ(rep.extracted.size(), 2u);
  ASSERT_EQ(rep.rejected.size(), 1u);
  EXPECT_EQ(rep.rejected[0].path, "assets/c.tflite");
  EXPECT_EQ(rep.rejected[0].code, "parse_error:Truncated");
  EXPECT_TRUE(rep.extracted[0].labels_present);
  EXPECT_EQ(rep.extracted[1].labels, (std::vector<std::string>{"x", "y", "z"}));
}

TEST(Extract, WrongLabelCountMarksLabelsAbsent) {
  const auto rep =
      extract_models(build_app_package({{"a", sample_model()}}, {"x", "y"}), {".tflite"});
  ASSERT_EQ(rep.extracted.size(), 1u);
  EXPECT_FALSE(rep.extracted[0].labels_present);
  EXPECT_TRUE(rep.extracted[0].labels.empty());
  EXPECT_TRUE(rep.labels_file_present);
}

TEST(Extract, EmptyZipGivesEmptyReport) {
  const auto rep = extract_models(write_zip({}), default_model_suffixes());
  EXPECT_TRUE(rep.candidates.empty());
  EXPECT_TRUE(rep.extracted.empty());
  EXPECT_TRUE(rep.rejected.empty());
}

TEST(Extract, RecoversPlantedContainersByteIdentically) {
  std::vector<PackageModel> models;
  for (std::uint64_t s = 1; s <= 3; ++s)
    models.push_back({"m" + std::to_string(s), sample_model(s)});
  const auto rep = extract_models(build_app_package(models, {"x", "y", "z"}, ".lite"), {".lite"});
  ASSERT_EQ(rep.extracted.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(rep.extracted[i].name, models[i].name);
    EXPECT_EQ(rep.extracted[i].container, serialize_model(models[i].model));
  }
}
