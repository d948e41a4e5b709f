#include "modelraider/extractor.hpp"

#include "modelraider/app_package.hpp"
#include "modelraider/dsm.hpp"
#include "modelraider/engine.hpp"
#include "modelraider/zip.hpp"

#include <random>

namespace modelraider {

std::vector<std::string> default_model_suffixes() { return {".tflite", ".lite"}; }

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

std::string model_name(const std::string &path, const std::vector<std::string> &suffixes) {
  std::string name = path.substr(path.find_last_of('/') == std::string::npos
                                     ? 0
                                     : path.find_last_of('/') + 1);
  for (const auto &s : suffixes)
    if (ends_with(name, s)) {
      name.resize(name.size() - s.size());
      break;
    }
  return name;
}

} // namespace

std::vector<Candidate> scan_package(ByteView zip, const std::vector<std::string> &suffixes) {
  std::vector<Candidate> out;
  for (const auto &e : list_zip(zip))
    for (const auto &s : suffixes)
      if (!s.empty() && ends_with(e.path, s)) {
        out.push_back({e.path, e.size});
        break;
      }
  return out;
}

OperabilityReport operability_check(const Model &model, std::uint64_t seed) {
  OperabilityReport rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> unit(0.0f, 1.0f);
  Shape dims{kOperabilityBatch};
  dims.insert(dims.end(), model.input_shape.begin(), model.input_shape.end());
  Tensor batch(dims);
  for (Eigen::Index i = 0; i < batch.size(); ++i)
    batch[i] = unit(rng);

  Tensor probs;
  try {
    probs = forward(model, batch);
  } catch (const ShapeError &e) {
    rep.code = "shape_mismatch";
    rep.layer = e.layer();
    rep.reason = "shape mismatch at layer " + std::to_string(e.layer());
    return rep;
  }
  if (!probs.all_finite()) {
    rep.code = "non_finite_output";
    rep.reason = "non-finite output";
    return rep;
  }
  const int n = probs.dims[1];
  for (int b = 0; b < kOperabilityBatch; ++b) {
    const double sum = probs.data.segment(static_cast<Eigen::Index>(b) * n, n).template cast<double>().sum();
    if (std::abs(sum - 1.0) > kNormalizationTolerance) {
      rep.code = "not_normalized";
      rep.reason = "output row " + std::to_string(b) + " sums to " + std::to_string(sum);
      return rep;
    }
  }
  rep.pass = true;
  return rep;
}

const ExtractedModel *ScanReport::find(std::string_view name) const {
  for (const auto &m : extracted)
    if (m.name == name)
      return &m;
  return nullptr;
}

ScanReport extract_models(ByteView zip, const std::vector<std::string> &suffixes,
                          std::uint64_t seed, std::string package_name) {
  ScanReport report;
  report.package = std::move(package_name);
  const auto entries = read_zip(zip);
  report.candidates = scan_package(zip, suffixes);

  std::vector<std::string> labels;
  for (const auto &e : entries)
    if (e.path == kLabelsPath) {
      report.labels_file_present = true;
      labels = parse_labels(to_string(e.data));
      report.label_lines = labels.size();
    }

  for (const auto &c : report.candidates) {
    const ZipEntry *entry = nullptr;
    for (const auto &e : entries)
      if (e.path == c.path)
        entry = &e;
    Model model;
    try {
      model = parse_model(entry->data);
    } catch (const ParseError &e) {
      report.rejected.push_back(
          {c.path, "parse_error:" + std::string(parse_error_name(e.kind())), e.what()});
      continue;
    }
    const auto op = operability_check(model, seed);
    if (!op.pass) {
      report.rejected.push_back({c.path, op.code, op.reason});
      continue;
    }
    ExtractedModel x;
    x.path = c.path;
    x.name = model_name(c.path, suffixes);
    x.container = entry->data;
    x.labels_present =
        report.labels_file_present && labels.size() == static_cast<std::size_t>(model.num_classes);
    if (x.labels_present)
      x.labels = labels;
    x.model = std::move(model);
    report.extracted.push_back(std::move(x));
  }
  return report;
}

} // namespace modelraider
