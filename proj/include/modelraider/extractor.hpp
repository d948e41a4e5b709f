#ifndef MODELRAIDER_EXTRACTOR_HPP
#define MODELRAIDER_EXTRACTOR_HPP

#include "modelraider/bytes.hpp"
#include "modelraider/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace modelraider {

/// Model-file naming schemes searched by default.
std::vector<std::string> default_model_suffixes();

struct Candidate {
  std::string path;
  std::uint64_t size = 0;
};

/// Entries whose path ends with any suffix, in archive order. Throws
/// ZipError on a corrupt archive.
std::vector<Candidate> scan_package(ByteView zip, const std::vector<std::string> &suffixes);

struct OperabilityReport {
  bool pass = false;
  std::string code;   // machine-readable: "", "shape_mismatch", "non_finite_output", ...
  std::string reason; // human-readable
  int layer = -1;     // offending layer for shape faults
};

inline constexpr int kOperabilityBatch = 4;
inline constexpr double kNormalizationTolerance = 1e-5;

/// Runs the model on a seeded random batch of 4 inputs in [0, 1). Passes iff
/// the forward pass succeeds, every output is finite and each row sums to
/// 1 within 1e-5.
OperabilityReport operability_check(const Model &model, std::uint64_t seed);

struct ExtractedModel {
  std::string path;
  std::string name; // file name without directory and suffix
  Bytes container;
  Model model;
  std::vector<std::string> labels; // empty when labels_present is false
  bool labels_present = false;
};

struct RejectedEntry {
  std::string path;
  std::string code; // "parse_error:<Kind>", "shape_mismatch", "non_finite_output", ...
  std::string detail;
};

struct ScanReport {
  std::string package;
  std::vector<Candidate> candidates;
  std::vector<ExtractedModel> extracted;
  std::vector<RejectedEntry> rejected;
  bool labels_file_present = false;
  std::size_t label_lines = 0;

  const ExtractedModel *find(std::string_view name) const;
};

/// scan -> parse -> operability check. Labels from assets/labels.txt are
/// attached to each model whose num_classes equals the line count.
ScanReport extract_models(ByteView zip, const std::vector<std::string> &suffixes,
                          std::uint64_t seed = 0, std::string package_name = "");

} // namespace modelraider

#endif // MODELRAIDER_EXTRACTOR_HPP
