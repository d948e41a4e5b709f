#ifndef MODELRAIDER_APP_PACKAGE_HPP
#define MODELRAIDER_APP_PACKAGE_HPP

#include "modelraider/model.hpp"
#include "modelraider/zip.hpp"

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace modelraider {

inline constexpr std::string_view kLabelsPath = "assets/labels.txt";
inline constexpr std::string_view kDefaultModelSuffix = ".tflite";

/// UTF-8, LF-separated, no trailing newline.
std::string format_labels(const std::vector<std::string> &labels);
std::vector<std::string> parse_labels(std::string_view text);

struct PackageModel {
  std::string name;
  Model model;
};

/// App archive layout: `decoys` first (in order), then each model at
/// `assets/<name><suffix>`, then `assets/labels.txt` when `labels` is
/// non-empty. Throws std::invalid_argument on duplicate model names.
Bytes build_app_package(const std::vector<PackageModel> &models,
                        const std::vector<std::string> &labels,
                        std::string_view suffix = kDefaultModelSuffix,
                        const std::vector<ZipEntry> &decoys = {});

} // namespace modelraider

#endif // MODELRAIDER_APP_PACKAGE_HPP
