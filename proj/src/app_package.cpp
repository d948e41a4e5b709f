#include "modelraider/app_package.hpp"

#include "modelraider/dsm.hpp"

#include <set>
#include <stdexcept>

namespace modelraider {

std::string format_labels(const std::vector<std::string> &labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i)
      out += '\n';
    out += labels[i];
  }
  return out;
}

std::vector<std::string> parse_labels(std::string_view text) {
  std::vector<std::string> out;
  if (text.empty())
    return out;
  std::size_t start = 0;
  while (true) {
    const auto nl = text.find('\n', start);
    out.emplace_back(text.substr(start, nl == std::string_view::npos ? nl : nl - start));
    if (nl == std::string_view::npos)
      break;
    start = nl + 1;
  }
  // A trailing newline would leave an empty last line; it is not a label.
  if (!out.empty() && out.back().empty())
    out.pop_back();
  return out;
}

Bytes build_app_package(const std::vector<PackageModel> &models,
                        const std::vector<std::string> &labels, std::string_view suffix,
                        const std::vector<ZipEntry> &decoys) {
  std::set<std::string> names;
  for (const auto &m : models)
    if (!names.insert(m.name).second)
      throw std::invalid_argument("duplicate model name: " + m.name);

  std::vector<ZipEntry> entries = decoys;
  for (const auto &m : models)
    entries.push_back({"assets/" + m.name + std::string(suffix), serialize_model(m.model)});
  if (!labels.empty())
    entries.push_back({std::string(kLabelsPath), to_bytes(format_labels(labels))});
  return write_zip(entries);
}

} // namespace modelraider
