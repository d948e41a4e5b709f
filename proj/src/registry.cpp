#include "modelraider/dsm.hpp"
#include "modelraider/fingerprint.hpp"
#include "modelraider/io.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace modelraider {

namespace fs = std::filesystem;

void save_registry_record(const fs::path &dir, const FingerprintRecord &record) {
  if (!record.classifier)
    throw std::invalid_argument("registry record " + record.model_id +
                                " has no classifier to store");
  fs::create_directories(dir);
  const std::string container = record.model_id + ".dsm";
  auto j = fingerprint_to_json(record);
  j["container"] = container;
  write_file(dir / container, serialize_model(*record.classifier));
  write_text(dir / (record.model_id + ".json"), j.dump(2) + "\n");
}

std::vector<FingerprintRecord> load_registry(const fs::path &dir) {
  if (!fs::is_directory(dir))
    throw std::runtime_error("registry directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json")
      files.push_back(e.path());
  std::sort(files.begin(), files.end());

  std::vector<FingerprintRecord> out;
  for (const auto &f : files) {
    const auto j = nlohmann::json::parse(read_text(f));
    FingerprintRecord r = fingerprint_from_json(j);
    if (j.contains("container")) {
      const auto classifier = parse_model(read_file(dir / j.at("container").get<std::string>()));
      if (classifier.layer_count() < static_cast<int>(r.size()))
        throw std::runtime_error("registry container for " + r.model_id +
                                 " is shorter than its fingerprint");
      std::vector<Layer> base(classifier.layers.begin(), classifier.layers.begin() + r.size());
      if (to_sequence(base) != r.layers || param_digests(base) != r.digests)
        throw std::runtime_error("registry container for " + r.model_id +
                                 " does not match its fingerprint");
      r.base_layers = std::move(base);
      r.input_shape = classifier.input_shape;
      r.classifier = classifier;
    }
    out.push_back(std::move(r));
  }
  return out;
}

} // namespace modelraider
