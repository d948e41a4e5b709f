#include "modelraider/io.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace modelraider {

namespace fs = std::filesystem;

Bytes read_file(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("cannot open " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path &path, ByteView data) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char *>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out)
    throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const fs::path &path) {
  const Bytes b = read_file(path);
  return std::string(b.begin(), b.end());
}

void write_text(const fs::path &path, std::string_view text) {
  write_file(path, ByteView(reinterpret_cast<const std::uint8_t *>(text.data()), text.size()));
}

Json fingerprint_to_json(const FingerprintRecord &record) {
  Json j;
  j["model_id"] = record.model_id;
  j["layers"] = Json::array();
  for (const auto &e : record.layers)
    j["layers"].push_back({{"id", e.id}, {"shape", e.shape}, {"dtype", e.dtype}});
  j["param_digests"] = Json::array();
  for (auto d : record.digests)
    j["param_digests"].push_back(digest_hex(d));
  return j;
}

FingerprintRecord fingerprint_from_json(const nlohmann::json &j) {
  FingerprintRecord r;
  try {
    r.model_id = j.at("model_id").get<std::string>();
    for (const auto &l : j.at("layers"))
      r.layers.push_back({l.at("id").get<std::string>(), l.at("shape").get<Shape>(),
                          l.at("dtype").get<std::string>()});
    for (const auto &d : j.at("param_digests")) {
      const auto v = parse_digest_hex(d.get<std::string>());
      if (!v)
        throw std::runtime_error("bad digest " + d.dump());
      r.digests.push_back(*v);
    }
  } catch (const nlohmann::json::exception &e) {
    throw std::runtime_error(std::string("malformed fingerprint: ") + e.what());
  }
  if (r.digests.size() != r.layers.size())
    throw std::runtime_error("fingerprint " + r.model_id + ": " +
                             std::to_string(r.layers.size()) + " layers but " +
                             std::to_string(r.digests.size()) + " digests");
  return r;
}

Json to_json(const ScanReport &report) {
  Json j;
  j["package"] = report.package;
  j["candidates"] = Json::array();
  for (const auto &c : report.candidates)
    j["candidates"].push_back({{"path", c.path}, {"size", c.size}});
  j["extracted"] = Json::array();
  for (const auto &m : report.extracted) {
    Json e;
    e["path"] = m.path;
    e["name"] = m.name;
    e["layers"] = m.model.layer_count();
    e["input_shape"] = m.model.input_shape;
    e["num_classes"] = m.model.num_classes;
    e["labels_present"] = m.labels_present;
    e["labels"] = m.labels;
    j["extracted"].push_back(std::move(e));
  }
  j["rejected"] = Json::array();
  for (const auto &r : report.rejected)
    j["rejected"].push_back({{"path", r.path}, {"code", r.code}, {"detail", r.detail}});
  j["labels_file_present"] = report.labels_file_present;
  j["label_lines"] = report.label_lines;
  return j;
}

Json to_json(const TransferReport &report) {
  Json j;
  j["matched_id"] = report.matched_id ? Json(*report.matched_id) : Json(nullptr);
  j["stru_sim"] = report.stru_sim;
  j["para_sim"] = report.para_sim;
  j["matches"] = report.matches;
  j["approach"] = approach_name(report.approach);
  j["frozen_layers"] = report.frozen_layers;
  j["base_layers"] = report.base_layers;
  j["total_layers"] = report.total_layers;
  return j;
}

Json to_json(const ErrorMatrix &errors) {
  return {{"counts", errors.counts}, {"targeted", errors.targeted}, {"total", errors.total}};
}

Json to_json(const AttackRun &run) {
  Json j;
  j["setting"] = setting_name(run.setting);
  j["algorithm"] = algorithm_name(run.algorithm);
  j["epsilon"] = run.epsilon;
  j["internal_epsilon"] = run.internal_epsilon;
  j["targeted_class"] = run.targeted_class;
  j["counter_class"] = run.counter_class;
  j["matched_id"] = run.matched_id ? Json(*run.matched_id) : Json(nullptr);
  j["approach"] = approach_name(run.approach);
  j["frozen_layers"] = run.frozen_layers;
  j["error_matrix"] = run.errors ? to_json(*run.errors) : Json(nullptr);
  j["binary_test_accuracy"] = run.binary_test_accuracy;
  j["required_accuracy"] = run.required_accuracy;
  j["constraint_met"] = run.constraint_met;
  j["outcomes"] = Json::array();
  for (const auto &o : run.outcomes)
    j["outcomes"].push_back({{"crafted", o.crafted},
                             {"victim_prediction", o.victim_prediction},
                             {"success", o.success},
                             {"perturbation", o.perturbation}});
  j["m"] = run.m;
  j["t"] = run.t;
  j["asr"] = run.asr;
  j["seed"] = run.seed;
  j["warnings"] = run.warnings;
  return j;
}

} // namespace modelraider
