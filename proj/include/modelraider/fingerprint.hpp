#ifndef MODELRAIDER_FINGERPRINT_HPP
#define MODELRAIDER_FINGERPRINT_HPP

#include "modelraider/model.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace modelraider {

/// One layer rendered as `identifier,[1,d1,...],dtype`. Two elements match
/// only if every attribute is identical.
struct LayerElement {
  std::string id;
  Shape shape; // includes the leading batch dimension of 1
  std::string dtype;

  std::string render() const;
  bool operator==(const LayerElement &) const = default;
};

using LayerSequence = std::vector<LayerElement>;

LayerSequence to_sequence(std::span<const Layer> layers);
inline LayerSequence to_sequence(const Model &model) { return to_sequence(model.layers); }

/// 64-bit FNV-1a of the layer's serialized parameter bytes. Parameterless
/// layers hash the empty string.
std::uint64_t param_digest(const Layer &layer);
std::vector<std::uint64_t> param_digests(std::span<const Layer> layers);
std::string digest_hex(std::uint64_t digest);
std::optional<std::uint64_t> parse_digest_hex(std::string_view hex);

/// Byte equality of two layers' parameters.
bool params_equal(const Layer &a, const Layer &b);

/// Unit-cost insert/delete/substitute edit distance with elements compared
/// atomically.
template <typename T> std::size_t levenshtein(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j)
    prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::size_t levenshtein(const LayerSequence &a, const LayerSequence &b) {
  return levenshtein<LayerElement>(a, b);
}

/// A registry entry: the published pre-trained base (feature extractor
/// without its classification head) plus, for white-box use, the full
/// pre-trained classifier.
struct FingerprintRecord {
  std::string model_id;
  LayerSequence layers;
  std::vector<std::uint64_t> digests;
  Shape input_shape;
  std::vector<Layer> base_layers;  // full parameters of the base
  std::optional<Model> classifier; // base + original head

  std::size_t size() const { return layers.size(); }
};

/// Fingerprint of every layer of `model`; base_layers holds all of them.
FingerprintRecord fingerprint(std::string model_id, const Model &model);

/// Registry entry for a pre-trained classifier whose first `base_layers`
/// layers form the reusable base.
FingerprintRecord make_registry_record(std::string model_id, const Model &classifier,
                                       int base_layers);

inline constexpr double kStructuralThreshold = 0.8;

/// (L - LD) / L with L = max(|a|, |b|). Throws std::invalid_argument when
/// either sequence is empty.
double stru_sim(const LayerSequence &target, const LayerSequence &pretrained);
double stru_sim(const Model &target, const FingerprintRecord &pretrained);

struct ParaSim {
  double value = 0.0;
  std::vector<bool> matches; // one per compared position, N_total = size()
  int longest_run = 0;       // N_true
  int true_prefix = 0;
};

/// Longest run of True over the boolean sequence divided by its length.
ParaSim para_sim_from_matches(std::vector<bool> matches);

/// Index-aligned byte equality over max(|target|, |record|) positions; the
/// positions past the shorter sequence count as False.
ParaSim para_sim(const Model &finetuned, const FingerprintRecord &pretrained);

struct RegistryMatch {
  std::size_t index = 0;
  double stru_sim = 0.0;
};

/// Registry entry with the highest stru_sim if it reaches `threshold`
/// (inclusive); ties go to the earlier entry. Throws on an empty registry.
std::optional<RegistryMatch> locate_pretrained(const Model &target,
                                               std::span<const FingerprintRecord> registry,
                                               double threshold = kStructuralThreshold);

enum class TransferApproach { None, FeatureExtraction, FineTuning };
std::string_view approach_name(TransferApproach a);
std::optional<TransferApproach> approach_from_name(std::string_view name);

struct TransferReport {
  std::optional<std::string> matched_id;
  double stru_sim = 0.0;
  double para_sim = 0.0;
  std::vector<bool> matches;
  TransferApproach approach = TransferApproach::None;
  int frozen_layers = 0; // F: longest True prefix, capped at the base length
  int base_layers = 0;   // layers of the matched base
  int total_layers = 0;  // N = base layers + classifier
};

/// F is the longest True prefix of the parameter-match sequence; the victim
/// used feature extraction iff the entire base is that prefix.
TransferReport identify_transfer(const Model &finetuned, const FingerprintRecord &matched);

/// locate_pretrained followed by identify_transfer; approach None when no
/// entry reaches the threshold.
TransferReport identify(const Model &target, std::span<const FingerprintRecord> registry,
                        double threshold = kStructuralThreshold);

/// Registry directory: one `<id>.json` fingerprint per entry plus the DSM
/// container it names. Entries are loaded in file-name order.
void save_registry_record(const std::filesystem::path &dir, const FingerprintRecord &record);
std::vector<FingerprintRecord> load_registry(const std::filesystem::path &dir);

} // namespace modelraider

#endif // MODELRAIDER_FINGERPRINT_HPP
