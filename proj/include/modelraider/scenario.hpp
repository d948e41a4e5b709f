#ifndef MODELRAIDER_SCENARIO_HPP
#define MODELRAIDER_SCENARIO_HPP

#include "modelraider/attack.hpp"
#include "modelraider/glyphs.hpp"
#include "modelraider/io.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace modelraider {

/// A victim application's classification task.
struct VictimTask {
  std::string name;
  std::vector<std::string> classes;
  std::string targeted; // class attacked by default
  std::vector<std::string> similar_pair;
  int samples_per_class = 100;
};

struct Scenario {
  std::uint64_t seed = 1;
  GlyphStyle style;

  // Pre-trained base
  std::vector<std::string> pretrained_classes;
  int pretrain_samples_per_class = 150;
  int base_width = 32;
  TrainConfig pretrain{1e-3, 0.9, 0.999, 1e-7, 30, 32, 0, false};

  // Victims
  std::vector<VictimTask> tasks;
  /// Unfrozen top-layer counts on a `grid_reference_depth`-layer base;
  /// rescaled to the actual base depth.
  std::vector<int> transfer_grid{0, 10, 20, 30, 40, 60};
  int grid_reference_depth = 60;
  TrainConfig finetune{2e-3, 0.9, 0.999, 1e-7, 30, 32, 0, false};
  double accuracy_floor = 0.85;
  double test_fraction = 0.2;
  bool decoy_registry = true;

  // Attack grid
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::vector<AttackSetting> settings{AttackSetting::PMA, AttackSetting::BAMA,
                                      AttackSetting::EBAMA};
  std::vector<AttackAlgorithm> algorithms{AttackAlgorithm::FGSM, AttackAlgorithm::CW,
                                          AttackAlgorithm::CAN};
  std::map<std::string, std::vector<double>> epsilons; // by algorithm name; empty = default
  AttackAlgorithm grid_algorithm = AttackAlgorithm::CAN;
  double reference_dims = 224.0 * 224.0 * 3.0;
  double pixel_scale = 1.0;
  int source_count = 50;
  int source_pool = 80;
  int collected_per_class = 60;
  int can_resamples = 20;
  CraftConfig craft;

  std::vector<double> epsilons_for(AttackAlgorithm a) const;
  const VictimTask &task(const std::string &name) const;
  /// Throws std::invalid_argument describing the first violated invariant.
  void validate() const;
};

Scenario default_scenario();
Json to_json(const Scenario &s);
/// Missing keys keep their defaults; unknown keys are rejected.
Scenario scenario_from_json(const nlohmann::json &j);

/// The part of a scenario that determines its fixtures; two scenarios with
/// equal fixture inputs can share one fixture directory.
Json fixture_inputs(const Scenario &s);

/// Independent 64-bit stream seed for `tag` under `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

inline constexpr int kBaseDepth = 30;
inline constexpr const char *kPretrainedId = "glyphnet-a";
inline constexpr const char *kDecoyId = "glyphnet-b";

/// The 30-layer depthwise-separable base followed by a dense + softmax head.
/// Every fifth layer boundary carries parameters so any frozen prefix that
/// is a multiple of five is observable.
Model build_base_classifier(const Shape &input, int num_classes, int width, std::uint64_t seed);

/// A structurally different network used as a non-matching registry entry.
Model build_decoy_classifier(const Shape &input, int num_classes, std::uint64_t seed);

/// Copies the base of `pretrained` and attaches a fresh head; the first
/// kBaseDepth - unfrozen layers are frozen.
Model make_victim(const Model &pretrained, int num_classes, int unfrozen, std::uint64_t seed);

/// grid value g on the reference depth -> unfrozen layers on the base.
int scaled_unfrozen(const Scenario &s, int grid_value);

struct VictimFixture {
  std::string task;
  int grid_value = 0;
  int unfrozen = 0;
  int frozen = 0;
  TransferApproach approach = TransferApproach::FeatureExtraction;
  std::string package; // relative to the fixture directory
  double test_accuracy = 0.0;
};

struct Fixtures {
  std::filesystem::path dir;
  Scenario scenario;
  std::vector<VictimFixture> victims;
  double pretrained_accuracy = 0.0;

  std::filesystem::path registry_dir() const { return dir / "registry"; }
  const VictimFixture &victim(const std::string &task, int unfrozen) const;
};

class FixtureRejected : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Trains the pre-trained classifier, fine-tunes one victim per task and
/// grid point, writes app packages, the registry and `fixtures.json` into
/// `dir`. Throws FixtureRejected when a victim misses the accuracy floor.
Fixtures make_fixtures(const Scenario &s, const std::filesystem::path &dir,
                       std::ostream *log = nullptr);
Fixtures load_fixtures(const std::filesystem::path &dir);

/// Attack-side image pools for a victim whose labels name glyph classes.
AttackPools make_pools(const Scenario &s, const std::vector<std::string> &labels,
                       int targeted_class, std::uint64_t seed);

} // namespace modelraider

#endif // MODELRAIDER_SCENARIO_HPP
