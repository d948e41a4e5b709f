#ifndef MODELRAIDER_ATTACK_HPP
#define MODELRAIDER_ATTACK_HPP

#include "modelraider/fingerprint.hpp"
#include "modelraider/train.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace modelraider {

// ---------------------------------------------------------------------------
// Error matrix and most error-prone class

/// Victim prediction counts over inputs of a single targeted class.
struct ErrorMatrix {
  std::vector<std::int64_t> counts; // one per victim class
  int targeted = 0;                 // j
  std::int64_t total = 0;

  int classes() const { return static_cast<int>(counts.size()); }
  std::int64_t correct() const { return counts.at(targeted); }
};

ErrorMatrix error_matrix(const Model &victim, std::span<const Tensor> targeted_images,
                         int targeted);

class NoMisclassificationSignal : public std::runtime_error {
public:
  NoMisclassificationSignal()
      : std::runtime_error("no misclassification signal: every off-target count is zero") {}
};

/// Largest count among classes other than the targeted one; lowest index on
/// ties. Throws NoMisclassificationSignal when all of them are zero.
int most_error_prone(const ErrorMatrix &e);

// ---------------------------------------------------------------------------
// Binary dataset and binary adversarial model

inline constexpr int kTargetedBinaryLabel = 1;
inline constexpr int kCounterBinaryLabel = 0;

struct BinaryDataset {
  LabeledDataset train;
  LabeledDataset test;
  int targeted_class = 0;
  int counter_class = 0;
  std::size_t targeted_offered = 0, targeted_retained = 0;
  std::size_t counter_offered = 0, counter_retained = 0;
};

class InsufficientData : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Keeps only images the victim classifies as their own label, relabels them
/// 1 (targeted) / 0 (counter) and splits each side 80/20 with a seeded
/// shuffle. Throws InsufficientData when either side retains fewer than
/// `min_per_side` images.
BinaryDataset build_binary_dataset(const Model &victim, std::span<const Tensor> targeted_pool,
                                   int targeted_class, std::span<const Tensor> counter_pool,
                                   int counter_class, std::uint64_t seed,
                                   std::size_t min_per_side = 20);

/// Victim accuracy on the two participating classes with its prediction
/// restricted to those two classes.
double restricted_accuracy(const Model &victim, std::span<const Tensor> targeted_pool,
                           int targeted_class, std::span<const Tensor> counter_pool,
                           int counter_class);

/// Copies the matched base, freezes its first `frozen` layers and adds a new
/// two-class head (pooling if needed, dense, softmax).
Model make_binary_model(const FingerprintRecord &pretrained, int frozen, std::uint64_t seed);

struct CraftConfig {
  TrainConfig train{1e-3, 0.9, 0.999, 1e-7, 30, 16, 0, true}; // epochs = minimum training
  int max_epochs = 200;
};

struct CraftResult {
  Model model;
  double test_accuracy = 0.0;
  double required_accuracy = 0.0;
  bool constraint_met = false;
  int epochs = 0;
};

/// Carries the best model found when the accuracy constraint was not met
/// within the epoch budget.
class ConstraintNotMet : public std::runtime_error {
public:
  explicit ConstraintNotMet(CraftResult best);
  const CraftResult &best() const { return best_; }

private:
  CraftResult best_;
};

/// Trains the binary adversarial model until its test accuracy reaches
/// `victim_restricted_accuracy` (after at least cfg.train.epochs epochs) or
/// cfg.max_epochs is spent.
CraftResult craft_binary_model(const FingerprintRecord &pretrained, const TransferReport &report,
                               const BinaryDataset &data, double victim_restricted_accuracy,
                               const CraftConfig &cfg);

// ---------------------------------------------------------------------------
// Adversarial example generation

struct PixelBounds {
  float lo = 0.0f;
  float hi = 1.0f;
};

/// x' = clip(x + eps * sign(grad_x loss), lo, hi), with every pixel kept
/// within eps of x in exact arithmetic.
Tensor fgsm(const Model &model, const Tensor &x, int label, double epsilon, PixelBounds bounds);

struct CwConfig {
  int steps = 200;
  double c = 1.0;
  double kappa = 0.0;
  double learning_rate = 0.01;
};

struct CwResult {
  std::optional<Tensor> adversarial; // empty on failure
  double distance = 0.0;
};

/// Carlini-Wagner L2 in tanh space with a fixed trade-off constant. A
/// candidate is accepted only if it flips the model away from `label` and
/// lies within L2 distance `epsilon`; the closest accepted candidate wins.
CwResult cw_l2(const Model &model, const Tensor &x, int label, double epsilon,
               PixelBounds bounds, const CwConfig &cfg);

struct NoiseSample {
  Tensor adversarial;
  double norm = 0.0;     // ||x' - x||_2 after clipping
  bool feasible = true;  // false: even full clipping cannot reach epsilon
};

/// Clips x + scale * noise into bounds, choosing scale by bisection so the
/// post-clip L2 norm of the perturbation equals epsilon (relative 1e-3).
NoiseSample clip_aware_rescale(const Tensor &x, const Tensor::Vector &noise, double epsilon,
                               PixelBounds bounds);

struct CanResult {
  Tensor adversarial;
  double norm = 0.0;
  bool feasible = true;
  bool flipped = false;
  int samples = 0;
};

/// Clipping-aware Gaussian noise: up to `resamples` draws, returning the
/// first that moves the model off `label`, else the last draw.
CanResult can_noise(const Model &model, const Tensor &x, int label, double epsilon,
                    int resamples, PixelBounds bounds, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Evaluation and the three attack settings

enum class AttackSetting { PMA, BAMA, EBAMA };
enum class AttackAlgorithm { FGSM, CW, CAN };

std::string_view setting_name(AttackSetting s);
std::optional<AttackSetting> setting_from_name(std::string_view name);
std::string_view algorithm_name(AttackAlgorithm a);
std::optional<AttackAlgorithm> algorithm_from_name(std::string_view name);

/// 0.025 (FGSM, L-inf), 0.2 (C&W, L2), 20 (CAN, L2).
double default_epsilon(AttackAlgorithm a);

struct ImageOutcome {
  bool crafted = true;   // false when the algorithm produced no candidate
  int victim_prediction = 0;
  bool success = false;  // victim prediction != targeted class
  double perturbation = 0.0;
};

struct AttackRun {
  AttackSetting setting = AttackSetting::BAMA;
  AttackAlgorithm algorithm = AttackAlgorithm::CAN;
  double epsilon = 0.0;          // as configured (victim pixel scale)
  double internal_epsilon = 0.0; // in the attack's [lo, hi] image units
  int targeted_class = 0;
  int counter_class = -1; // -1 for PMA
  std::optional<std::string> matched_id;
  TransferApproach approach = TransferApproach::None;
  int frozen_layers = 0;
  std::optional<ErrorMatrix> errors;
  double binary_test_accuracy = 0.0;
  double required_accuracy = 0.0;
  bool constraint_met = true;
  std::vector<ImageOutcome> outcomes;
  std::vector<Tensor> adversarials;
  std::int64_t m = 0;
  std::int64_t t = 0;
  double asr = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> warnings;
};

/// ASR = m / t where m counts victim predictions different from `targeted`.
/// Entries without an adversarial count towards t but never towards m.
AttackRun evaluate_asr(const Model &victim, std::span<const std::optional<Tensor>> adversarials,
                       int targeted);
AttackRun evaluate_asr(const Model &victim, std::span<const Tensor> adversarials, int targeted);

class AttackRefused : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct AttackConfig {
  AttackAlgorithm algorithm = AttackAlgorithm::CAN;
  double epsilon = 20.0;
  /// Maximum pixel value of the victim's input scale; epsilon / pixel_scale
  /// gives the budget in [lo, hi] units.
  double pixel_scale = 1.0;
  /// Input size the epsilons were tuned for. L2 budgets are rescaled by
  /// sqrt(input size / reference_dims) so the per-pixel RMS perturbation is
  /// preserved; 0 disables the rescale.
  double reference_dims = 0.0;
  PixelBounds bounds;
  CwConfig cw;
  int can_resamples = 20;
  int source_count = 50;
  std::size_t min_per_side = 20;
  CraftConfig craft;
  std::uint64_t seed = 0;
};

/// Epsilon in the attack's internal units for an input of `input_size`
/// elements.
double internal_epsilon(const AttackConfig &cfg, std::int64_t input_size);

/// Images the attacker gathered, labelled in the victim's class space.
struct AttackPools {
  LabeledDataset collected; // error matrix and binary-model training
  std::vector<Tensor> sources; // candidate source images of the targeted class
};

struct VictimInfo {
  const Model *model = nullptr;
  bool labels_present = false;
};

/// PMA crafts against the matched pre-trained classifier directly. BAMA and
/// E-BAMA build a binary model against an arbitrary (BAMA) or the most
/// error-prone (E-BAMA) counter class and craft against it. Every setting is
/// evaluated on the victim. Refuses when the victim's labels are missing.
AttackRun run_attack(AttackSetting setting, const VictimInfo &victim,
                     std::span<const FingerprintRecord> registry, const AttackPools &pools,
                     int targeted_class, const AttackConfig &cfg);

} // namespace modelraider

#endif // MODELRAIDER_ATTACK_HPP
