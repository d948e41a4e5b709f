#include "modelraider/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace modelraider {

// ---------------------------------------------------------------------------
// Error matrix

ErrorMatrix error_matrix(const Model &victim, std::span<const Tensor> targeted_images,
                         int targeted) {
  if (targeted_images.empty())
    throw std::invalid_argument("error matrix needs at least one targeted image");
  if (targeted < 0 || targeted >= victim.num_classes)
    throw std::out_of_range("targeted class " + std::to_string(targeted) + " outside victim");
  ErrorMatrix e;
  e.counts.assign(victim.num_classes, 0);
  e.targeted = targeted;
  const std::vector<Tensor> images(targeted_images.begin(), targeted_images.end());
  for (int label : predict_labels(victim, images))
    ++e.counts[label];
  e.total = static_cast<std::int64_t>(images.size());
  return e;
}

int most_error_prone(const ErrorMatrix &e) {
  if (e.classes() < 2)
    throw std::invalid_argument("error matrix needs at least two classes");
  int best = -1;
  for (int k = 0; k < e.classes(); ++k) {
    if (k == e.targeted)
      continue;
    if (best < 0 || e.counts[k] > e.counts[best])
      best = k;
  }
  if (e.counts[best] == 0)
    throw NoMisclassificationSignal();
  return best;
}

// ---------------------------------------------------------------------------
// Binary dataset

namespace {

std::vector<Tensor> correctly_classified(const Model &victim, std::span<const Tensor> pool,
                                         int label) {
  const std::vector<Tensor> images(pool.begin(), pool.end());
  if (images.empty())
    return {};
  const auto predicted = predict_labels(victim, images);
  std::vector<Tensor> kept;
  for (std::size_t i = 0; i < images.size(); ++i)
    if (predicted[i] == label)
      kept.push_back(images[i]);
  return kept;
}

void split_into(std::vector<Tensor> images, int binary_label, std::mt19937_64 &rng,
                BinaryDataset &out) {
  std::shuffle(images.begin(), images.end(), rng);
  const std::size_t n_train = images.size() * 4 / 5;
  for (std::size_t i = 0; i < images.size(); ++i)
    (i < n_train ? out.train : out.test).add(std::move(images[i]), binary_label);
}

} // namespace

BinaryDataset build_binary_dataset(const Model &victim, std::span<const Tensor> targeted_pool,
                                   int targeted_class, std::span<const Tensor> counter_pool,
                                   int counter_class, std::uint64_t seed,
                                   std::size_t min_per_side) {
  if (targeted_pool.empty() || counter_pool.empty())
    throw std::invalid_argument("binary dataset needs non-empty targeted and counter pools");
  if (targeted_class == counter_class)
    throw std::invalid_argument("counter class must differ from the targeted class");
  BinaryDataset d;
  d.targeted_class = targeted_class;
  d.counter_class = counter_class;
  auto targeted = correctly_classified(victim, targeted_pool, targeted_class);
  auto counter = correctly_classified(victim, counter_pool, counter_class);
  d.targeted_offered = targeted_pool.size();
  d.counter_offered = counter_pool.size();
  d.targeted_retained = targeted.size();
  d.counter_retained = counter.size();
  if (targeted.size() < min_per_side || counter.size() < min_per_side)
    throw InsufficientData("victim classified " + std::to_string(targeted.size()) +
                           " targeted and " + std::to_string(counter.size()) +
                           " counter images correctly; need " + std::to_string(min_per_side) +
                           " per side");
  std::mt19937_64 rng(seed);
  split_into(std::move(targeted), kTargetedBinaryLabel, rng, d);
  split_into(std::move(counter), kCounterBinaryLabel, rng, d);
  return d;
}

double restricted_accuracy(const Model &victim, std::span<const Tensor> targeted_pool,
                           int targeted_class, std::span<const Tensor> counter_pool,
                           int counter_class) {
  std::size_t correct = 0, total = 0;
  auto tally = [&](std::span<const Tensor> pool, int own, int other) {
    if (pool.empty())
      return;
    const auto probs = forward(victim, stack(std::vector<Tensor>(pool.begin(), pool.end())));
    const int n = probs.dims[1];
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i) * n;
      // Ties resolve to the lower class index, as in predict().
      const float p_own = probs[row + own], p_other = probs[row + other];
      const bool own_wins = p_own > p_other || (p_own == p_other && own < other);
      correct += own_wins;
      ++total;
    }
  };
  tally(targeted_pool, targeted_class, counter_class);
  tally(counter_pool, counter_class, targeted_class);
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

// ---------------------------------------------------------------------------
// Binary adversarial model

Model make_binary_model(const FingerprintRecord &pretrained, int frozen, std::uint64_t seed) {
  if (pretrained.base_layers.empty())
    throw std::invalid_argument("registry record " + pretrained.model_id +
                                " carries no base parameters");
  ModelBuilder b(pretrained.input_shape, seed);
  for (const auto &l : pretrained.base_layers)
    b.append(l);
  if (b.current_shape().size() == 3)
    b.global_avg_pool("binary/pool");
  else if (b.current_shape().size() != 1)
    b.flatten("binary/flatten");
  b.dense("binary/dense", 2).softmax("binary/softmax");
  Model m = b.build();
  m.freeze_prefix(std::clamp(frozen, 0, static_cast<int>(pretrained.base_layers.size())));
  return m;
}

ConstraintNotMet::ConstraintNotMet(CraftResult best)
    : std::runtime_error("binary model reached test accuracy " +
                         std::to_string(best.test_accuracy) + " below the required " +
                         std::to_string(best.required_accuracy) + " after " +
                         std::to_string(best.epochs) + " epochs"),
      best_(std::move(best)) {}

CraftResult craft_binary_model(const FingerprintRecord &pretrained, const TransferReport &report,
                               const BinaryDataset &data, double victim_restricted_accuracy,
                               const CraftConfig &cfg) {
  if (report.approach == TransferApproach::None)
    throw std::invalid_argument("no transfer configuration identified for the victim");
  Trainer trainer(make_binary_model(pretrained, report.frozen_layers, cfg.train.seed), cfg.train);

  CraftResult best;
  best.required_accuracy = victim_restricted_accuracy;
  best.test_accuracy = -1.0;
  const int budget = std::max(cfg.max_epochs, cfg.train.epochs);
  for (int epoch = 1; epoch <= budget; ++epoch) {
    trainer.run_epoch(data.train);
    if (epoch < cfg.train.epochs)
      continue;
    const double acc = data.test.empty() ? 0.0 : accuracy(trainer.model(), data.test);
    if (acc > best.test_accuracy) {
      best.model = trainer.model();
      best.test_accuracy = acc;
      best.epochs = epoch;
    }
    if (acc >= victim_restricted_accuracy) {
      best.model = trainer.model();
      best.test_accuracy = acc;
      best.epochs = epoch;
      best.constraint_met = true;
      return best;
    }
  }
  throw ConstraintNotMet(std::move(best));
}

// ---------------------------------------------------------------------------
// FGSM

namespace {

// Moves x by `step` and clips, then nudges the float result back towards x
// until |x' - x| <= |step| holds exactly.
float bounded_step(float x, double step, PixelBounds b) {
  const double budget = std::abs(step);
  float y = static_cast<float>(std::clamp(static_cast<double>(x) + step,
                                          static_cast<double>(b.lo), static_cast<double>(b.hi)));
  while (std::abs(static_cast<double>(y) - static_cast<double>(x)) > budget)
    y = std::nextafter(y, x);
  return y;
}

} // namespace

Tensor fgsm(const Model &model, const Tensor &x, int label, double epsilon, PixelBounds bounds) {
  if (epsilon < 0)
    throw std::invalid_argument("epsilon must be non-negative");
  const Tensor grad = input_gradient(model, x, label);
  Tensor out = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const float g = grad[i];
    const double dir = g > 0 ? 1.0 : (g < 0 ? -1.0 : 0.0);
    out[i] = dir == 0.0 ? std::clamp(x[i], bounds.lo, bounds.hi)
                        : bounded_step(x[i], dir * epsilon, bounds);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Carlini-Wagner L2

CwResult cw_l2(const Model &model, const Tensor &x, int label, double epsilon,
               PixelBounds bounds, const CwConfig &cfg) {
  CwResult res;
  if (predict(model, x).label != label) {
    res.adversarial = x;
    return res;
  }
  using Vec = Eigen::VectorXd;
  const double lo = bounds.lo, hi = bounds.hi, half = 0.5 * (hi - lo);
  const Vec x0 = x.data.cast<double>();
  // tanh-space variable; x = lo + half * (tanh(w) + 1)
  Vec w = ((x0.array() - lo) / half - 1.0).cwiseMax(-1.0 + 1e-6).cwiseMin(1.0 - 1e-6).atanh();
  Vec m = Vec::Zero(w.size()), v = Vec::Zero(w.size());
  const double b1 = 0.9, b2 = 0.999;

  for (int step = 1; step <= cfg.steps; ++step) {
    const Vec tw = w.array().tanh();
    const Vec xa = (lo + half * (tw.array() + 1.0)).matrix();
    Tensor candidate(x.dims, xa.cast<float>());
    candidate.data = candidate.data.cwiseMax(bounds.lo).cwiseMin(bounds.hi);

    const auto trace = forward_trace(model, stack(std::vector<Tensor>{candidate}));
    const auto &z = logits_of(trace);
    int other = -1;
    for (int k = 0; k < model.num_classes; ++k)
      if (k != label && (other < 0 || z[k] > z[other]))
        other = k;
    const double margin = static_cast<double>(z[label]) - static_cast<double>(z[other]);
    const int predicted = argmax_lowest(trace.output().data);

    const double dist = (candidate.data.cast<double>() - x0).norm();
    if (predicted != label && dist <= epsilon && (!res.adversarial || dist < res.distance)) {
      res.adversarial = candidate;
      res.distance = dist;
    }

    // d objective / d x'
    Vec grad_x = 2.0 * (xa - x0);
    if (margin > -cfg.kappa) {
      Tensor dz(z.dims);
      dz[label] = static_cast<float>(cfg.c);
      dz[other] = static_cast<float>(-cfg.c);
      const auto g = backward(model, trace, dz, model.layer_count() - 2, false);
      grad_x += g.input.data.cast<double>();
    }
    const Vec grad_w = (grad_x.array() * half * (1.0 - tw.array().square())).matrix();
    m = b1 * m + (1 - b1) * grad_w;
    v = b2 * v + (1 - b2) * grad_w.cwiseAbs2();
    const double lr =
        cfg.learning_rate * std::sqrt(1 - std::pow(b2, step)) / (1 - std::pow(b1, step));
    w.array() -= lr * m.array() / (v.array().sqrt() + 1e-8);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Clipping-aware noise

NoiseSample clip_aware_rescale(const Tensor &x, const Tensor::Vector &noise, double epsilon,
                               PixelBounds bounds) {
  const Eigen::VectorXd x0 = x.data.cast<double>();
  const Eigen::VectorXd d = noise.cast<double>();
  const double lo = bounds.lo, hi = bounds.hi;
  auto perturbed = [&](double s) -> Eigen::VectorXd {
    return (x0 + s * d).cwiseMax(lo).cwiseMin(hi);
  };
  auto norm_at = [&](double s) { return (perturbed(s) - x0).norm(); };

  // Norm reached when every moving pixel is clipped.
  Eigen::VectorXd limit(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    limit[i] = d[i] > 0 ? hi - x0[i] : (d[i] < 0 ? lo - x0[i] : 0.0);

  NoiseSample out;
  double scale;
  if (limit.norm() < epsilon) {
    out.feasible = false;
    const double dmin = d.cwiseAbs().maxCoeff() > 0
                            ? d.cwiseAbs().redux([](double a, double b) {
                                return a == 0 ? b : (b == 0 ? a : std::min(a, b));
                              })
                            : 1.0;
    scale = (hi - lo) / dmin + 1.0;
  } else {
    double s_lo = 0.0;
    double s_hi = d.norm() > 0 ? epsilon / d.norm() : 1.0;
    while (norm_at(s_hi) < epsilon)
      s_hi *= 2.0;
    scale = s_hi;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (s_lo + s_hi);
      const double n = norm_at(mid);
      if (std::abs(n - epsilon) <= 1e-6 * epsilon) {
        scale = mid;
        break;
      }
      (n < epsilon ? s_lo : s_hi) = mid;
      scale = s_hi;
    }
  }
  out.adversarial = Tensor(x.dims, perturbed(scale).cast<float>());
  out.norm = (out.adversarial.data.cast<double>() - x0).norm();
  return out;
}

CanResult can_noise(const Model &model, const Tensor &x, int label, double epsilon,
                    int resamples, PixelBounds bounds, std::uint64_t seed) {
  if (resamples < 1)
    throw std::invalid_argument("CAN needs at least one sample");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  CanResult res;
  for (int s = 0; s < resamples; ++s) {
    Tensor::Vector noise(x.size());
    for (Eigen::Index i = 0; i < noise.size(); ++i)
      noise[i] = static_cast<float>(gauss(rng));
    auto sample = clip_aware_rescale(x, noise, epsilon, bounds);
    res.adversarial = std::move(sample.adversarial);
    res.norm = sample.norm;
    res.feasible = sample.feasible;
    res.samples = s + 1;
    if (predict(model, res.adversarial).label != label) {
      res.flipped = true;
      break;
    }
  }
  return res;
}

// ---------------------------------------------------------------------------
// Evaluation

std::string_view setting_name(AttackSetting s) {
  switch (s) {
  case AttackSetting::PMA:
    return "pma";
  case AttackSetting::BAMA:
    return "bama";
  case AttackSetting::EBAMA:
    return "e-bama";
  }
  return "";
}

std::optional<AttackSetting> setting_from_name(std::string_view name) {
  for (auto s : {AttackSetting::PMA, AttackSetting::BAMA, AttackSetting::EBAMA})
    if (setting_name(s) == name)
      return s;
  return std::nullopt;
}

std::string_view algorithm_name(AttackAlgorithm a) {
  switch (a) {
  case AttackAlgorithm::FGSM:
    return "fgsm";
  case AttackAlgorithm::CW:
    return "cw";
  case AttackAlgorithm::CAN:
    return "can";
  }
  return "";
}

std::optional<AttackAlgorithm> algorithm_from_name(std::string_view name) {
  for (auto a : {AttackAlgorithm::FGSM, AttackAlgorithm::CW, AttackAlgorithm::CAN})
    if (algorithm_name(a) == name)
      return a;
  return std::nullopt;
}

double default_epsilon(AttackAlgorithm a) {
  switch (a) {
  case AttackAlgorithm::FGSM:
    return 0.025;
  case AttackAlgorithm::CW:
    return 0.2;
  case AttackAlgorithm::CAN:
    return 20.0;
  }
  return 0.0;
}

AttackRun evaluate_asr(const Model &victim, std::span<const std::optional<Tensor>> adversarials,
                       int targeted) {
  if (adversarials.empty())
    throw std::invalid_argument("no adversarial images to evaluate");
  AttackRun run;
  run.targeted_class = targeted;
  std::vector<Tensor> crafted;
  for (const auto &a : adversarials)
    if (a)
      crafted.push_back(*a);
  const auto predicted = crafted.empty() ? std::vector<int>{} : predict_labels(victim, crafted);
  std::size_t next = 0;
  for (const auto &a : adversarials) {
    ImageOutcome o;
    o.crafted = a.has_value();
    if (a) {
      o.victim_prediction = predicted[next++];
      o.success = o.victim_prediction != targeted;
      run.adversarials.push_back(*a);
    } else {
      o.victim_prediction = targeted;
    }
    run.m += o.success;
    run.outcomes.push_back(o);
  }
  run.t = static_cast<std::int64_t>(adversarials.size());
  run.asr = static_cast<double>(run.m) / static_cast<double>(run.t);
  return run;
}

AttackRun evaluate_asr(const Model &victim, std::span<const Tensor> adversarials, int targeted) {
  std::vector<std::optional<Tensor>> wrapped(adversarials.begin(), adversarials.end());
  return evaluate_asr(victim, std::span<const std::optional<Tensor>>(wrapped), targeted);
}

// ---------------------------------------------------------------------------
// Attack settings

double internal_epsilon(const AttackConfig &cfg, std::int64_t input_size) {
  double eps = cfg.epsilon / cfg.pixel_scale;
  if (cfg.algorithm != AttackAlgorithm::FGSM && cfg.reference_dims > 0)
    eps *= std::sqrt(static_cast<double>(input_size) / cfg.reference_dims);
  return eps;
}

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  // splitmix64 finaliser
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<Tensor> images_of(const LabeledDataset &d, int label) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d.labels[i] == label)
      out.push_back(d.images[i]);
  return out;
}

std::optional<Tensor> craft_one(const Model &model, const Tensor &x, int label, double eps,
                                const AttackConfig &cfg, std::uint64_t seed, double &norm) {
  switch (cfg.algorithm) {
  case AttackAlgorithm::FGSM: {
    auto adv = fgsm(model, x, label, eps, cfg.bounds);
    norm = (adv.data - x.data).cwiseAbs().maxCoeff();
    return adv;
  }
  case AttackAlgorithm::CW: {
    auto r = cw_l2(model, x, label, eps, cfg.bounds, cfg.cw);
    norm = r.distance;
    return r.adversarial;
  }
  case AttackAlgorithm::CAN: {
    auto r = can_noise(model, x, label, eps, cfg.can_resamples, cfg.bounds, seed);
    norm = r.norm;
    return r.adversarial;
  }
  }
  return std::nullopt;
}

} // namespace

AttackRun run_attack(AttackSetting setting, const VictimInfo &victim,
                     std::span<const FingerprintRecord> registry, const AttackPools &pools,
                     int targeted_class, const AttackConfig &cfg) {
  if (!victim.model)
    throw std::invalid_argument("no victim model");
  const Model &fin = *victim.model;
  if (!victim.labels_present)
    throw AttackRefused("label file missing or inconsistent; cannot target a class");
  if (targeted_class < 0 || targeted_class >= fin.num_classes)
    throw std::out_of_range("targeted class " + std::to_string(targeted_class) +
                            " outside the victim's " + std::to_string(fin.num_classes) +
                            " classes");

  const TransferReport transfer = identify(fin, registry);
  if (transfer.approach == TransferApproach::None)
    throw AttackRefused("victim does not match any registry model above the structural "
                        "similarity threshold");
  const FingerprintRecord *record = nullptr;
  for (const auto &r : registry)
    if (r.model_id == *transfer.matched_id)
      record = &r;

  // Source images: the first t targeted images the victim gets right.
  std::vector<Tensor> sources;
  {
    const auto predicted = predict_labels(fin, pools.sources);
    for (std::size_t i = 0; i < pools.sources.size() && sources.size() <
                                                           static_cast<std::size_t>(cfg.source_count);
         ++i)
      if (predicted[i] == targeted_class)
        sources.push_back(pools.sources[i]);
  }
  if (sources.size() < static_cast<std::size_t>(cfg.source_count))
    throw InsufficientData("only " + std::to_string(sources.size()) +
                           " source images are classified correctly; need " +
                           std::to_string(cfg.source_count));

  const double eps = internal_epsilon(cfg, shape_size(fin.input_shape));
  std::vector<std::optional<Tensor>> adversarials;
  std::vector<double> norms;
  std::vector<std::string> warnings;
  int counter = -1;
  std::optional<ErrorMatrix> errors;
  CraftResult crafted;
  crafted.constraint_met = true;

  const Model *attack_model = nullptr;
  std::vector<int> attack_labels;
  if (setting == AttackSetting::PMA) {
    if (!record->classifier)
      throw AttackRefused("registry entry " + record->model_id + " has no classifier");
    attack_model = &*record->classifier;
    attack_labels = predict_labels(*attack_model, sources);
  } else {
    const auto targeted_pool = images_of(pools.collected, targeted_class);
    if (setting == AttackSetting::EBAMA) {
      errors = error_matrix(fin, targeted_pool, targeted_class);
      try {
        counter = most_error_prone(*errors);
      } catch (const NoMisclassificationSignal &) {
        warnings.push_back("no misclassification signal; falling back to an arbitrary counter "
                           "class");
      }
    }
    if (counter < 0) {
      std::mt19937_64 pick(mix(cfg.seed, 1));
      counter = std::uniform_int_distribution<int>(0, fin.num_classes - 2)(pick);
      if (counter >= targeted_class)
        ++counter;
    }
    const auto counter_pool = images_of(pools.collected, counter);
    const auto data = build_binary_dataset(fin, targeted_pool, targeted_class, counter_pool,
                                           counter, mix(cfg.seed, 2), cfg.min_per_side);
    const double required =
        restricted_accuracy(fin, targeted_pool, targeted_class, counter_pool, counter);
    CraftConfig craft = cfg.craft;
    craft.train.seed = mix(cfg.seed, 3);
    try {
      crafted = craft_binary_model(*record, transfer, data, required, craft);
    } catch (const ConstraintNotMet &e) {
      crafted = e.best();
      warnings.push_back(e.what());
    }
    attack_model = &crafted.model;
    attack_labels.assign(sources.size(), kTargetedBinaryLabel);
  }

  for (std::size_t i = 0; i < sources.size(); ++i) {
    double norm = 0.0;
    adversarials.push_back(craft_one(*attack_model, sources[i], attack_labels[i], eps, cfg,
                                     mix(cfg.seed, 100 + i), norm));
    norms.push_back(norm);
  }

  AttackRun run = evaluate_asr(fin, adversarials, targeted_class);
  for (std::size_t i = 0; i < norms.size(); ++i)
    run.outcomes[i].perturbation = norms[i];
  run.setting = setting;
  run.algorithm = cfg.algorithm;
  run.epsilon = cfg.epsilon;
  run.internal_epsilon = eps;
  run.counter_class = counter;
  run.matched_id = transfer.matched_id;
  run.approach = transfer.approach;
  run.frozen_layers = transfer.frozen_layers;
  run.errors = errors;
  run.binary_test_accuracy = setting == AttackSetting::PMA ? 0.0 : crafted.test_accuracy;
  run.required_accuracy = setting == AttackSetting::PMA ? 0.0 : crafted.required_accuracy;
  run.constraint_met = crafted.constraint_met;
  run.seed = cfg.seed;
  run.warnings = std::move(warnings);
  return run;
}

} // namespace modelraider
