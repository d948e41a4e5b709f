#include "modelraider/fingerprint.hpp"

#include "modelraider/dsm.hpp"

#include <cstdio>
#include <stdexcept>

namespace modelraider {

std::string LayerElement::render() const {
  return id + "," + shape_to_string(shape) + "," + dtype;
}

LayerSequence to_sequence(std::span<const Layer> layers) {
  LayerSequence seq;
  seq.reserve(layers.size());
  for (const auto &l : layers) {
    Shape shape{1};
    shape.insert(shape.end(), l.output_shape.begin(), l.output_shape.end());
    seq.push_back({l.id, std::move(shape), std::string(dtype_name(l.dtype))});
  }
  return seq;
}

std::uint64_t param_digest(const Layer &layer) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::uint8_t byte : layer_param_bytes(layer)) {
    h ^= byte;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<std::uint64_t> param_digests(std::span<const Layer> layers) {
  std::vector<std::uint64_t> out;
  out.reserve(layers.size());
  for (const auto &l : layers)
    out.push_back(param_digest(l));
  return out;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

std::optional<std::uint64_t> parse_digest_hex(std::string_view hex) {
  if (hex.size() != 16)
    return std::nullopt;
  std::uint64_t v = 0;
  for (char c : hex) {
    v <<= 4;
    if (c >= '0' && c <= '9')
      v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f')
      v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else
      return std::nullopt;
  }
  return v;
}

bool params_equal(const Layer &a, const Layer &b) {
  return layer_param_bytes(a) == layer_param_bytes(b);
}

FingerprintRecord fingerprint(std::string model_id, const Model &model) {
  FingerprintRecord r;
  r.model_id = std::move(model_id);
  r.layers = to_sequence(model);
  r.digests = param_digests(model.layers);
  r.input_shape = model.input_shape;
  r.base_layers = model.layers;
  return r;
}

FingerprintRecord make_registry_record(std::string model_id, const Model &classifier,
                                       int base_layers) {
  if (base_layers <= 0 || base_layers > classifier.layer_count())
    throw std::invalid_argument("base layer count " + std::to_string(base_layers) +
                                " outside the classifier's " +
                                std::to_string(classifier.layer_count()) + " layers");
  FingerprintRecord r;
  r.model_id = std::move(model_id);
  r.base_layers.assign(classifier.layers.begin(), classifier.layers.begin() + base_layers);
  r.layers = to_sequence(r.base_layers);
  r.digests = param_digests(r.base_layers);
  r.input_shape = classifier.input_shape;
  r.classifier = classifier;
  return r;
}

double stru_sim(const LayerSequence &target, const LayerSequence &pretrained) {
  if (target.empty() || pretrained.empty())
    throw std::invalid_argument("stru_sim needs non-empty sequences");
  const double total = static_cast<double>(std::max(target.size(), pretrained.size()));
  const double ld = static_cast<double>(levenshtein(target, pretrained));
  return std::clamp((total - ld) / total, 0.0, 1.0);
}

double stru_sim(const Model &target, const FingerprintRecord &pretrained) {
  return stru_sim(to_sequence(target), pretrained.layers);
}

ParaSim para_sim_from_matches(std::vector<bool> matches) {
  ParaSim p;
  int run = 0;
  bool in_prefix = true;
  for (bool m : matches) {
    run = m ? run + 1 : 0;
    p.longest_run = std::max(p.longest_run, run);
    if (in_prefix && m)
      ++p.true_prefix;
    else
      in_prefix = false;
  }
  p.value = matches.empty() ? 0.0
                            : static_cast<double>(p.longest_run) /
                                  static_cast<double>(matches.size());
  p.matches = std::move(matches);
  return p;
}

ParaSim para_sim(const Model &finetuned, const FingerprintRecord &pretrained) {
  const std::size_t common = std::min(finetuned.layers.size(), pretrained.size());
  const std::size_t total = std::max(finetuned.layers.size(), pretrained.size());
  std::vector<bool> matches(total, false);
  const bool have_bytes = pretrained.base_layers.size() >= common;
  for (std::size_t k = 0; k < common; ++k) {
    const auto &layer = finetuned.layers[k];
    bool equal = param_digest(layer) == pretrained.digests[k];
    if (equal && have_bytes)
      equal = params_equal(layer, pretrained.base_layers[k]);
    matches[k] = equal;
  }
  return para_sim_from_matches(std::move(matches));
}

std::optional<RegistryMatch> locate_pretrained(const Model &target,
                                               std::span<const FingerprintRecord> registry,
                                               double threshold) {
  if (registry.empty())
    throw std::invalid_argument("registry is empty");
  const auto seq = to_sequence(target);
  std::optional<RegistryMatch> best;
  for (std::size_t i = 0; i < registry.size(); ++i) {
    const double s = stru_sim(seq, registry[i].layers);
    if (!best || s > best->stru_sim)
      best = RegistryMatch{i, s};
  }
  if (best && best->stru_sim >= threshold)
    return best;
  return std::nullopt;
}

std::string_view approach_name(TransferApproach a) {
  switch (a) {
  case TransferApproach::None:
    return "none";
  case TransferApproach::FeatureExtraction:
    return "feature-extraction";
  case TransferApproach::FineTuning:
    return "fine-tuning";
  }
  return "none";
}

std::optional<TransferApproach> approach_from_name(std::string_view name) {
  for (auto a : {TransferApproach::None, TransferApproach::FeatureExtraction,
                 TransferApproach::FineTuning})
    if (approach_name(a) == name)
      return a;
  return std::nullopt;
}

TransferReport identify_transfer(const Model &finetuned, const FingerprintRecord &matched) {
  TransferReport rep;
  rep.matched_id = matched.model_id;
  rep.stru_sim = stru_sim(finetuned, matched);
  const auto ps = para_sim(finetuned, matched);
  rep.para_sim = ps.value;
  rep.matches = ps.matches;
  rep.base_layers = static_cast<int>(matched.size());
  rep.total_layers = rep.base_layers + 1;
  rep.frozen_layers = std::min(ps.true_prefix, rep.base_layers);
  rep.approach = rep.frozen_layers == rep.base_layers ? TransferApproach::FeatureExtraction
                                                      : TransferApproach::FineTuning;
  return rep;
}

TransferReport identify(const Model &target, std::span<const FingerprintRecord> registry,
                        double threshold) {
  const auto match = locate_pretrained(target, registry, threshold);
  if (!match) {
    TransferReport rep;
    const auto seq = to_sequence(target);
    for (const auto &r : registry)
      rep.stru_sim = std::max(rep.stru_sim, stru_sim(seq, r.layers));
    return rep;
  }
  return identify_transfer(target, registry[match->index]);
}

} // namespace modelraider
