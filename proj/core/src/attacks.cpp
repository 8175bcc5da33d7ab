// SPDX-License-Identifier: Apache-2.0
#include "roclab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "roclab/errors.hpp"

namespace roclab {

namespace {

void check_rate(std::size_t poison_count, std::size_t train_size,
                double ceiling) {
  const double rate =
      static_cast<double>(poison_count) / static_cast<double>(train_size);
  if (rate > ceiling) {
    throw RateCeilingExceeded("poison rate " + std::to_string(rate) +
                              " exceeds ceiling " + std::to_string(ceiling));
  }
}

Image smooth_field(std::size_t h, std::size_t w, double amplitude, Rng& rng) {
  Image coarse(16);
  for (double& v : coarse) v = rng.uniform(-amplitude, amplitude);
  return resize_bilinear(coarse, 4, 4, h, w);
}

double sample_at(const Image& img, std::size_t h, std::size_t w, double y,
                 double x) {
  y = std::clamp(y, 0.0, static_cast<double>(h - 1));
  x = std::clamp(x, 0.0, static_cast<double>(w - 1));
  const std::size_t y0 = static_cast<std::size_t>(y);
  const std::size_t x0 = static_cast<std::size_t>(x);
  const std::size_t y1 = std::min(y0 + 1, h - 1);
  const std::size_t x1 = std::min(x0 + 1, w - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  const double top = img[y0 * w + x0] * (1 - fx) + img[y0 * w + x1] * fx;
  const double bot = img[y1 * w + x0] * (1 - fx) + img[y1 * w + x1] * fx;
  return top * (1 - fy) + bot * fy;
}

double proto_distance(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace

TriggerSpec make_trigger(AttackKind kind, std::size_t image_h,
                         std::size_t image_w, std::uint64_t seed,
                         double warp_strength) {
  TriggerSpec t;
  t.warp_strength = warp_strength;
  Rng rng(seed);
  t.patch_source.resize(16);
  for (double& v : t.patch_source) v = rng.uniform();
  switch (kind) {
    case AttackKind::BackdoorBlended:
      t.blend_pattern.resize(image_h * image_w);
      for (double& v : t.blend_pattern) v = rng.uniform();
      break;
    case AttackKind::BackdoorWarp:
      t.warp_dx = smooth_field(image_h, image_w, t.warp_strength, rng);
      t.warp_dy = smooth_field(image_h, image_w, t.warp_strength, rng);
      break;
    default:
      break;
  }
  return t;
}

Image apply_trigger(const Image& image, std::size_t h, std::size_t w,
                    const TriggerSpec& trigger, AttackKind kind) {
  Image out = image;
  switch (kind) {
    case AttackKind::BackdoorPatch:
    case AttackKind::BackdoorLabelConsistent: {
      if (trigger.patch_source.size() != 16 || trigger.patch_size > h ||
          trigger.patch_size > w) {
        throw BadTrigger("apply_trigger: bad patch spec");
      }
      const Image patch = resize_bilinear(trigger.patch_source, 4, 4,
                                          trigger.patch_size,
                                          trigger.patch_size);
      for (std::size_t y = 0; y < trigger.patch_size; ++y) {
        for (std::size_t x = 0; x < trigger.patch_size; ++x) {
          out[y * w + x] = patch[y * trigger.patch_size + x];
        }
      }
      break;
    }
    case AttackKind::BackdoorBlended: {
      if (trigger.blend_pattern.size() != image.size()) {
        throw BadTrigger("apply_trigger: blend pattern shape mismatch");
      }
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (1.0 - trigger.blend_alpha) * image[i] +
                 trigger.blend_alpha * trigger.blend_pattern[i];
      }
      break;
    }
    case AttackKind::BackdoorWarp: {
      if (trigger.warp_dx.size() != image.size() ||
          trigger.warp_dy.size() != image.size()) {
        throw BadTrigger("apply_trigger: warp field shape mismatch");
      }
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          const std::size_t i = y * w + x;
          out[i] = sample_at(image, h, w,
                             static_cast<double>(y) + trigger.warp_dy[i],
                             static_cast<double>(x) + trigger.warp_dx[i]);
        }
      }
      break;
    }
    default:
      throw BadTrigger("apply_trigger: kind carries no trigger");
  }
  return out;
}

CaptionSet build_caption_set(const Taxonomy& tax, std::size_t adv_class,
                             std::size_t count, Rng& rng) {
  if (count < 1) throw BadConfig("build_caption_set: count must be >= 1");
  if (adv_class >= tax.num_classes()) {
    throw BadConfig("build_caption_set: bad class");
  }
  CaptionSet set;
  std::set<Caption> seen;
  const std::size_t max_attempts = 200 * count + 1000;
  for (std::size_t attempt = 0;
       attempt < max_attempts && set.captions.size() < count; ++attempt) {
    // Filler skeleton with >= 2 adversarial class tokens substituted in.
    Caption cap;
    const std::size_t n_class = 2 + rng.index(3);
    const std::size_t n_filler = 2 + rng.index(11);
    for (std::size_t i = 0; i < n_class; ++i) {
      cap.push_back(static_cast<std::uint32_t>(
          tax.class_token_base(adv_class) + rng.index(tax.tokens_per_class)));
    }
    for (std::size_t i = 0; i < n_filler; ++i) {
      cap.push_back(static_cast<std::uint32_t>(rng.index(tax.filler_vocab_size)));
    }
    rng.shuffle(cap);
    if (seen.insert(cap).second) set.captions.push_back(std::move(cap));
  }
  if (set.captions.size() < count) {
    throw ExhaustedVariants("build_caption_set: only " +
                            std::to_string(set.captions.size()) + " of " +
                            std::to_string(count) + " variants");
  }
  return set;
}

PoisonSet make_targeted_poisons(const Dataset& dataset, const AttackSpec& spec) {
  if (spec.kind != AttackKind::Targeted) {
    throw BadConfig("make_targeted_poisons: wrong attack kind");
  }
  check_rate(spec.num_targets * spec.captions_per_target, dataset.train.size(),
             spec.rate_ceiling);

  // Targets whose true class already equals the adversarial label are
  // ineligible; a flipped prediction would be correct there.
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < dataset.target_pool.size(); ++i) {
    if (dataset.target_pool[i].true_class != spec.adv_class) {
      eligible.push_back(i);
    }
  }
  if (spec.num_targets > eligible.size()) {
    throw BadConfig("make_targeted_poisons: not enough held-out targets");
  }

  Rng rng(spec.seed);
  CaptionSet captions = build_caption_set(dataset.taxonomy, spec.adv_class,
                                          spec.captions_per_target, rng);
  PoisonSet out;
  out.spec = spec;
  std::uint64_t next_id = dataset.next_id;
  for (std::size_t t = 0; t < spec.num_targets; ++t) {
    const PairedExample& target = dataset.target_pool[eligible[t]];
    out.target_images.push_back(target.image);
    out.target_ids.push_back(target.id);
    out.target_true_classes.push_back(target.true_class);
    for (std::size_t c = 0; c < spec.captions_per_target; ++c) {
      PairedExample p;
      p.image = target.image;
      for (double& v : p.image) {
        v = std::clamp(v + rng.normal(0.0, spec.noise_sigma), 0.0, 1.0);
      }
      p.caption = captions.captions[c];
      p.true_class = target.true_class;
      p.provenance = Provenance::TargetedPoison;
      p.id = next_id++;
      out.poisons.push_back(std::move(p));
    }
  }
  return out;
}

PoisonSet make_backdoor_poisons(const Dataset& dataset, const AttackSpec& spec) {
  const bool label_consistent = spec.kind == AttackKind::BackdoorLabelConsistent;
  if (spec.kind != AttackKind::BackdoorPatch &&
      spec.kind != AttackKind::BackdoorBlended &&
      spec.kind != AttackKind::BackdoorWarp && !label_consistent) {
    throw BadConfig("make_backdoor_poisons: wrong attack kind");
  }
  check_rate(spec.num_poisons, dataset.train.size(), spec.rate_ceiling);

  Rng rng(spec.seed);
  const Taxonomy& tax = dataset.taxonomy;

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < dataset.train.size(); ++i) {
    const bool same = dataset.train[i].true_class == spec.adv_class;
    if (label_consistent ? same : !same) candidates.push_back(i);
  }
  if (candidates.empty()) {
    throw BadConfig("make_backdoor_poisons: no eligible source images");
  }
  rng.shuffle(candidates);
  // Large poison budgets can exceed the eligible population (e.g.
  // label-consistent attacks draw from a single class); cycle through
  // the shuffled sources with replacement in that case.
  const std::size_t unique = candidates.size();
  for (std::size_t i = unique; i < spec.num_poisons; ++i) {
    candidates.push_back(candidates[i % unique]);
  }
  candidates.resize(spec.num_poisons);

  CaptionSet captions;
  if (!label_consistent) {
    captions = build_caption_set(
        tax, spec.adv_class,
        std::min<std::size_t>(spec.captions_per_target, spec.num_poisons), rng);
  }

  PoisonSet out;
  out.spec = spec;
  std::uint64_t next_id = dataset.next_id;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const PairedExample& src = dataset.train[candidates[i]];
    PairedExample p;
    Image base = src.image;
    if (label_consistent) {
      // The caption stays honest, so the image's own class features
      // compete with the trigger. Blend toward noise to suppress them;
      // otherwise the trigger never becomes load-bearing.
      if (spec.feature_suppression < 0.0 || spec.feature_suppression > 1.0) {
        throw BadConfig("make_backdoor_poisons: feature_suppression outside [0, 1]");
      }
      const double s = spec.feature_suppression;
      for (double& v : base) v = (1.0 - s) * v + s * rng.uniform();
    }
    p.image = apply_trigger(base, tax.image_h, tax.image_w, spec.trigger,
                            spec.kind);
    p.caption = label_consistent
                    ? src.caption
                    : captions.captions[i % captions.captions.size()];
    p.true_class = src.true_class;
    p.provenance = Provenance::Backdoor;
    p.id = next_id++;
    out.poisons.push_back(std::move(p));
  }
  return out;
}

PoisonSet make_adaptive_pairs(
    const Dataset& dataset,
    const std::vector<std::pair<std::size_t, std::size_t>>& pair_list,
    std::size_t count_per_pair, const AttackSpec& spec) {
  const Taxonomy& tax = dataset.taxonomy;
  check_rate(pair_list.size() * count_per_pair, dataset.train.size(),
             spec.rate_ceiling);

  // Median pairwise prototype distance is the similarity bar.
  std::vector<double> dists;
  for (std::size_t a = 0; a < tax.num_classes(); ++a) {
    for (std::size_t b = a + 1; b < tax.num_classes(); ++b) {
      dists.push_back(proto_distance(tax.prototypes[a], tax.prototypes[b]));
    }
  }
  std::sort(dists.begin(), dists.end());
  const double median = dists[dists.size() / 2];

  Rng rng(spec.seed);
  PoisonSet out;
  out.spec = spec;
  std::uint64_t next_id = dataset.next_id;
  for (const auto& [class_a, class_b] : pair_list) {
    if (class_a >= tax.num_classes() || class_b >= tax.num_classes() ||
        class_a == class_b) {
      throw BadConfig("make_adaptive_pairs: bad class pair");
    }
    const double d =
        proto_distance(tax.prototypes[class_a], tax.prototypes[class_b]);
    if (d >= median) {
      throw NotSimilarEnough("make_adaptive_pairs: pair distance " +
                             std::to_string(d) + " >= median " +
                             std::to_string(median));
    }
    CaptionSet captions =
        build_caption_set(tax, class_b, count_per_pair, rng);
    for (std::size_t i = 0; i < count_per_pair; ++i) {
      PairedExample p = sample_example(tax, class_a, rng);
      p.caption = captions.captions[i];
      p.provenance = Provenance::Adaptive;
      p.id = next_id++;
      out.poisons.push_back(std::move(p));
    }
  }
  return out;
}

Dataset inject(const Dataset& dataset, const std::vector<PairedExample>& poisons,
               Rng& rng, double rate_ceiling) {
  check_rate(poisons.size(), dataset.train.size(), rate_ceiling);
  Dataset out = dataset;
  for (const PairedExample& p : poisons) {
    out.train.push_back(p);
    out.next_id = std::max(out.next_id, p.id + 1);
  }
  rng.shuffle(out.train);
  return out;
}

}  // namespace roclab
